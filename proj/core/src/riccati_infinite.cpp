#include "stackelq/riccati_infinite.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "stackelq/error.hpp"

namespace stackelq {

std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::kNotConverged: return "NotConverged";
    case FailureReason::kDiverged: return "Diverged";
    case FailureReason::kUpsilonSingular: return "UpsilonSingular";
    case FailureReason::kP1NotPD: return "P1NotPD";
    case FailureReason::kP2NotPD: return "P2NotPD";
    case FailureReason::kUnstableClosedLoop: return "UnstableClosedLoop";
    case FailureReason::kAssumptionViolated: return "AssumptionViolated";
  }
  return "Unknown";
}

namespace {

double step_delta(const StepResult& r, const Mat& p1, const Mat& p2,
                  const Mat& t) {
  return std::max({max_abs(r.P1 - p1), max_abs(r.P2 - p2), max_abs(r.T - t)});
}

bool blew_up(const StepResult& r, double bound) {
  const double big = std::max({max_abs(r.P1), max_abs(r.P2), max_abs(r.T),
                               max_abs(r.K1), max_abs(r.K2)});
  return !std::isfinite(big) || big > bound;
}

}  // namespace

StationaryOutcome solve_stationary(const ValidatedGame& game,
                                   const StationaryOptions& options) {
  if (!(options.tol > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "tol must be positive");
  }
  const Eigen::Index n = game.n();
  Mat p1 = options.initial_P1.value_or(Mat::Zero(n, n));
  Mat p2 = options.initial_P2.value_or(Mat::Zero(n, n));
  Mat t = Mat::Zero(n, n);

  StationaryOutcome out;
  auto fail = [&](FailureReason why, int iteration, double delta) {
    out.failure = why;
    out.failure_iteration = iteration;
    out.iterations = iteration;
    out.final_delta = delta;
    return out;
  };

  double delta = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options.max_iters; ++it) {
    StepResult r;
    try {
      r = backward_step(p1, p2, t, game);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kUpsilonSingular) {
        return fail(FailureReason::kUpsilonSingular, it, delta);
      }
      // Gamma2 breakdown only happens once the iterates are garbage.
      return fail(FailureReason::kDiverged, it, delta);
    }
    if (blew_up(r, options.divergence_bound)) {
      return fail(FailureReason::kDiverged, it, delta);
    }
    delta = step_delta(r, p1, p2, t);
    p1 = std::move(r.P1);
    p2 = std::move(r.P2);
    t = std::move(r.T);
    if (options.probe) out.probe_trace.push_back(options.probe->dot(p2 * *options.probe));

    if (delta < options.tol) {
      // Confirmation step at the candidate fixed point; its coefficients are
      // the stationary ones.
      StepResult c;
      try {
        c = backward_step(p1, p2, t, game);
      } catch (const Error& e) {
        return fail(e.code() == ErrorCode::kUpsilonSingular
                        ? FailureReason::kUpsilonSingular
                        : FailureReason::kDiverged,
                    it + 1, delta);
      }
      const double confirm = step_delta(c, p1, p2, t);
      if (confirm >= options.tol) continue;  // T still drifting

      StationarySolution s;
      s.P1 = p1;
      s.P2 = p2;
      s.T = t;
      s.K1 = std::move(c.K1);
      s.K2 = std::move(c.K2);
      s.aux = std::move(c.aux);
      s.Abar = s.aux.UpsilonInvM1 * (game.A() + game.B2() * s.K2);
      s.iterations = it;
      s.final_delta = confirm;
      out.iterations = it;
      out.final_delta = confirm;
      out.solution = std::move(s);
      return out;
    }
  }
  return fail(FailureReason::kNotConverged, options.max_iters, delta);
}

Verdict stabilization_verdict(const ValidatedGame& game,
                              const StationaryOutcome& outcome) {
  Verdict v;
  v.assumption_report = check_assumptions(game);
  if (outcome.solution) {
    const auto& s = *outcome.solution;
    v.p1_min_eig = min_symmetric_eigenvalue(s.P1);
    v.p2_min_eig = min_symmetric_eigenvalue(s.P2);
    v.upsilon_condition = s.aux.upsilon_condition;
    v.spectral_radius_closed_loop = spectral_radius(s.Abar);
  }

  auto gate = [&]() -> std::optional<FailureReason> {
    if (!v.assumption_report.holds()) return FailureReason::kAssumptionViolated;
    if (!outcome.solution) return outcome.failure.value_or(FailureReason::kNotConverged);
    if (!(v.upsilon_condition < kUpsilonConditionMax)) return FailureReason::kUpsilonSingular;
    if (!(v.p1_min_eig > 0.0)) return FailureReason::kP1NotPD;
    if (!(v.p2_min_eig > 0.0)) return FailureReason::kP2NotPD;
    if (!(v.spectral_radius_closed_loop < 1.0)) return FailureReason::kUnstableClosedLoop;
    return std::nullopt;
  };
  v.failure_reason = gate();
  v.stabilizable = !v.failure_reason.has_value();
  return v;
}

Mat xi_infinite(const StationarySolution& sol, const ValidatedGame& game,
                double tol_series) {
  const double rho = spectral_radius(sol.Abar);
  if (!(rho < 1.0)) {
    throw Error(ErrorCode::kSeriesDivergent,
                "closed-loop spectral radius " + std::to_string(rho) + " >= 1");
  }
  const Eigen::Index n = game.n();
  const Mat& B1 = game.B1();
  const Mat& B2 = game.B2();
  const Mat& M1 = sol.aux.M1;
  const Mat& T = sol.T;
  const Mat& K2 = sol.K2;

  // Term k is  Ak' C0 Ak + Ak' C1 Ak+1 + Ak+1' C1' Ak - Ak+1' C2 Ak+1,
  // with Ak = Abar^k.
  const Mat c0 = K2.transpose() * (game.R12() + B2.transpose() * sol.P1 * M1 * B2) * K2;
  const Mat c1 = K2.transpose() * B2.transpose() * M1.transpose() * T;
  const Mat c2 = T.transpose() * B1 * sol.aux.Gamma1.llt().solve(B1.transpose()) * T;

  Mat xi = Mat::Zero(n, n);
  Mat ak = Mat::Identity(n, n);
  Mat ak1 = sol.Abar;
  // rho < 1 bounds the number of useful terms; the cap only guards against
  // pathological transients.
  constexpr int kMaxTerms = 10'000'000;
  for (int k = 0; k < kMaxTerms; ++k) {
    const Mat term = ak.transpose() * c0 * ak + ak.transpose() * c1 * ak1 +
                     ak1.transpose() * c1.transpose() * ak -
                     ak1.transpose() * c2 * ak1;
    xi += term;
    if (max_abs(term) < tol_series * (1.0 + max_abs(xi)) &&
        max_abs(ak1) < 1.0) {
      return xi;
    }
    ak = ak1;
    ak1 = sol.Abar * ak1;
  }
  throw Error(ErrorCode::kSeriesDivergent, "series did not settle");
}

double cost_follower_infinite(const StationarySolution& sol,
                              const ValidatedGame& game, const Vec& x0,
                              double tol_series) {
  const Mat xi = xi_infinite(sol, game, tol_series);
  return x0.dot((sol.P1 + sol.T + sol.T.transpose() + xi) * x0);
}

double cost_leader_infinite(const StationarySolution& sol, const Vec& x0) {
  return x0.dot(sol.P2 * x0);
}

}  // namespace stackelq
