#include "stackelq/simulator.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <sstream>

#include "stackelq/error.hpp"

namespace stackelq {

GainSchedule::GainSchedule(std::vector<Mat> k1, std::vector<Mat> k2,
                           bool stationary)
    : k1_(std::move(k1)), k2_(std::move(k2)), stationary_(stationary) {
  if (k1_.size() != k2_.size() || k1_.empty()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "gain schedule needs equally many K1 and K2 entries");
  }
}

GainSchedule GainSchedule::stationary(Mat k1, Mat k2) {
  return GainSchedule({std::move(k1)}, {std::move(k2)}, true);
}

GainSchedule GainSchedule::time_varying(std::vector<Mat> k1,
                                        std::vector<Mat> k2) {
  return GainSchedule(std::move(k1), std::move(k2), false);
}

GainSchedule GainSchedule::from(const FiniteSolution& sol) {
  return time_varying(sol.K1, sol.K2);
}

GainSchedule GainSchedule::from(const StationarySolution& sol) {
  return stationary(sol.K1, sol.K2);
}

const Mat& GainSchedule::k1(int k) const {
  return stationary_ ? k1_.front() : k1_.at(static_cast<std::size_t>(k));
}

const Mat& GainSchedule::k2(int k) const {
  return stationary_ ? k2_.front() : k2_.at(static_cast<std::size_t>(k));
}

int GainSchedule::length() const {
  return stationary_ ? std::numeric_limits<int>::max()
                     : static_cast<int>(k1_.size());
}

double follower_stage_cost(const ValidatedGame& game, const Vec& x,
                           const Vec& u1, const Vec& u2) {
  return x.dot(game.Q1() * x) + u1.dot(game.R11() * u1) + u2.dot(game.R12() * u2);
}

double leader_stage_cost(const ValidatedGame& game, const Vec& x,
                         const Vec& u1, const Vec& u2) {
  return x.dot(game.Q2() * x) + u1.dot(game.R21() * u1) + u2.dot(game.R22() * u2);
}

Trajectory rollout(const ValidatedGame& game, const GainSchedule& gains,
                   const Vec& x0, int steps, const LyapunovWeights& weights) {
  if (steps < 1) throw Error(ErrorCode::kInvalidInput, "steps must be >= 1");
  if (x0.size() != game.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "x0 length does not match A");
  }
  if (steps > gains.length()) {
    throw Error(ErrorCode::kInvalidInput,
                "gain schedule covers " + std::to_string(gains.length()) +
                    " steps, " + std::to_string(steps) + " requested");
  }
  for (int k = 0; k < std::min(steps, gains.is_stationary() ? 1 : steps); ++k) {
    if (gains.k1(k).rows() != game.m1() || gains.k1(k).cols() != game.n() ||
        gains.k2(k).rows() != game.m2() || gains.k2(k).cols() != game.n()) {
      throw Error(ErrorCode::kDimensionMismatch, "gain shape mismatch", k);
    }
  }
  const auto& w = weights.P2;
  if (!w.empty() && w.size() != 1 && w.size() < static_cast<std::size_t>(steps) + 1) {
    throw Error(ErrorCode::kInvalidInput, "need one Lyapunov weight per state");
  }
  auto weight = [&](int k) -> const Mat& {
    return w.size() == 1 ? w.front() : w[static_cast<std::size_t>(k)];
  };

  Trajectory t;
  t.states.reserve(static_cast<std::size_t>(steps) + 1);
  t.u1.reserve(static_cast<std::size_t>(steps));
  t.u2.reserve(static_cast<std::size_t>(steps));
  t.running_J1.assign(1, 0.0);
  t.running_J2.assign(1, 0.0);
  t.states.push_back(x0);
  if (!w.empty()) t.lyapunov_values.push_back(x0.dot(weight(0) * x0));

  for (int k = 0; k < steps; ++k) {
    const Vec& x = t.states.back();
    Vec u1 = gains.k1(k) * x;
    Vec u2 = gains.k2(k) * x;
    Vec next = game.A() * x + game.B1() * u1 + game.B2() * u2;
    const double stage1 = follower_stage_cost(game, x, u1, u2);
    const double stage2 = leader_stage_cost(game, x, u1, u2);
    t.running_J1.push_back(t.running_J1.back() + stage1);
    t.running_J2.push_back(t.running_J2.back() + stage2);
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kStateOverflowBound) {
      throw Error(ErrorCode::kStateOverflow, "state magnitude exceeded 1e12", k + 1);
    }
    if (!w.empty()) {
      const double v_next = next.dot(weight(k + 1) * next);
      if (w.size() == 1) {
        t.residuals.lyapunov_decrements.push_back(
            std::abs((t.lyapunov_values.back() - v_next) - stage2));
      }
      t.lyapunov_values.push_back(v_next);
    }
    t.u1.push_back(std::move(u1));
    t.u2.push_back(std::move(u2));
    t.states.push_back(std::move(next));
  }
  return t;
}

double total_follower_cost(const Trajectory& traj, const ValidatedGame& game) {
  const Vec& x = traj.states.back();
  return traj.running_J1.back() + x.dot(game.H1() * x);
}

double total_leader_cost(const Trajectory& traj, const ValidatedGame& game) {
  const Vec& x = traj.states.back();
  return traj.running_J2.back() + x.dot(game.H2() * x);
}

CostateReconstruction reconstruct_costates(const Trajectory& traj,
                                           const FiniteSolution& sol,
                                           const ValidatedGame& game) {
  const int N = sol.horizon;
  if (traj.steps() != N + 1) {
    throw Error(ErrorCode::kInvalidInput,
                "costate reconstruction needs a trajectory of N+1 steps");
  }
  const Mat& A = game.A();
  const auto idx = [](int k) { return static_cast<std::size_t>(k); };

  CostateReconstruction c;
  c.zeta.assign(idx(N + 2), Vec::Zero(game.n()));
  c.lambda.assign(idx(N + 2), Vec::Zero(game.n()));
  // zeta_N = 0; zeta_{k-1} = A'M1' zeta_k + A'M1'P1_{k+1} B2 u2_k.
  for (int k = N; k >= 0; --k) {
    const Mat at_m1t = A.transpose() * sol.steps[idx(k)].M1.transpose();
    c.zeta[idx(k)] = at_m1t * c.zeta[idx(k + 1)] +
                     at_m1t * sol.P1[idx(k + 1)] * game.B2() * traj.u2[idx(k)];
  }
  for (int k = -1; k <= N; ++k) {
    c.lambda[idx(k + 1)] = sol.P1[idx(k + 1)] * traj.states[idx(k + 1)] + c.zeta[idx(k + 1)];
  }
  for (int k = 0; k <= N; ++k) {
    const Vec& x = traj.states[idx(k)];
    c.residuals.costate_residuals.push_back(
        (c.lambda_at(k - 1) - A.transpose() * c.lambda_at(k) - game.Q1() * x)
            .cwiseAbs()
            .maxCoeff());
    c.residuals.fbde_zeta_residuals.push_back(
        (c.zeta_at(k - 1) - sol.T[idx(k)] * x).cwiseAbs().maxCoeff());
    c.stationarity_residuals.push_back(
        (game.R11() * traj.u1[idx(k)] + game.B1().transpose() * c.lambda_at(k))
            .cwiseAbs()
            .maxCoeff());
  }
  return c;
}

LyapunovCheck lyapunov_check(const Trajectory& traj, const Mat& p2,
                             const ValidatedGame& game) {
  LyapunovCheck out;
  out.min_decrement = std::numeric_limits<double>::infinity();
  for (int k = 0; k < traj.steps(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Vec& x = traj.states[i];
    const Vec& xn = traj.states[i + 1];
    const double dec = x.dot(p2 * x) - xn.dot(p2 * xn);
    const double stage = leader_stage_cost(game, x, traj.u1[i], traj.u2[i]);
    out.decrements.push_back(dec);
    out.decrement_sum += dec;
    out.max_residual = std::max(out.max_residual, std::abs(dec - stage));
    out.min_decrement = std::min(out.min_decrement, dec);
    if (dec < -1e-9) out.nonincreasing = false;
  }
  if (out.decrements.empty()) out.min_decrement = 0.0;
  return out;
}

FollowerIdentity follower_lyapunov_identity(const Trajectory& traj,
                                            const StationarySolution& sol,
                                            const ValidatedGame& game) {
  const Mat& A = game.A();
  const Mat& B1 = game.B1();
  const Mat& B2 = game.B2();
  const Mat& P1 = sol.P1;
  const Mat& T = sol.T;
  const Mat& M1 = sol.aux.M1;
  Eigen::LLT<Mat> g1(sol.aux.Gamma1);

  // zeta_{k-1} = T x_k
  auto v = [&](const Vec& x) { return x.dot(P1 * x) + 2.0 * x.dot(T * x); };

  FollowerIdentity out;
  double rhs = v(traj.states.front()) - v(traj.states.back());
  for (int k = 0; k < traj.steps(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Vec& x = traj.states[i];
    const Vec& u1 = traj.u1[i];
    const Vec& u2 = traj.u2[i];
    const Vec zeta = T * traj.states[i + 1];
    out.accumulated_cost += follower_stage_cost(game, x, u1, u2);

    const Vec gap = u1 + g1.solve(B1.transpose() * (P1 * A * x + P1 * B2 * u2 + zeta));
    rhs += gap.dot(sol.aux.Gamma1 * gap);
    rhs += u2.dot((game.R12() + B2.transpose() * P1 * M1 * B2) * u2);
    rhs += 2.0 * u2.dot(B2.transpose() * M1.transpose() * zeta);
    rhs -= zeta.dot(B1 * g1.solve(B1.transpose() * zeta));
  }
  out.reconstructed = rhs;
  out.relative_residual = std::abs(out.accumulated_cost - rhs) /
                          std::max(std::abs(out.accumulated_cost), 1e-300);
  return out;
}

double closed_loop_gap(const StationarySolution& sol, const ValidatedGame& game) {
  return max_abs(game.A() + game.B1() * sol.K1 + game.B2() * sol.K2 - sol.Abar);
}

}  // namespace stackelq
