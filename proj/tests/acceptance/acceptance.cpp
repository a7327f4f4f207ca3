// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "stackelq/game_model.hpp"
#include "stackelq/oracle.hpp"
#include "stackelq/riccati_finite.hpp"
#include "stackelq/riccati_infinite.hpp"
#include "stackelq/simulator.hpp"
#include "test_support.hpp"

namespace {

using namespace stackelq;

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> notes;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

ValidatedGame random_validated(std::mt19937_64& rng, int n, bool leader_input = true,
                               bool terminal = false) {
  RandomGameOptions opt;
  opt.n = n;
  opt.leader_input = leader_input;
  opt.terminal_weights = terminal;
  return validated(random_game(rng, opt));
}

Outcome golden_regression() {
  const auto g = validated(testing::scalar_spec());
  const auto s = *solve_stationary(g).solution;
  const struct {
    const char* name;
    double value, printed;
  } rows[] = {
      {"Upsilon", s.aux.Upsilon(0, 0), 0.9965}, {"P1", s.P1(0, 0), 1.1325},
      {"P2", s.P2(0, 0), 1.2044},               {"K1", s.K1(0, 0), -0.4268},
      {"K2", s.K2(0, 0), -0.0330},
  };
  Outcome o;
  double worst = 0.0;
  for (const auto& r : rows) {
    const double d = std::abs(r.value - r.printed);
    worst = std::max(worst, d);
    if (d > 5e-4) o.pass = false;
    o.notes.push_back(fmt("%-8s %.6f (printed %.4f)", r.name, r.value, r.printed));
  }
  o.detail = fmt("max deviation %.2e <= 5e-4", worst);
  return o;
}

Outcome analytic_p1() {
  const auto g = validated(testing::scalar_spec());
  const auto s = *solve_stationary(g).solution;
  const double root = (4.0 + std::sqrt(25.6)) / 8.0;
  const double d = std::abs(s.P1(0, 0) - root);
  return {d <= 1e-9, fmt("|P1 - (4+sqrt(25.6))/8| = %.2e <= 1e-9", d), {}};
}

Outcome closed_loop_stability() {
  const auto g = validated(testing::scalar_spec());
  const auto s = *solve_stationary(g).solution;
  const double rho = spectral_radius(g.A() + g.B1() * s.K1 + g.B2() * s.K2);
  const auto traj = rollout(g, GainSchedule::from(s), g.x0(), 30);
  const double x30 = std::abs(traj.states.back()(0));
  return {std::abs(rho - 0.1134) <= 2e-3 && x30 < 1e-20,
          fmt("rho = %.6f (0.1134 +- 2e-3), |x_30| = %.2e < 1e-20", rho, x30), {}};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<int> dim(1, 3), horizon(1, 8);
  double worst_traj = 0.0, worst_j1 = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto g = random_validated(rng, dim(rng), true, i % 2 == 0);
    const int N = horizon(rng);
    const auto sol = solve_finite(g, N);
    const auto traj = rollout(g, GainSchedule::from(sol), g.x0(), N + 1);
    const auto br = follower_best_response(g, traj.u2, g.x0(), N);
    for (std::size_t k = 0; k < br.u1.size(); ++k) {
      worst_traj = std::max(worst_traj, max_abs(br.u1[k] - traj.u1[k]));
    }
    for (std::size_t k = 0; k < br.states.size(); ++k) {
      worst_traj = std::max(worst_traj, max_abs(br.states[k] - traj.states[k]));
    }
    worst_j1 = std::max(worst_j1, rel(cost_follower_finite(sol, g, g.x0()), br.J1));
  }
  return {worst_traj < 1e-7 && worst_j1 < 1e-7,
          fmt("50 instances: max trajectory gap %.2e < 1e-7, max J1 rel err %.2e < 1e-7",
              worst_traj, worst_j1),
          {}};
}

Outcome completion_of_squares() {
  std::mt19937_64 rng(1002);
  std::uniform_int_distribution<int> dim(1, 3), horizon(2, 8);
  double worst_residual = 0.0, worst_gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 20; ++i) {
    const auto g = random_validated(rng, dim(rng), true, i % 2 == 0);
    const auto sol = solve_finite(g, horizon(rng));
    for (int j = 0; j < 5; ++j) {
      std::vector<Mat> alt;
      for (const auto& k : sol.K2) {
        alt.push_back(k + 0.5 * testing::random_matrix(rng, static_cast<int>(k.rows()),
                                                       static_cast<int>(k.cols())));
      }
      const auto c = completion_of_squares_audit(g, sol, alt, g.x0());
      worst_residual = std::max(worst_residual, c.relative_residual);
      worst_gap = std::min(worst_gap, c.J2_alt - c.J2_optimal);
    }
  }
  return {worst_residual < 1e-8 && worst_gap >= -1e-9,
          fmt("100 cases: max relative residual %.2e < 1e-8, min J2(alt)-J2(opt) %.3e >= -1e-9",
              worst_residual, worst_gap),
          {}};
}

Outcome lyapunov_suite() {
  std::vector<ValidatedGame> games;
  games.push_back(validated(testing::scalar_spec()));
  std::mt19937_64 rng(1003);
  for (int i = 0; i < 40; ++i) {
    auto g = random_validated(rng, 1 + i % 3);
    if (stabilization_verdict(g, solve_stationary(g)).stabilizable) games.push_back(std::move(g));
  }

  double worst_residual = 0.0;
  int increasing = 0, non_monotone = 0;
  double worst_drop = 0.0;
  bool scalar_monotone = true;
  for (std::size_t i = 0; i < games.size(); ++i) {
    const auto& g = games[i];
    const auto s = *solve_stationary(g).solution;
    const auto traj = rollout(g, GainSchedule::from(s), g.x0(), 60);
    const auto check = lyapunov_check(traj, s.P2, g);
    const double v0 = g.x0().dot(s.P2 * g.x0());
    worst_residual = std::max(worst_residual, check.max_residual / (1.0 + v0));
    if (!check.nonincreasing) ++increasing;

    // P2_0(N) for N = 1..30 from one backward sweep of the longest horizon.
    const auto sol = solve_finite(g, 30);
    bool monotone = true;
    double prev = -std::numeric_limits<double>::infinity();
    for (int N = 1; N <= 30; ++N) {
      const auto idx = static_cast<std::size_t>(30 - N);
      const double v = g.x0().dot(sol.P2[idx] * g.x0());
      if (v < prev - 1e-12 * (1.0 + std::abs(prev))) {
        monotone = false;
        worst_drop = std::max(worst_drop, (prev - v) / std::max(1e-300, std::abs(prev)));
      }
      prev = v;
    }
    if (!monotone) ++non_monotone;
    if (i == 0) scalar_monotone = monotone;
  }

  Outcome o;
  const bool decrements_ok = worst_residual < 1e-8 && increasing == 0;
  o.pass = decrements_ok && non_monotone == 0;
  o.detail = fmt("%zu stabilizable instances", games.size());
  o.notes.push_back(fmt("decrement residual max %.2e < 1e-8, nonincreasing violations %d: %s",
                        worst_residual, increasing, decrements_ok ? "PASS" : "FAIL"));
  o.notes.push_back(fmt("x0'P2_0(N)x0 nondecreasing in N=1..30: %d/%zu instances violate "
                        "(max relative drop %.2e); scalar instance %s",
                        non_monotone, games.size(), worst_drop,
                        scalar_monotone ? "monotone" : "not monotone"));
  return o;
}

Outcome leader_audit() {
  std::vector<ValidatedGame> games;
  games.push_back(validated(testing::scalar_spec()));
  std::mt19937_64 rng(1004);
  for (int i = 0; i < 10; ++i) games.push_back(random_validated(rng, 1 + i % 3));

  Outcome o;
  int failing = 0, reaction_failing = 0;
  double worst_ratio = 0.0;
  for (std::size_t i = 0; i < games.size(); ++i) {
    const auto& g = games[i];
    const auto sol = solve_finite(g, 10);
    VerificationOptions opt;
    opt.seed = i;
    const auto rep = verify_stackelberg_point(g, sol, g.x0(), opt);
    if (!rep.leader_ok) ++failing;
    worst_ratio = std::max(worst_ratio, -rep.worst_delta_J2 / rep.allowed_drop);
    if (i == 0) {
      o.notes.push_back(fmt("scalar instance: worst dJ2 %.3e, allowed drop %.3e: %s",
                            rep.worst_delta_J2, rep.allowed_drop,
                            rep.leader_ok ? "PASS" : "FAIL"));
    }
    opt.response = FollowerResponse::kReactionMap;
    if (!verify_stackelberg_point(g, sol, g.x0(), opt).leader_ok) ++reaction_failing;
  }
  o.pass = failing == 0;
  o.detail = fmt("%d/%zu instances exceed the allowed drop (worst drop %.1fx allowed)", failing,
                 games.size(), worst_ratio);
  o.notes.push_back(fmt("diagnostic, follower held on its reaction map: %d/%zu instances fail",
                        reaction_failing, games.size()));
  return o;
}

Outcome degenerate_reductions() {
  std::mt19937_64 rng(1005);
  double worst_gain = 0.0, worst_p1 = 0.0, worst_zero = 0.0;
  int cases = 0;
  for (int i = 0; i < 20; ++i) {
    auto g = random_validated(rng, 1 + i % 3, false);
    const auto out = solve_stationary(g);
    if (!out.solution) continue;
    ++cases;
    const auto& s = *out.solution;
    const Mat x = testing::dare_value_iteration(g.A(), g.B1(), g.Q1(), g.R11());
    const Mat k = testing::lqr_gain(g.A(), g.B1(), g.R11(), x);
    worst_gain = std::max(worst_gain, max_abs(s.K1 - k) / (1.0 + max_abs(k)));
    worst_p1 = std::max(worst_p1, max_abs(s.P1 - x) / (1.0 + max_abs(x)));
    worst_zero = std::max({worst_zero, max_abs(s.K2), max_abs(s.T)});
    const auto fin = solve_finite(g, 8);
    for (const auto& m : fin.K2) worst_zero = std::max(worst_zero, max_abs(m));
    for (const auto& m : fin.T) worst_zero = std::max(worst_zero, max_abs(m));
  }
  return {cases > 0 && worst_gain < 1e-9 && worst_p1 < 1e-9 && worst_zero == 0.0,
          fmt("%d instances: K1 err %.2e, P1 err %.2e < 1e-9; max |K2|,|T| = %.1e", cases,
              worst_gain, worst_p1, worst_zero),
          {}};
}

}  // namespace

int main() {
  const struct {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  } criteria[] = {
      {1, "golden regression", 1.0, golden_regression},
      {2, "analytic P1", 1.0, analytic_p1},
      {3, "closed-loop stability", 1.0, closed_loop_stability},
      {4, "oracle equivalence", 30.0, oracle_equivalence},
      {5, "completion of squares", 10.0, completion_of_squares},
      {6, "Lyapunov suite", 10.0, lyapunov_suite},
      {7, "leader perturbation audit", 20.0, leader_audit},
      {8, "degenerate reductions", 5.0, degenerate_reductions},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what(), {}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("Criterion %d (%s): %s  %s  [%.3fs < %.0fs%s]\n", c.id, c.name,
                pass ? "PASS" : "FAIL", o.detail.c_str(), secs, c.budget_s,
                in_time ? "" : " EXCEEDED");
    for (const auto& n : o.notes) std::printf("    %s\n", n.c_str());
  }
  std::printf("%d/8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
