#pragma once

// Stationary solution of the coupled algebraic Riccati equations, computed
// by value iteration on the finite-horizon recursion with zero terminal
// weights, and the stabilizability verdict built on it.

#include <optional>
#include <string_view>
#include <vector>

#include "stackelq/game_model.hpp"
#include "stackelq/riccati_finite.hpp"

namespace stackelq {

struct StationarySolution {
  Mat P1, P2, T;
  Mat K1, K2;
  StepMatrices aux;  // Gamma1, Gamma2, M1, M2, S, Upsilon, Y at the fixed point
  Mat Abar;          // Upsilon^{-1} M1 (A + B2 K2)
  int iterations = 0;
  double final_delta = 0.0;
};

enum class FailureReason {
  kNotConverged,
  kDiverged,
  kUpsilonSingular,
  kP1NotPD,
  kP2NotPD,
  kUnstableClosedLoop,
  kAssumptionViolated,
};

std::string_view to_string(FailureReason r);

struct StationaryOptions {
  double tol = 1e-11;
  int max_iters = 100000;
  double divergence_bound = 1e12;
  // Starting terminal matrices; zero when absent.
  std::optional<Mat> initial_P1;
  std::optional<Mat> initial_P2;
  // When set, x'P2x is recorded after every iteration.
  std::optional<Vec> probe;
};

struct StationaryOutcome {
  std::optional<StationarySolution> solution;
  std::optional<FailureReason> failure;  // kNotConverged, kDiverged or kUpsilonSingular
  int iterations = 0;
  double final_delta = 0.0;
  std::optional<int> failure_iteration;
  std::vector<double> probe_trace;

  bool converged() const { return solution.has_value(); }
};

// Iterates backward_step from (initial_P1, initial_P2, 0) until the max-abs
// change of P1, P2 and T drops below tol, then takes one confirmation step.
// H1/H2 of the game are ignored (the infinite-horizon problem has none).
StationaryOutcome solve_stationary(const ValidatedGame& game,
                                   const StationaryOptions& options = {});

struct Verdict {
  bool stabilizable = false;
  double p1_min_eig = std::numeric_limits<double>::quiet_NaN();
  double p2_min_eig = std::numeric_limits<double>::quiet_NaN();
  double upsilon_condition = std::numeric_limits<double>::quiet_NaN();
  double spectral_radius_closed_loop = std::numeric_limits<double>::quiet_NaN();
  AssumptionReport assumption_report;
  std::optional<FailureReason> failure_reason;
};

// Gates, in order: assumptions, convergence, Upsilon, P1 > 0, P2 > 0,
// rho(Abar) < 1. failure_reason is the first gate that failed; the numeric
// fields are filled whenever a solution exists.
Verdict stabilization_verdict(const ValidatedGame& game,
                              const StationaryOutcome& outcome);

// Infinite series for the follower's extra cost term, summed in matrix form
// until a term's max-abs norm falls below tol_series * (1 + |sum|).
// Throws kSeriesDivergent when rho(Abar) >= 1.
Mat xi_infinite(const StationarySolution& sol, const ValidatedGame& game,
                double tol_series = 1e-16);

double cost_follower_infinite(const StationarySolution& sol,
                              const ValidatedGame& game, const Vec& x0,
                              double tol_series = 1e-16);

double cost_leader_infinite(const StationarySolution& sol, const Vec& x0);

}  // namespace stackelq
