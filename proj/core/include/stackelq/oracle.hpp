#pragma once

// Brute-force checks of Stackelberg optimality on small instances. Nothing
// here uses the Riccati recursion to produce its answer: the follower's
// problem is written out as one quadratic in the stacked control sequence
// and solved directly.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "stackelq/error.hpp"
#include "stackelq/game_model.hpp"
#include "stackelq/riccati_finite.hpp"
#include "stackelq/riccati_infinite.hpp"

namespace stackelq {

// Upper bound on (N+1) * m1 for the stacked follower problem.
inline constexpr int kStackedLimit = 2000;

// J1 as a quadratic in the stacked follower controls u1 = (u1_0, ..., u1_N)
// with the leader sequence held fixed:  J1 = u'Hu + 2 g'u + constant.
struct StackedLQ {
  int horizon = 0;
  Mat H;
  Vec g;
  double constant = 0.0;
  Vec solution_u1;
};

struct BestResponse {
  StackedLQ problem;
  std::vector<Vec> u1;      // N+1 entries
  std::vector<Vec> states;  // x_0 .. x_{N+1}
  double J1 = 0.0;          // includes x_{N+1}' H1 x_{N+1}
  double J2 = 0.0;          // leader cost of the same run, for reference
};

// Follower's optimal open-loop reply to a fixed leader sequence u2 (N+1
// entries). Throws kHessianNotPD or kInvalidInput past the size guard.
BestResponse follower_best_response(const ValidatedGame& game,
                                    std::span<const Vec> u2, const Vec& x0,
                                    int horizon);

// Outcome of the game when the leader plays u2_k = K2_k x_k and the
// follower optimizes J1 treating u2 as data: the fixed point of
// u1 = BR(u2(u1)), obtained from one joint linear solve.
struct ClosedLoopResponse {
  std::vector<Vec> u1, u2;
  std::vector<Vec> states;
  double J1 = 0.0;
  double J2 = 0.0;
};

ClosedLoopResponse consistent_follower_response(const ValidatedGame& game,
                                                std::span<const Mat> k2,
                                                const Vec& x0, int horizon);

// How the follower reacts to a perturbed leader gain sequence.
enum class FollowerResponse {
  // Re-optimizes against the perturbed loop (consistent_follower_response).
  kReoptimize,
  // Keeps the equilibrium reaction u1_k = -Y_{k+1}(A x_k + B2 u2_k).
  kReactionMap,
};

std::string_view to_string(FollowerResponse r);

struct VerificationOptions {
  int n_perturb = 50;
  double eps = 1e-3;
  std::uint64_t seed = 0;
  FollowerResponse response = FollowerResponse::kReoptimize;
  double fixed_point_tol = 1e-7;
  double cost_tol = 1e-7;
  // Allowed J2 drop is curvature_factor * max_k |Gamma2_{k+1}|_2 * eps^2.
  double curvature_factor = 10.0;
};

struct VerificationReport {
  // (a) replaying u2* open loop reproduces the Riccati trajectory
  double u1_mismatch = 0.0;
  double state_mismatch = 0.0;
  bool fixed_point_ok = false;
  // Riccati cost formulas against the stacked solve
  double J1_riccati = 0.0, J1_oracle = 0.0, J1_relative_error = 0.0;
  double J2_riccati = 0.0, J2_oracle = 0.0, J2_relative_error = 0.0;
  bool costs_ok = false;
  // (b) leader perturbation audit
  FollowerResponse response = FollowerResponse::kReoptimize;
  double J2_nominal = 0.0;
  double gamma2_norm = 0.0;
  double allowed_drop = 0.0;
  std::vector<double> delta_J2;  // J2(perturbed) - J2_nominal per direction
  double worst_delta_J2 = 0.0;
  int worst_direction = -1;
  int violations = 0;
  bool leader_ok = false;
  // First failing check, in the order above.
  std::optional<ErrorCode> failure;

  bool passed() const { return !failure.has_value(); }
};

VerificationReport verify_stackelberg_point(const ValidatedGame& game,
                                            const FiniteSolution& sol,
                                            const Vec& x0,
                                            const VerificationOptions& options = {});

struct CompletionOfSquares {
  double lhs = 0.0;  // J2(alt) - x0'P2_0 x0 (terminal weight P2_{N+1})
  double rhs = 0.0;  // sum r_k' Gamma2 r_k, r_k = u2_k + Gamma2^{-1} M2 x_k
  double residual = 0.0;
  double relative_residual = 0.0;  // residual / (1 + |lhs|)
  double J2_alt = 0.0;
  double J2_optimal = 0.0;
};

// The follower plays u1_k = -Y_{k+1}(A x_k + B2 u2_k) with the solution's
// Y while the leader plays u2_k = alt_k x_k.
CompletionOfSquares completion_of_squares_audit(const ValidatedGame& game,
                                                const FiniteSolution& sol,
                                                std::span<const Mat> alt_k2,
                                                const Vec& x0);

// Stationary version over `steps` steps, with x_K' P2 x_K as terminal term.
CompletionOfSquares completion_of_squares_audit(const ValidatedGame& game,
                                                const StationarySolution& sol,
                                                const Mat& alt_k2,
                                                const Vec& x0, int steps);

struct RandomGameOptions {
  int n = 2;
  int m1 = 1;
  int m2 = 1;
  double rho_min = 0.5;   // spectral radius of A drawn from [rho_min, rho_max]
  double rho_max = 1.5;
  bool terminal_weights = false;  // random PSD H1, H2 instead of zero
  bool leader_input = true;       // false gives B2 = 0
};

// Random well-posed instance: PD weights, B with unit-norm-scaled columns,
// x0 standard normal.
GameSpec random_game(std::mt19937_64& rng, const RandomGameOptions& options);

}  // namespace stackelq
