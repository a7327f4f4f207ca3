#pragma once

// Closed-loop rollout of x_{k+1} = A x_k + B1 u1_k + B2 u2_k under linear
// feedback, with exact per-step cost accumulation and the residual checks
// that tie a trajectory back to the Riccati solution.

#include <vector>

#include "stackelq/game_model.hpp"
#include "stackelq/riccati_finite.hpp"
#include "stackelq/riccati_infinite.hpp"

namespace stackelq {

inline constexpr double kStateOverflowBound = 1e12;

// Either one (K1, K2) pair used at every step or a time-indexed sequence.
class GainSchedule {
 public:
  static GainSchedule stationary(Mat k1, Mat k2);
  static GainSchedule time_varying(std::vector<Mat> k1, std::vector<Mat> k2);
  static GainSchedule from(const FiniteSolution& sol);
  static GainSchedule from(const StationarySolution& sol);

  const Mat& k1(int k) const;
  const Mat& k2(int k) const;
  bool is_stationary() const { return k1_.size() == 1 && stationary_; }
  // Number of steps the schedule covers (unbounded when stationary).
  int length() const;

 private:
  GainSchedule(std::vector<Mat> k1, std::vector<Mat> k2, bool stationary);

  std::vector<Mat> k1_, k2_;
  bool stationary_;
};

struct DiagnosticBundle {
  std::vector<double> fbde_zeta_residuals;   // |zeta_{k-1} - T_k x_k|
  std::vector<double> costate_residuals;     // |lambda_{k-1} - A' lambda_k - Q1 x_k|
  std::vector<double> lyapunov_decrements;   // (V_k - V_{k+1}) - leader stage cost
  double closed_loop_gap = 0.0;              // |(A + B1K1 + B2K2) - Abar|
};

struct Trajectory {
  std::vector<Vec> states;     // x_0 .. x_K
  std::vector<Vec> u1, u2;     // K entries
  // Prefix sums of the stage costs: running_J*[k] = sum_{j<k} stage_j, so
  // both arrays have K+1 entries and running_J*[0] = 0.
  std::vector<double> running_J1, running_J2;
  // x_k' P2 x_k for each state, when weights were supplied.
  std::vector<double> lyapunov_values;
  DiagnosticBundle residuals;

  int steps() const { return static_cast<int>(u1.size()); }
};

// Optional weights for Trajectory::lyapunov_values: a single matrix used for
// every state, or one per state (at least K+1 entries).
struct LyapunovWeights {
  std::vector<Mat> P2;
};

// Throws Error(kStateOverflow, index = k) as soon as |x_k|_inf > 1e12.
Trajectory rollout(const ValidatedGame& game, const GainSchedule& gains,
                   const Vec& x0, int steps,
                   const LyapunovWeights& weights = {});

// Stage costs as written in J1 / J2.
double follower_stage_cost(const ValidatedGame& game, const Vec& x,
                           const Vec& u1, const Vec& u2);
double leader_stage_cost(const ValidatedGame& game, const Vec& x,
                         const Vec& u1, const Vec& u2);

// Accumulated cost including the terminal weight on the last state.
double total_follower_cost(const Trajectory& traj, const ValidatedGame& game);
double total_leader_cost(const Trajectory& traj, const ValidatedGame& game);

// Costates of the follower's maximum principle, stored with a one-slot
// offset: zeta[k + 1] holds zeta_k for k = -1..N, same for lambda.
struct CostateReconstruction {
  std::vector<Vec> zeta;
  std::vector<Vec> lambda;
  DiagnosticBundle residuals;
  // |R11 u1_k + B1' lambda_k|, the follower's stationarity condition.
  std::vector<double> stationarity_residuals;

  const Vec& zeta_at(int k) const { return zeta[static_cast<std::size_t>(k + 1)]; }
  const Vec& lambda_at(int k) const { return lambda[static_cast<std::size_t>(k + 1)]; }
};

// zeta backward from zeta_N = 0 with the forcing term from u2; lambda_k =
// P1_{k+1} x_{k+1} + zeta_k. Needs a trajectory of exactly N+1 steps.
CostateReconstruction reconstruct_costates(const Trajectory& traj,
                                           const FiniteSolution& sol,
                                           const ValidatedGame& game);

struct LyapunovCheck {
  double max_residual = 0.0;        // max |(V_k - V_{k+1}) - stage2_k|
  double min_decrement = 0.0;       // min (V_k - V_{k+1})
  double decrement_sum = 0.0;       // sum of decrements
  std::vector<double> decrements;
  bool nonincreasing = true;        // every decrement >= -1e-9
};

// V_k = x_k' P2 x_k along a trajectory generated by the stationary gains.
LyapunovCheck lyapunov_check(const Trajectory& traj, const Mat& p2,
                             const ValidatedGame& game);

struct FollowerIdentity {
  double accumulated_cost = 0.0;  // sum of follower stage costs
  double reconstructed = 0.0;     // V_0 - V_K + squares + corrections
  double relative_residual = 0.0;
};

// Follower Lyapunov identity with V_k = x_k'P1x_k + 2 x_k' zeta_{k-1} and
// zeta_{k-1} = T x_k; holds along any stationary closed-loop run.
FollowerIdentity follower_lyapunov_identity(const Trajectory& traj,
                                            const StationarySolution& sol,
                                            const ValidatedGame& game);

// max-abs difference between A + B1 K1 + B2 K2 and Abar.
double closed_loop_gap(const StationarySolution& sol, const ValidatedGame& game);

}  // namespace stackelq
