#pragma once

// Finite-horizon open-loop Stackelberg strategy via the coupled backward
// recursion for (P1_k, P2_k, T_k).
//
// Indexing: entry k of FiniteSolution::steps holds the matrices subscripted
// k+1 (Gamma1_{k+1}, M1_{k+1}, ..., Y_{k+1}), i.e. the ones used to form
// the gains K1_k, K2_k applied at time k.

#include <vector>

#include "stackelq/game_model.hpp"
#include "stackelq/linalg.hpp"

namespace stackelq {

// Above this condition number, (1 + |B1 Gamma1^{-1} B1' T|) / sigma_min(Upsilon),
// Upsilon is treated as singular.
inline constexpr double kUpsilonConditionMax = 1e12;

struct StepMatrices {
  Mat Gamma1;   // m1 x m1: R11 + B1' P1 B1
  Mat Gamma2;   // m2 x m2
  Mat M1;       // n x n:   I - B1 Gamma1^{-1} B1' P1
  Mat M2;       // m2 x n
  Mat S;        // m1 x n:  Gamma1^{-1} B1' P1
  Mat Upsilon;  // n x n:   I + B1 Gamma1^{-1} B1' T
  Mat Y;        // m1 x n
  // Upsilon^{-1} M1, the follower-closed map applied to (A + B2 K2).
  Mat UpsilonInvM1;
  double upsilon_condition = 1.0;
};

struct StepResult {
  Mat P1, P2, T;
  Mat K1, K2;
  StepMatrices aux;
};

// The step coefficients that depend only on (P1_next, P2_next, T_next):
// Gamma1, M1, S, Upsilon, Y, Gamma2, M2. Throws kUpsilonSingular or
// kGamma2NotPD.
StepMatrices step_matrices(const Mat& p1_next, const Mat& p2_next,
                           const Mat& t_next, const ValidatedGame& game);

// One backward step. Evaluation order: Gamma1, M1, S, Upsilon, Y, Gamma2,
// M2, K2, K1, T, P1, P2. P1 and P2 are returned symmetrized.
StepResult backward_step(const Mat& p1_next, const Mat& p2_next,
                         const Mat& t_next, const ValidatedGame& game);

// Completes a step given already-computed coefficients. Exposed so the
// stationary solver and the file loader can reuse it.
StepResult finish_step(StepMatrices aux, const Mat& p1_next,
                       const Mat& p2_next, const Mat& t_next,
                       const ValidatedGame& game);

struct FiniteSolution {
  int horizon = 0;               // N
  std::vector<Mat> P1, P2, T;    // N+2 entries, index N+1 is terminal
  std::vector<Mat> K1, K2;       // N+1 entries
  std::vector<StepMatrices> steps;  // N+1 entries
  std::vector<Mat> Phi;          // N+2 entries, Phi[k] maps x0 to x_k
  Mat Xi;
};

// Backward recursion from (H1, H2, 0) for k = N..0. Throws
// Error(kUpsilonSingular, index = k) when the hypothesis of the result
// fails at step k.
FiniteSolution solve_finite(const ValidatedGame& game, int horizon);

// Phi[0] = I, Phi[k+1] = Upsilon_{k+1}^{-1} M1_{k+1} (A + B2 K2_k) Phi[k].
std::vector<Mat> transition_products(const FiniteSolution& sol,
                                     const ValidatedGame& game);

// Finite sum defining the follower's extra cost term. Uses R12 in the
// quadratic K2 term, which is what J1 weighs u2 by.
Mat xi_finite(const FiniteSolution& sol, const ValidatedGame& game);

// x0' (P1_0 + T_0' + T_0 + Xi) x0
double cost_follower_finite(const FiniteSolution& sol,
                            const ValidatedGame& game, const Vec& x0);

// x0' P2_0 x0
double cost_leader_finite(const FiniteSolution& sol, const Vec& x0);

}  // namespace stackelq
