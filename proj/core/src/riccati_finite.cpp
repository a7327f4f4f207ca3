#include "stackelq/riccati_finite.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <limits>
#include <sstream>

#include "stackelq/error.hpp"

namespace stackelq {

namespace {

void check_square(const Mat& m, Eigen::Index n, const char* name) {
  if (m.rows() != n || m.cols() != n) {
    std::ostringstream os;
    os << name << " must be " << n << "x" << n << ", got " << m.rows() << "x"
       << m.cols();
    throw Error(ErrorCode::kDimensionMismatch, os.str());
  }
}

}  // namespace

StepMatrices step_matrices(const Mat& p1_next, const Mat& p2_next,
                           const Mat& t_next, const ValidatedGame& game) {
  const Eigen::Index n = game.n();
  check_square(p1_next, n, "P1_next");
  check_square(p2_next, n, "P2_next");
  check_square(t_next, n, "T_next");

  const Mat& A = game.A();
  const Mat& B1 = game.B1();
  const Mat& B2 = game.B2();
  const Mat I = Mat::Identity(n, n);

  StepMatrices s;
  s.Gamma1 = symmetrize(game.R11() + B1.transpose() * p1_next * B1);
  Eigen::LLT<Mat> g1(s.Gamma1);
  if (g1.info() != Eigen::Success) {
    // R11 > 0 and P1 >= 0 make this unreachable for validated data.
    throw Error(ErrorCode::kInvalidInput, "Gamma1 lost positive definiteness");
  }
  const Mat b1t = B1.transpose();
  s.S = g1.solve(b1t * p1_next);
  s.M1 = I - B1 * s.S;
  const Mat coupling = B1 * g1.solve(b1t * t_next);
  s.Upsilon = I + coupling;

  // Measured against the scale of I + coupling, so cancellation to a tiny
  // Upsilon counts as singular even when n = 1.
  const double smin = min_singular_value(s.Upsilon);
  s.upsilon_condition = smin > 0.0 ? (1.0 + spectral_norm(coupling)) / smin
                                   : std::numeric_limits<double>::infinity();
  if (!(s.upsilon_condition <= kUpsilonConditionMax)) {
    std::ostringstream os;
    os << "Upsilon condition number " << s.upsilon_condition << " exceeds "
       << kUpsilonConditionMax;
    throw Error(ErrorCode::kUpsilonSingular, os.str());
  }
  Eigen::PartialPivLU<Mat> ups(s.Upsilon);
  s.UpsilonInvM1 = ups.solve(s.M1);
  s.Y = s.S + g1.solve(b1t * t_next * s.UpsilonInvM1);

  const Mat& W = s.UpsilonInvM1;
  const Mat R21Y = game.R21() * s.Y;
  const Mat P2W = p2_next * W;
  s.Gamma2 = symmetrize(game.R22() + B2.transpose() * s.Y.transpose() * R21Y * B2 +
                        B2.transpose() * W.transpose() * P2W * B2);
  s.M2 = B2.transpose() * s.Y.transpose() * R21Y * A +
         B2.transpose() * W.transpose() * P2W * A;
  return s;
}

StepResult finish_step(StepMatrices aux, const Mat& p1_next,
                       const Mat& p2_next, const Mat& t_next,
                       const ValidatedGame& game) {
  const Mat& A = game.A();
  const Mat& B1 = game.B1();
  const Mat& B2 = game.B2();

  Eigen::LLT<Mat> g2(aux.Gamma2);
  if (g2.info() != Eigen::Success) {
    throw Error(ErrorCode::kGamma2NotPD, "Gamma2 is not positive definite");
  }

  StepResult r;
  r.K2 = -g2.solve(aux.M2);
  const Mat closed = A + B2 * r.K2;
  r.K1 = -aux.Y * closed;

  const Mat& W = aux.UpsilonInvM1;
  const Mat AtM1t = A.transpose() * aux.M1.transpose();
  r.T = AtM1t * t_next * W * closed + AtM1t * p1_next * B2 * r.K2;

  // P1 = Q1 + A'P1A - A'P1B1 Gamma1^{-1} B1'P1A  (S = Gamma1^{-1} B1'P1)
  r.P1 = symmetrize(game.Q1() + A.transpose() * p1_next * A -
                    A.transpose() * p1_next * B1 * aux.S * A);

  const Mat WA = W * A;
  const Mat YA = aux.Y * A;
  r.P2 = symmetrize(game.Q2() + YA.transpose() * game.R21() * YA +
                    WA.transpose() * p2_next * WA -
                    aux.M2.transpose() * g2.solve(aux.M2));
  r.aux = std::move(aux);
  return r;
}

StepResult backward_step(const Mat& p1_next, const Mat& p2_next,
                         const Mat& t_next, const ValidatedGame& game) {
  return finish_step(step_matrices(p1_next, p2_next, t_next, game), p1_next,
                     p2_next, t_next, game);
}

FiniteSolution solve_finite(const ValidatedGame& game, int horizon) {
  if (horizon < 0) {
    throw Error(ErrorCode::kInvalidInput, "horizon must be >= 0");
  }
  const Eigen::Index n = game.n();
  const std::size_t N = static_cast<std::size_t>(horizon);

  FiniteSolution sol;
  sol.horizon = horizon;
  sol.P1.resize(N + 2);
  sol.P2.resize(N + 2);
  sol.T.resize(N + 2);
  sol.K1.resize(N + 1);
  sol.K2.resize(N + 1);
  sol.steps.resize(N + 1);
  sol.P1[N + 1] = game.H1();
  sol.P2[N + 1] = game.H2();
  sol.T[N + 1] = Mat::Zero(n, n);

  for (int k = horizon; k >= 0; --k) {
    const auto i = static_cast<std::size_t>(k);
    StepResult r;
    try {
      r = backward_step(sol.P1[i + 1], sol.P2[i + 1], sol.T[i + 1], game);
    } catch (const Error& e) {
      throw Error(e.code(), "backward recursion failed", k);
    }
    sol.P1[i] = std::move(r.P1);
    sol.P2[i] = std::move(r.P2);
    sol.T[i] = std::move(r.T);
    sol.K1[i] = std::move(r.K1);
    sol.K2[i] = std::move(r.K2);
    sol.steps[i] = std::move(r.aux);
  }
  sol.Phi = transition_products(sol, game);
  sol.Xi = xi_finite(sol, game);
  return sol;
}

std::vector<Mat> transition_products(const FiniteSolution& sol,
                                     const ValidatedGame& game) {
  const Eigen::Index n = game.n();
  std::vector<Mat> phi;
  phi.reserve(sol.steps.size() + 1);
  phi.push_back(Mat::Identity(n, n));
  for (std::size_t k = 0; k < sol.steps.size(); ++k) {
    const Mat step = sol.steps[k].UpsilonInvM1 * (game.A() + game.B2() * sol.K2[k]);
    phi.push_back(step * phi.back());
  }
  return phi;
}

Mat xi_finite(const FiniteSolution& sol, const ValidatedGame& game) {
  const Eigen::Index n = game.n();
  const Mat& B1 = game.B1();
  const Mat& B2 = game.B2();
  const std::vector<Mat> phi =
      sol.Phi.size() == sol.steps.size() + 1 ? sol.Phi
                                             : transition_products(sol, game);
  Mat xi = Mat::Zero(n, n);
  for (std::size_t k = 0; k < sol.steps.size(); ++k) {
    const StepMatrices& s = sol.steps[k];
    const Mat& Tn = sol.T[k + 1];
    const Mat& P1n = sol.P1[k + 1];
    const Mat& K2 = sol.K2[k];
    const Mat& Pk = phi[k];
    const Mat& Pk1 = phi[k + 1];
    const Mat g1inv_b1t = s.Gamma1.llt().solve(B1.transpose());
    xi += Pk1.transpose() * Tn.transpose() * s.M1 * B2 * K2 * Pk;
    xi -= Pk1.transpose() * Tn.transpose() * B1 * g1inv_b1t * Tn * Pk1;
    xi += Pk.transpose() * K2.transpose() *
          (game.R12() + B2.transpose() * P1n * s.M1 * B2) * K2 * Pk;
    xi += Pk.transpose() * K2.transpose() * B2.transpose() * s.M1.transpose() *
          Tn * Pk1;
  }
  return xi;
}

double cost_follower_finite(const FiniteSolution& sol,
                            const ValidatedGame& game, const Vec& x0) {
  const Mat xi = sol.Xi.size() ? sol.Xi : xi_finite(sol, game);
  const Mat& T0 = sol.T.front();
  return x0.dot((sol.P1.front() + T0.transpose() + T0 + xi) * x0);
}

double cost_leader_finite(const FiniteSolution& sol, const Vec& x0) {
  return x0.dot(sol.P2.front() * x0);
}

}  // namespace stackelq
