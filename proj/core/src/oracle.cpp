#include "stackelq/oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "stackelq/simulator.hpp"

namespace stackelq {

std::string_view to_string(FollowerResponse r) {
  switch (r) {
    case FollowerResponse::kReoptimize: return "reoptimize";
    case FollowerResponse::kReactionMap: return "reaction";
  }
  return "unknown";
}

namespace {

// x_k = F1[k] u1 + F2[k] u2 + c[k] for k = 0..N+1, with u1/u2 stacked.
struct ForwardMap {
  std::vector<Mat> F1, F2;
  std::vector<Vec> c;
};

ForwardMap forward_map(const ValidatedGame& game, const Vec& x0, int horizon) {
  const Eigen::Index n = game.n(), m1 = game.m1(), m2 = game.m2();
  const Eigen::Index steps = horizon + 1;
  ForwardMap f;
  f.F1.push_back(Mat::Zero(n, steps * m1));
  f.F2.push_back(Mat::Zero(n, steps * m2));
  f.c.push_back(x0);
  for (Eigen::Index k = 0; k < steps; ++k) {
    Mat f1 = game.A() * f.F1.back();
    Mat f2 = game.A() * f.F2.back();
    f1.middleCols(k * m1, m1) += game.B1();
    f2.middleCols(k * m2, m2) += game.B2();
    f.F1.push_back(std::move(f1));
    f.F2.push_back(std::move(f2));
    f.c.push_back(game.A() * f.c.back());
  }
  return f;
}

void check_size(const ValidatedGame& game, int horizon) {
  if (horizon < 0) throw Error(ErrorCode::kInvalidInput, "horizon must be >= 0");
  if ((horizon + 1) * (game.m1() + game.m2()) > kStackedLimit) {
    throw Error(ErrorCode::kInvalidInput,
                "stacked problem too large for the brute-force oracle");
  }
}

// Weight on x_k inside J1: Q1 for k <= N, H1 at k = N+1.
const Mat& follower_state_weight(const ValidatedGame& game, int k, int horizon) {
  return k <= horizon ? game.Q1() : game.H1();
}

struct OpenLoopRun {
  std::vector<Vec> states;
  double J1 = 0.0, J2 = 0.0;
};

OpenLoopRun simulate_open_loop(const ValidatedGame& game,
                               std::span<const Vec> u1,
                               std::span<const Vec> u2, const Vec& x0) {
  OpenLoopRun r;
  r.states.push_back(x0);
  for (std::size_t k = 0; k < u1.size(); ++k) {
    const Vec& x = r.states.back();
    r.J1 += follower_stage_cost(game, x, u1[k], u2[k]);
    r.J2 += leader_stage_cost(game, x, u1[k], u2[k]);
    r.states.push_back(game.A() * x + game.B1() * u1[k] + game.B2() * u2[k]);
  }
  const Vec& xf = r.states.back();
  r.J1 += xf.dot(game.H1() * xf);
  r.J2 += xf.dot(game.H2() * xf);
  return r;
}

std::vector<Vec> unstack(const Vec& v, Eigen::Index block) {
  std::vector<Vec> out;
  for (Eigen::Index i = 0; i < v.size(); i += block) out.push_back(v.segment(i, block));
  return out;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

BestResponse follower_best_response(const ValidatedGame& game,
                                    std::span<const Vec> u2, const Vec& x0,
                                    int horizon) {
  check_size(game, horizon);
  if (u2.size() != static_cast<std::size_t>(horizon) + 1) {
    throw Error(ErrorCode::kDimensionMismatch, "u2 needs N+1 entries");
  }
  const Eigen::Index m1 = game.m1(), m2 = game.m2();
  const Eigen::Index steps = horizon + 1;
  const ForwardMap f = forward_map(game, x0, horizon);

  Vec u2s(steps * m2);
  for (Eigen::Index k = 0; k < steps; ++k) u2s.segment(k * m2, m2) = u2[static_cast<std::size_t>(k)];

  StackedLQ p;
  p.horizon = horizon;
  p.H = Mat::Zero(steps * m1, steps * m1);
  p.g = Vec::Zero(steps * m1);
  for (Eigen::Index k = 0; k < steps; ++k) {
    p.H.block(k * m1, k * m1, m1, m1) += game.R11();
    const Vec& u2k = u2[static_cast<std::size_t>(k)];
    p.constant += u2k.dot(game.R12() * u2k);
  }
  for (int k = 0; k <= horizon + 1; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Mat& W = follower_state_weight(game, k, horizon);
    const Vec offset = f.F2[i] * u2s + f.c[i];
    p.H += f.F1[i].transpose() * W * f.F1[i];
    p.g += f.F1[i].transpose() * W * offset;
    p.constant += offset.dot(W * offset);
  }
  p.H = symmetrize(p.H);
  Eigen::LLT<Mat> llt(p.H);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kHessianNotPD, "stacked follower Hessian is not PD");
  }
  p.solution_u1 = -llt.solve(p.g);

  BestResponse br;
  br.u1 = unstack(p.solution_u1, m1);
  const OpenLoopRun run = simulate_open_loop(game, br.u1, u2, x0);
  br.states = run.states;
  br.J1 = run.J1;
  br.J2 = run.J2;
  br.problem = std::move(p);
  return br;
}

ClosedLoopResponse consistent_follower_response(const ValidatedGame& game,
                                                std::span<const Mat> k2,
                                                const Vec& x0, int horizon) {
  check_size(game, horizon);
  if (k2.size() != static_cast<std::size_t>(horizon) + 1) {
    throw Error(ErrorCode::kDimensionMismatch, "K2 needs N+1 entries");
  }
  const Eigen::Index m1 = game.m1(), m2 = game.m2();
  const Eigen::Index steps = horizon + 1;
  const Eigen::Index n1 = steps * m1, n2 = steps * m2;
  const ForwardMap f = forward_map(game, x0, horizon);

  // Unknowns z = (u1, u2).
  //   d J1 / d u1 = 0 with u2 as data:  H u1 + G u2 = -g
  //   u2_k - K2_k x_k(u1, u2) = 0
  Mat lhs = Mat::Zero(n1 + n2, n1 + n2);
  Vec rhs = Vec::Zero(n1 + n2);
  for (Eigen::Index k = 0; k < steps; ++k) {
    lhs.block(k * m1, k * m1, m1, m1) += game.R11();
  }
  for (int k = 0; k <= horizon + 1; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Mat& W = follower_state_weight(game, k, horizon);
    const Mat f1tw = f.F1[i].transpose() * W;
    lhs.topLeftCorner(n1, n1) += f1tw * f.F1[i];
    lhs.topRightCorner(n1, n2) += f1tw * f.F2[i];
    rhs.head(n1) -= f1tw * f.c[i];
  }
  for (Eigen::Index k = 0; k < steps; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Mat& K = k2[i];
    lhs.block(n1 + k * m2, 0, m2, n1) = -K * f.F1[i];
    lhs.block(n1 + k * m2, n1, m2, n2) = -K * f.F2[i];
    lhs.block(n1 + k * m2, n1 + k * m2, m2, m2) += Mat::Identity(m2, m2);
    rhs.segment(n1 + k * m2, m2) = K * f.c[i];
  }
  Eigen::FullPivLU<Mat> lu(lhs);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::kHessianNotPD,
                "closed-loop follower response is not unique");
  }
  const Vec z = lu.solve(rhs);

  ClosedLoopResponse out;
  out.u1 = unstack(z.head(n1), m1);
  out.u2 = unstack(z.tail(n2), m2);
  const OpenLoopRun run = simulate_open_loop(game, out.u1, out.u2, x0);
  out.states = run.states;
  out.J1 = run.J1;
  out.J2 = run.J2;
  return out;
}

namespace {

double reaction_map_leader_cost(const ValidatedGame& game,
                                const FiniteSolution& sol,
                                std::span<const Mat> k2, const Vec& x0) {
  std::vector<Mat> k1;
  k1.reserve(k2.size());
  for (std::size_t k = 0; k < k2.size(); ++k) {
    k1.push_back(-sol.steps[k].Y * (game.A() + game.B2() * k2[k]));
  }
  const auto traj = rollout(game, GainSchedule::time_varying(std::move(k1),
                                                             {k2.begin(), k2.end()}),
                            x0, static_cast<int>(k2.size()));
  return total_leader_cost(traj, game);
}

}  // namespace

VerificationReport verify_stackelberg_point(const ValidatedGame& game,
                                            const FiniteSolution& sol,
                                            const Vec& x0,
                                            const VerificationOptions& opt) {
  const int N = sol.horizon;
  check_size(game, N);
  VerificationReport rep;
  rep.response = opt.response;

  // (a) Riccati closed loop, then the follower's brute-force reply to the
  // leader sequence it produced.
  const Trajectory traj = rollout(game, GainSchedule::from(sol), x0, N + 1);
  const BestResponse br = follower_best_response(game, traj.u2, x0, N);
  double scale = 1.0;
  for (std::size_t k = 0; k < br.u1.size(); ++k) {
    rep.u1_mismatch = std::max(rep.u1_mismatch, max_abs(br.u1[k] - traj.u1[k]));
    scale = std::max(scale, max_abs(traj.u1[k]));
  }
  for (std::size_t k = 0; k < br.states.size(); ++k) {
    rep.state_mismatch = std::max(rep.state_mismatch, max_abs(br.states[k] - traj.states[k]));
    scale = std::max(scale, max_abs(traj.states[k]));
  }
  rep.fixed_point_ok = rep.u1_mismatch <= opt.fixed_point_tol * scale &&
                       rep.state_mismatch <= opt.fixed_point_tol * scale;

  rep.J1_riccati = cost_follower_finite(sol, game, x0);
  rep.J1_oracle = br.J1;
  rep.J1_relative_error = relative_error(rep.J1_riccati, rep.J1_oracle);
  rep.J2_riccati = cost_leader_finite(sol, x0);
  rep.J2_oracle = br.J2;
  rep.J2_relative_error = relative_error(rep.J2_riccati, rep.J2_oracle);
  const double floor = 1e-12 * (1.0 + x0.squaredNorm());
  rep.costs_ok = (rep.J1_relative_error <= opt.cost_tol ||
                  std::abs(rep.J1_riccati - rep.J1_oracle) <= floor) &&
                 (rep.J2_relative_error <= opt.cost_tol ||
                  std::abs(rep.J2_riccati - rep.J2_oracle) <= floor);

  // (b) leader perturbation audit.
  for (const auto& s : sol.steps) rep.gamma2_norm = std::max(rep.gamma2_norm, spectral_norm(s.Gamma2));
  rep.allowed_drop = opt.curvature_factor * rep.gamma2_norm * opt.eps * opt.eps;

  auto leader_cost = [&](std::span<const Mat> k2) {
    return opt.response == FollowerResponse::kReoptimize
               ? consistent_follower_response(game, k2, x0, N).J2
               : reaction_map_leader_cost(game, sol, k2, x0);
  };
  rep.J2_nominal = leader_cost(sol.K2);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  rep.worst_delta_J2 = std::numeric_limits<double>::infinity();
  for (int d = 0; d < opt.n_perturb; ++d) {
    std::vector<Mat> dir;
    double norm2 = 0.0;
    for (const auto& K : sol.K2) {
      Mat D(K.rows(), K.cols());
      for (Eigen::Index i = 0; i < D.size(); ++i) D.data()[i] = normal(rng);
      norm2 += D.squaredNorm();
      dir.push_back(std::move(D));
    }
    const double inv = 1.0 / std::sqrt(norm2);
    std::vector<Mat> k2 = sol.K2;
    for (std::size_t k = 0; k < k2.size(); ++k) k2[k] += opt.eps * inv * dir[k];
    const double delta = leader_cost(k2) - rep.J2_nominal;
    rep.delta_J2.push_back(delta);
    if (delta < rep.worst_delta_J2) {
      rep.worst_delta_J2 = delta;
      rep.worst_direction = d;
    }
    if (delta < -rep.allowed_drop) ++rep.violations;
  }
  if (opt.n_perturb == 0) rep.worst_delta_J2 = 0.0;
  rep.leader_ok = rep.violations == 0;

  if (!rep.fixed_point_ok || !rep.costs_ok) {
    rep.failure = ErrorCode::kFixedPointMismatch;
  } else if (!rep.leader_ok) {
    rep.failure = ErrorCode::kLeaderNotOptimal;
  }
  return rep;
}

namespace {

CompletionOfSquares finish(double j2_alt, double j2_opt, double terminal_alt,
                           double rhs) {
  CompletionOfSquares c;
  c.J2_alt = j2_alt;
  c.J2_optimal = j2_opt;
  c.lhs = j2_alt + terminal_alt - j2_opt;
  c.rhs = rhs;
  c.residual = std::abs(c.lhs - c.rhs);
  c.relative_residual = c.residual / (1.0 + std::abs(c.lhs));
  return c;
}

}  // namespace

CompletionOfSquares completion_of_squares_audit(const ValidatedGame& game,
                                                const FiniteSolution& sol,
                                                std::span<const Mat> alt_k2,
                                                const Vec& x0) {
  if (alt_k2.size() != sol.K2.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "alternative K2 needs N+1 entries");
  }
  std::vector<Mat> k1;
  for (std::size_t k = 0; k < alt_k2.size(); ++k) {
    k1.push_back(-sol.steps[k].Y * (game.A() + game.B2() * alt_k2[k]));
  }
  const auto traj = rollout(
      game, GainSchedule::time_varying(std::move(k1), {alt_k2.begin(), alt_k2.end()}),
      x0, static_cast<int>(alt_k2.size()));

  double rhs = 0.0;
  for (std::size_t k = 0; k < alt_k2.size(); ++k) {
    const auto& s = sol.steps[k];
    const Vec r = traj.u2[k] + s.Gamma2.llt().solve(s.M2 * traj.states[k]);
    rhs += r.dot(s.Gamma2 * r);
  }
  // P2_{N+1} = H2, so J2 already contains the terminal term.
  return finish(total_leader_cost(traj, game), cost_leader_finite(sol, x0), 0.0,
                rhs);
}

CompletionOfSquares completion_of_squares_audit(const ValidatedGame& game,
                                                const StationarySolution& sol,
                                                const Mat& alt_k2,
                                                const Vec& x0, int steps) {
  const Mat k1 = -sol.aux.Y * (game.A() + game.B2() * alt_k2);
  const auto traj = rollout(game, GainSchedule::stationary(k1, alt_k2), x0, steps);
  Eigen::LLT<Mat> g2(sol.aux.Gamma2);
  double rhs = 0.0;
  for (int k = 0; k < steps; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const Vec r = traj.u2[i] + g2.solve(sol.aux.M2 * traj.states[i]);
    rhs += r.dot(sol.aux.Gamma2 * r);
  }
  const Vec& xf = traj.states.back();
  return finish(traj.running_J2.back(), cost_leader_infinite(sol, x0),
                xf.dot(sol.P2 * xf), rhs);
}

GameSpec random_game(std::mt19937_64& rng, const RandomGameOptions& o) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  auto gaussian = [&](int r, int c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  auto pd = [&](int k) {
    const Mat x = gaussian(k, k);
    return symmetrize(x * x.transpose() / k + 0.1 * Mat::Identity(k, k));
  };
  auto well_conditioned = [&](int rows, int cols) {
    Mat b = gaussian(rows, cols);
    if (rows >= cols) {
      Eigen::HouseholderQR<Mat> qr(b);
      b = qr.householderQ() * Mat::Identity(rows, cols);
    }
    for (int j = 0; j < cols; ++j) b.col(j) *= 0.5 + uniform(rng);
    return b;
  };

  GameSpec g;
  Mat a = gaussian(o.n, o.n);
  double rho = spectral_radius(a);
  while (rho < 1e-6) {
    a = gaussian(o.n, o.n);
    rho = spectral_radius(a);
  }
  g.A = a * ((o.rho_min + (o.rho_max - o.rho_min) * uniform(rng)) / rho);
  g.B1 = well_conditioned(o.n, o.m1);
  g.B2 = o.leader_input ? well_conditioned(o.n, o.m2) : Mat::Zero(o.n, o.m2);
  g.Q1 = pd(o.n);
  g.Q2 = pd(o.n);
  g.R11 = pd(o.m1);
  g.R12 = pd(o.m2);
  g.R21 = pd(o.m1);
  g.R22 = pd(o.m2);
  if (o.terminal_weights) {
    g.H1 = pd(o.n);
    g.H2 = pd(o.n);
  } else {
    g.H1 = Mat::Zero(o.n, o.n);
    g.H2 = Mat::Zero(o.n, o.n);
  }
  g.x0 = gaussian(o.n, 1);
  return g;
}

}  // namespace stackelq
