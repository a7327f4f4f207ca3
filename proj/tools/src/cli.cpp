#include "stackelq_cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <thread>

#include "stackelq/game_model.hpp"
#include "stackelq/io.hpp"
#include "stackelq/oracle.hpp"
#include "stackelq/riccati_finite.hpp"
#include "stackelq/riccati_infinite.hpp"
#include "stackelq/simulator.hpp"

namespace stackelq::cli {

namespace fs = std::filesystem;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kNotPSD:
    case ErrorCode::kInvalidInput:
      return kInvalidInput;
    case ErrorCode::kFixedPointMismatch:
    case ErrorCode::kLeaderNotOptimal:
      return kVerificationFailure;
    default:
      return kNumericalFailure;
  }
}

namespace {

struct SolveArgs {
  std::string problem;
  std::optional<int> horizon;
  bool infinite = false;
  double tol = 1e-11;
  int max_iters = 100000;
  std::string out;
  int jobs = 1;
};

struct SimulateArgs {
  std::string problem;
  std::string solution;
  std::optional<int> steps;
  std::string csv;
  bool override_digest = false;
};

struct VerifyArgs {
  std::string problem;
  std::string solution;
  std::optional<int> horizon;
  int n_perturb = 50;
  double eps = 1e-3;
  std::uint64_t seed = 0;
  std::string leader_audit = "reoptimize";
  bool override_digest = false;
};

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string format_matrix(const Mat& m) {
  std::ostringstream os;
  os << '[';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (i) os << "; ";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << fmt(m(i, j), "%.4f");
    }
  }
  os << ']';
  return os.str();
}

std::pair<double, double> eig_range(const Mat& p) {
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(p), Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

std::pair<double, double> eig_range(const std::vector<Mat>& ps) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : ps) {
    const auto [a, b] = eig_range(p);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  return {lo, hi};
}

std::string format_range(std::pair<double, double> r) {
  return "[" + fmt(r.first) + ", " + fmt(r.second) + "]";
}

void print_violations(const ValidationResult& vr, std::ostream& err) {
  for (const auto& v : vr.violations) err << "  " << to_string(v) << '\n';
}

// Loads and validates; on failure prints the violation list and returns
// nothing.
std::optional<ValidatedGame> load_game(const std::string& path, io::ProblemFile& problem,
                                       std::ostream& err) {
  problem = io::load_problem(path);
  auto vr = validate_spec(problem.spec);
  for (const auto& w : vr.warnings) err << "warning: " << w << '\n';
  if (!vr.ok()) {
    err << path << ": invalid problem\n";
    print_violations(vr, err);
    return std::nullopt;
  }
  return std::move(*vr.game);
}

int stationary_exit_code(const Verdict& v) {
  if (v.stabilizable) return kOk;
  switch (*v.failure_reason) {
    case FailureReason::kNotConverged:
    case FailureReason::kDiverged:
    case FailureReason::kUpsilonSingular:
      return kNumericalFailure;
    default:
      return kNotStabilizable;
  }
}

void print_costs(const io::SolutionFile& f, std::ostream& out) {
  if (!f.x0) return;
  out << "costs at x0:          J1 = " << (f.J1 ? fmt(*f.J1, "%.10g") : "n/a")
      << "  J2 = " << (f.J2 ? fmt(*f.J2, "%.10g") : "n/a") << '\n';
}

int solve_one(const SolveArgs& a, const std::string& problem_path,
              const std::string& out_path, std::ostream& out, std::ostream& err) {
  io::ProblemFile problem;
  auto game = load_game(problem_path, problem, err);
  if (!game) return kInvalidInput;
  const std::string digest = io::problem_digest(game->spec());

  std::optional<int> horizon = a.horizon;
  if (!horizon && !a.infinite) horizon = problem.horizon;

  if (horizon) {
    if (*horizon < 0) {
      err << "horizon must be nonnegative\n";
      return kInvalidInput;
    }
    FiniteSolution sol;
    try {
      sol = solve_finite(*game, *horizon);
    } catch (const Error& e) {
      err << problem_path << ": " << to_string(e.code()) << ": " << e.what() << '\n';
      return exit_code_for(e.code());
    }
    const auto file = io::make_solution_file(sol, *game, digest, io::utc_timestamp());
    io::save_solution(out_path, file);
    out << "problem:              " << problem_path << '\n'
        << "solver:               finite, N = " << *horizon << '\n'
        << "K1_0 = " << format_matrix(sol.K1.front()) << '\n'
        << "K2_0 = " << format_matrix(sol.K2.front()) << '\n'
        << "P1_k eigenvalues:     " << format_range(eig_range(sol.P1)) << '\n'
        << "P2_k eigenvalues:     " << format_range(eig_range(sol.P2)) << '\n'
        << "rho(closed loop k=0): "
        << fmt(spectral_radius(sol.steps.front().UpsilonInvM1 *
                               (game->A() + game->B2() * sol.K2.front())))
        << '\n';
    print_costs(file, out);
    out << "written:              " << out_path << '\n';
    return kOk;
  }

  StationaryOptions opt;
  opt.tol = a.tol;
  opt.max_iters = a.max_iters;
  const auto outcome = solve_stationary(*game, opt);
  const auto verdict = stabilization_verdict(*game, outcome);
  const auto file =
      io::make_solution_file(outcome, verdict, opt, *game, digest, io::utc_timestamp());
  io::save_solution(out_path, file);

  out << "problem:              " << problem_path << '\n'
      << "solver:               stationary, " << outcome.iterations << " iterations, final delta "
      << fmt(outcome.final_delta) << '\n';
  if (const auto& s = outcome.solution) {
    out << "K1 = " << format_matrix(s->K1) << '\n'
        << "K2 = " << format_matrix(s->K2) << '\n'
        << "Upsilon = " << format_matrix(s->aux.Upsilon) << '\n'
        << "P1 eigenvalues:       " << format_range(eig_range(s->P1)) << '\n'
        << "P2 eigenvalues:       " << format_range(eig_range(s->P2)) << '\n'
        << "rho(Abar):            " << fmt(verdict.spectral_radius_closed_loop) << '\n';
  }
  const auto& ar = verdict.assumption_report;
  out << "controllability rank: " << ar.controllability_rank << "/" << game->n()
      << ", observability rank: " << ar.observability_rank << "/" << game->n() << '\n'
      << "verdict:              "
      << (verdict.stabilizable ? std::string("stabilizable")
                               : "not stabilizable (" +
                                     std::string(to_string(*verdict.failure_reason)) + ")")
      << '\n';
  print_costs(file, out);
  out << "written:              " << out_path << '\n';
  return stationary_exit_code(verdict);
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }
}

int cmd_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  if (a.horizon && a.infinite) {
    err << "--horizon and --infinite are mutually exclusive\n";
    return kInvalidInput;
  }
  if (!fs::is_directory(a.problem)) {
    const std::string target =
        a.out.empty() ? fs::path(a.problem).stem().string() + ".solution.json" : a.out;
    return run_guarded([&] { return solve_one(a, a.problem, target, out, err); }, err);
  }

  // Batch mode: every *.json in the directory, one solution file each.
  std::vector<fs::path> inputs;
  for (const auto& entry : fs::directory_iterator(a.problem)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") inputs.push_back(entry.path());
  }
  std::sort(inputs.begin(), inputs.end());
  const fs::path out_dir = a.out.empty() ? fs::path(".") : fs::path(a.out);
  fs::create_directories(out_dir);

  std::vector<int> codes(inputs.size(), kOk);
  std::vector<std::string> outs(inputs.size()), errs(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      std::ostringstream o, e;
      const std::string target = (out_dir / (inputs[i].stem().string() + ".solution.json")).string();
      codes[i] = run_guarded([&] { return solve_one(a, inputs[i].string(), target, o, e); }, e);
      outs[i] = o.str();
      errs[i] = e.str();
    }
  };
  const int n_threads = std::clamp(a.jobs, 1, static_cast<int>(std::max<std::size_t>(inputs.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int worst = kOk;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    err << errs[i];
    out << inputs[i].filename().string() << ": exit " << codes[i] << '\n';
    worst = std::max(worst, codes[i]);
  }
  out << inputs.size() << " problems solved\n";
  return worst;
}

bool digest_matches(const io::SolutionFile& sol, const ValidatedGame& game, bool override_digest,
                    std::ostream& err) {
  const std::string digest = io::problem_digest(game.spec());
  if (sol.input_digest == digest) return true;
  if (override_digest) {
    err << "warning: solution digest does not match the problem (overridden)\n";
    return true;
  }
  err << "error: solution was computed for a different problem (digest "
      << sol.input_digest << ", problem " << digest << "); pass --override-digest to use it anyway\n";
  return false;
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  io::ProblemFile problem;
  auto game = load_game(a.problem, problem, err);
  if (!game) return kInvalidInput;
  if (!game->has_x0()) {
    err << "error: problem has no x0\n";
    return kInvalidInput;
  }
  const auto sol = io::load_solution(a.solution);
  if (!digest_matches(sol, *game, a.override_digest, err)) return kInvalidInput;
  if (sol.n != game->n() || sol.m1 != game->m1() || sol.m2 != game->m2()) {
    err << "error: solution dimensions do not match the problem\n";
    return kInvalidInput;
  }

  const auto gains = io::gains_of(sol);
  const int steps = a.steps ? *a.steps : (gains.is_stationary() ? 30 : gains.length());
  if (steps < 0 || (!gains.is_stationary() && steps > gains.length())) {
    err << "error: steps must lie in [0, " << gains.length() << "] for this solution\n";
    return kInvalidInput;
  }
  LyapunovWeights weights;
  if (sol.kind == io::SolverKind::kStationary) {
    if (!sol.P2.empty()) weights.P2 = {sol.P2.front()};
  } else {
    weights.P2 = sol.P2;
  }

  Trajectory traj;
  try {
    traj = rollout(*game, gains, game->x0(), steps, weights);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what();
    if (e.index()) err << " (step " << *e.index() << ")";
    err << '\n';
    return exit_code_for(e.code());
  }

  if (a.csv.empty() || a.csv == "-") {
    io::write_trajectory_csv(out, traj, game->n(), game->m1(), game->m2());
  } else {
    std::ofstream csv(a.csv, std::ios::binary);
    if (!csv) {
      err << "error: cannot write " << a.csv << '\n';
      return kInvalidInput;
    }
    io::write_trajectory_csv(csv, traj, game->n(), game->m1(), game->m2());
    out << steps << " steps written to " << a.csv << "; |x_" << steps
        << "|_inf = " << fmt(max_abs(traj.states.back())) << '\n';
  }
  return kOk;
}

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  io::ProblemFile problem;
  auto game = load_game(a.problem, problem, err);
  if (!game) return kInvalidInput;
  if (!game->has_x0()) {
    err << "error: problem has no x0\n";
    return kInvalidInput;
  }
  VerificationOptions opt;
  opt.n_perturb = a.n_perturb;
  opt.eps = a.eps;
  opt.seed = a.seed;
  opt.response = a.leader_audit == "reaction" ? FollowerResponse::kReactionMap
                                              : FollowerResponse::kReoptimize;

  FiniteSolution sol;
  if (!a.solution.empty()) {
    const auto file = io::load_solution(a.solution);
    if (!digest_matches(file, *game, a.override_digest, err)) return kInvalidInput;
    sol = io::finite_solution_of(file, *game);
  } else {
    const int horizon = a.horizon ? *a.horizon : problem.horizon.value_or(10);
    sol = solve_finite(*game, horizon);
  }

  const auto rep = verify_stackelberg_point(*game, sol, game->x0(), opt);
  double k2_max = 0.0;
  for (const auto& k : sol.K2) k2_max = std::max(k2_max, max_abs(k));
  const char* pass = "PASS";
  const char* fail = "FAIL";
  out << "horizon N:                " << sol.horizon << '\n'
      << "max |K2_k|:               " << fmt(k2_max) << (k2_max == 0.0 ? "  (K2 = 0)" : "") << '\n'
      << "fixed point:              " << (rep.fixed_point_ok ? pass : fail)
      << "  max |du1| = " << fmt(rep.u1_mismatch) << ", max |dx| = " << fmt(rep.state_mismatch)
      << '\n'
      << "J1 agreement:             rel " << fmt(rep.J1_relative_error) << "  (riccati "
      << fmt(rep.J1_riccati, "%.12g") << ", stacked " << fmt(rep.J1_oracle, "%.12g") << ")\n"
      << "J2 agreement:             rel " << fmt(rep.J2_relative_error) << "  (riccati "
      << fmt(rep.J2_riccati, "%.12g") << ", stacked " << fmt(rep.J2_oracle, "%.12g") << ")\n"
      << "costs:                    " << (rep.costs_ok ? pass : fail) << '\n'
      << "leader audit (" << to_string(rep.response) << "): " << (rep.leader_ok ? pass : fail)
      << "  " << rep.violations << "/" << a.n_perturb << " directions lower J2 by more than "
      << fmt(rep.allowed_drop) << "; worst dJ2 = " << fmt(rep.worst_delta_J2) << '\n';
  if (rep.failure) {
    out << "verification failed: " << to_string(*rep.failure) << '\n';
    return kVerificationFailure;
  }
  out << "verification passed\n";
  return kOk;
}

int cmd_check(const std::string& path, std::ostream& out, std::ostream& err) {
  io::ProblemFile problem;
  auto game = load_game(path, problem, err);
  if (!game) return kInvalidInput;
  const auto r = check_assumptions(*game);
  out << "controllable (A, B1):      " << (r.controllable ? "yes" : "no") << ", rank "
      << r.controllability_rank << "/" << game->n() << '\n'
      << "observable (A, Q2^(1/2)):  " << (r.observable ? "yes" : "no") << ", rank "
      << r.observability_rank << "/" << game->n() << '\n';
  if (!r.holds()) {
    out << "assumptions violated\n";
    return kNotStabilizable;
  }
  out << "assumptions hold\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Open-loop Stackelberg LQ game solver", "stackelq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kToolVersion));

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Solve a problem file (or a directory of them)");
  s->add_option("problem", solve.problem, "Problem file or directory")->required();
  s->add_option("--horizon", solve.horizon, "Finite horizon N")->check(CLI::NonNegativeNumber);
  s->add_flag("--infinite", solve.infinite, "Stationary solution (default without a horizon)");
  s->add_option("--tol", solve.tol, "Value iteration tolerance")->check(CLI::PositiveNumber);
  s->add_option("--max-iters", solve.max_iters, "Value iteration cap")->check(CLI::PositiveNumber);
  s->add_option("--out", solve.out, "Solution file (directory in batch mode)");
  s->add_option("--jobs", solve.jobs, "Parallel solves in batch mode")->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Roll out a solution and write a CSV trajectory");
  m->add_option("problem", sim.problem, "Problem file")->required();
  m->add_option("--solution", sim.solution, "Solution file")->required();
  m->add_option("--steps", sim.steps, "Number of steps")->check(CLI::PositiveNumber);
  m->add_option("--csv", sim.csv, "CSV output path (stdout when absent)");
  m->add_flag("--override-digest", sim.override_digest, "Accept a solution for another problem");

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "Check a finite-horizon solution against brute force");
  v->add_option("problem", ver.problem, "Problem file")->required();
  v->add_option("--horizon", ver.horizon, "Horizon N")->check(CLI::NonNegativeNumber);
  v->add_option("--solution", ver.solution, "Finite solution file to verify instead of solving");
  v->add_option("--n-perturb", ver.n_perturb, "Leader perturbation directions")
      ->check(CLI::NonNegativeNumber);
  v->add_option("--eps", ver.eps, "Perturbation size")->check(CLI::PositiveNumber);
  v->add_option("--seed", ver.seed, "Random seed for the directions");
  v->add_option("--leader-audit", ver.leader_audit, "Follower response in the leader audit")
      ->check(CLI::IsMember({"reoptimize", "reaction"}));
  v->add_flag("--override-digest", ver.override_digest, "Accept a solution for another problem");

  std::string check_path;
  auto* c = app.add_subcommand("check", "Test controllability and observability only");
  c->add_option("problem", check_path, "Problem file")->required();

  std::vector<std::string> storage(args);
  if (storage.empty()) storage.emplace_back("stackelq");
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    err << e.what() << '\n' << "run with --help for usage\n";
    return kInvalidInput;
  }

  if (*s) return cmd_solve(solve, out, err);
  if (*m) return run_guarded([&] { return cmd_simulate(sim, out, err); }, err);
  if (*v) return run_guarded([&] { return cmd_verify(ver, out, err); }, err);
  return run_guarded([&] { return cmd_check(check_path, out, err); }, err);
}

}  // namespace stackelq::cli
