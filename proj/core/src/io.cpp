#include "stackelq/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "stackelq/error.hpp"

namespace stackelq::io {

namespace {

[[noreturn]] void bad(const std::string& what) {
  throw Error(ErrorCode::kInvalidInput, what);
}

double number_from_json(const json& j, const std::string& name) {
  if (j.is_number()) return j.get<double>();
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
  }
  bad(name + ": expected a number, got " + j.dump());
}

json number_to_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::optional<double> optional_number(const json& doc, const char* key) {
  if (!doc.contains(key) || doc.at(key).is_null()) return std::nullopt;
  return number_from_json(doc.at(key), key);
}

std::vector<Mat> matrices_from_json(const json& j, const std::string& name) {
  if (!j.is_array()) bad(name + ": expected an array of matrices");
  std::vector<Mat> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(matrix_from_json(j[i], name + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json matrices_to_json(const std::vector<Mat>& ms) {
  json j = json::array();
  for (const auto& m : ms) j.push_back(matrix_to_json(m));
  return j;
}

constexpr const char* kMatrixNames[] = {"A",   "B1",  "B2",  "Q1",  "Q2", "R11",
                                        "R12", "R21", "R22", "H1",  "H2"};

Mat* field(GameSpec& g, std::string_view name) {
  if (name == "A") return &g.A;
  if (name == "B1") return &g.B1;
  if (name == "B2") return &g.B2;
  if (name == "Q1") return &g.Q1;
  if (name == "Q2") return &g.Q2;
  if (name == "R11") return &g.R11;
  if (name == "R12") return &g.R12;
  if (name == "R21") return &g.R21;
  if (name == "R22") return &g.R22;
  if (name == "H1") return &g.H1;
  if (name == "H2") return &g.H2;
  return nullptr;
}

const Mat& field(const GameSpec& g, std::string_view name) {
  return *field(const_cast<GameSpec&>(g), name);
}

json verdict_to_json(const Verdict& v) {
  const auto& a = v.assumption_report;
  json sv = json::array();
  for (double s : a.singular_values_used) sv.push_back(number_to_json(s));
  return {
      {"stabilizable", v.stabilizable},
      {"p1_min_eig", number_to_json(v.p1_min_eig)},
      {"p2_min_eig", number_to_json(v.p2_min_eig)},
      {"upsilon_condition", number_to_json(v.upsilon_condition)},
      {"spectral_radius_closed_loop", number_to_json(v.spectral_radius_closed_loop)},
      {"failure_reason", v.failure_reason ? json(std::string(to_string(*v.failure_reason)))
                                          : json(nullptr)},
      {"assumptions",
       {{"controllable", a.controllable},
        {"controllability_rank", a.controllability_rank},
        {"observable", a.observable},
        {"observability_rank", a.observability_rank},
        {"singular_values_used", sv}}},
  };
}

FailureReason failure_from_string(const std::string& s) {
  for (auto r : {FailureReason::kNotConverged, FailureReason::kDiverged,
                 FailureReason::kUpsilonSingular, FailureReason::kP1NotPD,
                 FailureReason::kP2NotPD, FailureReason::kUnstableClosedLoop,
                 FailureReason::kAssumptionViolated}) {
    if (to_string(r) == s) return r;
  }
  bad("unknown failure_reason '" + s + "'");
}

Verdict verdict_from_json(const json& j) {
  Verdict v;
  v.stabilizable = j.at("stabilizable").get<bool>();
  v.p1_min_eig = number_from_json(j.at("p1_min_eig"), "p1_min_eig");
  v.p2_min_eig = number_from_json(j.at("p2_min_eig"), "p2_min_eig");
  v.upsilon_condition = number_from_json(j.at("upsilon_condition"), "upsilon_condition");
  v.spectral_radius_closed_loop =
      number_from_json(j.at("spectral_radius_closed_loop"), "spectral_radius_closed_loop");
  if (!j.at("failure_reason").is_null()) {
    v.failure_reason = failure_from_string(j.at("failure_reason").get<std::string>());
  }
  const auto& a = j.at("assumptions");
  v.assumption_report.controllable = a.at("controllable").get<bool>();
  v.assumption_report.controllability_rank = a.at("controllability_rank").get<int>();
  v.assumption_report.observable = a.at("observable").get<bool>();
  v.assumption_report.observability_rank = a.at("observability_rank").get<int>();
  for (const auto& s : a.at("singular_values_used")) {
    v.assumption_report.singular_values_used.push_back(number_from_json(s, "singular_values_used"));
  }
  return v;
}

bool same_number(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

bool same_matrix(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (!same_number(a.data()[i], b.data()[i])) return false;
  }
  return true;
}

bool same_matrices(const std::vector<Mat>& a, const std::vector<Mat>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_matrix(a[i], b[i])) return false;
  }
  return true;
}

bool same_verdict(const Verdict& a, const Verdict& b) {
  const auto& x = a.assumption_report;
  const auto& y = b.assumption_report;
  if (x.singular_values_used.size() != y.singular_values_used.size()) return false;
  for (std::size_t i = 0; i < x.singular_values_used.size(); ++i) {
    if (!same_number(x.singular_values_used[i], y.singular_values_used[i])) return false;
  }
  return a.stabilizable == b.stabilizable && same_number(a.p1_min_eig, b.p1_min_eig) &&
         same_number(a.p2_min_eig, b.p2_min_eig) &&
         same_number(a.upsilon_condition, b.upsilon_condition) &&
         same_number(a.spectral_radius_closed_loop, b.spectral_radius_closed_loop) &&
         a.failure_reason == b.failure_reason && x.controllable == y.controllable &&
         x.controllability_rank == y.controllability_rank &&
         x.observable == y.observable && x.observability_rank == y.observability_rank;
}

}  // namespace

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number_to_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_json(const json& j, const std::string& name) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array()) bad(name + ": expected a nested row array");
  if (j.empty()) return Mat(0, 0);
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& row = j[i];
    if (!row.is_array()) bad(name + ": row " + std::to_string(i) + " is not an array");
    if (row.size() != cols) bad(name + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          number_from_json(row[c], name);
    }
  }
  return m;
}

json vector_to_json(const Vec& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(number_to_json(v(i)));
  return j;
}

Vec vector_from_json(const json& j, const std::string& name) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array()) bad(name + ": expected an array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = number_from_json(j[i], name);
  }
  return v;
}

ProblemFile parse_problem(const json& doc) {
  if (!doc.is_object()) bad("problem file must be a JSON object");
  if (doc.contains("format") && doc.at("format") != kProblemFormat) {
    bad("unsupported problem format " + doc.at("format").dump());
  }
  ProblemFile p;
  for (const char* name : kMatrixNames) {
    const bool optional = std::string_view(name) == "H1" || std::string_view(name) == "H2";
    if (!doc.contains(name)) {
      if (optional) continue;
      bad(std::string("missing required matrix ") + name);
    }
    *field(p.spec, name) = matrix_from_json(doc.at(name), name);
  }
  if (doc.contains("x0")) p.spec.x0 = vector_from_json(doc.at("x0"), "x0");
  if (doc.contains("horizon")) {
    const auto& h = doc.at("horizon");
    if (!h.is_number_integer() || h.get<long long>() < 0) bad("horizon must be a nonnegative integer");
    p.horizon = h.get<int>();
  }
  return p;
}

ProblemFile load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open problem file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    bad(path + ": " + e.what());
  }
  return parse_problem(doc);
}

json problem_to_json(const ProblemFile& problem) {
  json doc = {{"format", kProblemFormat}};
  for (const char* name : kMatrixNames) {
    const Mat& m = field(problem.spec, name);
    if (m.size() == 0 && (std::string_view(name) == "H1" || std::string_view(name) == "H2")) continue;
    doc[name] = matrix_to_json(m);
  }
  if (problem.spec.x0.size() > 0) doc["x0"] = vector_to_json(problem.spec.x0);
  if (problem.horizon) doc["horizon"] = *problem.horizon;
  return doc;
}

std::string problem_digest(const GameSpec& spec) {
  json canon = json::object();
  for (const char* name : kMatrixNames) {
    Mat m = field(spec, name);
    if (m.size() == 0 && (std::string_view(name) == "H1" || std::string_view(name) == "H2")) {
      m = Mat::Zero(spec.A.rows(), spec.A.rows());
    }
    canon[name] = matrix_to_json(m);
  }
  const std::string text = canon.dump();
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return os.str();
}

std::string_view to_string(SolverKind kind) {
  return kind == SolverKind::kFinite ? "finite" : "stationary";
}

SolutionFile make_solution_file(const FiniteSolution& sol,
                                const ValidatedGame& game,
                                const std::string& digest,
                                std::string generated_at) {
  SolutionFile f;
  f.kind = SolverKind::kFinite;
  f.generated_at = std::move(generated_at);
  f.input_digest = digest;
  f.n = game.n();
  f.m1 = game.m1();
  f.m2 = game.m2();
  f.horizon = sol.horizon;
  f.K1 = sol.K1;
  f.K2 = sol.K2;
  f.P1 = sol.P1;
  f.P2 = sol.P2;
  f.T = sol.T;
  f.convergence.converged = true;
  if (game.has_x0()) {
    f.x0 = game.x0();
    f.J1 = cost_follower_finite(sol, game, game.x0());
    f.J2 = cost_leader_finite(sol, game.x0());
  }
  return f;
}

SolutionFile make_solution_file(const StationaryOutcome& outcome,
                                const Verdict& verdict,
                                const StationaryOptions& options,
                                const ValidatedGame& game,
                                const std::string& digest,
                                std::string generated_at) {
  SolutionFile f;
  f.kind = SolverKind::kStationary;
  f.generated_at = std::move(generated_at);
  f.input_digest = digest;
  f.n = game.n();
  f.m1 = game.m1();
  f.m2 = game.m2();
  f.verdict = verdict;
  f.convergence.converged = outcome.converged();
  f.convergence.iterations = outcome.iterations;
  f.convergence.final_delta = outcome.final_delta;
  f.convergence.tol = options.tol;
  f.convergence.max_iters = options.max_iters;
  if (outcome.failure) f.convergence.failure = std::string(to_string(*outcome.failure));
  f.convergence.failure_iteration = outcome.failure_iteration;
  if (const auto& s = outcome.solution) {
    f.K1 = {s->K1};
    f.K2 = {s->K2};
    f.P1 = {s->P1};
    f.P2 = {s->P2};
    f.T = {s->T};
    f.Upsilon = s->aux.Upsilon;
    f.Abar = s->Abar;
    if (game.has_x0()) {
      f.x0 = game.x0();
      f.J2 = cost_leader_infinite(*s, game.x0());
      if (verdict.stabilizable) f.J1 = cost_follower_infinite(*s, game, game.x0());
    }
  }
  return f;
}

json solution_to_json(const SolutionFile& f) {
  json doc = {
      {"format", kSolutionFormat},
      {"tool_version", f.tool_version},
      {"generated_at", f.generated_at},
      {"input_digest", f.input_digest},
      {"solver", std::string(to_string(f.kind))},
      {"dimensions", {{"n", f.n}, {"m1", f.m1}, {"m2", f.m2}}},
  };
  const bool finite = f.kind == SolverKind::kFinite;
  auto put = [&](const char* key, const std::vector<Mat>& ms) {
    if (finite) {
      doc[key] = matrices_to_json(ms);
    } else if (!ms.empty()) {
      doc[key] = matrix_to_json(ms.front());
    }
  };
  if (finite) doc["horizon"] = f.horizon;
  put("K1", f.K1);
  put("K2", f.K2);
  put("P1", f.P1);
  put("P2", f.P2);
  put("T", f.T);
  if (!finite) {
    if (f.Upsilon.size()) doc["Upsilon"] = matrix_to_json(f.Upsilon);
    if (f.Abar.size()) doc["Abar"] = matrix_to_json(f.Abar);
    const auto& c = f.convergence;
    doc["convergence"] = {
        {"converged", c.converged},
        {"iterations", c.iterations},
        {"final_delta", number_to_json(c.final_delta)},
        {"tol", number_to_json(c.tol)},
        {"max_iters", c.max_iters},
        {"failure", c.failure ? json(*c.failure) : json(nullptr)},
        {"failure_iteration", c.failure_iteration ? json(*c.failure_iteration) : json(nullptr)},
    };
  }
  if (f.verdict) doc["verdict"] = verdict_to_json(*f.verdict);
  if (f.x0) {
    doc["costs"] = {{"x0", vector_to_json(*f.x0)},
                    {"J1", f.J1 ? number_to_json(*f.J1) : json(nullptr)},
                    {"J2", f.J2 ? number_to_json(*f.J2) : json(nullptr)}};
  }
  return doc;
}

SolutionFile solution_from_json(const json& doc) {
  if (!doc.is_object()) bad("solution file must be a JSON object");
  if (doc.contains("format") && doc.at("format") != kSolutionFormat) {
    bad("unsupported solution format " + doc.at("format").dump());
  }
  SolutionFile f;
  try {
    const auto solver = doc.at("solver").get<std::string>();
    if (solver == "finite") {
      f.kind = SolverKind::kFinite;
    } else if (solver == "stationary") {
      f.kind = SolverKind::kStationary;
    } else {
      bad("unknown solver kind '" + solver + "'");
    }
    f.tool_version = doc.value("tool_version", std::string());
    f.generated_at = doc.value("generated_at", std::string());
    f.input_digest = doc.value("input_digest", std::string());
    const bool finite = f.kind == SolverKind::kFinite;
    auto get = [&](const char* key, bool required) -> std::vector<Mat> {
      if (!doc.contains(key)) {
        if (required) bad(std::string("missing ") + key);
        return {};
      }
      return finite ? matrices_from_json(doc.at(key), key)
                    : std::vector<Mat>{matrix_from_json(doc.at(key), key)};
    };
    // A failed stationary solve carries no gains.
    f.K1 = get("K1", finite);
    f.K2 = get("K2", finite);
    f.P1 = get("P1", finite);
    f.P2 = get("P2", finite);
    f.T = get("T", finite);
    if (doc.contains("dimensions")) {
      const auto& d = doc.at("dimensions");
      f.n = d.at("n").get<int>();
      f.m1 = d.at("m1").get<int>();
      f.m2 = d.at("m2").get<int>();
    } else if (!f.K1.empty() && !f.K2.empty()) {
      f.n = static_cast<int>(f.K1.front().cols());
      f.m1 = static_cast<int>(f.K1.front().rows());
      f.m2 = static_cast<int>(f.K2.front().rows());
    }
    if (finite) {
      f.horizon = doc.at("horizon").get<int>();
      const auto steps = static_cast<std::size_t>(f.horizon) + 1;
      if (f.K1.size() != steps || f.K2.size() != steps || f.P1.size() != steps + 1 ||
          f.P2.size() != steps + 1 || f.T.size() != steps + 1) {
        bad("finite solution arrays do not match the horizon");
      }
      f.convergence.converged = true;
    } else {
      if (doc.contains("Upsilon")) f.Upsilon = matrix_from_json(doc.at("Upsilon"), "Upsilon");
      if (doc.contains("Abar")) f.Abar = matrix_from_json(doc.at("Abar"), "Abar");
      if (doc.contains("convergence")) {
        const auto& c = doc.at("convergence");
        f.convergence.converged = c.at("converged").get<bool>();
        f.convergence.iterations = c.at("iterations").get<int>();
        f.convergence.final_delta = number_from_json(c.at("final_delta"), "final_delta");
        f.convergence.tol = number_from_json(c.at("tol"), "tol");
        f.convergence.max_iters = c.at("max_iters").get<int>();
        if (!c.at("failure").is_null()) f.convergence.failure = c.at("failure").get<std::string>();
        if (!c.at("failure_iteration").is_null()) {
          f.convergence.failure_iteration = c.at("failure_iteration").get<int>();
        }
      } else {
        f.convergence.converged = true;
      }
      if (f.convergence.converged && (f.K1.empty() || f.K2.empty())) {
        bad("converged stationary solution is missing K1 or K2");
      }
    }
    if (doc.contains("verdict")) f.verdict = verdict_from_json(doc.at("verdict"));
    if (doc.contains("costs")) {
      const auto& c = doc.at("costs");
      f.x0 = vector_from_json(c.at("x0"), "x0");
      f.J1 = optional_number(c, "J1");
      f.J2 = optional_number(c, "J2");
    }
  } catch (const json::exception& e) {
    bad(std::string("malformed solution file: ") + e.what());
  }
  for (const auto* group : {&f.K1, &f.K2}) {
    for (const auto& k : *group) {
      if (k.cols() != f.n) bad("gain column count does not match n");
    }
  }
  return f;
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

void save_solution(const std::string& path, const SolutionFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) bad("cannot write " + path);
  out << dump(solution_to_json(file));
  if (!out) bad("write failed for " + path);
}

SolutionFile load_solution(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open solution file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    bad(path + ": " + e.what());
  }
  return solution_from_json(doc);
}

bool same_content(const SolutionFile& a, const SolutionFile& b) {
  const auto& ca = a.convergence;
  const auto& cb = b.convergence;
  const bool verdicts = a.verdict.has_value() == b.verdict.has_value() &&
                        (!a.verdict || same_verdict(*a.verdict, *b.verdict));
  const bool x0s = a.x0.has_value() == b.x0.has_value() &&
                   (!a.x0 || same_matrix(*a.x0, *b.x0));
  auto same_opt = [](const std::optional<double>& x, const std::optional<double>& y) {
    return x.has_value() == y.has_value() && (!x || same_number(*x, *y));
  };
  return a.kind == b.kind && a.tool_version == b.tool_version &&
         a.input_digest == b.input_digest && a.n == b.n && a.m1 == b.m1 &&
         a.m2 == b.m2 && a.horizon == b.horizon && same_matrices(a.K1, b.K1) &&
         same_matrices(a.K2, b.K2) && same_matrices(a.P1, b.P1) &&
         same_matrices(a.P2, b.P2) && same_matrices(a.T, b.T) &&
         same_matrix(a.Upsilon, b.Upsilon) && same_matrix(a.Abar, b.Abar) &&
         ca.converged == cb.converged && ca.iterations == cb.iterations &&
         same_number(ca.final_delta, cb.final_delta) && same_number(ca.tol, cb.tol) &&
         ca.max_iters == cb.max_iters && ca.failure == cb.failure &&
         ca.failure_iteration == cb.failure_iteration && verdicts && x0s &&
         same_opt(a.J1, b.J1) && same_opt(a.J2, b.J2);
}

GainSchedule gains_of(const SolutionFile& file) {
  if (file.K1.empty()) bad("solution file carries no gains");
  if (file.kind == SolverKind::kStationary) {
    return GainSchedule::stationary(file.K1.front(), file.K2.front());
  }
  return GainSchedule::time_varying(file.K1, file.K2);
}

FiniteSolution finite_solution_of(const SolutionFile& file,
                                  const ValidatedGame& game) {
  if (file.kind != SolverKind::kFinite) bad("not a finite-horizon solution file");
  if (file.n != game.n() || file.m1 != game.m1() || file.m2 != game.m2()) {
    bad("solution dimensions do not match the problem");
  }
  FiniteSolution sol;
  sol.horizon = file.horizon;
  sol.P1 = file.P1;
  sol.P2 = file.P2;
  sol.T = file.T;
  sol.K1 = file.K1;
  sol.K2 = file.K2;
  for (int k = 0; k <= file.horizon; ++k) {
    const auto i = static_cast<std::size_t>(k);
    sol.steps.push_back(step_matrices(sol.P1[i + 1], sol.P2[i + 1], sol.T[i + 1], game));
  }
  sol.Phi = transition_products(sol, game);
  sol.Xi = xi_finite(sol, game);
  return sol;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int n,
                          int m1, int m2) {
  os << "k";
  for (int i = 1; i <= n; ++i) os << ",x_" << i;
  for (int i = 1; i <= m1; ++i) os << ",u1_" << i;
  for (int i = 1; i <= m2; ++i) os << ",u2_" << i;
  os << ",J1_cum,J2_cum,lyapunov\n";

  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  const int steps = traj.steps();
  for (int k = 0; k <= steps; ++k) {
    const auto i = static_cast<std::size_t>(k);
    os << k;
    for (int j = 0; j < n; ++j) num(traj.states[i](j));
    if (k < steps) {
      for (int j = 0; j < m1; ++j) num(traj.u1[i](j));
      for (int j = 0; j < m2; ++j) num(traj.u2[i](j));
    } else {
      for (int j = 0; j < m1 + m2; ++j) os << ',';
    }
    num(traj.running_J1[i]);
    num(traj.running_J2[i]);
    if (i < traj.lyapunov_values.size()) {
      num(traj.lyapunov_values[i]);
    } else {
      os << ',';
    }
    os << '\n';
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace stackelq::io
