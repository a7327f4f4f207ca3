#pragma once

// File formats used by the command-line tool.
//
// Problem and solution files are JSON documents. Matrices are nested row
// arrays ([[a11, a12], [a21, a22]]); vectors are flat arrays. A bare number
// is accepted as a 1x1 matrix in problem files.

#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stackelq/game_model.hpp"
#include "stackelq/riccati_finite.hpp"
#include "stackelq/riccati_infinite.hpp"
#include "stackelq/simulator.hpp"

namespace stackelq::io {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kProblemFormat = "stackelq-problem/1";
inline constexpr std::string_view kSolutionFormat = "stackelq-solution/1";

using json = nlohmann::json;

json matrix_to_json(const Mat& m);
Mat matrix_from_json(const json& j, const std::string& name);
json vector_to_json(const Vec& v);
Vec vector_from_json(const json& j, const std::string& name);

struct ProblemFile {
  GameSpec spec;
  std::optional<int> horizon;
};

// Throws Error(kInvalidInput) on malformed documents. Shape and definiteness
// problems are left to validate_spec.
ProblemFile parse_problem(const json& doc);
ProblemFile load_problem(const std::string& path);
json problem_to_json(const ProblemFile& problem);

// SHA-256 (hex) of the canonical serialization of the eleven problem
// matrices. x0 and horizon are not part of it, since gains do not depend
// on them.
std::string problem_digest(const GameSpec& spec);

enum class SolverKind { kFinite, kStationary };

std::string_view to_string(SolverKind kind);

struct ConvergenceInfo {
  bool converged = false;
  int iterations = 0;
  double final_delta = 0.0;
  double tol = 0.0;
  int max_iters = 0;
  std::optional<std::string> failure;
  std::optional<int> failure_iteration;
};

struct SolutionFile {
  SolverKind kind = SolverKind::kStationary;
  std::string tool_version{kToolVersion};
  std::string generated_at;  // not part of any comparison
  std::string input_digest;
  int n = 0, m1 = 0, m2 = 0;
  int horizon = 0;  // finite only
  // Finite: K* have N+1 entries, P*/T have N+2. Stationary: one entry each.
  std::vector<Mat> K1, K2, P1, P2, T;
  Mat Upsilon, Abar;  // stationary only
  ConvergenceInfo convergence;
  std::optional<Verdict> verdict;
  std::optional<Vec> x0;
  std::optional<double> J1, J2;
};

SolutionFile make_solution_file(const FiniteSolution& sol,
                                const ValidatedGame& game,
                                const std::string& digest,
                                std::string generated_at);

SolutionFile make_solution_file(const StationaryOutcome& outcome,
                                const Verdict& verdict,
                                const StationaryOptions& options,
                                const ValidatedGame& game,
                                const std::string& digest,
                                std::string generated_at);

json solution_to_json(const SolutionFile& file);
SolutionFile solution_from_json(const json& doc);

// Byte-stable text: keys sorted, two-space indent, trailing newline.
std::string dump(const json& doc);

void save_solution(const std::string& path, const SolutionFile& file);
SolutionFile load_solution(const std::string& path);

// Exact comparison of every numeric and metadata field except generated_at.
// NaN compares equal to NaN.
bool same_content(const SolutionFile& a, const SolutionFile& b);

// Gains stored in a solution file.
GainSchedule gains_of(const SolutionFile& file);

// Rebuilds a FiniteSolution from a finite solution file: gains and P/T are
// taken as stored, the step matrices are recomputed from the stored
// P1/P2/T, then Phi and Xi from those.
FiniteSolution finite_solution_of(const SolutionFile& file,
                                  const ValidatedGame& game);

// k,x_1..x_n,u1_1..u1_m1,u2_1..u2_m2,J1_cum,J2_cum,lyapunov with 17
// significant digits. The last row has no controls; lyapunov is empty when
// the trajectory carries no Lyapunov values.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, int n,
                          int m1, int m2);

std::string utc_timestamp();

}  // namespace stackelq::io
