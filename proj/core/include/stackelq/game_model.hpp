#pragma once

// Problem data for the two-player leader-follower LQ game
//
//   x_{k+1} = A x_k + B1 u1_k + B2 u2_k
//   J1 = sum x'Q1x + u1'R11u1 + u2'R12u2  (+ x_{N+1}'H1x_{N+1})   follower
//   J2 = sum x'Q2x + u1'R21u1 + u2'R22u2  (+ x_{N+1}'H2x_{N+1})   leader
//
// and the rank tests behind the stabilization result (controllability of
// (A, B1), observability of (A, Q2^{1/2})).

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stackelq/linalg.hpp"

namespace stackelq {

namespace tolerance {
// PSD acceptance band for a matrix M.
double psd(const Mat& m);
inline constexpr double kPositiveDefinite = 1e-10;
inline constexpr double kSqrt = 1e-10;
inline constexpr double kAsymmetryWarning = 1e-8;
// Rank threshold relative to the largest singular value.
double rank(int n, double sigma_max);
}  // namespace tolerance

// Raw problem data. H1/H2 may be left empty (0x0), meaning zero. x0 may be
// empty when the caller only needs gains.
struct GameSpec {
  Mat A, B1, B2;
  Mat Q1, Q2;
  Mat R11, R12, R21, R22;
  Mat H1, H2;
  Vec x0;
};

enum class ViolationKind { kDimensionMismatch, kDefinitenessViolation, kNonFinite };

struct Violation {
  ViolationKind kind;
  std::string matrix;
  std::string message;
  // Offending eigenvalue for definiteness violations, NaN otherwise.
  double eigenvalue = std::numeric_limits<double>::quiet_NaN();
};

std::string to_string(ViolationKind kind);
std::string to_string(const Violation& v);

class ValidatedGame;

struct ValidationResult;

// Immutable, validated problem. Only validate_spec can construct one.
class ValidatedGame {
 public:
  const GameSpec& spec() const { return spec_; }

  int n() const { return static_cast<int>(spec_.A.rows()); }
  int m1() const { return static_cast<int>(spec_.B1.cols()); }
  int m2() const { return static_cast<int>(spec_.B2.cols()); }

  const Mat& A() const { return spec_.A; }
  const Mat& B1() const { return spec_.B1; }
  const Mat& B2() const { return spec_.B2; }
  const Mat& Q1() const { return spec_.Q1; }
  const Mat& Q2() const { return spec_.Q2; }
  const Mat& R11() const { return spec_.R11; }
  const Mat& R12() const { return spec_.R12; }
  const Mat& R21() const { return spec_.R21; }
  const Mat& R22() const { return spec_.R22; }
  const Mat& H1() const { return spec_.H1; }
  const Mat& H2() const { return spec_.H2; }
  const Vec& x0() const { return spec_.x0; }
  bool has_x0() const { return spec_.x0.size() == n(); }

 private:
  friend ValidationResult validate_spec(const GameSpec& raw);
  explicit ValidatedGame(GameSpec spec) : spec_(std::move(spec)) {}

  GameSpec spec_;
};

struct ValidationResult {
  std::optional<ValidatedGame> game;
  std::vector<Violation> violations;
  std::vector<std::string> warnings;

  bool ok() const { return game.has_value(); }
};

// Checks every invariant of GameSpec and collects all violations. Declared
// symmetric matrices are replaced by their symmetric part; H1/H2 default to
// zero. Definiteness is decided from eigenvalues so the report can name the
// offending one.
ValidationResult validate_spec(const GameSpec& raw);

// Validates or throws Error(kInvalidInput) listing every violation.
ValidatedGame validated(const GameSpec& raw);

// Symmetric S with S*S = M. Eigenvalues in [-tau_psd, 0) are clamped to 0.
// Throws Error(kNotPSD) for anything more negative.
Mat symmetric_sqrt(const Mat& m);

struct RankTest {
  int rank = 0;
  bool full = false;
  std::vector<double> singular_values;
};

// Rank of [B1, A B1, ..., A^{n-1} B1].
RankTest controllability_check(const Mat& a, const Mat& b1);

// Rank of [C2; C2 A; ...; C2 A^{n-1}] with C2 = symmetric_sqrt(Q2).
RankTest observability_check(const Mat& a, const Mat& q2);

struct AssumptionReport {
  bool controllable = false;
  int controllability_rank = 0;
  bool observable = false;
  int observability_rank = 0;
  // Controllability singular values followed by observability ones.
  std::vector<double> singular_values_used;

  bool holds() const { return controllable && observable; }
};

AssumptionReport check_assumptions(const ValidatedGame& game);

}  // namespace stackelq
