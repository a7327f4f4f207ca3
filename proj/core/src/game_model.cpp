#include "stackelq/game_model.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "stackelq/error.hpp"

namespace stackelq {

namespace tolerance {
double psd(const Mat& m) { return 1e-8 * (1.0 + inf_norm(m)); }
double rank(int n, double sigma_max) { return n * kMachineEps * sigma_max; }
}  // namespace tolerance

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kDimensionMismatch: return "DimensionMismatch";
    case ViolationKind::kDefinitenessViolation: return "DefinitenessViolation";
    case ViolationKind::kNonFinite: return "NonFinite";
  }
  return "Unknown";
}

std::string to_string(const Violation& v) {
  std::ostringstream os;
  os << to_string(v.kind) << " [" << v.matrix << "]: " << v.message;
  return os.str();
}

namespace {

std::string shape(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

struct Checker {
  std::vector<Violation> violations;
  std::vector<std::string> warnings;

  bool expect_shape(const std::string& name, const Mat& m, Eigen::Index rows,
                    Eigen::Index cols) {
    if (m.rows() == rows && m.cols() == cols) return true;
    violations.push_back({ViolationKind::kDimensionMismatch, name,
                          "expected " + std::to_string(rows) + "x" +
                              std::to_string(cols) + ", got " + shape(m)});
    return false;
  }

  bool expect_finite(const std::string& name, const Mat& m) {
    if (m.allFinite()) return true;
    violations.push_back(
        {ViolationKind::kNonFinite, name, "contains NaN or Inf"});
    return false;
  }

  void symmetrize_in_place(const std::string& name, Mat& m) {
    const double asym = asymmetry(m);
    if (asym > tolerance::kAsymmetryWarning) {
      std::ostringstream os;
      os << name << " is not symmetric (max |M - M^T| = " << asym
         << "); using (M + M^T)/2";
      warnings.push_back(os.str());
    }
    m = symmetrize(m);
  }

  void expect_psd(const std::string& name, const Mat& m) {
    const double lo = min_symmetric_eigenvalue(m);
    if (lo >= -tolerance::psd(m)) return;
    std::ostringstream os;
    os << "not positive semidefinite, smallest eigenvalue " << lo;
    violations.push_back(
        {ViolationKind::kDefinitenessViolation, name, os.str(), lo});
  }

  void expect_pd(const std::string& name, const Mat& m) {
    const double lo = min_symmetric_eigenvalue(m);
    if (lo > tolerance::kPositiveDefinite) return;
    std::ostringstream os;
    os << "not positive definite, smallest eigenvalue " << lo;
    violations.push_back(
        {ViolationKind::kDefinitenessViolation, name, os.str(), lo});
  }
};

RankTest rank_of(const Mat& stacked, int n) {
  RankTest out;
  if (stacked.size() == 0) return out;
  Eigen::JacobiSVD<Mat> svd(stacked);
  const auto& s = svd.singularValues();
  out.singular_values.assign(s.data(), s.data() + s.size());
  const double sigma_max = s.size() > 0 ? s(0) : 0.0;
  const double thresh = tolerance::rank(n, sigma_max);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > thresh && s(i) > 0.0) ++out.rank;
  }
  out.full = out.rank == n;
  return out;
}

}  // namespace

ValidationResult validate_spec(const GameSpec& raw) {
  Checker c;
  GameSpec g = raw;

  const Eigen::Index n = g.A.rows();
  if (n == 0 || g.A.cols() != n) {
    c.violations.push_back({ViolationKind::kDimensionMismatch, "A",
                            "A must be square and non-empty, got " + shape(g.A)});
  }
  const Eigen::Index m1 = g.B1.cols();
  const Eigen::Index m2 = g.B2.cols();
  if (m1 == 0) {
    c.violations.push_back({ViolationKind::kDimensionMismatch, "B1",
                            "B1 needs at least one column"});
  }
  if (m2 == 0) {
    c.violations.push_back({ViolationKind::kDimensionMismatch, "B2",
                            "B2 needs at least one column"});
  }
  if (g.H1.size() == 0) g.H1 = Mat::Zero(n, n);
  if (g.H2.size() == 0) g.H2 = Mat::Zero(n, n);

  struct Entry {
    const char* name;
    Mat* m;
    Eigen::Index rows, cols;
    enum { kGeneral, kPsd, kPd } kind;
  };
  Entry entries[] = {
      {"A", &g.A, n, n, Entry::kGeneral},
      {"B1", &g.B1, n, m1, Entry::kGeneral},
      {"B2", &g.B2, n, m2, Entry::kGeneral},
      {"Q1", &g.Q1, n, n, Entry::kPsd},
      {"Q2", &g.Q2, n, n, Entry::kPsd},
      {"R11", &g.R11, m1, m1, Entry::kPd},
      {"R12", &g.R12, m2, m2, Entry::kPsd},
      {"R21", &g.R21, m1, m1, Entry::kPd},
      {"R22", &g.R22, m2, m2, Entry::kPd},
      {"H1", &g.H1, n, n, Entry::kPsd},
      {"H2", &g.H2, n, n, Entry::kPsd},
  };
  for (auto& e : entries) {
    // A's shape was already reported above.
    const bool shaped = std::string(e.name) == "A"
                            ? (n > 0 && g.A.cols() == n)
                            : c.expect_shape(e.name, *e.m, e.rows, e.cols);
    const bool finite = c.expect_finite(e.name, *e.m);
    if (!shaped || !finite || e.kind == Entry::kGeneral) continue;
    c.symmetrize_in_place(e.name, *e.m);
    if (e.kind == Entry::kPsd) {
      c.expect_psd(e.name, *e.m);
    } else {
      c.expect_pd(e.name, *e.m);
    }
  }
  if (g.x0.size() != 0) {
    if (g.x0.size() != n) {
      c.violations.push_back({ViolationKind::kDimensionMismatch, "x0",
                              "expected length " + std::to_string(n) +
                                  ", got " + std::to_string(g.x0.size())});
    } else {
      c.expect_finite("x0", g.x0);
    }
  }

  ValidationResult out;
  out.violations = std::move(c.violations);
  out.warnings = std::move(c.warnings);
  if (out.violations.empty()) out.game = ValidatedGame(std::move(g));
  return out;
}

ValidatedGame validated(const GameSpec& raw) {
  auto r = validate_spec(raw);
  if (r.ok()) return std::move(*r.game);
  std::ostringstream os;
  os << r.violations.size() << " violation(s)";
  for (const auto& v : r.violations) os << "; " << to_string(v);
  throw Error(ErrorCode::kInvalidInput, os.str());
}

Mat symmetric_sqrt(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "symmetric_sqrt needs a square matrix, got " + shape(m));
  }
  if (m.size() == 0) return m;
  const Mat s = symmetrize(m);
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  Vec ev = es.eigenvalues();
  const double tol = tolerance::psd(s);
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol) {
      std::ostringstream os;
      os << "eigenvalue " << ev(i) << " below -" << tol;
      throw Error(ErrorCode::kNotPSD, os.str());
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  const Mat& v = es.eigenvectors();
  return symmetrize(v * ev.asDiagonal() * v.transpose());
}

RankTest controllability_check(const Mat& a, const Mat& b1) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b1.rows() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "controllability_check: A " + shape(a) + ", B1 " + shape(b1));
  }
  const Eigen::Index m = b1.cols();
  Mat krylov(n, n * m);
  Mat block = b1;
  for (Eigen::Index i = 0; i < n; ++i) {
    krylov.middleCols(i * m, m) = block;
    block = a * block;
  }
  return rank_of(krylov, static_cast<int>(n));
}

RankTest observability_check(const Mat& a, const Mat& q2) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q2.rows() != n || q2.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "observability_check: A " + shape(a) + ", Q2 " + shape(q2));
  }
  // Eigenvalues of Q2 at round-off level would turn into ~1e-8 singular
  // values after the square root, so they are zeroed before the root.
  Mat c2 = symmetric_sqrt(q2);
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(q2));
    Vec ev = es.eigenvalues();
    const double floor = tolerance::rank(static_cast<int>(n),
                                         ev.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      ev(i) = ev(i) > floor ? std::sqrt(ev(i)) : 0.0;
    }
    c2 = symmetrize(es.eigenvectors() * ev.asDiagonal() *
                    es.eigenvectors().transpose());
  }
  Mat stacked(n * n, n);
  Mat block = c2;
  for (Eigen::Index i = 0; i < n; ++i) {
    stacked.middleRows(i * n, n) = block;
    block = block * a;
  }
  return rank_of(stacked, static_cast<int>(n));
}

AssumptionReport check_assumptions(const ValidatedGame& game) {
  const auto ctrb = controllability_check(game.A(), game.B1());
  const auto obsv = observability_check(game.A(), game.Q2());
  AssumptionReport r;
  r.controllable = ctrb.full;
  r.controllability_rank = ctrb.rank;
  r.observable = obsv.full;
  r.observability_rank = obsv.rank;
  r.singular_values_used = ctrb.singular_values;
  r.singular_values_used.insert(r.singular_values_used.end(),
                                obsv.singular_values.begin(),
                                obsv.singular_values.end());
  return r;
}

}  // namespace stackelq
