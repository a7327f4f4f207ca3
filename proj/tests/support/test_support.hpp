#pragma once

#include <initializer_list>
#include <random>
#include <vector>

#include "reference_values.hpp"
#include "stackelq/game_model.hpp"
#include "stackelq/linalg.hpp"

namespace stackelq::testing {

inline Mat mat(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(static_cast<Eigen::Index>(rows.size()),
        static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Mat scalar(double v) { return Mat::Constant(1, 1, v); }

inline Mat to_mat(const reference::Ref& r) {
  Mat m(r.rows, r.cols);
  for (int i = 0; i < r.rows; ++i) {
    for (int j = 0; j < r.cols; ++j) m(i, j) = r.data[static_cast<std::size_t>(i * r.cols + j)];
  }
  return m;
}

// The scalar golden instance, x0 = 7.3.
inline GameSpec scalar_spec() {
  GameSpec g;
  g.A = scalar(1.0);
  g.B1 = scalar(2.0);
  g.B2 = scalar(1.0);
  g.Q1 = scalar(1.0);
  g.Q2 = scalar(1.0);
  g.R11 = scalar(0.6);
  g.R12 = scalar(1.0);
  g.R21 = scalar(1.0);
  g.R22 = scalar(6.2);
  g.x0 = Vec::Constant(1, 7.3);
  return g;
}

// Two-state instance mirrored in tests/oracles/reference.py.
inline GameSpec two_state_spec(bool terminal) {
  GameSpec g;
  g.A = mat({{1.1, 0.3}, {-0.2, 0.8}});
  g.B1 = mat({{1.0}, {0.5}});
  g.B2 = mat({{0.2}, {1.0}});
  g.Q1 = mat({{2.0, 0.5}, {0.5, 1.0}});
  g.Q2 = mat({{1.0, 0.0}, {0.0, 3.0}});
  g.R11 = scalar(0.7);
  g.R12 = scalar(0.4);
  g.R21 = scalar(1.3);
  g.R22 = scalar(2.5);
  if (terminal) {
    g.H1 = mat({{0.5, 0.1}, {0.1, 0.3}});
    g.H2 = mat({{1.0, -0.2}, {-0.2, 0.6}});
  }
  g.x0 = (Vec(2) << 1.5, -0.7).finished();
  return g;
}

inline Vec random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> d(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

inline Mat random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> d(0.0, 1.0);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

inline Mat random_orthogonal(std::mt19937_64& rng, int n) {
  Eigen::HouseholderQR<Mat> qr(random_matrix(rng, n, n));
  return qr.householderQ() * Mat::Identity(n, n);
}

// Standard one-player discrete ARE by plain value iteration from zero.
inline Mat dare_value_iteration(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
                                double tol = 1e-14, int max_iters = 1000000) {
  Mat x = Mat::Zero(a.rows(), a.cols());
  for (int i = 0; i < max_iters; ++i) {
    const Mat g = r + b.transpose() * x * b;
    Mat next = q + a.transpose() * x * a -
               a.transpose() * x * b * g.ldlt().solve(b.transpose() * x * a);
    next = 0.5 * (next + next.transpose());
    const double delta = (next - x).cwiseAbs().maxCoeff();
    x = next;
    if (delta < tol * (1.0 + x.cwiseAbs().maxCoeff())) break;
  }
  return x;
}

// Same equation by the structure-preserving doubling algorithm.
inline Mat dare_doubling(const Mat& a, const Mat& b, const Mat& q, const Mat& r,
                         double tol = 1e-15, int max_iters = 200) {
  const Eigen::Index n = a.rows();
  const Mat id = Mat::Identity(n, n);
  Mat ak = a;
  Mat gk = b * r.ldlt().solve(b.transpose());
  Mat hk = q;
  for (int i = 0; i < max_iters; ++i) {
    const Eigen::PartialPivLU<Mat> w(id + gk * hk);
    const Mat wa = w.solve(ak);
    const Mat wg = w.solve(gk);
    const Mat a_next = ak * wa;
    const Mat g_next = gk + ak * wg * ak.transpose();
    const Mat h_next = hk + ak.transpose() * hk * wa;
    const double delta = (h_next - hk).cwiseAbs().maxCoeff();
    ak = a_next;
    gk = 0.5 * (g_next + g_next.transpose());
    hk = 0.5 * (h_next + h_next.transpose());
    if (delta < tol * (1.0 + hk.cwiseAbs().maxCoeff())) break;
  }
  return hk;
}

inline Mat lqr_gain(const Mat& a, const Mat& b, const Mat& r, const Mat& x) {
  return -(r + b.transpose() * x * b).ldlt().solve(b.transpose() * x * a);
}

}  // namespace stackelq::testing
