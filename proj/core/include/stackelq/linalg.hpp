#pragma once

#include <Eigen/Dense>
#include <limits>

namespace stackelq {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr double kMachineEps = std::numeric_limits<double>::epsilon();

// Largest |entry|. Used for every "max-abs" tolerance in the library.
double max_abs(const Mat& m);

// Induced infinity norm (max row sum).
double inf_norm(const Mat& m);

Mat symmetrize(const Mat& m);

// Largest |m - m^T| entry.
double asymmetry(const Mat& m);

// Smallest eigenvalue of the symmetric part of m.
double min_symmetric_eigenvalue(const Mat& m);

// Largest eigenvalue modulus, from a full eigendecomposition.
double spectral_radius(const Mat& m);

// 2-norm condition number sigma_max / sigma_min (infinity when singular).
double condition_number(const Mat& m);

double spectral_norm(const Mat& m);

double min_singular_value(const Mat& m);

bool all_finite(const Mat& m);

}  // namespace stackelq
