#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the code paths it is used to check.

#include "covfer/spd.hpp"
#include "covfer/tensorio.hpp"

#include <Eigen/Core>

#include <array>
#include <random>
#include <vector>

namespace oracle {

using covfer::Matrix;
using covfer::Vector;

/// Eigenvalues of a symmetric 3x3 matrix, descending, from the trigonometric
/// solution of its characteristic cubic.
std::array<double, 3> sym3_cubic_roots(const Eigen::Matrix3d& a);

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
Matrix expm(const Matrix& a);

/// Two-pass population covariance over a pixel window, accumulated in long double.
Matrix brute_force_covariance(const covfer::FeatureTensor& t, int y0, int y1, int x0, int x1);

/// Minimum k-means objective over every assignment of the points to k nonempty clusters.
double exhaustive_kmeans_optimum(const std::vector<std::vector<double>>& points, int k);

/// Best training accuracy any linear separator on a dense (angle, offset) grid attains in 2-D.
double best_linear_accuracy_2d(const std::vector<std::array<double, 2>>& x, const std::vector<int>& y);

/// Random SPD matrix G G^T / d + floor * I.
Matrix random_spd(int d, std::mt19937_64& rng, double floor = 0.1);

/// Random invertible matrix with condition number at most `max_cond` (U diag V^T).
Matrix random_conditioned(int d, std::mt19937_64& rng, double max_cond);

double rel_frobenius(const Matrix& a, const Matrix& b);

} // namespace oracle
