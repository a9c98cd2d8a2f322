#pragma once

#include "qiv/dataset.hpp"

namespace qiv {

/// Divide-by-n cross covariance of the columns of A and B (A.cols() x B.cols()).
Matrix cross_covariance(const Matrix& A, const Matrix& B);

/// Divide-by-n column correlations between A and B; throws
/// ZeroVarianceColumn if any column is constant.
Matrix cross_correlation(const Matrix& A, const Matrix& B);

/// Symmetric inverse square root via eigendecomposition with the
/// spectrum floored at `floor`.
Matrix inverse_sqrt_spd(const Matrix& S, double floor);

/// Standard normal quantile.
double normal_quantile(double probability);

/// Sample standard deviation with divide-by-(m-1); 0 for fewer than two values.
double sample_sd(const std::vector<double>& values);
double mean(const std::vector<double>& values);

}  // namespace qiv
