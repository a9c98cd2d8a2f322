#pragma once

#include "qiv/dataset.hpp"

#include <cstddef>
#include <utility>
#include <vector>

namespace qiv {

/// Gaussian product-kernel Nadaraya-Watson weights of `V_train` rows at the
/// point `v`. The kernel normalization cancels, so the weights are
/// exp(-||V_k - v||^2 / (2 h^2)) / sum. When the unnormalized sum falls
/// below 1e-300 the weights fall back to 1/n and `degenerate_count`, if
/// given, is incremented.
Vector nw_weights(const Vector& v, const Matrix& V_train, double h,
                  std::size_t* degenerate_count = nullptr);

/// n x n leave-in smoother: row i holds nw_weights(V_i).
Matrix nw_smoother_matrix(const Matrix& V_train, double h);

/// Each column of `values` smoothed on V and evaluated at the training points.
Matrix nw_smooth(const Matrix& values, const Matrix& V_train, double h);
Vector nw_smooth(const Vector& values, const Matrix& V_train, double h);

struct PLMFit {
    Vector theta_hat;
    double h = 0.0;
    Matrix V_train;
    /// Y_i - theta_hat' Z_i; g_hat(v) is their NW average.
    Vector g_residual_table;
    double sigma_v_sq = 0.0;
    /// Estimated covariance of theta_hat (q x q).
    Matrix asym_cov;
    /// Mean of g_hat over the training V.
    double g_bar = 0.0;

    int q() const { return static_cast<int>(theta_hat.size()); }
    /// g_hat at new instrument values (rows of V).
    Vector g_hat(const Matrix& V, std::size_t* degenerate_count = nullptr) const;
};

/// Partially linear fit Y = theta'Z + g(V) + xi with NW residualization:
/// Yhat = Y - S Y, Zhat = Z - S Z, theta = Shat^{-1} (1/n) sum Zhat_i Yhat_i.
/// Throws SingularResidualGram when lambda_min(Shat) <= kEpsPd.
PLMFit fit_plm(const Matrix& Z, const Vector& Y, const Matrix& V, double h);

/// Heteroscedastic variant with known variances: every sum in the normal
/// equations carries the weight 1/variance_i.
PLMFit fit_plm_weighted(const Matrix& Z, const Vector& Y, const Matrix& V, double h,
                        const Vector& variances);

/// n RSS(h) / (n - tr S_h)^2, or +inf when tr S_h >= n or the residual Gram
/// is singular at h.
double gcv_score(const Matrix& Z, const Vector& Y, const Matrix& V, double h);

/// 20 geometric points spanning [0.5, 5] * s_V * n^(-1/(4+r)), where s_V is
/// the mean column standard deviation of V.
std::vector<double> default_bandwidth_grid(const Matrix& V, int points = 20);

/// Grid minimizer of gcv_score; ties go to the smaller h.
/// Throws AllBandwidthsDegenerate when no grid point has a finite score.
double gcv_bandwidth(const Matrix& Z, const Vector& Y, const Matrix& V,
                     const std::vector<double>& grid);

/// theta_j -/+ z_{(1+level)/2} * sqrt(asym_cov_jj).
std::vector<std::pair<double, double>> confidence_intervals(const PLMFit& fit, double level);

}  // namespace qiv
