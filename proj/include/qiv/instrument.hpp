#pragma once

#include "qiv/dataset.hpp"

#include <string>
#include <vector>

namespace qiv {

/// Positive-definiteness floor for the Schur complement and residual Grams.
inline constexpr double kEpsPd = 1e-8;
/// Eigenvalues below rank_tol * lambda_max are treated as zero.
inline constexpr double kDefaultRankTol = 0.01;

/// Learned map (Z, U) -> Ztilde = (Z, Utilde) with
/// Utilde = W (U* - S_{U*,Z} Z) and W = (S_{U*,U*} - S_{U*,Z} S_{Z,U*})^{-1/2}.
struct WhitenPlan {
    /// Positions of U* within the columns of U.
    IndexSet ustar_indices;
    Matrix sigma_ustar_ustar;
    Matrix sigma_ustar_z;
    Matrix whitener;

    int q() const { return static_cast<int>(sigma_ustar_z.cols()); }
    int d() const { return ustar_indices.size(); }

    /// Ztilde for new rows; U must contain every U* position.
    Matrix apply(const Matrix& Z, const Matrix& U) const;
};

enum class InstrumentMethod { Method1, Method2 };

struct InstrumentPlan {
    WhitenPlan whiten;
    /// rank x (q + d); V = A Ztilde.
    Matrix A;
    /// (q + d) x k leading eigenvectors of the cross-Gram estimate.
    Matrix Q1;
    /// Bottom d rows of Q1.
    Matrix Q12;
    /// Dimension of V.
    int rank = 0;
    /// Retained eigenvalues, descending.
    Vector eigenvalues;
    InstrumentMethod method = InstrumentMethod::Method1;

    /// V for new rows (n x rank).
    Matrix instrument(const Matrix& Z, const Matrix& U) const;
};

/// Orders U columns by descending ||corr(U_k, Z)||_1; ties keep the
/// smaller index first. Returns zero-based positions.
std::vector<int> rank_u_columns(const Matrix& Z, const Matrix& U);

struct Whitened {
    Matrix Ztilde;
    WhitenPlan plan;
};

/// Throws DegenerateSchurComplement when U* is (numerically) a linear
/// function of Z.
Whitened whiten(const Matrix& Z, const Matrix& U, const IndexSet& ustar_indices);

/// Symmetrized U-statistic estimate of Sigma_{U,Zt}' Sigma_{U,Zt} / (p - q):
///
///   1/(p-q) * 1/(n(n-1)) * sum_{i != j} Zt_i (U_i' U_j) Zt_j'
///
/// evaluated in O(n (p - q) (q + d)) through the full double sum minus its
/// diagonal.
Matrix ustat_cross_gram(const Matrix& Ztilde, const Matrix& U);

struct SpectralFactor {
    Matrix Q1;
    Matrix Q12;
    Vector eigenvalues;
    int rank = 0;
};

/// Eigendecomposition of the symmetrized M. Keeps eigenpairs with
/// lambda >= rank_tol * lambda_max; Q12 is the bottom `d` rows of Q1.
/// Eigenvector signs are fixed so that each column's largest-magnitude
/// entry is positive. Throws ZeroMatrix when lambda_max is not positive.
SpectralFactor spectral_factor(const Matrix& M, double rank_tol, int d);

/// min(1, max(rank_tol, -lambda_min / lambda_max)). The population cross-Gram is
/// positive semidefinite, so the magnitude of a negative eigenvalue of the
/// U-statistic estimate measures its sampling noise; positive eigenvalues no
/// larger than that are not counted towards the rank.
double effective_rank_tol(const Matrix& M, double rank_tol);

struct InstrumentBuild {
    InstrumentPlan plan;
    Matrix V;
    std::vector<std::string> warnings;
};

/// Method 1 with the top-d ranked U columns: A = Q1'. With `noise_floor`
/// the rank cut uses effective_rank_tol().
InstrumentBuild build_instrument_m1(const Matrix& Z, const Matrix& U, int d,
                                    double rank_tol = kDefaultRankTol, bool noise_floor = true);

struct DSelection {
    int d = 1;
    /// r_1, r_2, ... for every d tried.
    std::vector<int> ranks;
    bool hit_limit = false;
};

/// Smallest d <= d_max whose cross-Gram rank r_d satisfies r_d - d <= 1.
DSelection select_d(const Matrix& Z, const Matrix& U, int d_max,
                    double rank_tol = kDefaultRankTol, bool noise_floor = true);

/// Closed-form row vector for Method 2 before sign resolution:
/// A_k = (D_k G + c c_k e_k / 2)(G + c_k I)^{-1}, a_k = +-||A_k||, with
/// sign(a_1) = +1 and sign(a_k) = sign(<A_k, A_1>). Returns the unit-norm
/// vector (a_1, ..., a_{q+1}).
Vector method2_direction(const Matrix& projector, const Matrix& gram, double c, double c_k);

/// Method 2: d = 1 with the first-ranked U column, scalar V.
InstrumentBuild build_instrument_m2(const Matrix& Z, const Matrix& U, double c = 2.0,
                                    double c_k = 0.2, double rank_tol = kDefaultRankTol,
                                    bool noise_floor = true);

}  // namespace qiv
