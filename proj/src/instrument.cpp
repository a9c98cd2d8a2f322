#include "qiv/instrument.hpp"

#include "qiv/error.hpp"
#include "qiv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace qiv {

Matrix WhitenPlan::apply(const Matrix& Z, const Matrix& U) const {
    if (Z.cols() != q())
        throw validation_error("LengthMismatch", "Z has the wrong number of columns");
    if (!ustar_indices.empty() && ustar_indices.values().back() >= U.cols())
        throw validation_error("MissingUStarColumns", "U lacks columns used by the instrument");
    const Matrix Ustar = gather_columns(U, ustar_indices);
    Matrix Zt(Z.rows(), Z.cols() + d());
    Zt.leftCols(Z.cols()) = Z;
    Zt.rightCols(d()) = (Ustar - Z * sigma_ustar_z.transpose()) * whitener;
    return Zt;
}

Matrix InstrumentPlan::instrument(const Matrix& Z, const Matrix& U) const {
    return whiten.apply(Z, U) * A.transpose();
}

std::vector<int> rank_u_columns(const Matrix& Z, const Matrix& U) {
    const Vector l1 = cross_correlation(U, Z).cwiseAbs().rowwise().sum();
    std::vector<int> order(static_cast<std::size_t>(U.cols()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return l1(a) > l1(b); });
    return order;
}

Whitened whiten(const Matrix& Z, const Matrix& U, const IndexSet& ustar_indices) {
    if (ustar_indices.empty())
        throw validation_error("EmptySelection", "U* needs at least one column");
    ustar_indices.check_bounds(static_cast<int>(U.cols()));
    const Matrix Ustar = gather_columns(U, ustar_indices);

    WhitenPlan plan;
    plan.ustar_indices = ustar_indices;
    plan.sigma_ustar_ustar = cross_covariance(Ustar, Ustar);
    plan.sigma_ustar_z = cross_covariance(Ustar, Z);
    Matrix schur = plan.sigma_ustar_ustar - plan.sigma_ustar_z * plan.sigma_ustar_z.transpose();
    schur = 0.5 * (schur + schur.transpose());
    const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(schur).eigenvalues()(0);
    if (!(min_eig > kEpsPd))
        throw numerical_error("DegenerateSchurComplement",
                              "U* is linearly dependent on Z (min eigenvalue " +
                                  format_double(min_eig) + ")");
    plan.whitener = inverse_sqrt_spd(schur, kEpsPd);

    Whitened out;
    out.Ztilde = plan.apply(Z, U);
    out.plan = std::move(plan);
    return out;
}

Matrix ustat_cross_gram(const Matrix& Ztilde, const Matrix& U) {
    const Eigen::Index n = Ztilde.rows();
    if (n < 2) throw validation_error("TooFewObservations", "U-statistic needs n >= 2");
    if (U.rows() != n) throw validation_error("LengthMismatch", "Ztilde and U row counts differ");
    if (U.cols() == 0) throw validation_error("EmptySelection", "U has no columns");

    const Matrix W = Ztilde.transpose() * U;
    const Vector row_sq = U.rowwise().squaredNorm();
    const Matrix diag = Ztilde.transpose() * row_sq.asDiagonal() * Ztilde;
    Matrix M = W * W.transpose() - diag;
    M = 0.5 * (M + M.transpose());
    const double scale = static_cast<double>(U.cols()) * static_cast<double>(n) *
                         static_cast<double>(n - 1);
    return M / scale;
}

SpectralFactor spectral_factor(const Matrix& M, double rank_tol, int d) {
    if (M.rows() != M.cols()) throw validation_error("NotSquare", "matrix must be square");
    if (d < 0 || d > M.rows()) throw validation_error("InvalidDimensions", "d out of range");
    const Matrix sym = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    const Eigen::Index k = sym.rows();
    const Vector values = eig.eigenvalues().reverse();
    const Matrix vectors = eig.eigenvectors().rowwise().reverse();

    const double lambda_max = values(0);
    const double spread = values.cwiseAbs().maxCoeff();
    if (!(lambda_max > 0.0) || lambda_max <= 1e-12 * spread)
        throw numerical_error("ZeroMatrix", "cross-Gram estimate carries no positive spectrum");

    int rank = 0;
    while (rank < k && values(rank) >= rank_tol * lambda_max) ++rank;

    SpectralFactor f;
    f.rank = rank;
    f.eigenvalues = values.head(rank);
    f.Q1 = vectors.leftCols(rank);
    for (int j = 0; j < rank; ++j) {
        Eigen::Index arg = 0;
        f.Q1.col(j).cwiseAbs().maxCoeff(&arg);
        if (f.Q1(arg, j) < 0.0) f.Q1.col(j) *= -1.0;
    }
    f.Q12 = f.Q1.bottomRows(d);
    return f;
}

double effective_rank_tol(const Matrix& M, double rank_tol) {
    const Vector values = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (M + M.transpose())).eigenvalues();
    const double lambda_max = values(values.size() - 1);
    const double lambda_min = values(0);
    if (!(lambda_max > 0.0) || lambda_min >= 0.0) return rank_tol;
    return std::min(1.0, std::max(rank_tol, -lambda_min / lambda_max));
}

namespace {

double cutoff(const Matrix& M, double rank_tol, bool noise_floor) {
    return noise_floor ? effective_rank_tol(M, rank_tol) : rank_tol;
}

IndexSet top_ranked(const Matrix& Z, const Matrix& U, int d) {
    auto order = rank_u_columns(Z, U);
    order.resize(static_cast<std::size_t>(d));
    return IndexSet(std::move(order));
}

void check_d(const Matrix& Z, const Matrix& U, int d) {
    if (Z.rows() != U.rows()) throw validation_error("LengthMismatch", "Z and U row counts differ");
    if (d < 1 || d > U.cols())
        throw validation_error("InvalidDimensions",
                               "d must lie in [1, " + std::to_string(U.cols()) + "]");
}

}  // namespace

InstrumentBuild build_instrument_m1(const Matrix& Z, const Matrix& U, int d, double rank_tol,
                                    bool noise_floor) {
    check_d(Z, U, d);
    Whitened w = whiten(Z, U, top_ranked(Z, U, d));
    const Matrix M = ustat_cross_gram(w.Ztilde, U);
    SpectralFactor f = spectral_factor(M, cutoff(M, rank_tol, noise_floor), d);

    InstrumentBuild out;
    out.plan.whiten = std::move(w.plan);
    out.plan.A = f.Q1.transpose();
    out.plan.Q1 = f.Q1;
    out.plan.Q12 = f.Q12;
    out.plan.rank = f.rank;
    out.plan.eigenvalues = f.eigenvalues;
    out.plan.method = InstrumentMethod::Method1;
    out.V = w.Ztilde * out.plan.A.transpose();
    return out;
}

DSelection select_d(const Matrix& Z, const Matrix& U, int d_max, double rank_tol,
                    bool noise_floor) {
    if (d_max < 1) throw validation_error("InvalidDimensions", "d_max must be >= 1");
    const int limit = std::min(d_max, static_cast<int>(U.cols()));
    const auto order = rank_u_columns(Z, U);

    DSelection sel;
    for (int d = 1; d <= limit; ++d) {
        IndexSet ustar(std::vector<int>(order.begin(), order.begin() + d));
        Whitened w = whiten(Z, U, ustar);
        int r = 0;
        try {
            const Matrix M = ustat_cross_gram(w.Ztilde, U);
            r = spectral_factor(M, cutoff(M, rank_tol, noise_floor), d).rank;
        } catch (const Error& e) {
            if (e.kind() != "ZeroMatrix") throw;
        }
        sel.ranks.push_back(r);
        sel.d = d;
        if (r - d <= 1) return sel;
    }
    sel.hit_limit = true;
    return sel;
}

Vector method2_direction(const Matrix& projector, const Matrix& gram, double c, double c_k) {
    if (!(c > 0.0) || !(c_k > 0.0))
        throw validation_error("InvalidRidge", "c and c_k must be positive");
    const Eigen::Index k = gram.rows();
    const Matrix ridge = gram + c_k * Matrix::Identity(k, k);
    Eigen::LDLT<Matrix> ldlt(ridge);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0))
        throw numerical_error("DegenerateGram", "ridge-regularized Gram is singular");

    // Rows A_k solve  A_k (G + c_k I) = D_k G + c c_k e_k / 2; the system is
    // symmetric, so solve for the transposes.
    Matrix rhs = projector * gram + 0.5 * c * c_k * Matrix::Identity(k, k);
    const Matrix rows = ldlt.solve(rhs.transpose()).transpose();

    Vector a(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double norm = rows.row(j).norm();
        const double inner = rows.row(j).dot(rows.row(0));
        a(j) = (j == 0 || inner >= 0.0) ? norm : -norm;
    }
    const double len = a.norm();
    if (!(len > 0.0)) throw numerical_error("DegenerateGram", "Method-2 direction vanished");
    return a / len;
}

InstrumentBuild build_instrument_m2(const Matrix& Z, const Matrix& U, double c, double c_k,
                                    double rank_tol, bool noise_floor) {
    check_d(Z, U, 1);
    Whitened w = whiten(Z, U, top_ranked(Z, U, 1));
    const Matrix M = ustat_cross_gram(w.Ztilde, U);
    SpectralFactor f = spectral_factor(M, cutoff(M, rank_tol, noise_floor), 1);

    const double n = static_cast<double>(w.Ztilde.rows());
    const Matrix gram = w.Ztilde.transpose() * w.Ztilde / n;
    const Vector a = method2_direction(f.Q1 * f.Q1.transpose(), gram, c, c_k);

    InstrumentBuild out;
    out.plan.whiten = std::move(w.plan);
    out.plan.A = a.transpose();
    out.plan.Q1 = f.Q1;
    out.plan.Q12 = f.Q12;
    out.plan.rank = 1;
    out.plan.eigenvalues = f.eigenvalues;
    out.plan.method = InstrumentMethod::Method2;
    out.V = w.Ztilde * a;
    return out;
}

}  // namespace qiv
