#include "qiv/plm.hpp"

#include "qiv/error.hpp"
#include "qiv/instrument.hpp"
#include "qiv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qiv {

namespace {

constexpr double kDegenerateSum = 1e-300;

void check_bandwidth(double h) {
    if (!(h > 0.0) || !std::isfinite(h))
        throw validation_error("InvalidBandwidth", "bandwidth must be positive and finite");
}

// Unnormalized kernel values of every training row at v, written into `out`.
void kernel_row(const double* v, const Matrix& V_train, double inv_two_h2, Vector& out) {
    const Eigen::Index n = V_train.rows();
    const Eigen::Index r = V_train.cols();
    for (Eigen::Index k = 0; k < n; ++k) {
        double d2 = 0.0;
        for (Eigen::Index j = 0; j < r; ++j) {
            const double diff = V_train(k, j) - v[j];
            d2 += diff * diff;
        }
        out(k) = std::exp(-d2 * inv_two_h2);
    }
}

bool normalize(Vector& w) {
    const double sum = w.sum();
    if (!(sum >= kDegenerateSum)) {
        w.setConstant(1.0 / static_cast<double>(w.size()));
        return false;
    }
    w /= sum;
    return true;
}

struct Residualized {
    Matrix Zhat;
    Vector Yhat;
    double trace = 0.0;
};

Residualized residualize(const Matrix& Z, const Vector& Y, const Matrix& V, double h) {
    const Matrix S = nw_smoother_matrix(V, h);
    Residualized r;
    r.Zhat = Z - S * Z;
    r.Yhat = Y - S * Y;
    r.trace = S.trace();
    return r;
}

void check_inputs(const Matrix& Z, const Vector& Y, const Matrix& V) {
    if (Z.rows() != Y.size() || V.rows() != Y.size())
        throw validation_error("LengthMismatch", "Z, Y and V must share the row count");
    if (Z.cols() < 1) throw validation_error("EmptySelection", "Z has no columns");
    if (V.cols() < 1) throw validation_error("InvalidDimensions", "V has no columns");
}

PLMFit fit_core(const Matrix& Z, const Vector& Y, const Matrix& V, double h,
                const Vector& weights) {
    check_bandwidth(h);
    const double n = static_cast<double>(Y.size());
    const Residualized r = residualize(Z, Y, V, h);

    const Matrix S = r.Zhat.transpose() * weights.asDiagonal() * r.Zhat / n;
    const Vector rhs = r.Zhat.transpose() * weights.asDiagonal() * r.Yhat / n;
    const double wbar = weights.mean();
    const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(S).eigenvalues()(0) / wbar;
    if (!(min_eig > kEpsPd))
        throw numerical_error("SingularResidualGram",
                              "Z is explained by V (min eigenvalue " + format_double(min_eig) +
                                  ")");
    Eigen::LDLT<Matrix> ldlt(S);

    PLMFit fit;
    fit.theta_hat = ldlt.solve(rhs);
    fit.h = h;
    fit.V_train = V;
    fit.g_residual_table = Y - Z * fit.theta_hat;
    const Vector xi = r.Yhat - r.Zhat * fit.theta_hat;
    fit.sigma_v_sq = xi.squaredNorm() / n;
    const double scale = xi.cwiseAbs2().cwiseProduct(weights).sum() / n;
    Matrix cov = scale * ldlt.solve(Matrix::Identity(S.rows(), S.cols())) / n;
    fit.asym_cov = 0.5 * (cov + cov.transpose());
    fit.g_bar = fit.g_hat(V).mean();
    return fit;
}

}  // namespace

Vector nw_weights(const Vector& v, const Matrix& V_train, double h, std::size_t* degenerate_count) {
    check_bandwidth(h);
    if (v.size() != V_train.cols())
        throw validation_error("LengthMismatch", "evaluation point has the wrong dimension");
    Vector w(V_train.rows());
    kernel_row(v.data(), V_train, 0.5 / (h * h), w);
    if (!normalize(w) && degenerate_count) ++*degenerate_count;
    return w;
}

Matrix nw_smoother_matrix(const Matrix& V_train, double h) {
    check_bandwidth(h);
    const Eigen::Index n = V_train.rows();
    Matrix S(n, n);
    Vector row(n);
    Vector point(V_train.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
        point = V_train.row(i).transpose();
        kernel_row(point.data(), V_train, 0.5 / (h * h), row);
        normalize(row);
        S.row(i) = row.transpose();
    }
    return S;
}

Matrix nw_smooth(const Matrix& values, const Matrix& V_train, double h) {
    if (values.rows() != V_train.rows())
        throw validation_error("LengthMismatch", "values and V row counts differ");
    return nw_smoother_matrix(V_train, h) * values;
}

Vector nw_smooth(const Vector& values, const Matrix& V_train, double h) {
    return nw_smooth(Matrix(values), V_train, h).col(0);
}

Vector PLMFit::g_hat(const Matrix& V, std::size_t* degenerate_count) const {
    if (V.cols() != V_train.cols())
        throw validation_error("LengthMismatch", "instrument dimension differs from the fit");
    Vector out(V.rows());
    Vector w(V_train.rows());
    Vector point(V.cols());
    for (Eigen::Index i = 0; i < V.rows(); ++i) {
        point = V.row(i).transpose();
        kernel_row(point.data(), V_train, 0.5 / (h * h), w);
        if (!normalize(w) && degenerate_count) ++*degenerate_count;
        out(i) = w.dot(g_residual_table);
    }
    return out;
}

PLMFit fit_plm(const Matrix& Z, const Vector& Y, const Matrix& V, double h) {
    check_inputs(Z, Y, V);
    return fit_core(Z, Y, V, h, Vector::Ones(Y.size()));
}

PLMFit fit_plm_weighted(const Matrix& Z, const Vector& Y, const Matrix& V, double h,
                        const Vector& variances) {
    check_inputs(Z, Y, V);
    if (variances.size() != Y.size())
        throw validation_error("LengthMismatch", "one variance per observation required");
    if (!(variances.minCoeff() > 0.0))
        throw validation_error("InvalidVariance", "variances must be positive");
    return fit_core(Z, Y, V, h, variances.cwiseInverse());
}

double gcv_score(const Matrix& Z, const Vector& Y, const Matrix& V, double h) {
    check_inputs(Z, Y, V);
    check_bandwidth(h);
    const double n = static_cast<double>(Y.size());
    const Residualized r = residualize(Z, Y, V, h);
    if (!(r.trace < n)) return std::numeric_limits<double>::infinity();
    const Matrix S = r.Zhat.transpose() * r.Zhat / n;
    if (!(Eigen::SelfAdjointEigenSolver<Matrix>(S).eigenvalues()(0) > kEpsPd))
        return std::numeric_limits<double>::infinity();
    const Vector theta = S.ldlt().solve(r.Zhat.transpose() * r.Yhat / n);
    const double rss = (r.Yhat - r.Zhat * theta).squaredNorm();
    const double denom = n - r.trace;
    return n * rss / (denom * denom);
}

std::vector<double> default_bandwidth_grid(const Matrix& V, int points) {
    if (points < 1) throw validation_error("InvalidGrid", "grid needs at least one point");
    const double n = static_cast<double>(V.rows());
    const double r = static_cast<double>(V.cols());
    double s = 0.0;
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
        const Vector c = V.col(j).array() - V.col(j).mean();
        s += std::sqrt(c.squaredNorm() / n);
    }
    s /= r;
    if (!(s > 0.0)) s = 1.0;
    const double center = s * std::pow(n, -1.0 / (4.0 + r));
    const double lo = 0.5 * center;
    const double hi = 5.0 * center;
    std::vector<double> grid;
    for (int k = 0; k < points; ++k) {
        const double t = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
        grid.push_back(lo * std::pow(hi / lo, t));
    }
    return grid;
}

double gcv_bandwidth(const Matrix& Z, const Vector& Y, const Matrix& V,
                     const std::vector<double>& grid) {
    if (grid.empty()) throw validation_error("InvalidGrid", "bandwidth grid is empty");
    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    double best_h = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (double h : sorted) {
        const double score = gcv_score(Z, Y, V, h);
        if (score < best) {
            best = score;
            best_h = h;
        }
    }
    if (!std::isfinite(best))
        throw numerical_error("AllBandwidthsDegenerate", "no bandwidth yields a finite GCV score");
    return best_h;
}

std::vector<std::pair<double, double>> confidence_intervals(const PLMFit& fit, double level) {
    if (!(level > 0.0 && level < 1.0))
        throw validation_error("InvalidLevel", "level must lie in (0, 1)");
    const double z = normal_quantile(0.5 * (1.0 + level));
    std::vector<std::pair<double, double>> out;
    for (int j = 0; j < fit.q(); ++j) {
        const double half = z * std::sqrt(std::max(0.0, fit.asym_cov(j, j)));
        out.emplace_back(fit.theta_hat(j) - half, fit.theta_hat(j) + half);
    }
    return out;
}

}  // namespace qiv
