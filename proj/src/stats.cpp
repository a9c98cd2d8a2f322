#include "qiv/stats.hpp"

#include "qiv/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <numeric>

namespace qiv {

Matrix cross_covariance(const Matrix& A, const Matrix& B) {
    const double n = static_cast<double>(A.rows());
    Matrix a = A.rowwise() - A.colwise().mean();
    Matrix b = B.rowwise() - B.colwise().mean();
    return a.transpose() * b / n;
}

Matrix cross_correlation(const Matrix& A, const Matrix& B) {
    Matrix cov = cross_covariance(A, B);
    auto sd = [](const Matrix& M) {
        Matrix c = M.rowwise() - M.colwise().mean();
        Vector s = (c.colwise().squaredNorm() / static_cast<double>(M.rows())).array().sqrt();
        for (Eigen::Index j = 0; j < s.size(); ++j)
            if (!(s(j) > 0.0))
                throw validation_error("ZeroVarianceColumn",
                                       "column " + std::to_string(j + 1) + " is constant");
        return s;
    };
    Vector sa = sd(A);
    Vector sb = sd(B);
    return (cov.array().colwise() / sa.array()).rowwise() / sb.transpose().array();
}

Matrix inverse_sqrt_spd(const Matrix& S, double floor) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (S + S.transpose()));
    Vector inv_root = eig.eigenvalues().cwiseMax(floor).cwiseSqrt().cwiseInverse();
    return eig.eigenvectors() * inv_root.asDiagonal() * eig.eigenvectors().transpose();
}

double normal_quantile(double probability) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), probability);
}

double mean(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double sample_sd(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    const double m = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

}  // namespace qiv
