#pragma once

// Shared fixtures and brute-force reference implementations for the tests.

#include "qiv/dataset.hpp"
#include "qiv/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace qiv::test {

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
    return m;
}

inline Vector gaussian_vector(Eigen::Index n, std::mt19937_64& rng) {
    return gaussian_matrix(n, 1, rng).col(0);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// n x p design with X'X = n I.
inline Matrix orthonormal_design(int n, int p, std::mt19937_64& rng) {
    const Matrix g = gaussian_matrix(n, p, rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    const Matrix q = qr.householderQ() * Matrix::Identity(n, p);
    return std::sqrt(static_cast<double>(n)) * q;
}

inline double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

/// Optimal objective of  min ||b||_1  s.t.  ||X'(y - X b)||_inf <= lambda  by
/// enumerating every vertex of the lifted polyhedron in (b, t) with |b| <= t.
/// Intended for p <= 3.
inline double dantzig_vertex_objective(const Matrix& X, const Vector& y, double lambda) {
    const int p = static_cast<int>(X.cols());
    const Matrix G = X.transpose() * X;
    const Vector c = X.transpose() * y;
    const int m = 4 * p;
    const int k = 2 * p;
    Matrix A = Matrix::Zero(m, k);
    Vector b(m);
    const Matrix I = Matrix::Identity(p, p);
    A.block(0, 0, p, p) = G;
    b.segment(0, p) = c.array() + lambda;
    A.block(p, 0, p, p) = -G;
    b.segment(p, p) = lambda - c.array();
    A.block(2 * p, 0, p, p) = I;
    A.block(2 * p, p, p, p) = -I;
    b.segment(2 * p, p).setZero();
    A.block(3 * p, 0, p, p) = -I;
    A.block(3 * p, p, p, p) = -I;
    b.segment(3 * p, p).setZero();

    const double scale = 1.0 + b.cwiseAbs().maxCoeff() + A.cwiseAbs().maxCoeff();
    double best = std::numeric_limits<double>::infinity();
    std::vector<bool> pick(static_cast<std::size_t>(m), false);
    std::fill(pick.begin(), pick.begin() + k, true);
    do {
        Matrix As(k, k);
        Vector bs(k);
        int r = 0;
        for (int i = 0; i < m; ++i) {
            if (!pick[static_cast<std::size_t>(i)]) continue;
            As.row(r) = A.row(i);
            bs(r) = b(i);
            ++r;
        }
        Eigen::FullPivLU<Matrix> lu(As);
        if (lu.rank() < k) continue;
        const Vector x = lu.solve(bs);
        if (((A * x - b).array() > 1e-9 * scale).any()) continue;
        best = std::min(best, x.tail(p).sum());
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return best;
}

/// 1/(p-q) * 1/(n(n-1)) * sum_{i<j} (K_ij + K_ij') with K_ij = Zt_i (U_i'U_j) Zt_j'.
inline Matrix ustat_brute_force(const Matrix& Zt, const Matrix& U) {
    const Eigen::Index n = Zt.rows();
    const Eigen::Index k = Zt.cols();
    Matrix acc = Matrix::Zero(k, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double inner = U.row(i).dot(U.row(j));
            const Matrix kij = inner * Zt.row(i).transpose() * Zt.row(j);
            acc += kij + kij.transpose();
        }
    }
    return acc / (static_cast<double>(U.cols()) * static_cast<double>(n) *
                  static_cast<double>(n - 1));
}

/// Gaussian-kernel NW smoother matrix written out term by term.
inline Matrix smoother_direct(const Matrix& V, double h) {
    const Eigen::Index n = V.rows();
    Matrix S(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double sum = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double d2 = (V.row(k) - V.row(i)).squaredNorm();
            S(i, k) = std::exp(-d2 / (2.0 * h * h));
            sum += S(i, k);
        }
        S.row(i) /= sum;
    }
    return S;
}

/// Weighted partially linear estimate computed from an explicit smoother.
inline Vector plm_theta_direct(const Matrix& Z, const Vector& Y, const Matrix& V, double h,
                               const Vector& weights) {
    const Matrix S = smoother_direct(V, h);
    const Matrix Zh = Z - S * Z;
    const Vector Yh = Y - S * Y;
    const Matrix lhs = Zh.transpose() * weights.asDiagonal() * Zh;
    const Vector rhs = Zh.transpose() * weights.asDiagonal() * Yh;
    return lhs.colPivHouseholderQr().solve(rhs);
}

/// Kind of the qiv::Error raised by f, or "" when none is raised.
template <class F>
std::string error_kind(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return "";
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double correlation(const Vector& a, const Vector& b) {
    const Vector ac = a.array() - a.mean();
    const Vector bc = b.array() - b.mean();
    return ac.dot(bc) / std::sqrt(ac.squaredNorm() * bc.squaredNorm());
}

/// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("qiv_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string operator/(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace qiv::test
