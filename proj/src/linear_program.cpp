#include "qiv/linear_program.hpp"

#include "qiv/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace qiv {

namespace {

class Tableau {
public:
    Tableau(const Matrix& A, const Vector& b, double pivot_eps)
        : m_(static_cast<int>(A.rows())), nv_(static_cast<int>(A.cols())), pivot_eps_(pivot_eps) {
        for (int i = 0; i < m_; ++i)
            if (b(i) < 0.0) art_rows_.push_back(i);
        na_ = static_cast<int>(art_rows_.size());
        cols_ = nv_ + m_ + na_;
        T_ = Matrix::Zero(m_ + 1, cols_ + 1);
        basis_.assign(static_cast<std::size_t>(m_), -1);

        int k = 0;
        for (int i = 0; i < m_; ++i) {
            const double sign = b(i) < 0.0 ? -1.0 : 1.0;
            T_.row(i).head(nv_) = sign * A.row(i);
            T_(i, nv_ + i) = sign;
            T_(i, cols_) = sign * b(i);
            if (b(i) < 0.0) {
                T_(i, nv_ + m_ + k) = 1.0;
                basis_[static_cast<std::size_t>(i)] = nv_ + m_ + k;
                ++k;
            } else {
                basis_[static_cast<std::size_t>(i)] = nv_ + i;
            }
        }
        original_ = T_.topRows(m_);
    }

    int rows() const { return m_; }
    int structural() const { return nv_; }
    int artificial_begin() const { return nv_ + m_; }
    bool has_artificials() const { return na_ > 0; }

    void set_phase_one_objective() {
        T_.row(m_).setZero();
        for (int i : art_rows_) T_.row(m_) -= T_.row(i);
        for (int k = 0; k < na_; ++k) T_(m_, nv_ + m_ + k) = 0.0;
    }

    void set_phase_two_objective(const Vector& cost) {
        T_.row(m_).setZero();
        T_.row(m_).head(nv_) = cost.transpose();
        for (int i = 0; i < m_; ++i) {
            const int bj = basis_[static_cast<std::size_t>(i)];
            if (bj < nv_ && cost(bj) != 0.0) T_.row(m_) -= cost(bj) * T_.row(i);
        }
    }

    double objective_value() const { return -T_(m_, cols_); }

    /// Runs simplex iterations on the current objective row. Columns at or
    /// beyond `column_limit` never enter the basis.
    void optimize(int column_limit, double cost_eps, int max_iterations, int& iterations) {
        int degenerate_run = 0;
        while (true) {
            const bool bland = degenerate_run > 50;
            int enter = -1;
            double best = -cost_eps;
            for (int j = 0; j < column_limit; ++j) {
                const double r = T_(m_, j);
                if (r < best) {
                    enter = j;
                    if (bland) break;
                    best = r;
                }
            }
            if (enter < 0) return;

            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m_; ++i) {
                const double a = T_(i, enter);
                if (a <= pivot_eps_) continue;
                const double ratio = std::max(0.0, T_(i, cols_)) / a;
                const double tie = 1e-12 * (1.0 + ratio);
                if (leave < 0 || ratio < best_ratio - tie) {
                    best_ratio = ratio;
                    leave = i;
                } else if (ratio <= best_ratio + tie &&
                           basis_[static_cast<std::size_t>(i)] <
                               basis_[static_cast<std::size_t>(leave)]) {
                    best_ratio = std::min(best_ratio, ratio);
                    leave = i;
                }
            }
            if (leave < 0) throw numerical_error("UnboundedProgram", "objective unbounded below");

            if (++iterations > max_iterations)
                throw numerical_error("SolverDidNotConverge",
                                      "simplex exceeded " + std::to_string(max_iterations) +
                                          " iterations");
            degenerate_run = best_ratio <= 1e-14 ? degenerate_run + 1 : 0;
            pivot(leave, enter);
        }
    }

    /// Moves zero-level artificials out of the basis where possible.
    void expel_artificials() {
        for (int i = 0; i < m_; ++i) {
            if (basis_[static_cast<std::size_t>(i)] < artificial_begin()) continue;
            int best = -1;
            double best_abs = pivot_eps_;
            for (int j = 0; j < artificial_begin(); ++j) {
                if (std::abs(T_(i, j)) > best_abs) {
                    best_abs = std::abs(T_(i, j));
                    best = j;
                }
            }
            if (best >= 0) pivot(i, best);
        }
    }

    /// Basic solution recomputed from the original constraint rows.
    Vector solution() const {
        Matrix B(m_, m_);
        for (int i = 0; i < m_; ++i) B.col(i) = original_.col(basis_[static_cast<std::size_t>(i)]);
        Vector xb = B.partialPivLu().solve(original_.col(cols_));
        if (!xb.allFinite()) {
            xb.resize(m_);
            for (int i = 0; i < m_; ++i) xb(i) = T_(i, cols_);
        }
        Vector x = Vector::Zero(nv_);
        for (int i = 0; i < m_; ++i) {
            const int bj = basis_[static_cast<std::size_t>(i)];
            if (bj < nv_) x(bj) = std::max(0.0, xb(i));
        }
        return x;
    }

private:
    void pivot(int r, int c) {
        T_.row(r) /= T_(r, c);
        for (int i = 0; i <= m_; ++i) {
            if (i == r) continue;
            const double f = T_(i, c);
            if (f != 0.0) T_.row(i) -= f * T_.row(r);
        }
        basis_[static_cast<std::size_t>(r)] = c;
    }

    int m_;
    int nv_;
    int na_ = 0;
    int cols_ = 0;
    double pivot_eps_;
    std::vector<int> art_rows_;
    std::vector<int> basis_;
    Matrix T_;
    Matrix original_;
};

}  // namespace

LpSolution solve_lp(const Vector& cost, const Matrix& A, const Vector& b, const LpOptions& options) {
    if (A.rows() != b.size() || A.cols() != cost.size())
        throw validation_error("LengthMismatch", "LP dimensions are inconsistent");
    const int m = static_cast<int>(A.rows());
    const int nv = static_cast<int>(A.cols());
    const int max_it = options.max_iterations > 0 ? options.max_iterations : 50 * (m + nv);

    const double amax = std::max(A.cwiseAbs().maxCoeff(), 1e-300);
    const double bmax = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
    const double cmax = cost.size() ? cost.cwiseAbs().maxCoeff() : 0.0;
    const double cost_eps = options.tolerance * std::max(1.0, cmax);
    const double feas_eps = options.tolerance * std::max(1.0, bmax) * 10.0;

    Tableau tab(A, b, 1e-11 * amax);
    LpSolution sol;
    if (tab.has_artificials()) {
        tab.set_phase_one_objective();
        tab.optimize(tab.artificial_begin(), options.tolerance, max_it, sol.iterations);
        if (tab.objective_value() > feas_eps)
            throw numerical_error("InfeasibleProgram", "no point satisfies the constraints");
        tab.expel_artificials();
    }
    tab.set_phase_two_objective(cost);
    tab.optimize(tab.artificial_begin(), cost_eps, max_it, sol.iterations);

    sol.x = tab.solution();
    sol.objective = cost.dot(sol.x);
    return sol;
}

}  // namespace qiv
