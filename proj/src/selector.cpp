#include "qiv/selector.hpp"

#include "qiv/error.hpp"
#include "qiv/linear_program.hpp"
#include "qiv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace qiv {

Vector dantzig_select(const Matrix& X, const Vector& y, double lambda, double tol) {
    if (!(lambda >= 0.0)) throw validation_error("InvalidLambda", "lambda must be >= 0");
    if (y.size() != X.rows()) throw validation_error("LengthMismatch", "y and X disagree");
    const Eigen::Index p = X.cols();
    const double n = static_cast<double>(X.rows());

    // Work on the X'X/n scale so that constraint entries are O(1).
    const Matrix G = X.transpose() * X / n;
    const Vector c = X.transpose() * y / n;
    const double level = lambda / n;

    if (c.cwiseAbs().maxCoeff() <= level) return Vector::Zero(p);

    Matrix A(2 * p, 2 * p);
    A << G, -G, -G, G;
    Vector b(2 * p);
    b << c.array() + level, level - c.array();
    Vector cost = Vector::Ones(2 * p);

    LpOptions opts;
    opts.tolerance = tol;
    const LpSolution sol = solve_lp(cost, A, b, opts);
    Vector beta = sol.x.head(p) - sol.x.tail(p);

    const double violation = (X.transpose() * (y - X * beta)).cwiseAbs().maxCoeff() - lambda;
    const double scale = std::max({1.0, lambda, (X.transpose() * y).cwiseAbs().maxCoeff()});
    if (violation > std::max(tol, 1e-9) * scale)
        throw numerical_error("ConstraintViolation",
                              "Dantzig constraint exceeded by " + format_double(violation));
    return beta;
}

double default_lambda(const Matrix& X, int n_realizations, std::uint64_t seed) {
    if (n_realizations < 1)
        throw validation_error("InvalidRealizations", "need at least one realization");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    double best = 0.0;
    Vector z(X.rows());
    for (int r = 0; r < n_realizations; ++r) {
        for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
        if (X.cols() > 0) best = std::max(best, (X.transpose() * z).cwiseAbs().maxCoeff());
    }
    return best;
}

double theoretical_lambda(double sigma, int n, int p) {
    if (!(sigma > 0.0)) throw validation_error("InvalidSigma", "sigma must be positive");
    if (p < 2 || n < 1) throw validation_error("InvalidDimensions", "need p >= 2 and n >= 1");
    return 2.0 * sigma * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

IndexSet threshold_select(const Vector& beta, double tau) {
    if (!(tau >= 0.0)) throw validation_error("InvalidThreshold", "tau must be >= 0");
    std::vector<int> out;
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
        const double a = std::abs(beta(j));
        if (a >= tau && (tau > 0.0 || a > 0.0)) out.push_back(static_cast<int>(j));
    }
    return IndexSet(std::move(out));
}

IndexSet sis_screen(const Matrix& X, const Vector& y, int keep) {
    const int p = static_cast<int>(X.cols());
    if (keep < 1 || keep > p)
        throw validation_error("InvalidScreenSize", "keep must lie in [1, p]");
    const Vector corr = cross_correlation(X, Matrix(y)).col(0);
    std::vector<int> order(static_cast<std::size_t>(p));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return std::abs(corr(a)) > std::abs(corr(b));
    });
    order.resize(static_cast<std::size_t>(keep));
    return IndexSet(std::move(order));
}

double estimate_noise_sd(const Matrix& X, const Vector& y) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    int k = std::min(p, (n + 1) / 2);
    k = std::min(k, n - 2);
    if (k < 1) throw validation_error("TooFewObservations", "cannot estimate the noise level");
    const IndexSet cols = sis_screen(X, y, k);
    Matrix Xk = gather_columns(X, cols);
    Xk = Xk.rowwise() - Xk.colwise().mean();
    const Vector yc = y.array() - y.mean();
    const Vector coef = Xk.colPivHouseholderQr().solve(yc);
    const double rss = (yc - Xk * coef).squaredNorm();
    return std::sqrt(rss / static_cast<double>(n - k - 1));
}

ResolvedLambda resolve_lambda(const LambdaRule& rule, const Matrix& X, const Vector& y,
                              std::uint64_t seed) {
    ResolvedLambda out;
    if (rule.mode == LambdaMode::Fixed) {
        if (!(rule.value > 0.0)) throw validation_error("InvalidLambda", "lambda must be positive");
        out.lambda = rule.value;
        return out;
    }
    const double sigma = rule.sigma ? *rule.sigma : estimate_noise_sd(X, y);
    out.sigma = sigma;
    if (rule.mode == LambdaMode::Empirical) {
        out.lambda = sigma * default_lambda(X, rule.realizations, seed);
    } else {
        const int n = static_cast<int>(X.rows());
        out.lambda = n * theoretical_lambda(sigma, n, std::max(2, static_cast<int>(X.cols())));
    }
    return out;
}

SelectionResult select_model(const Matrix& X, const Vector& y, const SelectorConfig& config) {
    if (!(config.lambda > 0.0)) throw validation_error("InvalidLambda", "lambda must be positive");
    if (!(config.tau >= 0.0)) throw validation_error("InvalidThreshold", "tau must be >= 0");
    if (!(config.lp_tolerance > 0.0 && config.lp_tolerance <= 1e-3))
        throw validation_error("InvalidTolerance", "lp_tolerance must lie in (0, 1e-3]");

    const int p = static_cast<int>(X.cols());
    SelectionResult result;
    result.lambda_used = config.lambda;
    result.beta_full = Vector::Zero(p);

    IndexSet candidates = IndexSet::range(0, p);
    if (config.sis_keep && *config.sis_keep < p) {
        candidates = sis_screen(X, y, *config.sis_keep);
        result.screened = candidates;
    }
    const Matrix Xs = gather_columns(X, candidates);
    const Vector beta_s = dantzig_select(Xs, y, config.lambda, config.lp_tolerance);
    for (int k = 0; k < candidates.size(); ++k) result.beta_full(candidates[k]) = beta_s(k);

    result.selected = candidates.compose(threshold_select(beta_s, config.tau));
    if (result.selected.empty()) {
        Eigen::Index best = 0;
        beta_s.cwiseAbs().maxCoeff(&best);
        result.selected = IndexSet{candidates[static_cast<int>(best)]};
        result.warnings.push_back("empty selection at tau=" + format_double(config.tau) +
                                  "; kept x" + std::to_string(result.selected[0] + 1));
    }
    return result;
}

}  // namespace qiv
