#pragma once

#include "qiv/dataset.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qiv {

/// Dantzig selector
///
///     min ||beta||_1  subject to  ||X'(y - X beta)||_inf <= lambda
///
/// solved as a linear program in (beta+, beta-). The constraint level is on
/// the X'z scale, the same scale default_lambda() returns. Throws
/// SolverDidNotConverge when the simplex exceeds its iteration budget and
/// ConstraintViolation if the returned point is not feasible within `tol`.
Vector dantzig_select(const Matrix& X, const Vector& y, double lambda, double tol = 1e-9);

/// Largest |X'z|_i over `n_realizations` draws z ~ N(0, I_n).
double default_lambda(const Matrix& X, int n_realizations, std::uint64_t seed);

/// 2 sigma sqrt(log p / n), the coefficient-scale rate. Multiply by n to
/// obtain a constraint level usable by dantzig_select().
double theoretical_lambda(double sigma, int n, int p);

/// { j : |beta_j| >= tau }.
IndexSet threshold_select(const Vector& beta, double tau);

/// Indices of the `keep` predictors with the largest absolute sample
/// correlation with y; ties go to the smaller index.
IndexSet sis_screen(const Matrix& X, const Vector& y, int keep);

/// Residual standard deviation of y after least squares on the top
/// ceil(n/2) screened columns (all columns when p is smaller), with a
/// divide-by-(n - k - 1) correction.
double estimate_noise_sd(const Matrix& X, const Vector& y);

enum class LambdaMode { Empirical, Theoretical, Fixed };

struct LambdaRule {
    LambdaMode mode = LambdaMode::Empirical;
    /// Constraint level for Fixed; ignored otherwise.
    double value = 0.0;
    /// Draws of z used by Empirical.
    int realizations = 20;
    /// Noise level; estimated with estimate_noise_sd() when absent.
    std::optional<double> sigma;
};

struct ResolvedLambda {
    double lambda = 0.0;
    /// Noise level that entered the rule (unset for Fixed).
    std::optional<double> sigma;
};

/// Constraint level for dantzig_select().
///
/// Empirical: sigma * default_lambda(X).  Theoretical: n * theoretical_lambda.
ResolvedLambda resolve_lambda(const LambdaRule& rule, const Matrix& X, const Vector& y,
                              std::uint64_t seed);

struct SelectorConfig {
    double lambda = 0.0;
    double tau = 0.1;
    double lp_tolerance = 1e-9;
    std::optional<int> sis_keep;
};

struct SelectionResult {
    /// Full-length estimate; zero outside the screened set.
    Vector beta_full;
    IndexSet selected;
    double lambda_used = 0.0;
    std::optional<IndexSet> screened;
    std::vector<std::string> warnings;
};

/// Optional screening, Dantzig selection and thresholding. An empty
/// threshold set falls back to the single largest |beta_j| with a warning.
SelectionResult select_model(const Matrix& X, const Vector& y, const SelectorConfig& config);

}  // namespace qiv
