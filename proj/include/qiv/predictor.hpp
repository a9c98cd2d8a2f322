#pragma once

#include "qiv/dataset.hpp"
#include "qiv/instrument.hpp"
#include "qiv/plm.hpp"

#include <cstddef>
#include <optional>

namespace qiv {

/// theta_hat' Z + g_hat(V), with V formed from the training plan.
/// Throws MissingUStarColumns if U_new lacks a U* column.
Vector predict_adjusted(const PLMFit& fit, const InstrumentPlan& plan, const Matrix& Z_new,
                        const Matrix& U_new, std::size_t* degenerate_count = nullptr);

/// theta_hat' Z + g_bar; uses no U information.
Vector predict_working(const PLMFit& fit, const Matrix& Z_new);

/// (Z'Z)^{-1} Z'Y on the working model, no intercept.
/// Throws SingularDesign when lambda_min(Z'Z / n) <= kEpsPd.
Vector least_squares_coefficients(const Matrix& Z_train, const Vector& Y_train);

Vector predict_ls(const Matrix& Z_train, const Vector& Y_train, const Matrix& Z_new);

/// Mean squared difference; throws LengthMismatch.
double prediction_error(const Vector& y_true, const Vector& y_pred);

struct PredictionBundle {
    Vector y_adjusted;
    Vector y_working;
    Vector y_ls;
    std::optional<double> pe_adjusted;
    std::optional<double> pe_working;
    std::optional<double> pe_ls;
};

/// All three predictors; prediction errors are filled when `y_true` is given.
PredictionBundle predict_all(const PLMFit& fit, const InstrumentPlan& plan,
                             const Vector& theta_ls, const Matrix& Z_new, const Matrix& U_new,
                             const std::optional<Vector>& y_true = std::nullopt);

}  // namespace qiv
