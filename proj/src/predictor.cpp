#include "qiv/predictor.hpp"

#include "qiv/error.hpp"

namespace qiv {

Vector predict_adjusted(const PLMFit& fit, const InstrumentPlan& plan, const Matrix& Z_new,
                        const Matrix& U_new, std::size_t* degenerate_count) {
    if (Z_new.cols() != fit.q())
        throw validation_error("LengthMismatch", "Z has the wrong number of columns");
    const Matrix V = plan.instrument(Z_new, U_new);
    return Z_new * fit.theta_hat + fit.g_hat(V, degenerate_count);
}

Vector predict_working(const PLMFit& fit, const Matrix& Z_new) {
    if (Z_new.cols() != fit.q())
        throw validation_error("LengthMismatch", "Z has the wrong number of columns");
    return (Z_new * fit.theta_hat).array() + fit.g_bar;
}

Vector least_squares_coefficients(const Matrix& Z_train, const Vector& Y_train) {
    if (Z_train.rows() != Y_train.size())
        throw validation_error("LengthMismatch", "Z and Y row counts differ");
    const double n = static_cast<double>(Z_train.rows());
    const Matrix gram = Z_train.transpose() * Z_train / n;
    if (!(Eigen::SelfAdjointEigenSolver<Matrix>(gram).eigenvalues()(0) > kEpsPd))
        throw numerical_error("SingularDesign", "Z'Z is not invertible");
    return gram.ldlt().solve(Z_train.transpose() * Y_train / n);
}

Vector predict_ls(const Matrix& Z_train, const Vector& Y_train, const Matrix& Z_new) {
    return Z_new * least_squares_coefficients(Z_train, Y_train);
}

double prediction_error(const Vector& y_true, const Vector& y_pred) {
    if (y_true.size() != y_pred.size() || y_true.size() == 0)
        throw validation_error("LengthMismatch", "prediction and truth lengths differ");
    return (y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size());
}

PredictionBundle predict_all(const PLMFit& fit, const InstrumentPlan& plan,
                             const Vector& theta_ls, const Matrix& Z_new, const Matrix& U_new,
                             const std::optional<Vector>& y_true) {
    PredictionBundle out;
    out.y_adjusted = predict_adjusted(fit, plan, Z_new, U_new);
    out.y_working = predict_working(fit, Z_new);
    out.y_ls = Z_new * theta_ls;
    if (y_true) {
        out.pe_adjusted = prediction_error(*y_true, out.y_adjusted);
        out.pe_working = prediction_error(*y_true, out.y_working);
        out.pe_ls = prediction_error(*y_true, out.y_ls);
    }
    return out;
}

}  // namespace qiv
