#pragma once

#include "qiv/dataset.hpp"
#include "qiv/instrument.hpp"
#include "qiv/plm.hpp"
#include "qiv/simulator.hpp"

#include <json.hpp>

#include <string>

namespace qiv {

using Json = nlohmann::ordered_json;

/// Matrices are written as {"rows", "cols", "data"} with `data` a row-major
/// nested array, so empty shapes survive the round trip.
Json matrix_to_json(const Matrix& M);
Matrix matrix_from_json(const Json& j, const std::string& field);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const std::string& field);

Json to_json(const InstrumentPlan& plan);
InstrumentPlan instrument_plan_from_json(const Json& j);

Json to_json(const PLMFit& fit);
PLMFit plm_fit_from_json(const Json& j);

/// Everything needed to predict from raw rows: the training standardization,
/// the Z/U split, the instrument plan, the PLM fit and the working-model LS
/// coefficients.
struct FitArtifact {
    int p = 0;
    Vector column_means;
    Vector column_scales;
    IndexSet z_indices;
    IndexSet u_indices;
    InstrumentPlan plan;
    PLMFit fit;
    Vector theta_ls;
};

Json to_json(const FitArtifact& artifact);
/// Throws MalformedFit naming the missing or ill-typed field.
FitArtifact fit_artifact_from_json(const Json& j);

Json to_json(const ExperimentConfig& config);
/// Strict parse: unknown fields, wrong types and invalid values raise
/// InvalidConfig naming the offending field. Runs validate().
ExperimentConfig experiment_config_from_json(const Json& j);

const char* to_string(BetaType type);
const char* to_string(LambdaMode mode);
const char* to_string(MseTarget target);
const char* to_string(InstrumentMethod method);

/// Columns: estimator,predictor,mse,std_mse,pe,std_pe,reps_ok,reps_failed.
/// Missing cells are empty.
std::string metrics_csv(const MetricsTable& table);
Json metrics_report(const MetricsTable& table, const ExperimentConfig& config);

}  // namespace qiv
