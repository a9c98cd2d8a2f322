#include "qiv/pipeline.hpp"

#include "qiv/error.hpp"

namespace qiv {

SelectionStage run_selection(const Dataset& standardized, const SelectionOptions& options,
                             std::uint64_t seed) {
    if (!standardized.standardized())
        throw validation_error("NotStandardized", "selection expects a standardized dataset");
    const Matrix& X = standardized.X();
    const Vector& y = standardized.y();
    const int p = standardized.p();

    IndexSet screened = IndexSet::range(0, p);
    if (options.sis_keep && *options.sis_keep < p) screened = sis_screen(X, y, *options.sis_keep);

    LambdaRule rule = options.lambda;
    if (rule.mode != LambdaMode::Fixed && !rule.sigma) rule.sigma = estimate_noise_sd(X, y);

    SelectionStage stage;
    stage.lambda = resolve_lambda(rule, gather_columns(X, screened), y, seed);

    SelectorConfig config;
    config.lambda = stage.lambda.lambda;
    config.tau = options.tau;
    config.lp_tolerance = options.lp_tolerance;
    config.sis_keep = options.sis_keep;
    stage.selection = select_model(X, y, config);

    const int q = stage.selection.selected.size();
    if (q >= standardized.n())
        throw validation_error("SelectionTooLarge",
                               "selected " + std::to_string(q) + " predictors with n = " +
                                   std::to_string(standardized.n()));
    stage.partition = partition(X, stage.selection.selected);
    return stage;
}

InstrumentStage run_instrument(const Partition& part, const Vector& y_raw,
                               const InstrumentOptions& options) {
    InstrumentStage stage;
    InstrumentBuild build;
    if (options.method == InstrumentMethod::Method1) {
        if (options.d) {
            stage.d_selection.d = *options.d;
        } else {
            stage.d_selection = select_d(part.Z, part.U, options.d_max, options.rank_tol,
                                          options.noise_floor);
            if (stage.d_selection.hit_limit)
                stage.warnings.push_back("d selection reached d_max=" +
                                         std::to_string(options.d_max));
        }
        build = build_instrument_m1(part.Z, part.U, stage.d_selection.d, options.rank_tol,
                                    options.noise_floor);
    } else {
        stage.d_selection.d = 1;
        build = build_instrument_m2(part.Z, part.U, options.c, options.c_k, options.rank_tol,
                                    options.noise_floor);
    }
    for (auto& w : build.warnings) stage.warnings.push_back(std::move(w));

    double h = 0.0;
    if (options.bandwidth) {
        h = *options.bandwidth;
    } else {
        h = gcv_bandwidth(part.Z, y_raw, build.V, default_bandwidth_grid(build.V));
        stage.bandwidth_from_gcv = true;
    }
    stage.fit = fit_plm(part.Z, y_raw, build.V, h);
    stage.plan = std::move(build.plan);
    return stage;
}

}  // namespace qiv
