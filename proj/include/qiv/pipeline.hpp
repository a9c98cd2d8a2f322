#pragma once

#include "qiv/dataset.hpp"
#include "qiv/instrument.hpp"
#include "qiv/plm.hpp"
#include "qiv/selector.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qiv {

struct SelectionOptions {
    LambdaRule lambda;
    double tau = 0.1;
    std::optional<int> sis_keep;
    double lp_tolerance = 1e-9;
};

struct InstrumentOptions {
    InstrumentMethod method = InstrumentMethod::Method1;
    /// Fixed d for Method 1; unset runs select_d().
    std::optional<int> d;
    int d_max = 5;
    double rank_tol = kDefaultRankTol;
    /// Raise the rank cut to the noise level seen in negative eigenvalues.
    bool noise_floor = true;
    double c = 2.0;
    double c_k = 0.2;
    /// Fixed bandwidth; unset selects it by GCV on the default grid.
    std::optional<double> bandwidth;
};

struct SelectionStage {
    SelectionResult selection;
    ResolvedLambda lambda;
    Partition partition;
};

/// Screening, lambda resolution and Dantzig selection on a standardized
/// dataset. The noise level for the lambda rules is estimated on the full
/// design when the rule does not supply one.
SelectionStage run_selection(const Dataset& standardized, const SelectionOptions& options,
                             std::uint64_t seed);

struct InstrumentStage {
    InstrumentPlan plan;
    PLMFit fit;
    /// Chosen d and the ranks seen while choosing it.
    DSelection d_selection;
    bool bandwidth_from_gcv = false;
    std::vector<std::string> warnings;
};

/// Instrument construction and the partially linear fit for one method.
/// `y_raw` is the response on its original scale, so that g_hat carries its
/// level.
InstrumentStage run_instrument(const Partition& partition, const Vector& y_raw,
                               const InstrumentOptions& options);

}  // namespace qiv
