#pragma once

#include "qiv/simulator.hpp"

#include <string>

namespace qiv::cli {

/// Two-panel bar chart (mean MSE, mean PE) of a metrics table; rows without
/// a value in a panel are left out of it.
std::string metrics_svg(const MetricsTable& table, const std::string& title);

}  // namespace qiv::cli
