#pragma once

#include "nucgrade/core_types.hpp"
#include "nucgrade/metrics.hpp"

namespace nucgrade {

// Exhaustive reference computation of the class-agnostic metrics (dice, aji,
// dq/sq/pq) by literal pixel-set enumeration. Shares no code with the fast
// path in metrics.cpp. Capped at 64x64 maps with at most 12 instances per
// side; throws std::invalid_argument beyond the cap. Per-class entries are
// left absent (class-agnostic oracle).
MetricsReport oracle_metrics(const InstanceMap& pred, const InstanceMap& gt);

}  // namespace nucgrade
