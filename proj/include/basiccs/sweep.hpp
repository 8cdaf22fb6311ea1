#pragma once

#include <vector>

#include "basiccs/metrics.hpp"

namespace basiccs {

struct SweepRow {
  int K = 0;
  double final_elbo = 0.0;
  MetricsReport validation;
};

/// Fits each K on the training split and evaluates on the validation split.
/// The control-surface prefit is shared across K. Rows are sorted by K.
std::vector<SweepRow> k_sweep(const Dataset& train, const Dataset& validation, const ModelConfig& config,
                              std::vector<int> K_list);

}  // namespace basiccs
