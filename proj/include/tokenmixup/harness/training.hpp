#pragma once

#include <cstddef>
#include <vector>

#include "tokenmixup/harness/dataset.hpp"
#include "tokenmixup/harness/metrics.hpp"

namespace tkmx::inline TKMX_ABI {

struct TrainingResult {
  std::vector<MetricsRow> rows;  // per epoch: train row, then val row
  MixCounters counters;          // summed over every step
  double final_val_accuracy = 0.0;
};

/// Trains a fresh model on the synthetic task. When `write_outputs` is set,
/// metrics.csv and model.ckpt are written to cfg.out_dir.
TrainingResult run_training(const RunConfig& cfg, bool write_outputs = true);

}  // namespace tkmx::inline TKMX_ABI
