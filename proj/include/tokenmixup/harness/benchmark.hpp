#pragma once

#include <cstddef>

#include "tokenmixup/harness/run_config.hpp"

namespace tkmx::inline TKMX_ABI {

struct SaliencyBenchmark {
  double attention_ms = 0.0;  // median per batch
  double gradient_ms = 0.0;
  double ratio = 0.0;         // gradient_ms / attention_ms
  std::size_t repeats = 0;
};

/// Times both detectors on one batch at the HTM hook layer of a freshly
/// initialised model. Tokens entering the layer are computed once and shared,
/// so only detector cost is measured. UsageError when repeats < 10.
SaliencyBenchmark benchmark_saliency(const RunConfig& cfg, std::size_t repeats);

}  // namespace tkmx::inline TKMX_ABI
