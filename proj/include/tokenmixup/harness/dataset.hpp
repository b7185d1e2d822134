#pragma once

#include <cstddef>
#include <vector>

#include "tokenmixup/harness/run_config.hpp"

namespace tkmx::inline TKMX_ABI {

struct Dataset {
  Tensor images;                      // (N, channels, s, s)
  Tensor labels;                      // (N, c) one-hot
  std::vector<std::size_t> classes;   // (N)

  std::size_t size() const { return classes.size(); }
};

struct DatasetSplit {
  Dataset train;
  Dataset val;
};

/// Noise-free image of one class, (channels, s, s): a Gaussian blob placed on
/// a ring by class, plus a stripe pattern whose orientation depends on class.
Tensor class_template(std::size_t cls, std::size_t num_classes, std::size_t image_size, std::size_t channels);

/// Templates plus i.i.d. Gaussian pixel noise, the first 80% of each class for
/// training and the rest for validation. Sample k of class c draws its noise
/// from its own RNG substream, so the result depends on the seed only.
DatasetSplit generate_synthetic_dataset(const RunConfig& cfg);

/// Rows `indices` of a dataset as one batch: (images, labels).
std::pair<Tensor, Tensor> gather_batch(const Dataset& data, const std::vector<std::size_t>& indices);

}  // namespace tkmx::inline TKMX_ABI
