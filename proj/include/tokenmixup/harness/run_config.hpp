#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "tokenmixup/transformer/config.hpp"
#include "tokenmixup/transformer/train_step.hpp"

namespace tkmx::inline TKMX_ABI {

struct DatasetConfig {
  std::size_t samples_per_class = 120;
  double noise_std = 0.6;
};

struct RunConfig {
  ModelConfig model;
  std::uint64_t seed = 0;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 0.05;
  double momentum = 0.9;
  DatasetConfig data;
  MixMode mode = MixMode::kBaseline;
  std::filesystem::path out_dir = "runs";
  double random_k = 8.0;
  std::size_t random_token_count = 0;
  bool timing = false;  // wall_ms stays 0 unless set, keeping CSVs reproducible
  std::size_t bench_repeats = 30;

  void validate() const;
};

/// Assigns one key. Unknown keys and unparsable values throw ConfigError.
void set_option(RunConfig& cfg, std::string_view key, std::string_view value);

/// Applies `key = value` lines; blank lines and lines starting with '#' are
/// skipped.
void apply_config_text(RunConfig& cfg, std::string_view text);

/// IoError when the file cannot be read.
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

}  // namespace tkmx::inline TKMX_ABI
