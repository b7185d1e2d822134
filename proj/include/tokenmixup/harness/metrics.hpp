#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "tokenmixup/common.hpp"

namespace tkmx::inline TKMX_ABI {

struct MetricsRow {
  std::size_t epoch = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
  double accuracy = 0.0;
  double scorenet_loss = 0.0;
  std::size_t num_mixed = 0;
  double mean_tokens_replaced = 0.0;
  double realized_gain = 0.0;
  double wall_ms = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "epoch,split,loss,accuracy,scorenet_loss,num_mixed,mean_tokens_replaced,realized_gain,wall_ms";

std::string format_metrics_csv(const std::vector<MetricsRow>& rows);
/// IoError with the path when the file cannot be written.
void emit_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);
/// Inverse of format_metrics_csv; IoError on malformed input.
std::vector<MetricsRow> parse_metrics_csv(std::string_view text);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct CurriculumSummary {
  double early_mean = 0.0;
  double late_mean = 0.0;
  bool rising = false;
};

/// Compares mean num_mixed over the first and last third of the epochs.
/// Uses the train rows when any are present. UsageError below 9 epochs.
CurriculumSummary curriculum_trace(const std::vector<MetricsRow>& rows);

}  // namespace tkmx::inline TKMX_ABI
