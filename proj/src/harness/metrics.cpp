#include "tokenmixup/harness/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace tkmx::inline TKMX_ABI {

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    out.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T parse_field(std::string_view field, std::size_t line_no) {
  T out{};
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw IoError("metrics line " + std::to_string(line_no) + ": bad field '" + std::string(field) + "'");
  }
  return out;
}

}  // namespace

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + ',' + r.split + ',' + fixed6(r.loss) + ',' + fixed6(r.accuracy) + ',' +
           fixed6(r.scorenet_loss) + ',' + std::to_string(r.num_mixed) + ',' + fixed6(r.mean_tokens_replaced) + ',' +
           fixed6(r.realized_gain) + ',' + fixed6(r.wall_ms) + '\n';
  }
  return out;
}

void emit_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write metrics to " + path.string());
  const std::string text = format_metrics_csv(rows);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
  std::vector<MetricsRow> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!header_seen) {
      if (line != kMetricsHeader) throw IoError("metrics file has an unexpected header");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 9) throw IoError("metrics line " + std::to_string(line_no) + ": expected 9 fields");
    MetricsRow r;
    r.epoch = parse_field<std::size_t>(f[0], line_no);
    r.split = std::string(f[1]);
    r.loss = parse_field<double>(f[2], line_no);
    r.accuracy = parse_field<double>(f[3], line_no);
    r.scorenet_loss = parse_field<double>(f[4], line_no);
    r.num_mixed = parse_field<std::size_t>(f[5], line_no);
    r.mean_tokens_replaced = parse_field<double>(f[6], line_no);
    r.realized_gain = parse_field<double>(f[7], line_no);
    r.wall_ms = parse_field<double>(f[8], line_no);
    rows.push_back(std::move(r));
  }
  if (!header_seen) throw IoError("metrics file is empty");
  return rows;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read metrics from " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metrics_csv(buf.str());
}

CurriculumSummary curriculum_trace(const std::vector<MetricsRow>& rows) {
  const bool has_train = std::any_of(rows.begin(), rows.end(), [](const MetricsRow& r) { return r.split == "train"; });
  std::vector<double> counts;
  for (const auto& r : rows)
    if (!has_train || r.split == "train") counts.push_back(static_cast<double>(r.num_mixed));
  if (counts.size() < 9) {
    throw UsageError("curriculum_trace needs at least 9 epochs, got " + std::to_string(counts.size()));
  }
  const std::size_t third = counts.size() / 3;
  auto mean_of = [](auto first, auto last) {
    double total = 0.0;
    for (auto it = first; it != last; ++it) total += *it;
    return total / static_cast<double>(last - first);
  };
  CurriculumSummary s;
  s.early_mean = mean_of(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(third));
  s.late_mean = mean_of(counts.end() - static_cast<std::ptrdiff_t>(third), counts.end());
  s.rising = s.late_mean > s.early_mean;
  return s;
}

}  // namespace tkmx::inline TKMX_ABI
