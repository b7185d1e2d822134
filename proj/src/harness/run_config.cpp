#include "tokenmixup/harness/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace tkmx::inline TKMX_ABI {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("option '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                    std::string(expected));
}

template <typename T>
T parse_unsigned(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value, "a nonnegative integer");
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  if (value == "inf" || value == "+inf") return std::numeric_limits<double>::infinity();
  double out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size() || std::isnan(out)) bad_value(key, value, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "true/false");
}

std::optional<std::size_t> parse_layer(std::string_view key, std::string_view value) {
  if (value == "none" || value == "off") return std::nullopt;
  return parse_unsigned<std::size_t>(key, value);
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = [] {
    std::map<std::string, Setter, std::less<>> t;
    auto size_field = [](std::size_t ModelConfig::*field) {
      return [field](RunConfig& c, std::string_view k, std::string_view v) {
        c.model.*field = parse_unsigned<std::size_t>(k, v);
      };
    };
    auto real_field = [](double ModelConfig::*field) {
      return [field](RunConfig& c, std::string_view k, std::string_view v) { c.model.*field = parse_double(k, v); };
    };
    t["image_size"] = size_field(&ModelConfig::image_size);
    t["patch_size"] = size_field(&ModelConfig::patch_size);
    t["channels"] = size_field(&ModelConfig::channels);
    t["depth"] = size_field(&ModelConfig::depth);
    t["heads"] = size_field(&ModelConfig::heads);
    t["dim"] = size_field(&ModelConfig::dim);
    t["num_classes"] = size_field(&ModelConfig::num_classes);
    t["kappa"] = size_field(&ModelConfig::kappa);
    t["ell"] = size_field(&ModelConfig::ell);
    t["mlp_ratio"] = real_field(&ModelConfig::mlp_ratio);
    t["tau"] = real_field(&ModelConfig::tau);
    t["rho"] = real_field(&ModelConfig::rho);
    t["score_loss_weight"] = real_field(&ModelConfig::score_loss_weight);
    t["ln_eps"] = real_field(&ModelConfig::ln_eps);
    t["htm_layer"] = [](RunConfig& c, std::string_view k, std::string_view v) { c.model.htm_layer = parse_layer(k, v); };
    t["vtm_layer"] = [](RunConfig& c, std::string_view k, std::string_view v) { c.model.vtm_layer = parse_layer(k, v); };
    t["vtm_pool_grad"] = [](RunConfig& c, std::string_view k, std::string_view v) {
      c.model.vtm_pool_grad = parse_bool(k, v);
    };
    t["seed"] = [](RunConfig& c, std::string_view k, std::string_view v) { c.seed = parse_unsigned<std::uint64_t>(k, v); };
    t["epochs"] = [](RunConfig& c, std::string_view k, std::string_view v) { c.epochs = parse_unsigned<std::size_t>(k, v); };
    t["batch_size"] = [](RunConfig& c, std::string_view k, std::string_view v) {
      c.batch_size = parse_unsigned<std::size_t>(k, v);
    };
    t["lr"] = [](RunConfig& c, std::string_view k, std::string_view v) { c.lr = parse_double(k, v); };
    t["momentum"] = [](RunConfig& c, std::string_view k, std::string_view v) { c.momentum = parse_double(k, v); };
    t["samples_per_class"] = [](RunConfig& c, std::string_view k, std::string_view v) {
      c.data.samples_per_class = parse_unsigned<std::size_t>(k, v);
    };
    t["noise_std"] = [](RunConfig& c, std::string_view k, std::string_view v) { c.data.noise_std = parse_double(k, v); };
    t["mode"] = [](RunConfig& c, std::string_view, std::string_view v) { c.mode = parse_mix_mode(v); };
    t["out_dir"] = [](RunConfig& c, std::string_view, std::string_view v) { c.out_dir = std::string(v); };
    t["out"] = t["out_dir"];
    t["random_k"] = [](RunConfig& c, std::string_view k, std::string_view v) { c.random_k = parse_double(k, v); };
    t["random_token_count"] = [](RunConfig& c, std::string_view k, std::string_view v) {
      c.random_token_count = parse_unsigned<std::size_t>(k, v);
    };
    t["timing"] = [](RunConfig& c, std::string_view k, std::string_view v) { c.timing = parse_bool(k, v); };
    t["bench_repeats"] = [](RunConfig& c, std::string_view k, std::string_view v) {
      c.bench_repeats = parse_unsigned<std::size_t>(k, v);
    };
    return t;
  }();
  return table;
}

}  // namespace

void set_option(RunConfig& cfg, std::string_view key, std::string_view value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown option '" + std::string(key) + "'");
  it->second(cfg, key, trim(value));
}

void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value, got '" + std::string(line) +
                        "'");
    }
    set_option(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(cfg, buf.str());
}

void RunConfig::validate() const {
  model.validate();
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be a positive number");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
  if (data.samples_per_class < 5) throw ConfigError("samples_per_class must be at least 5");
  if (!(data.noise_std >= 0) || !std::isfinite(data.noise_std)) throw ConfigError("noise_std must be >= 0");
  if (!(random_k >= 0)) throw ConfigError("random_k must be >= 0");
  if (random_token_count > model.num_tokens()) throw ConfigError("random_token_count exceeds the token count");
  if (mixes_horizontally(mode) && !model.htm_layer) throw ConfigError("mode needs htm_layer");
  if (mixes_vertically(mode) && !model.vtm_layer) throw ConfigError("mode needs vtm_layer");
  if (mode == MixMode::kHtmVtm && *model.vtm_layer <= *model.htm_layer) {
    throw ConfigError("htm_vtm needs vtm_layer after htm_layer");
  }
}

}  // namespace tkmx::inline TKMX_ABI
