#include "tokenmixup/harness/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <vector>

#include "tokenmixup/harness/dataset.hpp"
#include "tokenmixup/saliency/saliency.hpp"

namespace tkmx::inline TKMX_ABI {

namespace {

template <typename F>
double median_ms(std::size_t repeats, std::size_t warmup, F&& run) {
  for (std::size_t i = 0; i < warmup; ++i) run();
  std::vector<double> times;
  for (std::size_t i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t m = times.size() / 2;
  return times.size() % 2 ? times[m] : 0.5 * (times[m - 1] + times[m]);
}

}  // namespace

SaliencyBenchmark benchmark_saliency(const RunConfig& cfg, std::size_t repeats) {
  if (repeats < 10) throw UsageError("benchmark_saliency needs at least 10 repeats");
  cfg.validate();
  const ModelConfig& m = cfg.model;
  const std::size_t layer = m.htm_layer.value_or(1);

  const DatasetSplit split = generate_synthetic_dataset(cfg);
  std::vector<std::size_t> idx(std::min(cfg.batch_size, split.train.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto [images, labels] = gather_batch(split.train, idx);

  TransformerModel model(m, cfg.seed);
  Tensor tokens;
  {
    Graph g(false);
    tokens = model.tokenize(g, images).value();
  }
  if (layer > 1) tokens = model.run_layers(1, layer - 1, tokens);

  SaliencyBenchmark out;
  out.repeats = repeats;
  Scalar sink = 0;
  out.attention_ms = median_ms(repeats, 3, [&] {
    sink += attention_saliency(model, tokens, layer, m.ell).scores[0];
  });
  out.gradient_ms = median_ms(repeats, 3, [&] {
    sink += gradient_saliency_from_tokens(model, tokens, labels, layer).scores[0];
  });
  out.ratio = out.attention_ms > 0 ? out.gradient_ms / out.attention_ms : 0.0;
  (void)sink;
  return out;
}

}  // namespace tkmx::inline TKMX_ABI
