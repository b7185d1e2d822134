#include "tokenmixup/harness/training.hpp"

#include <chrono>
#include <numeric>
#include <system_error>

#include "tokenmixup/numerics/checkpoint.hpp"

namespace tkmx::inline TKMX_ABI {

namespace {

MixCounters& operator+=(MixCounters& a, const MixCounters& b) {
  a.horizontal += b.horizontal;
  a.vertical += b.vertical;
  a.random += b.random;
  return a;
}

MetricsRow evaluate_split(TransformerModel& model, const Dataset& data, const RunConfig& cfg, std::size_t epoch) {
  MetricsRow row;
  row.epoch = epoch;
  row.split = "val";
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += cfg.batch_size) {
    std::vector<std::size_t> idx(std::min(cfg.batch_size, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto [images, labels] = gather_batch(data, idx);
    const EvalReport r = evaluate_batch(model, images, labels, cfg.mode);
    loss += r.loss;
    correct += r.correct;
  }
  row.loss = loss / static_cast<double>(data.size());
  row.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return row;
}

}  // namespace

TrainingResult run_training(const RunConfig& cfg, bool write_outputs) {
  cfg.validate();
  const DatasetSplit split = generate_synthetic_dataset(cfg);
  const std::size_t n_train = split.train.size();
  if (cfg.batch_size > n_train) {
    throw ConfigError("batch_size " + std::to_string(cfg.batch_size) + " exceeds the " + std::to_string(n_train) +
                      " training samples");
  }
  TransformerModel model(cfg.model, cfg.seed);
  const StepSettings settings{cfg.mode, cfg.random_k, cfg.random_token_count};
  const SgdSettings sgd{static_cast<Scalar>(cfg.lr), static_cast<Scalar>(cfg.momentum)};
  CounterRng mix_rng(cfg.seed, RngStream::kMixup);
  const std::size_t steps = n_train / cfg.batch_size;

  TrainingResult result;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng(cfg.seed, RngStream::kShuffle, epoch).shuffle(order);

    MetricsRow row;
    row.epoch = epoch;
    row.split = "train";
    double loss = 0.0, score_loss = 0.0, gain = 0.0;
    std::size_t correct = 0, replaced = 0;
    for (std::size_t s = 0; s < steps; ++s) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(s * cfg.batch_size),
                                         order.begin() + static_cast<std::ptrdiff_t>((s + 1) * cfg.batch_size));
      const auto [images, labels] = gather_batch(split.train, idx);
      const StepReport r = train_step(model, images, labels, settings, sgd, mix_rng);
      loss += r.loss;
      score_loss += r.scorenet_loss;
      gain += r.realized_gain;
      correct += r.correct;
      row.num_mixed += r.num_mixed;
      replaced += std::accumulate(r.tokens_replaced.begin(), r.tokens_replaced.end(), std::size_t{0});
      result.counters += r.counters;
    }
    row.loss = loss / static_cast<double>(steps);
    row.scorenet_loss = score_loss / static_cast<double>(steps);
    row.realized_gain = gain / static_cast<double>(steps);
    row.accuracy = static_cast<double>(correct) / static_cast<double>(steps * cfg.batch_size);
    row.mean_tokens_replaced = row.num_mixed ? static_cast<double>(replaced) / static_cast<double>(row.num_mixed) : 0.0;

    MetricsRow val = evaluate_split(model, split.val, cfg, epoch);
    if (cfg.timing) {
      const auto t1 = std::chrono::steady_clock::now();
      row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
    result.final_val_accuracy = val.accuracy;
    result.rows.push_back(std::move(row));
    result.rows.push_back(std::move(val));
  }

  if (write_outputs) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir.string() + ": " + ec.message());
    emit_metrics_csv(result.rows, cfg.out_dir / "metrics.csv");
    save_checkpoint(cfg.out_dir / "model.ckpt", model.params());
  }
  return result;
}

}  // namespace tkmx::inline TKMX_ABI
