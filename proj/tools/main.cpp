#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>

#include "tokenmixup/harness/benchmark.hpp"
#include "tokenmixup/harness/training.hpp"
#include "tokenmixup/numerics/checkpoint.hpp"

using namespace tkmx;

namespace {

constexpr int kOk = 0;
constexpr int kConfigFailure = 1;
constexpr int kIoFailure = 2;

struct CommonFlags {
  std::string config;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "flat key=value config file");
  for (const char* key : {"mode", "seed", "tau", "rho", "kappa", "ell", "epochs", "out"}) {
    cmd->add_option_function<std::string>(
        std::string("--") + key, [&flags, key](const std::string& v) { flags.overrides[key] = v; },
        std::string("override '") + key + "'");
  }
}

RunConfig resolve(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config.empty()) apply_config_file(cfg, flags.config);
  for (const auto& [key, value] : flags.overrides) set_option(cfg, key, value);
  cfg.validate();
  return cfg;
}

int cmd_train(const RunConfig& cfg) {
  const TrainingResult r = run_training(cfg);
  for (const auto& row : r.rows) {
    if (row.split != "val") continue;
    std::printf("epoch %zu  val_loss %.4f  val_acc %.4f\n", row.epoch, row.loss, row.accuracy);
  }
  std::printf("final val accuracy %.4f\nwrote %s and %s\n", r.final_val_accuracy,
              (cfg.out_dir / "metrics.csv").string().c_str(), (cfg.out_dir / "model.ckpt").string().c_str());
  return kOk;
}

int cmd_bench(const RunConfig& cfg, std::size_t repeats) {
  const SaliencyBenchmark b = benchmark_saliency(cfg, repeats);
  std::printf("attention_ms %.4f\ngradient_ms %.4f\nratio %.2f\nrepeats %zu\n", b.attention_ms, b.gradient_ms,
              b.ratio, b.repeats);
  return kOk;
}

int cmd_demo(const RunConfig& cfg, const std::string& checkpoint) {
  const ModelConfig& m = cfg.model;
  if (!m.htm_layer) throw ConfigError("demo-mix needs htm_layer");
  const std::size_t layer = *m.htm_layer;
  TransformerModel model(m, cfg.seed);
  if (!checkpoint.empty()) load_checkpoint(checkpoint, model.params());

  const DatasetSplit split = generate_synthetic_dataset(cfg);
  std::vector<std::size_t> idx(std::min(cfg.batch_size, split.train.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto [images, labels] = gather_batch(split.train, idx);

  Tensor tokens;
  {
    Graph g(false);
    tokens = model.tokenize(g, images).value();
  }
  if (layer > 1) tokens = model.run_layers(1, layer - 1, tokens);
  const SaliencyMap s = attention_saliency(model, tokens, layer, m.ell);
  const DifficultyVector u = model.scorenet().difficulty(tokens, labels);
  const MixResult mix = token_mixup(tokens, labels, s, u, m.tau, m.rho);
  const MixPlan& plan = mix.plan;

  std::printf("batch %zu  layer %zu  tau %g  rho %g\n", idx.size(), layer, m.tau, m.rho);
  std::printf("selected %zu  realized_gain %.6f\n", plan.easy.size(), plan.match.realized_gain);
  if (plan.easy.empty()) std::printf("no sample has difficulty below tau\n");
  const std::size_t n = s.tokens();
  for (std::size_t i = 0; i < plan.easy.size(); ++i) {
    std::string mask;
    for (std::size_t t = 0; t < n; ++t) mask += plan.mask.m.at(i, t) != 0 ? '1' : '0';
    std::printf("sample %zu <- source %zu  u %.4f  replaced %zu  mask %s  w_keep %.6f  w_src %.6f\n",
                plan.easy.indices[i], plan.match.sigma[i], static_cast<double>(u.u[plan.easy.indices[i]]),
                plan.report.tokens_replaced[i], mask.c_str(), plan.keep_weight[i], 1.0 - plan.keep_weight[i]);
  }
  return kOk;
}

int cmd_trace(const RunConfig& cfg, const std::string& metrics) {
  const auto path = metrics.empty() ? cfg.out_dir / "metrics.csv" : std::filesystem::path(metrics);
  const CurriculumSummary s = curriculum_trace(read_metrics_csv(path));
  std::printf("early_mean %.4f\nlate_mean %.4f\nrising %s\n", s.early_mean, s.late_mean, s.rising ? "true" : "false");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TokenMixup toy trainer"};
  app.require_subcommand(1);

  CommonFlags train_flags, bench_flags, demo_flags, trace_flags;
  std::size_t repeats = 0;
  std::string checkpoint, metrics;

  auto* train = app.add_subcommand("train", "train one model and write metrics.csv and model.ckpt");
  add_common(train, train_flags);
  auto* bench = app.add_subcommand("bench-saliency", "time attention vs gradient saliency");
  add_common(bench, bench_flags);
  bench->add_option("--repeats", repeats, "timed repetitions (default from config)");
  auto* demo = app.add_subcommand("demo-mix", "print one batch's matching, masks and label weights");
  add_common(demo, demo_flags);
  demo->add_option("--checkpoint", checkpoint, "load weights before mixing");
  auto* trace = app.add_subcommand("trace-curriculum", "summarise num_mixed over a metrics file");
  add_common(trace, trace_flags);
  trace->add_option("--metrics", metrics, "metrics.csv (default: <out>/metrics.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigFailure;
  }

  try {
    if (*train) return cmd_train(resolve(train_flags));
    if (*bench) {
      const RunConfig cfg = resolve(bench_flags);
      return cmd_bench(cfg, repeats ? repeats : cfg.bench_repeats);
    }
    if (*demo) return cmd_demo(resolve(demo_flags), checkpoint);
    if (*trace) return cmd_trace(resolve(trace_flags), metrics);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigFailure;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigFailure;
  }
  return kOk;
}
