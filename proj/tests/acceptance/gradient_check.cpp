#include "gradient_check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "tokenmixup/transformer/train_step.hpp"

using namespace tkmx;

namespace {

constexpr double kStep = 1e-5;
constexpr double kFloor = 1e-6;

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.image_size = 4;
  cfg.patch_size = 2;
  cfg.depth = 2;
  cfg.heads = 2;
  cfg.dim = 8;
  cfg.num_classes = 3;
  cfg.htm_layer = 1;
  cfg.vtm_layer = 2;
  cfg.kappa = 2;
  cfg.tau = std::numeric_limits<double>::infinity();
  cfg.rho = 0.0;
  return cfg;
}

std::map<std::string, Tensor> gradients(TransformerModel& model, const Tensor& images, const Tensor& labels,
                                        const StepSettings& settings, StepPlan* plan_out, const StepPlan* frozen) {
  model.params().zero_grad();
  CounterRng rng(7, RngStream::kMixup);
  Graph g;
  StepForward fwd = forward_step(model, g, images, labels, settings, rng, frozen);
  g.backward(fwd.loss);
  if (plan_out) *plan_out = fwd.plan;
  std::map<std::string, Tensor> out;
  for (Parameter* p : model.params().all()) out[p->name] = p->grad_ready ? p->grad : Tensor(p->value.dims());
  return out;
}

double max_gap(const std::map<std::string, Tensor>& a, const std::map<std::string, Tensor>& b, bool encoder_only) {
  double worst = 0;
  for (const auto& [name, t] : a) {
    if (encoder_only && name.rfind("scorenet", 0) == 0) continue;
    const Tensor& u = b.at(name);
    for (std::size_t i = 0; i < t.size(); ++i) worst = std::max(worst, std::abs(static_cast<double>(t[i] - u[i])));
  }
  return worst;
}

}  // namespace

GradientCheckSummary run_gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  GradientCheckSummary summary;
  ModelConfig cfg = toy_config();
  TransformerModel model(cfg, 11);
  CounterRng init(11, RngStream::kTest);
  for (Parameter* p : model.params().all())
    for (auto& v : p->value.storage()) v = init.uniform(-0.5, 0.5);

  const std::size_t b = 4;
  Tensor images({b, 1, 4, 4});
  for (auto& v : images.storage()) v = init.uniform(-1.0, 1.0);
  Tensor labels({b, cfg.num_classes});
  for (std::size_t i = 0; i < b; ++i) labels.at(i, i % cfg.num_classes) = 1;

  const StepSettings settings{MixMode::kHtmVtm};
  StepPlan plan;
  const auto live = gradients(model, images, labels, settings, &plan, nullptr);
  const auto replay = gradients(model, images, labels, settings, nullptr, &plan);
  summary.mixed_samples = plan.mix.report.num_mixed;
  summary.vtm_pooled = plan.vtm_pooled.size();
  summary.live_vs_frozen = max_gap(live, replay, false);

  ModelConfig no_aux = cfg;
  no_aux.score_loss_weight = 0;
  {
    TransformerModel twin(no_aux, 11);
    for (Parameter* p : twin.params().all()) p->value = model.params().get(p->name).value;
    summary.scorenet_leak = max_gap(live, gradients(twin, images, labels, settings, nullptr, &plan), true);
  }

  auto loss_at = [&] {
    CounterRng rng(7, RngStream::kMixup);
    Graph g(false);
    return static_cast<double>(forward_step(model, g, images, labels, settings, rng, &plan).loss.value()[0]);
  };
  for (Parameter* p : model.params().all()) {
    const Tensor& grad = live.at(p->name);
    ++summary.parameters;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Scalar keep = p->value[i];
      p->value[i] = keep + kStep;
      const double up = loss_at();
      p->value[i] = keep - kStep;
      const double down = loss_at();
      p->value[i] = keep;
      const double fd = (up - down) / (2 * kStep);
      const double an = grad[i];
      const double err = std::abs(an - fd);
      summary.max_absolute_error = std::max(summary.max_absolute_error, err);
      summary.max_relative_error =
          std::max(summary.max_relative_error, err / std::max({std::abs(an), std::abs(fd), kFloor}));
      ++summary.scalars;
    }
  }
  summary.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return summary;
}
