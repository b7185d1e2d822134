#include "tokenmixup/transformer/train_step.hpp"

#include <algorithm>
#include <array>
#include <string>
#include <utility>

#include "tokenmixup/numerics/optim.hpp"
#include "tokenmixup/vtm/vtm.hpp"

namespace tkmx::inline TKMX_ABI {

namespace {

constexpr std::array<std::pair<MixMode, std::string_view>, 6> kModeNames{{
    {MixMode::kBaseline, "baseline"},
    {MixMode::kHtm, "htm"},
    {MixMode::kVtm, "vtm"},
    {MixMode::kHtmVtm, "htm_vtm"},
    {MixMode::kRandomSample, "random_sample"},
    {MixMode::kRandomToken, "random_token"},
}};

std::size_t required_layer(const std::optional<std::size_t>& layer, MixMode mode, const char* what) {
  if (!layer) throw ConfigError(std::string("mode ") + std::string(to_string(mode)) + " needs " + what);
  return *layer;
}

}  // namespace

std::string_view to_string(MixMode mode) {
  for (const auto& [m, name] : kModeNames)
    if (m == mode) return name;
  return "unknown";
}

MixMode parse_mix_mode(std::string_view name) {
  for (const auto& [m, n] : kModeNames)
    if (n == name) return m;
  throw ConfigError("unknown mode '" + std::string(name) +
                    "' (expected baseline, htm, vtm, htm_vtm, random_sample or random_token)");
}

bool mixes_horizontally(MixMode mode) {
  return mode == MixMode::kHtm || mode == MixMode::kHtmVtm || mode == MixMode::kRandomSample ||
         mode == MixMode::kRandomToken;
}

bool mixes_vertically(MixMode mode) { return mode == MixMode::kVtm || mode == MixMode::kHtmVtm; }

bool uses_scorenet(MixMode mode) {
  return mode == MixMode::kHtm || mode == MixMode::kHtmVtm || mode == MixMode::kRandomToken;
}

StepForward forward_step(TransformerModel& model, Graph& g, const Tensor& images, const Tensor& labels,
                         const StepSettings& settings, CounterRng& rng, const StepPlan* frozen) {
  const ModelConfig& cfg = model.config();
  const MixMode mode = settings.mode;
  StepForward out;
  out.plan.labels = labels;
  HookMap hooks;

  if (mixes_horizontally(mode)) {
    const std::size_t layer = required_layer(cfg.htm_layer, mode, "htm_layer");
    hooks[layer].transform_input = [&](std::size_t l, Var x, ForwardTrace& trace) -> Var {
      StepPlan& plan = out.plan;
      plan.has_mix = true;
      const Tensor& pre = x.value();
      if (frozen) {
        plan.scorenet_input = frozen->scorenet_input;
        plan.mix = frozen->mix;
      } else {
        plan.scorenet_input = pre;
        const auto maps = model.attention_maps(l, pre, cfg.ell);
        trace.input_attention[l - 1] = maps.front();
        const SaliencyMap s = token_saliency(attention_rollout(maps));
        if (mode == MixMode::kRandomSample) {
          ++out.counters.random;
          plan.mix = plan_token_mixup(s, random_selection(pre.dim(0), settings.random_k, rng), labels, cfg.rho);
        } else {
          const EasySelection easy = select_easy(model.scorenet().difficulty(pre, labels), cfg.tau);
          if (mode == MixMode::kRandomToken) {
            ++out.counters.random;
            const std::size_t count = settings.random_token_count > 0
                                          ? std::min(settings.random_token_count, pre.dim(1))
                                          : mean_salient_token_count(s, cfg.rho, rng);
            plan.mix = plan_random_token(pre.dim(0), pre.dim(1), easy, labels, count, rng);
          } else {
            ++out.counters.horizontal;
            plan.mix = plan_token_mixup(s, easy, labels, cfg.rho);
          }
        }
      }
      plan.labels = plan.mix.labels;
      return apply_mix(x, plan.mix);
    };
  }

  if (mixes_vertically(mode)) {
    const std::size_t layer = required_layer(cfg.vtm_layer, mode, "vtm_layer");
    LayerHook vtm = make_vtm_hook(cfg, frozen ? &frozen->vtm_pooled : nullptr, &out.plan.vtm_pooled);
    hooks[layer].key_value = [&out, inner = std::move(vtm.key_value)](std::size_t l, Var x, ForwardTrace& trace) {
      ++out.counters.vertical;
      return inner(l, x, trace);
    };
  }

  out.trace = model.encoder_forward(g, model.tokenize(g, images), hooks);
  out.task_loss = mean(cross_entropy(out.trace.logits, out.plan.labels));
  out.loss = out.task_loss;
  if (uses_scorenet(mode) && out.plan.has_mix) {
    out.score_loss = model.scorenet().aux_loss(g, out.plan.scorenet_input, labels);
    if (cfg.score_loss_weight > 0) {
      out.loss = add(out.loss, scale(out.score_loss, static_cast<Scalar>(cfg.score_loss_weight)));
    }
  }
  return out;
}

std::size_t count_correct(const Tensor& logits, const Tensor& labels) {
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t best = 0, target = 0;
    for (std::size_t k = 1; k < c; ++k) {
      if (logits.at(i, k) > logits.at(i, best)) best = k;
      if (labels.at(i, k) > labels.at(i, target)) target = k;
    }
    correct += best == target ? 1 : 0;
  }
  return correct;
}

StepReport train_step(TransformerModel& model, const Tensor& images, const Tensor& labels,
                      const StepSettings& settings, const SgdSettings& sgd, CounterRng& rng) {
  Graph g;
  StepForward fwd = forward_step(model, g, images, labels, settings, rng);
  g.backward(fwd.loss);
  const auto params = g.bound_parameters();
  sgd_step(params, sgd.lr, sgd.momentum);

  StepReport report;
  report.loss = fwd.task_loss.value()[0];
  if (fwd.score_loss.valid()) report.scorenet_loss = fwd.score_loss.value()[0];
  report.num_mixed = fwd.plan.mix.report.num_mixed;
  report.tokens_replaced = fwd.plan.mix.report.tokens_replaced;
  report.realized_gain = fwd.plan.mix.report.realized_gain;
  report.correct = count_correct(fwd.trace.logits.value(), labels);
  report.counters = fwd.counters;
  return report;
}

EvalReport evaluate_batch(TransformerModel& model, const Tensor& images, const Tensor& labels, MixMode mode) {
  Graph g(false);
  HookMap hooks;
  if (mixes_vertically(mode)) {
    const std::size_t layer = required_layer(model.config().vtm_layer, mode, "vtm_layer");
    hooks[layer] = make_vtm_hook(model.config());
  }
  const ForwardTrace trace = model.encoder_forward(g, model.tokenize(g, images), hooks);
  const Tensor ce = cross_entropy(trace.logits, labels).value();
  EvalReport report;
  for (Scalar v : ce.data()) report.loss += v;
  report.correct = count_correct(trace.logits.value(), labels);
  return report;
}

}  // namespace tkmx::inline TKMX_ABI
