#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "tokenmixup/htm/token_mixup.hpp"
#include "tokenmixup/transformer/model.hpp"

namespace tkmx::inline TKMX_ABI {

enum class MixMode { kBaseline, kHtm, kVtm, kHtmVtm, kRandomSample, kRandomToken };

std::string_view to_string(MixMode mode);
/// ConfigError on unknown names.
MixMode parse_mix_mode(std::string_view name);

bool mixes_horizontally(MixMode mode);
bool mixes_vertically(MixMode mode);
/// ScoreNet gates the htm and random_token modes.
bool uses_scorenet(MixMode mode);

struct StepSettings {
  MixMode mode = MixMode::kBaseline;
  double random_k = 8.0;                 // expected selections, random_sample
  std::size_t random_token_count = 0;    // 0: estimate from the batch saliency
};

/// Every non-differentiable decision of one step. Replaying a step with a
/// frozen plan makes the loss a smooth function of the parameters.
struct StepPlan {
  bool has_mix = false;
  Tensor scorenet_input;          // pre-mix tokens entering the mixing layer
  MixPlan mix;
  std::vector<Tensor> vtm_pooled;  // per previous layer, (b, kappa, d)
  Tensor labels;                   // supervised targets after relabeling
};

/// Hook executions per step, used to check that modes stay isolated.
struct MixCounters {
  std::size_t horizontal = 0;
  std::size_t vertical = 0;
  std::size_t random = 0;

  std::size_t total() const { return horizontal + vertical + random; }
};

struct StepForward {
  ForwardTrace trace;
  Var loss;
  Var task_loss;
  Var score_loss;  // invalid when ScoreNet is not used
  StepPlan plan;
  MixCounters counters;
};

/// Builds the full training loss. With `frozen`, the recorded plan is reused
/// instead of being recomputed; `rng` is only drawn from by the random modes.
StepForward forward_step(TransformerModel& model, Graph& g, const Tensor& images, const Tensor& labels,
                         const StepSettings& settings, CounterRng& rng, const StepPlan* frozen = nullptr);

struct StepReport {
  double loss = 0.0;
  double scorenet_loss = 0.0;
  std::size_t num_mixed = 0;
  std::vector<std::size_t> tokens_replaced;
  double realized_gain = 0.0;
  std::size_t correct = 0;
  MixCounters counters;
};

struct SgdSettings {
  Scalar lr = Scalar(0.05);
  Scalar momentum = Scalar(0.9);
};

/// Forward, backward and one SGD update.
StepReport train_step(TransformerModel& model, const Tensor& images, const Tensor& labels,
                      const StepSettings& settings, const SgdSettings& sgd, CounterRng& rng);

struct EvalReport {
  double loss = 0.0;  // summed per-sample CE
  std::size_t correct = 0;
};

/// No-grad evaluation; vertical mixing stays on for modes that use it.
EvalReport evaluate_batch(TransformerModel& model, const Tensor& images, const Tensor& labels, MixMode mode);

/// Count of rows whose logit argmax matches the label argmax.
std::size_t count_correct(const Tensor& logits, const Tensor& labels);

}  // namespace tkmx::inline TKMX_ABI
