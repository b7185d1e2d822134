#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "tokenmixup/numerics/graph.hpp"
#include "tokenmixup/scorenet/scorenet.hpp"
#include "tokenmixup/transformer/config.hpp"

namespace tkmx::inline TKMX_ABI {

/// Head-averaged post-softmax attention of one layer, (b, n_q, n_kv).
struct AttentionRecord {
  std::size_t layer = 0;
  Tensor phi;
};

struct ForwardTrace {
  Var tokens;  // tokenizer output
  /// inputs[l-1]: tokens entering layer l, captured before any hook ran.
  std::vector<Tensor> inputs;
  /// executed[l-1]: tokens layer l actually ran on, after its input hook.
  std::vector<Var> executed;
  /// attention[l-1]: the map layer l actually executed with.
  std::vector<AttentionRecord> attention;
  /// input_attention[l-1]: self-attention of layer l over inputs[l-1].
  /// Equal to attention[l-1] for plain layers; a hook that rewrites the input
  /// fills it with the map it computed on the original tokens. Left empty for
  /// layers whose key/value set was widened.
  std::vector<AttentionRecord> input_attention;
  Var logits;
};

/// Per-layer extension points, consulted in the order listed.
struct LayerHook {
  /// Rewrites the layer input. Must keep (b, n, d).
  std::function<Var(std::size_t layer, Var x, ForwardTrace& trace)> transform_input;
  /// Supplies the key/value token set for the layer's attention.
  std::function<Var(std::size_t layer, Var x, ForwardTrace& trace)> key_value;
};

using HookMap = std::map<std::size_t, LayerHook>;

struct AttentionResult {
  Var out;  // (b, n_q, d), before the residual add
  AttentionRecord record;
};

/// Pre-norm transformer encoder with patch tokenizer, sequence pooling head
/// and a ScoreNet sharing the parameter store.
class TransformerModel {
 public:
  TransformerModel(ModelConfig cfg, std::uint64_t seed);
  TransformerModel(const TransformerModel&) = delete;
  TransformerModel& operator=(const TransformerModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  ScoreNet& scorenet() { return *scorenet_; }

  /// images (b, ch, s, s) -> tokens (b, n, d).
  Var tokenize(Graph& g, const Tensor& images);

  /// Multi-head attention of `layer` with query tokens x and key/value tokens
  /// kv (both already normalized). kv defaults to x.
  AttentionResult attention(Graph& g, std::size_t layer, Var x, std::optional<Var> kv = std::nullopt);

  /// Full pre-norm block: x + Attn(LN(x), LN(kv)), then + MLP(LN(.)).
  Var block(Graph& g, std::size_t layer, Var x, std::optional<Var> kv, AttentionRecord* record);

  /// Softmax-weighted token average followed by the linear head: (b, c).
  Var sequence_pool_classify(Graph& g, Var x);

  ForwardTrace encoder_forward(Graph& g, Var tokens, const HookMap& hooks = {});

  /// Runs layers first..depth without hooks, then the classifier: (b, c).
  Var forward_from(Graph& g, std::size_t first, Var x);

  /// Stop-gradient maps of layers first..first+ell, evaluated on token values
  /// x entering `first`.
  std::vector<AttentionRecord> attention_maps(std::size_t first, const Tensor& x, std::size_t ell);

  /// Stop-gradient run of layers [first, last] on token values.
  Tensor run_layers(std::size_t first, std::size_t last, const Tensor& x);

 private:
  struct LayerParams {
    Parameter *ln1_g, *ln1_b, *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    Parameter *ln2_g, *ln2_b, *fc1_w, *fc1_b, *fc2_w, *fc2_b;
  };

  const LayerParams& layer_params(std::size_t layer) const;
  Var split_heads(Var x);
  Var linear(Graph& g, Var x, Parameter& w, Parameter& b);

  ModelConfig cfg_;
  ParameterStore params_;
  Parameter* patch_w_;
  Parameter* patch_b_;
  Parameter* pos_;
  std::vector<LayerParams> layers_;
  Parameter* norm_g_;
  Parameter* norm_b_;
  Parameter* pool_w_;
  Parameter* head_w_;
  Parameter* head_b_;
  std::unique_ptr<ScoreNet> scorenet_;
};

/// Rearranges (b, ch, s, s) images into (b, n, ch * p * p) patch rows,
/// patches in row-major grid order, each flattened channel-major.
Tensor extract_patches(const Tensor& images, std::size_t patch_size);

}  // namespace tkmx::inline TKMX_ABI
