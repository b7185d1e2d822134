#include "tokenmixup/transformer/model.hpp"

#include <cmath>
#include <string>

#include "tokenmixup/numerics/ops.hpp"
#include "tokenmixup/numerics/rng.hpp"

namespace tkmx::inline TKMX_ABI {

namespace {

constexpr double kInitStd = 0.02;

Tensor trunc_normal(Dims dims, CounterRng& rng) {
  Tensor t(std::move(dims));
  for (auto& v : t.storage()) v = static_cast<Scalar>(kInitStd * rng.truncated_normal());
  return t;
}

Tensor plain_normal(Dims dims, CounterRng& rng) {
  Tensor t(std::move(dims));
  for (auto& v : t.storage()) v = static_cast<Scalar>(kInitStd * rng.normal());
  return t;
}

}  // namespace

Tensor extract_patches(const Tensor& images, std::size_t patch_size) {
  if (images.rank() != 4 || images.dim(2) != images.dim(3)) {
    throw ShapeError("images must be (b, ch, s, s), got " + dims_to_string(images.dims()));
  }
  const std::size_t b = images.dim(0), ch = images.dim(1), s = images.dim(2);
  if (patch_size == 0 || s % patch_size != 0) {
    throw ConfigError("image size " + std::to_string(s) + " not divisible by patch " + std::to_string(patch_size));
  }
  const std::size_t grid = s / patch_size;
  const std::size_t pd = ch * patch_size * patch_size;
  Tensor out({b, grid * grid, pd});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t gy = 0; gy < grid; ++gy)
      for (std::size_t gx = 0; gx < grid; ++gx) {
        Scalar* row = out.storage().data() + (i * grid * grid + gy * grid + gx) * pd;
        std::size_t k = 0;
        for (std::size_t c = 0; c < ch; ++c)
          for (std::size_t py = 0; py < patch_size; ++py)
            for (std::size_t px = 0; px < patch_size; ++px) {
              const std::size_t y = gy * patch_size + py, x = gx * patch_size + px;
              row[k++] = images.storage()[((i * ch + c) * s + y) * s + x];
            }
      }
  return out;
}

TransformerModel::TransformerModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  CounterRng rng(seed, RngStream::kInit);
  const std::size_t d = cfg_.dim, hidden = cfg_.mlp_hidden();

  patch_w_ = &params_.add("tokenizer.proj.w", trunc_normal({cfg_.patch_dim(), d}, rng));
  patch_b_ = &params_.add("tokenizer.proj.b", Tensor({d}));
  pos_ = &params_.add("tokenizer.pos", plain_normal({cfg_.num_tokens(), d}, rng));

  for (std::size_t l = 1; l <= cfg_.depth; ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    LayerParams lp{};
    lp.ln1_g = &params_.add(p + "ln1.gamma", Tensor({d}, Scalar(1)));
    lp.ln1_b = &params_.add(p + "ln1.beta", Tensor({d}));
    lp.wq = &params_.add(p + "attn.wq", trunc_normal({d, d}, rng));
    lp.bq = &params_.add(p + "attn.bq", Tensor({d}));
    lp.wk = &params_.add(p + "attn.wk", trunc_normal({d, d}, rng));
    lp.bk = &params_.add(p + "attn.bk", Tensor({d}));
    lp.wv = &params_.add(p + "attn.wv", trunc_normal({d, d}, rng));
    lp.bv = &params_.add(p + "attn.bv", Tensor({d}));
    lp.wo = &params_.add(p + "attn.wo", trunc_normal({d, d}, rng));
    lp.bo = &params_.add(p + "attn.bo", Tensor({d}));
    lp.ln2_g = &params_.add(p + "ln2.gamma", Tensor({d}, Scalar(1)));
    lp.ln2_b = &params_.add(p + "ln2.beta", Tensor({d}));
    lp.fc1_w = &params_.add(p + "mlp.fc1.w", trunc_normal({d, hidden}, rng));
    lp.fc1_b = &params_.add(p + "mlp.fc1.b", Tensor({hidden}));
    lp.fc2_w = &params_.add(p + "mlp.fc2.w", trunc_normal({hidden, d}, rng));
    lp.fc2_b = &params_.add(p + "mlp.fc2.b", Tensor({d}));
    layers_.push_back(lp);
  }

  norm_g_ = &params_.add("norm.gamma", Tensor({d}, Scalar(1)));
  norm_b_ = &params_.add("norm.beta", Tensor({d}));
  pool_w_ = &params_.add("pool.w", trunc_normal({d, 1}, rng));
  head_w_ = &params_.add("head.w", trunc_normal({d, cfg_.num_classes}, rng));
  head_b_ = &params_.add("head.b", Tensor({cfg_.num_classes}));
  scorenet_ = std::make_unique<ScoreNet>(params_, d, cfg_.num_classes, rng);
}

const TransformerModel::LayerParams& TransformerModel::layer_params(std::size_t layer) const {
  if (layer < 1 || layer > layers_.size()) {
    throw UsageError("layer " + std::to_string(layer) + " out of range [1, " + std::to_string(layers_.size()) + "]");
  }
  return layers_[layer - 1];
}

Var TransformerModel::linear(Graph& g, Var x, Parameter& w, Parameter& b) {
  return add_broadcast(matmul(x, g.param(w)), g.param(b));
}

Var TransformerModel::split_heads(Var x) {
  const std::size_t b = x.dim(0), n = x.dim(1);
  return permute(reshape(x, {b, n, cfg_.heads, cfg_.head_dim()}), {0, 2, 1, 3});
}

Var TransformerModel::tokenize(Graph& g, const Tensor& images) {
  if (images.rank() != 4 || images.dim(1) != cfg_.channels || images.dim(2) != cfg_.image_size ||
      images.dim(3) != cfg_.image_size) {
    throw ShapeError("tokenize: expected (b, " + std::to_string(cfg_.channels) + ", " +
                     std::to_string(cfg_.image_size) + ", " + std::to_string(cfg_.image_size) + "), got " +
                     dims_to_string(images.dims()));
  }
  Var patches = g.constant(extract_patches(images, cfg_.patch_size));
  return add_broadcast(linear(g, patches, *patch_w_, *patch_b_), g.param(*pos_));
}

AttentionResult TransformerModel::attention(Graph& g, std::size_t layer, Var x, std::optional<Var> kv) {
  const LayerParams& lp = layer_params(layer);
  Var src = kv.value_or(x);
  if (x.value().rank() != 3 || src.value().rank() != 3 || x.dim(0) != src.dim(0) || x.dim(2) != cfg_.dim ||
      src.dim(2) != cfg_.dim) {
    throw ShapeError("attention: query " + dims_to_string(x.dims()) + " and key/value " +
                     dims_to_string(src.dims()) + " must share b and d=" + std::to_string(cfg_.dim));
  }
  const std::size_t b = x.dim(0), n = x.dim(1), m = src.dim(1), heads = cfg_.heads;

  Var q = split_heads(linear(g, x, *lp.wq, *lp.bq));
  Var k = split_heads(linear(g, src, *lp.wk, *lp.bk));
  Var v = split_heads(linear(g, src, *lp.wv, *lp.bv));
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(cfg_.head_dim()));
  Var probs = softmax_rows(scale(matmul(q, transpose_last2(k)), inv_sqrt));  // (b, H, n, m)

  AttentionRecord rec{layer, Tensor({b, n, m})};
  const Tensor& pv = probs.value();
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t r = 0; r < n * m; ++r) rec.phi[i * n * m + r] += pv[(i * heads + h) * n * m + r];
  const Scalar inv_h = Scalar(1) / Scalar(heads);
  for (auto& e : rec.phi.storage()) e *= inv_h;

  Var ctx = reshape(permute(matmul(probs, v), {0, 2, 1, 3}), {b, n, cfg_.dim});
  return {linear(g, ctx, *lp.wo, *lp.bo), std::move(rec)};
}

Var TransformerModel::block(Graph& g, std::size_t layer, Var x, std::optional<Var> kv, AttentionRecord* record) {
  const LayerParams& lp = layer_params(layer);
  const Scalar eps = static_cast<Scalar>(cfg_.ln_eps);
  Var xn = layer_norm(x, g.param(*lp.ln1_g), g.param(*lp.ln1_b), eps);
  std::optional<Var> kvn;
  if (kv) kvn = layer_norm(*kv, g.param(*lp.ln1_g), g.param(*lp.ln1_b), eps);
  AttentionResult attn = attention(g, layer, xn, kvn);
  if (record) *record = std::move(attn.record);
  Var h = add(x, attn.out);
  Var hn = layer_norm(h, g.param(*lp.ln2_g), g.param(*lp.ln2_b), eps);
  Var mlp = linear(g, gelu(linear(g, hn, *lp.fc1_w, *lp.fc1_b)), *lp.fc2_w, *lp.fc2_b);
  return add(h, mlp);
}

Var TransformerModel::sequence_pool_classify(Graph& g, Var x) {
  if (x.value().rank() != 3 || x.dim(2) != cfg_.dim) {
    throw ShapeError("sequence_pool_classify: expected (b, n, " + std::to_string(cfg_.dim) + "), got " +
                     dims_to_string(x.dims()));
  }
  const std::size_t b = x.dim(0), n = x.dim(1);
  Var scores = reshape(matmul(x, g.param(*pool_w_)), {b, 1, n});
  Var pooled = reshape(matmul(softmax_rows(scores), x), {b, cfg_.dim});
  return linear(g, pooled, *head_w_, *head_b_);
}

ForwardTrace TransformerModel::encoder_forward(Graph& g, Var tokens, const HookMap& hooks) {
  for (const auto& [layer, hook] : hooks) {
    if (layer < 1 || layer > cfg_.depth) throw UsageError("hook registered on invalid layer " + std::to_string(layer));
  }
  ForwardTrace trace;
  trace.tokens = tokens;
  Var x = tokens;
  const Dims shape = tokens.dims();
  for (std::size_t l = 1; l <= cfg_.depth; ++l) {
    trace.inputs.push_back(x.value());
    trace.input_attention.push_back({l, Tensor()});
    std::optional<Var> kv;
    bool rewritten = false;
    if (auto it = hooks.find(l); it != hooks.end()) {
      const LayerHook& hook = it->second;
      if (hook.transform_input) {
        Var before = x;
        x = hook.transform_input(l, x, trace);
        if (x.dims() != shape) {
          throw ShapeError("hook at layer " + std::to_string(l) + " changed tokens " + dims_to_string(shape) +
                           " to " + dims_to_string(x.dims()));
        }
        rewritten = !bitwise_equal(x.value(), before.value());
      }
      if (hook.key_value) {
        kv = hook.key_value(l, x, trace);
        if (kv->value().rank() != 3 || kv->dim(0) != shape[0] || kv->dim(2) != shape[2]) {
          throw ShapeError("key/value hook at layer " + std::to_string(l) + " returned " + dims_to_string(kv->dims()));
        }
      }
    }
    trace.executed.push_back(x);
    AttentionRecord rec;
    x = block(g, l, x, kv, &rec);
    if (!rewritten && !kv && trace.input_attention.back().phi.empty()) trace.input_attention.back() = rec;
    trace.attention.push_back(std::move(rec));
  }
  Var xn = layer_norm(x, g.param(*norm_g_), g.param(*norm_b_), static_cast<Scalar>(cfg_.ln_eps));
  trace.logits = sequence_pool_classify(g, xn);
  return trace;
}

Var TransformerModel::forward_from(Graph& g, std::size_t first, Var x) {
  layer_params(first);
  for (std::size_t l = first; l <= cfg_.depth; ++l) x = block(g, l, x, std::nullopt, nullptr);
  Var xn = layer_norm(x, g.param(*norm_g_), g.param(*norm_b_), static_cast<Scalar>(cfg_.ln_eps));
  return sequence_pool_classify(g, xn);
}

std::vector<AttentionRecord> TransformerModel::attention_maps(std::size_t first, const Tensor& x, std::size_t ell) {
  const std::size_t last = first + ell;
  layer_params(first);
  layer_params(last);
  Graph g(false);
  Var cur = g.constant(x);
  std::vector<AttentionRecord> out;
  for (std::size_t l = first; l < last; ++l) {
    AttentionRecord rec;
    cur = block(g, l, cur, std::nullopt, &rec);
    out.push_back(std::move(rec));
  }
  const LayerParams& lp = layer_params(last);
  Var xn = layer_norm(cur, g.param(*lp.ln1_g), g.param(*lp.ln1_b), static_cast<Scalar>(cfg_.ln_eps));
  out.push_back(attention(g, last, xn).record);
  return out;
}

Tensor TransformerModel::run_layers(std::size_t first, std::size_t last, const Tensor& x) {
  Graph g(false);
  Var cur = g.constant(x);
  for (std::size_t l = first; l <= last; ++l) cur = block(g, l, cur, std::nullopt, nullptr);
  return cur.value();
}

}  // namespace tkmx::inline TKMX_ABI
