#include "tokenmixup/saliency/saliency.hpp"

#include <cmath>

#include "tokenmixup/numerics/ops.hpp"

namespace tkmx::inline TKMX_ABI {

Tensor attention_rollout(std::span<const AttentionRecord> records) {
  if (records.empty()) throw UsageError("attention_rollout needs at least one attention record");
  const Dims& dims = records[0].phi.dims();
  if (dims.size() != 3 || dims[1] != dims[2]) {
    throw ShapeError("attention_rollout: maps must be square (b, n, n), got " + dims_to_string(dims));
  }
  for (const auto& r : records) {
    if (r.phi.dims() != dims) throw ShapeError("attention_rollout: records disagree on (b, n)");
  }
  Tensor a = records[0].phi;
  for (std::size_t i = 1; i < records.size(); ++i) a = kernels::matmul(a, records[i].phi);
  return a;
}

SaliencyMap token_saliency(const Tensor& rollout) {
  if (rollout.rank() != 3) throw ShapeError("token_saliency: expected (b, n, n), got " + dims_to_string(rollout.dims()));
  const std::size_t b = rollout.dim(0), rows = rollout.dim(1), n = rollout.dim(2);
  Tensor s({b, n});
  for (std::size_t k = 0; k < b; ++k)
    for (std::size_t t = 0; t < n; ++t) {
      Scalar col = 0;
      for (std::size_t i = 0; i < rows; ++i) col += rollout[(k * rows + i) * n + t];
      s.at(k, t) = col / Scalar(rows);
    }
  return {std::move(s), SaliencySource::kAttentionRollout};
}

SaliencyMap normalize_saliency(Tensor raw, SaliencySource source) {
  if (raw.rank() != 2) throw ShapeError("normalize_saliency: expected (b, n)");
  const std::size_t b = raw.dim(0), n = raw.dim(1);
  for (std::size_t i = 0; i < b; ++i) {
    Scalar total = 0;
    for (std::size_t t = 0; t < n; ++t) {
      if (!(raw.at(i, t) >= 0)) throw NumericError("normalize_saliency: negative or NaN score");
      total += raw.at(i, t);
    }
    for (std::size_t t = 0; t < n; ++t) raw.at(i, t) = total > 0 ? raw.at(i, t) / total : Scalar(1) / Scalar(n);
  }
  return {std::move(raw), source};
}

SaliencyMap random_saliency(std::size_t batch, std::size_t tokens, CounterRng& rng) {
  Tensor raw({batch, tokens});
  for (auto& v : raw.storage()) v = static_cast<Scalar>(rng.uniform());
  return normalize_saliency(std::move(raw), SaliencySource::kRandom);
}

SaliencyMap gradient_saliency_from_tokens(TransformerModel& model, const Tensor& tokens, const Tensor& labels,
                                          std::size_t layer) {
  Graph g(true, false);
  Var x = g.leaf(tokens, true);
  Var loss = mean(cross_entropy(model.forward_from(g, layer, x), labels));
  g.backward(loss);
  const std::size_t b = tokens.dim(0), n = tokens.dim(1), d = tokens.dim(2);
  Tensor raw({b, n});
  if (const Tensor* grad = g.grad(x)) {
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t t = 0; t < n; ++t) {
        Scalar sq = 0;
        for (std::size_t k = 0; k < d; ++k) {
          const Scalar v = grad->at(i, t, k);
          sq += v * v;
        }
        raw.at(i, t) = std::sqrt(sq);
      }
  }
  return normalize_saliency(std::move(raw), SaliencySource::kGradient);
}

SaliencyMap gradient_saliency(TransformerModel& model, const Tensor& images, const Tensor& labels, std::size_t layer) {
  Graph g(false);
  Tensor tokens = model.tokenize(g, images).value();
  if (layer > 1) tokens = model.run_layers(1, layer - 1, tokens);
  return gradient_saliency_from_tokens(model, tokens, labels, layer);
}

SaliencyMap attention_saliency(TransformerModel& model, const Tensor& tokens, std::size_t layer, std::size_t ell) {
  const auto maps = model.attention_maps(layer, tokens, ell);
  return token_saliency(attention_rollout(maps));
}

double total_variation(std::span<const Scalar> map, std::size_t h, std::size_t w, TvNorm norm) {
  if (h * w != map.size()) {
    throw UsageError("total_variation: " + std::to_string(map.size()) + " scores do not form a " + std::to_string(h) +
                     "x" + std::to_string(w) + " grid");
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      const double here = map[i * w + j];
      const double down = i + 1 < h ? static_cast<double>(map[(i + 1) * w + j]) - here : 0.0;
      const double right = j + 1 < w ? static_cast<double>(map[i * w + j + 1]) - here : 0.0;
      tv += norm == TvNorm::kL1 ? std::abs(down) + std::abs(right) : std::sqrt(down * down + right * right);
    }
  return tv;
}

Tensor saliency_variance(const SaliencyMap& s) {
  const std::size_t b = s.batch(), n = s.tokens();
  Tensor out({b});
  for (std::size_t i = 0; i < b; ++i) {
    double mu = 0;
    for (auto v : s.row(i)) mu += v;
    mu /= static_cast<double>(n);
    double var = 0;
    for (auto v : s.row(i)) var += (v - mu) * (v - mu);
    out[i] = static_cast<Scalar>(var / static_cast<double>(n));
  }
  return out;
}

}  // namespace tkmx::inline TKMX_ABI
