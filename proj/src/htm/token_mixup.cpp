#include "tokenmixup/htm/token_mixup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace tkmx::inline TKMX_ABI {

std::size_t MixReport::total_tokens_replaced() const {
  return std::accumulate(tokens_replaced.begin(), tokens_replaced.end(), std::size_t{0});
}

double MixReport::mean_tokens_replaced() const {
  if (tokens_replaced.empty()) return 0.0;
  return static_cast<double>(total_tokens_replaced()) / static_cast<double>(tokens_replaced.size());
}

std::vector<std::size_t> MixPlan::source_rows(std::size_t batch) const {
  std::vector<std::size_t> rows(batch);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (std::size_t i = 0; i < easy.size(); ++i) rows[easy.indices[i]] = match.sigma[i];
  return rows;
}

Tensor MixPlan::full_mask(std::size_t batch, std::size_t tokens) const {
  Tensor full({batch, tokens}, Scalar(1));
  for (std::size_t i = 0; i < easy.size(); ++i) full.set_slice0(easy.indices[i], mask.m.slice0(i));
  return full;
}

Tensor mix_mask(std::span<const Scalar> s_easy, std::span<const Scalar> s_src, double rho) {
  if (s_easy.size() != s_src.size()) throw ShapeError("mix_mask: saliency rows differ in length");
  Tensor m({s_easy.size()}, Scalar(1));
  for (std::size_t t = 0; t < s_easy.size(); ++t) {
    const double gain = static_cast<double>(s_src[t]) - static_cast<double>(s_easy[t]);
    if (gain > rho) m[t] = 0;
  }
  return m;
}

Tensor mix_tokens(const Tensor& x_easy, const Tensor& x_src, const Tensor& m) {
  if (x_easy.rank() != 2 || x_easy.dims() != x_src.dims() || m.size() != x_easy.dim(0)) {
    throw ShapeError("mix_tokens: expected (n, d) tokens and an n-mask, got " + dims_to_string(x_easy.dims()) +
                     ", " + dims_to_string(x_src.dims()) + ", " + dims_to_string(m.dims()));
  }
  const std::size_t n = x_easy.dim(0), d = x_easy.dim(1);
  Tensor out = x_easy;
  for (std::size_t t = 0; t < n; ++t)
    if (m[t] == 0)
      for (std::size_t k = 0; k < d; ++k) out.at(t, k) = x_src.at(t, k);
  return out;
}

double keep_weight(std::span<const Scalar> s_easy, std::span<const Scalar> s_src, const Tensor& m) {
  if (s_easy.size() != m.size() || s_src.size() != m.size()) throw ShapeError("relabel: mask length mismatch");
  double kept = 0.0, inserted = 0.0;
  for (std::size_t t = 0; t < m.size(); ++t) {
    if (m[t] != 0)
      kept += s_easy[t];
    else
      inserted += s_src[t];
  }
  const double denom = kept + inserted;
  if (denom < 1e-12) return 1.0;
  return kept / denom;
}

namespace {

Tensor mix_labels(const Tensor& y_easy, const Tensor& y_src, double w_keep) {
  if (y_easy.dims() != y_src.dims()) throw ShapeError("relabel: label shapes differ");
  if (w_keep == 1.0) return y_easy;
  Tensor out(y_easy.dims());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = static_cast<Scalar>(w_keep * static_cast<double>(y_easy[k]) +
                                 (1.0 - w_keep) * static_cast<double>(y_src[k]));
  }
  return out;
}

void check_batch(const Tensor& x, const Tensor& y) {
  if (x.rank() != 3 || y.rank() != 2 || x.dim(0) != y.dim(0)) {
    throw ShapeError("token mixup: tokens " + dims_to_string(x.dims()) + " and labels " + dims_to_string(y.dims()) +
                     " disagree");
  }
}

}  // namespace

Tensor relabel(const Tensor& y_easy, const Tensor& y_src, std::span<const Scalar> s_easy,
               std::span<const Scalar> s_src, const Tensor& m) {
  return mix_labels(y_easy, y_src, keep_weight(s_easy, s_src, m));
}

MixPlan plan_token_mixup(const SaliencyMap& s, const EasySelection& easy, const Tensor& labels, double rho) {
  const std::size_t b = s.batch(), n = s.tokens();
  if (labels.rank() != 2 || labels.dim(0) != b) throw ShapeError("plan_token_mixup: labels do not match the batch");
  MixPlan plan;
  plan.easy = easy;
  plan.labels = labels;
  if (easy.empty()) return plan;

  plan.match = hungarian_match(pairwise_gain(s, easy.indices, rho));
  plan.mask.m = Tensor({easy.size(), n});
  plan.report.num_mixed = easy.size();
  plan.report.realized_gain = plan.match.realized_gain;
  for (std::size_t i = 0; i < easy.size(); ++i) {
    const std::size_t self = easy.indices[i], src = plan.match.sigma[i];
    const Tensor m = mix_mask(s.row(self), s.row(src), rho);
    plan.mask.m.set_slice0(i, m);
    plan.report.tokens_replaced.push_back(
        static_cast<std::size_t>(std::count(m.data().begin(), m.data().end(), Scalar(0))));
    const double w = keep_weight(s.row(self), s.row(src), m);
    plan.keep_weight.push_back(w);
    plan.labels.set_slice0(self, mix_labels(labels.slice0(self), labels.slice0(src), w));
  }
  return plan;
}

Tensor apply_mix(const Tensor& x, const MixPlan& plan) {
  Tensor out = x;
  for (std::size_t i = 0; i < plan.easy.size(); ++i) {
    const std::size_t self = plan.easy.indices[i], src = plan.match.sigma[i];
    out.set_slice0(self, mix_tokens(x.slice0(self), x.slice0(src), plan.mask.m.slice0(i)));
  }
  return out;
}

Var apply_mix(Var x, const MixPlan& plan) {
  if (!plan.active()) return x;
  const std::size_t b = x.dim(0), n = x.dim(1);
  return blend(x, gather0(x, plan.source_rows(b)), plan.full_mask(b, n));
}

MixResult token_mixup(const Tensor& x, const Tensor& y, const SaliencyMap& s, const DifficultyVector& u, double tau,
                      double rho) {
  check_batch(x, y);
  MixPlan plan = plan_token_mixup(s, select_easy(u, tau), y, rho);
  Tensor tokens = apply_mix(x, plan);
  return {std::move(tokens), plan.labels, plan.report, std::move(plan)};
}

EasySelection random_selection(std::size_t batch, double k, CounterRng& rng) {
  const double p = batch == 0 ? 0.0 : std::clamp(k / static_cast<double>(batch), 0.0, 1.0);
  EasySelection sel;
  for (std::size_t i = 0; i < batch; ++i)
    if (rng.uniform() < p) sel.indices.push_back(i);
  return sel;
}

MixResult random_sample_baseline(const Tensor& x, const Tensor& y, const SaliencyMap& s, double rho, double k,
                                 CounterRng& rng) {
  check_batch(x, y);
  MixPlan plan = plan_token_mixup(s, random_selection(x.dim(0), k, rng), y, rho);
  Tensor tokens = apply_mix(x, plan);
  return {std::move(tokens), plan.labels, plan.report, std::move(plan)};
}

MixPlan plan_random_token(std::size_t batch, std::size_t tokens, const EasySelection& easy, const Tensor& labels,
                          std::size_t per_pair_count, CounterRng& rng) {
  if (per_pair_count > tokens) {
    throw UsageError("random_token_baseline: per_pair_count " + std::to_string(per_pair_count) + " exceeds n = " +
                     std::to_string(tokens));
  }
  MixPlan plan;
  plan.easy = easy;
  plan.labels = labels;
  if (easy.empty()) return plan;

  std::vector<std::size_t> perm(batch);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  plan.match.sigma.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(easy.size()));
  plan.mask.m = Tensor({easy.size(), tokens}, Scalar(1));
  plan.report.num_mixed = easy.size();
  const double w = static_cast<double>(tokens - per_pair_count) / static_cast<double>(tokens);
  for (std::size_t i = 0; i < easy.size(); ++i) {
    std::vector<std::size_t> order(tokens);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    for (std::size_t k = 0; k < per_pair_count; ++k) plan.mask.m.at(i, order[k]) = 0;
    plan.report.tokens_replaced.push_back(per_pair_count);
    plan.keep_weight.push_back(w);
    const std::size_t self = easy.indices[i], src = plan.match.sigma[i];
    plan.labels.set_slice0(self, mix_labels(labels.slice0(self), labels.slice0(src), w));
  }
  return plan;
}

MixResult random_token_baseline(const Tensor& x, const Tensor& y, const EasySelection& easy,
                                std::size_t per_pair_count, CounterRng& rng) {
  check_batch(x, y);
  MixPlan plan = plan_random_token(x.dim(0), x.dim(1), easy, y, per_pair_count, rng);
  Tensor tokens = apply_mix(x, plan);
  return {std::move(tokens), plan.labels, plan.report, std::move(plan)};
}

std::size_t mean_salient_token_count(const SaliencyMap& s, double rho, CounterRng& rng, std::size_t pairs) {
  const std::size_t b = s.batch();
  if (b == 0 || pairs == 0) return 0;
  std::size_t total = 0;
  for (std::size_t p = 0; p < pairs; ++p) {
    const std::size_t i = rng.below(b), j = rng.below(b);
    const Tensor m = mix_mask(s.row(i), s.row(j), rho);
    total += static_cast<std::size_t>(std::count(m.data().begin(), m.data().end(), Scalar(0)));
  }
  return static_cast<std::size_t>(std::lround(static_cast<double>(total) / static_cast<double>(pairs)));
}

}  // namespace tkmx::inline TKMX_ABI
