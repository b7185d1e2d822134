#include <gtest/gtest.h>

#include <limits>

#include "oracles.hpp"
#include "tokenmixup/transformer/train_step.hpp"

using namespace tkmx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.image_size = 8;
  cfg.patch_size = 2;
  cfg.depth = 3;
  cfg.heads = 2;
  cfg.dim = 16;
  cfg.num_classes = 3;
  cfg.htm_layer = 2;
  cfg.vtm_layer = 3;
  cfg.kappa = 3;
  return cfg;
}

struct Batch {
  Tensor images, labels;
};

Batch make_batch(std::size_t b, std::uint64_t seed) {
  CounterRng rng(seed, RngStream::kTest);
  Batch out{oracle::random_tensor({b, 1, 8, 8}, rng), Tensor({b, 3})};
  for (std::size_t i = 0; i < b; ++i) out.labels.at(i, i % 3) = 1;
  return out;
}

StepReport step(TransformerModel& model, const Batch& batch, MixMode mode, std::uint64_t seed = 1) {
  CounterRng rng(seed, RngStream::kMixup);
  return train_step(model, batch.images, batch.labels, StepSettings{mode}, SgdSettings{}, rng);
}

}  // namespace

TEST(MixModeNames, RoundTrip) {
  for (MixMode m : {MixMode::kBaseline, MixMode::kHtm, MixMode::kVtm, MixMode::kHtmVtm, MixMode::kRandomSample,
                    MixMode::kRandomToken}) {
    EXPECT_EQ(parse_mix_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_mix_mode("cutmix"), ConfigError);
}

TEST(TrainStep, BaselineIsPlainSupervisedStep) {
  ModelConfig cfg = small_config();
  cfg.htm_layer.reset();
  cfg.vtm_layer.reset();
  TransformerModel model(cfg, 1);
  const Tensor before = model.params().get("layer.1.attn.wq").value;
  const StepReport r = step(model, make_batch(6, 1), MixMode::kBaseline);
  EXPECT_EQ(r.num_mixed, 0u);
  EXPECT_EQ(r.counters.total(), 0u);
  EXPECT_EQ(r.scorenet_loss, 0.0);
  EXPECT_GT(r.loss, 0.0);
  EXPECT_FALSE(bitwise_equal(before, model.params().get("layer.1.attn.wq").value));
}

TEST(TrainStep, BaselineLeavesScoreNetUntouched) {
  TransformerModel model(small_config(), 1);
  const Tensor before = model.params().get("scorenet.fc1.w").value;
  step(model, make_batch(6, 2), MixMode::kBaseline);
  EXPECT_TRUE(bitwise_equal(before, model.params().get("scorenet.fc1.w").value));
}

TEST(TrainStep, TauZeroMixesNothing) {
  ModelConfig cfg = small_config();
  cfg.tau = 0;
  TransformerModel model(cfg, 2);
  const StepReport r = step(model, make_batch(6, 3), MixMode::kHtm);
  EXPECT_EQ(r.num_mixed, 0u);
  EXPECT_TRUE(r.tokens_replaced.empty());
  EXPECT_EQ(r.counters.horizontal, 1u);
}

TEST(TrainStep, TauZeroMatchesBaselineUpdate) {
  ModelConfig cfg = small_config();
  cfg.tau = 0;
  cfg.score_loss_weight = 0;
  TransformerModel a(cfg, 3), b(cfg, 3);
  const Batch batch = make_batch(6, 4);
  const StepReport ra = step(a, batch, MixMode::kHtm);
  const StepReport rb = step(b, batch, MixMode::kBaseline);
  EXPECT_EQ(ra.loss, rb.loss);
  EXPECT_TRUE(bitwise_equal(a.params().get("head.w").value, b.params().get("head.w").value));
}

TEST(TrainStep, InfiniteTauMixesBothSamples) {
  ModelConfig cfg = small_config();
  cfg.tau = kInf;
  cfg.rho = 0;
  TransformerModel model(cfg, 4);
  const Batch batch = make_batch(2, 5);

  // Expected replacement count from an independent evaluation of the plan.
  Tensor tokens;
  {
    Graph g(false);
    tokens = model.tokenize(g, batch.images).value();
  }
  tokens = model.run_layers(1, 1, tokens);
  const auto maps = model.attention_maps(2, tokens, 0);
  const SaliencyMap s = token_saliency(maps[0].phi);
  const MatchPlan best = brute_force_match(pairwise_gain(s, {0, 1}, 0.0));
  std::size_t expected = 0;
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t t = 0; t < s.tokens(); ++t)
      expected += s.scores.at(best.sigma[i], t) - s.scores.at(i, t) > 0 ? 1 : 0;

  const StepReport r = step(model, batch, MixMode::kHtm);
  EXPECT_EQ(r.num_mixed, 2u);
  std::size_t replaced = 0;
  for (auto v : r.tokens_replaced) replaced += v;
  EXPECT_GT(replaced, 0u);
  EXPECT_EQ(replaced, expected);
  EXPECT_NEAR(r.realized_gain, best.realized_gain, 1e-6);
}

TEST(TrainStep, FrozenPlanReplaysLossExactly) {
  ModelConfig cfg = small_config();
  cfg.tau = kInf;
  TransformerModel model(cfg, 5);
  const Batch batch = make_batch(4, 6);
  CounterRng rng(1, RngStream::kMixup);
  Graph g1(false);
  StepForward first = forward_step(model, g1, batch.images, batch.labels, StepSettings{MixMode::kHtmVtm}, rng);
  ASSERT_TRUE(first.plan.has_mix);
  EXPECT_EQ(first.plan.vtm_pooled.size(), 2u);
  Graph g2(false);
  StepForward again =
      forward_step(model, g2, batch.images, batch.labels, StepSettings{MixMode::kHtmVtm}, rng, &first.plan);
  EXPECT_TRUE(bitwise_equal(first.loss.value(), again.loss.value()));
}

TEST(TrainStep, ModeIsolationCounters) {
  const Batch batch = make_batch(4, 7);
  struct Case {
    MixMode mode;
    std::size_t h, v, r;
  };
  for (const Case c : {Case{MixMode::kBaseline, 0, 0, 0}, Case{MixMode::kHtm, 1, 0, 0}, Case{MixMode::kVtm, 0, 1, 0},
                       Case{MixMode::kHtmVtm, 1, 1, 0}, Case{MixMode::kRandomSample, 0, 0, 1},
                       Case{MixMode::kRandomToken, 0, 0, 1}}) {
    TransformerModel model(small_config(), 6);
    const StepReport r = step(model, batch, c.mode);
    EXPECT_EQ(r.counters.horizontal, c.h) << to_string(c.mode);
    EXPECT_EQ(r.counters.vertical, c.v) << to_string(c.mode);
    EXPECT_EQ(r.counters.random, c.r) << to_string(c.mode);
  }
}

TEST(TrainStep, ShapesAndLabelsAcrossModes) {
  ModelConfig cfg = small_config();
  cfg.tau = kInf;
  const Batch batch = make_batch(6, 8);
  for (MixMode mode : {MixMode::kBaseline, MixMode::kHtm, MixMode::kVtm, MixMode::kHtmVtm, MixMode::kRandomSample,
                       MixMode::kRandomToken}) {
    TransformerModel model(cfg, 7);
    CounterRng rng(2, RngStream::kMixup);
    Graph g(false);
    StepForward f = forward_step(model, g, batch.images, batch.labels, StepSettings{mode, 3.0, 0}, rng);
    EXPECT_EQ(f.trace.logits.dims(), (Dims{6, 3})) << to_string(mode);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(oracle::row_sum(f.plan.labels, i), 1.0, 1e-6);
  }
}

TEST(TrainStep, ModeWithoutLayerIsConfigError) {
  ModelConfig cfg = small_config();
  cfg.htm_layer.reset();
  TransformerModel model(cfg, 8);
  EXPECT_THROW(step(model, make_batch(4, 9), MixMode::kHtm), ConfigError);
}

TEST(TrainStep, ScoreNetLearnsOnlyFromAuxLoss) {
  ModelConfig cfg = small_config();
  cfg.tau = 0.5;
  TransformerModel model(cfg, 9);
  const Tensor before = model.params().get("scorenet.fc2.w").value;
  const StepReport r = step(model, make_batch(6, 10), MixMode::kHtm);
  EXPECT_GT(r.scorenet_loss, 0.0);
  EXPECT_FALSE(bitwise_equal(before, model.params().get("scorenet.fc2.w").value));
}

TEST(Evaluate, CountsArgmaxMatches) {
  const Tensor logits = Tensor::from({3, 2}, {1, 0, 0, 1, 2, 3});
  const Tensor labels = Tensor::from({3, 2}, {1, 0, 1, 0, 0, 1});
  EXPECT_EQ(count_correct(logits, labels), 2u);
}
