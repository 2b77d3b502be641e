#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "dvclip/gradcheck.hpp"
#include "dvclip/prompts.hpp"
#include "dvclip/random.hpp"

using namespace dvclip;

namespace {

Tensor row_tensor(std::vector<double> v) {
  const auto n = v.size();
  return Tensor({1, n}, std::move(v));
}

// Softmax-weighted pooling computed by hand.
double pooled(const std::vector<double>& weights_from, const std::vector<double>& values) {
  const double mx = *std::max_element(weights_from.begin(), weights_from.end());
  double z = 0.0, s = 0.0;
  for (std::size_t t = 0; t < weights_from.size(); ++t) {
    const double e = std::exp(weights_from[t] - mx);
    z += e;
    s += e * values[t];
  }
  return s / z;
}

ClipModel toy_model(std::uint64_t seed) {
  EncoderConfig c;
  c.embed_dim = 16;
  c.num_layers = 1;
  c.num_heads = 2;
  c.patch_size = 8;
  c.frame_size = 16;
  c.max_tokens = 16;
  ClipModel m{c, Vocabulary({"open", "close", "box", "door"}), {}};
  m.weights = init_clip_weights(c, m.vocab.size(), seed);
  return m;
}

}  // namespace

TEST(Aggregate, WorkedExampleOnPositiveLogits) {
  auto r = aggregate(row_tensor({1.0, 3.0}), row_tensor({0.0, 0.0}));
  EXPECT_NEAR(r.positive.at(0), 2.7616, 1e-4);
  auto w = softmax(row_tensor({1.0, 3.0}), 1);
  EXPECT_NEAR(w.at(0), 0.1192, 1e-4);
  EXPECT_NEAR(w.at(1), 0.8808, 1e-4);
}

TEST(Aggregate, NegativeLogitsReusePositiveWeights) {
  auto r = aggregate(row_tensor({0.0, std::log(3.0)}), row_tensor({4.0, 0.0}));
  EXPECT_NEAR(r.negative.at(0), 1.0, 1e-12);
  auto own = aggregate(row_tensor({0.0, std::log(3.0)}), row_tensor({4.0, 0.0}), NegativeWeights::negative);
  EXPECT_NEAR(own.negative.at(0), pooled({4.0, 0.0}, {4.0, 0.0}), 1e-12);
}

TEST(Aggregate, SingleFrameAndConstantLogits) {
  auto one = aggregate(Tensor({2, 1}, {0.3, -1.0}), Tensor({2, 1}, {0.7, 2.0}));
  EXPECT_DOUBLE_EQ(one.positive.at(1), -1.0);
  EXPECT_DOUBLE_EQ(one.negative.at(0), 0.7);
  auto flat = aggregate(row_tensor({2.0, 2.0, 2.0}), row_tensor({1.0, 2.0, 6.0}));
  EXPECT_NEAR(flat.positive.at(0), 2.0, 1e-15);
  EXPECT_NEAR(flat.negative.at(0), 3.0, 1e-14);
}

TEST(Aggregate, PropertiesOnRandomSheets) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t C = 1 + rng.index(4), T = 1 + rng.index(8);
    std::vector<double> p(C * T), n(C * T);
    for (auto& x : p) x = rng.normal(0.0, 3.0);
    for (auto& x : n) x = rng.normal(0.0, 3.0);
    auto r = aggregate(Tensor({C, T}, p), Tensor({C, T}, n));
    std::vector<std::size_t> perm(T);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<double> pp(C * T), pn(C * T);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < T; ++t) {
        pp[c * T + t] = p[c * T + perm[t]];
        pn[c * T + t] = n[c * T + perm[t]];
      }
    auto rp = aggregate(Tensor({C, T}, pp), Tensor({C, T}, pn));
    for (std::size_t c = 0; c < C; ++c) {
      std::vector<double> pr(p.begin() + c * T, p.begin() + (c + 1) * T), nr(n.begin() + c * T, n.begin() + (c + 1) * T);
      EXPECT_GE(r.positive.at(c), *std::min_element(pr.begin(), pr.end()) - 1e-12);
      EXPECT_LE(r.positive.at(c), *std::max_element(pr.begin(), pr.end()) + 1e-12);
      EXPECT_NEAR(r.positive.at(c), pooled(pr, pr), 1e-10);
      EXPECT_NEAR(r.negative.at(c), pooled(pr, nr), 1e-10);
      EXPECT_EQ(rp.positive.at(c), r.positive.at(c));  // exact: frames are put in canonical order
      EXPECT_EQ(rp.negative.at(c), r.negative.at(c));
    }
  }
}

TEST(Predict, DirectRule) {
  std::vector<double> p{2, 0}, n{1, 1};
  EXPECT_EQ(predict(p, n), std::vector<std::size_t>{0});
  EXPECT_TRUE(predict(p, p).empty());
  std::vector<double> hi{5, 5};
  EXPECT_TRUE(predict(p, hi).empty());
}

TEST(AsymmetricLoss, HalfLnTwoAtEvenOdds) {
  LossConfig cfg;
  cfg.gamma_plus = 1.0;
  cfg.clip_margin = 0.0;
  std::vector<double> y{1.0};
  auto l = asymmetric_loss(Tensor({1}, {0.4}), Tensor({1}, {0.4}), y, cfg);
  EXPECT_NEAR(l.item(), 0.5 * std::log(2.0), 1e-12);
}

TEST(AsymmetricLoss, ReducesToBinaryCrossEntropy) {
  LossConfig cfg;
  cfg.gamma_plus = cfg.gamma_minus = cfg.clip_margin = 0.0;
  Rng rng(32);
  std::vector<double> p(6), n(6), y{1, 0, 0, 1, 0, 1};
  for (auto& x : p) x = rng.normal();
  for (auto& x : n) x = rng.normal();
  double want = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double prob = 1.0 / (1.0 + std::exp(-(p[i] - n[i])));
    want -= y[i] * std::log(prob) + (1 - y[i]) * std::log(1 - prob);
  }
  auto l = asymmetric_loss(Tensor({6}, p), Tensor({6}, n), y, cfg);
  EXPECT_NEAR(l.item(), want / 6.0, 1e-12);
}

TEST(AsymmetricLoss, MatchesFormulaWithFocusingAndMargin) {
  LossConfig cfg;
  cfg.gamma_plus = 1.0;
  cfg.gamma_minus = 2.0;
  cfg.clip_margin = 0.05;
  std::vector<double> p{0.3, -0.2, 1.5}, n{0.0, 0.4, -0.5}, y{1, 0, 0};
  double want = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double prob = 1.0 / (1.0 + std::exp(-(p[i] - n[i])));
    const double q = std::max(prob - 0.05, 0.0);
    want -= y[i] * std::pow(1 - prob, 1.0) * std::log(prob) + (1 - y[i]) * q * q * std::log(1 - q);
  }
  EXPECT_NEAR(asymmetric_loss(Tensor({3}, p), Tensor({3}, n), y, cfg).item(), want / 3.0, 1e-12);
}

TEST(AsymmetricLoss, SaturatedPredictionIsNearZero) {
  LossConfig cfg;
  std::vector<double> y{1, 0, 1, 0};
  auto l = asymmetric_loss(Tensor({4}, {20, -20, 20, -20}), Tensor({4}, std::vector<double>(4, 0.0)), y, cfg);
  EXPECT_LT(l.item(), 1e-6);
}

TEST(AsymmetricLoss, RejectsNonBinaryTargets) {
  std::vector<double> y{0.5};
  EXPECT_THROW(asymmetric_loss(Tensor({1}, {0.0}), Tensor({1}, {0.0}), y, LossConfig{}), std::invalid_argument);
}

TEST(PromptAssembly, LengthAndDegenerateContext) {
  auto m = toy_model(1);
  ActionClass cls{"c0", "open box", "open", "box"};
  const auto& table = m.weights.get("text.token_embedding");
  auto ctx = PromptPair::init(5, 16, 3).positive;
  auto seq = assemble_class_prompt(ctx, cls, m.vocab, table);
  EXPECT_EQ(seq.dim(0), 7u);
  auto again = assemble_class_prompt(ctx, cls, m.vocab, table);
  EXPECT_TRUE(std::equal(seq.values().begin(), seq.values().end(), again.values().begin()));
  auto bare = assemble_class_prompt(Tensor{}, cls, m.vocab, table);
  EXPECT_EQ(bare.dim(0), 2u);
  for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(bare.at(0, c), table.at(m.vocab.encode("open")[0], c));
}

TEST(PromptAssembly, UnknownWordIsNamed) {
  auto m = toy_model(1);
  ActionClass cls{"c9", "open window", "open", "window"};
  try {
    assemble_class_prompt(Tensor{}, cls, m.vocab, m.weights.get("text.token_embedding"));
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("window"), std::string::npos);
  }
  ActionClass empty{"c8", "  ", "open", std::nullopt};
  EXPECT_THROW(assemble_class_prompt(Tensor{}, empty, m.vocab, m.weights.get("text.token_embedding")),
               std::invalid_argument);
}

TEST(ScoreFrames, IdenticalAndOrthogonalVectors) {
  Tensor v({2, 3}, {1, 0, 0, 0, 1, 0});
  Tensor text({1, 3}, {1, 0, 0});
  auto s = score_frames(v, text, text, 1.0);
  EXPECT_NEAR(s.positive.at(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(s.positive.at(0, 1), 0.0, 1e-15);
}

TEST(ScoreFrames, PresenceProbabilityIsTwoWaySoftmax) {
  EXPECT_NEAR(presence_probability(2.0, 1.0), std::exp(2.0) / (std::exp(2.0) + std::exp(1.0)), 1e-15);
  EXPECT_NEAR(presence_probability(-800.0, 0.0), 0.0, 1e-300);
}

TEST(PromptGradient, FullPipelineMatchesFiniteDifferences) {
  auto m = toy_model(5);
  std::vector<ActionClass> classes{{"a", "open box", "open", "box"}, {"b", "close door", "close", "door"},
                                   {"c", "open door", "open", "door"}};
  Rng rng(33);
  std::vector<double> fv(4 * 16);
  for (auto& x : fv) x = rng.normal();
  const Tensor frames = l2_normalize(Tensor({4, 16}, fv), 1);
  auto prompts = PromptPair::init(4, 16, 7, 0.5);
  const std::vector<double> targets{1, 0, 1};
  LossConfig cfg;
  cfg.logit_scale = 3.0;
  const auto neg = prompts.negative;
  ScalarFunction f = [&](const Tensor& ctx) {
    auto sheet = score_frames(frames, encode_class_prompts(ctx, classes, m), encode_class_prompts(neg, classes, m),
                              cfg.logit_scale);
    auto agg = aggregate(sheet);
    return asymmetric_loss(agg.positive, agg.negative, targets, cfg);
  };
  EXPECT_LT(finite_difference_check(f, prompts.positive), 1e-4);
}

TEST(PromptCheckpoint, RoundTripIsExact) {
  auto p = PromptPair::init(3, 8, 42);
  LossConfig cfg;
  cfg.logit_scale = 7.5;
  cfg.negative_weights = NegativeWeights::negative;
  const auto path = std::filesystem::temp_directory_path() / "dvclip_prompts_roundtrip.ckpt";
  save_prompts(p, 8, cfg, path);
  auto back = load_prompts(path);
  EXPECT_EQ(back.loss, cfg);
  EXPECT_EQ(back.prompts.seed, 42u);
  for (std::size_t i = 0; i < p.positive.numel(); ++i) {
    EXPECT_EQ(back.prompts.positive.at(i), p.positive.at(i));
    EXPECT_EQ(back.prompts.negative.at(i), p.negative.at(i));
  }
  std::filesystem::remove(path);
}
