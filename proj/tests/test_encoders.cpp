#include <gtest/gtest.h>

#include <cmath>

#include "dvclip/encoders.hpp"
#include "dvclip/random.hpp"

using namespace dvclip;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double sd = 1.0) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.normal(0.0, sd);
  return Tensor({r, c}, std::move(v));
}

AttentionBlock random_block(std::size_t d, Rng& rng) {
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  return {random_matrix(d, d, rng, sd), random_matrix(1, d, rng).reshaped({d}), random_matrix(d, d, rng, sd),
          random_matrix(1, d, rng).reshaped({d}), random_matrix(d, d, rng, sd), random_matrix(1, d, rng).reshaped({d}),
          random_matrix(d, d, rng, sd), random_matrix(1, d, rng).reshaped({d})};
}

using Mat = std::vector<std::vector<double>>;

Mat to_mat(const Tensor& t) {
  Mat m(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i)
    for (std::size_t j = 0; j < t.dim(1); ++j) m[i][j] = t.at(i, j);
  return m;
}

Mat affine(const Mat& x, const Tensor& w, const Tensor& b) {
  Mat out(x.size(), std::vector<double>(w.dim(1), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < w.dim(1); ++j) {
      double s = b.at(j);
      for (std::size_t k = 0; k < x[i].size(); ++k) s += x[i][k] * w.at(k, j);
      out[i][j] = s;
    }
  return out;
}

// Reference windowed attention written from the definition: queries of
// frame t attend to the union of key/value tokens of frames within the
// window, one softmax per query row and head, scaled by 1/sqrt(d_head).
std::vector<Mat> reference_attention(const std::vector<Tensor>& frames, const AttentionBlock& blk, std::size_t heads,
                                     std::size_t window) {
  const std::size_t T = frames.size(), d = frames[0].dim(1), dh = d / heads;
  const long half = static_cast<long>(window / 2);
  std::vector<Mat> q, k, v;
  for (const auto& f : frames) {
    q.push_back(affine(to_mat(f), blk.wq, blk.bq));
    k.push_back(affine(to_mat(f), blk.wk, blk.bk));
    v.push_back(affine(to_mat(f), blk.wv, blk.bv));
  }
  std::vector<Mat> out;
  for (std::size_t t = 0; t < T; ++t) {
    Mat keys, vals;
    for (long s = static_cast<long>(t) - half; s <= static_cast<long>(t) + half; ++s) {
      if (s < 0 || s >= static_cast<long>(T)) continue;
      keys.insert(keys.end(), k[s].begin(), k[s].end());
      vals.insert(vals.end(), v[s].begin(), v[s].end());
    }
    Mat merged(q[t].size(), std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < q[t].size(); ++i) {
      for (std::size_t h = 0; h < heads; ++h) {
        std::vector<double> logits(keys.size());
        double mx = -1e300;
        for (std::size_t j = 0; j < keys.size(); ++j) {
          double s = 0.0;
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) s += q[t][i][c] * keys[j][c];
          logits[j] = s / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, logits[j]);
        }
        double z = 0.0;
        for (auto& l : logits) z += (l = std::exp(l - mx));
        for (std::size_t j = 0; j < keys.size(); ++j)
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) merged[i][c] += logits[j] / z * vals[j][c];
      }
    }
    out.push_back(affine(merged, blk.wo, blk.bo));
  }
  return out;
}

double max_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

EncoderConfig toy_config() {
  EncoderConfig c;
  c.embed_dim = 16;
  c.num_layers = 2;
  c.num_heads = 2;
  c.patch_size = 8;
  c.frame_size = 16;
  c.max_tokens = 12;
  return c;
}

std::vector<Frame> random_frames(std::size_t n, const EncoderConfig& c, Rng& rng) {
  std::vector<Frame> out;
  for (std::size_t t = 0; t < n; ++t) {
    Frame f{c.frame_size, c.frame_size, c.channels, std::vector<double>(c.frame_size * c.frame_size * c.channels)};
    for (auto& p : f.pixels) p = rng.uniform();
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

TEST(Attention, MatchesIndependentReference) {
  Rng rng(11);
  for (std::size_t window : {1u, 3u, 5u}) {
    const std::size_t d = 8, heads = 2, tokens = 3, T = 4;
    auto blk = random_block(d, rng);
    std::vector<Tensor> frames;
    for (std::size_t t = 0; t < T; ++t) frames.push_back(random_matrix(tokens, d, rng));
    auto got = attention_forward(frames, blk, heads, window);
    auto want = reference_attention(frames, blk, heads, window);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t i = 0; i < tokens; ++i)
        for (std::size_t c = 0; c < d; ++c) EXPECT_NEAR(got[t].at(i, c), want[t][i][c], 1e-12) << "window " << window;
  }
}

TEST(Attention, WindowOneIsPerFrameAttention) {
  Rng rng(12);
  const std::size_t d = 8, heads = 2;
  auto blk = random_block(d, rng);
  std::vector<Tensor> frames;
  for (int t = 0; t < 5; ++t) frames.push_back(random_matrix(4, d, rng));
  auto joint = attention_forward(frames, blk, heads, 1);
  for (std::size_t t = 0; t < 5; ++t) {
    auto alone = attention_forward(std::span(frames).subspan(t, 1), blk, heads, 3);
    EXPECT_LT(max_diff(joint[t], alone[0]), 1e-12);
  }
}

TEST(Attention, SwappingNeighboursChangesFirstFrame) {
  Rng rng(13);
  auto blk = random_block(8, rng);
  std::vector<Tensor> frames;
  for (int t = 0; t < 5; ++t) frames.push_back(random_matrix(3, 8, rng));
  auto before = attention_forward(frames, blk, 2, 3);
  std::swap(frames[1], frames[3]);
  auto after = attention_forward(frames, blk, 2, 3);
  EXPECT_GT(max_diff(before[0], after[0]), 1e-6);
}

TEST(Attention, RejectsEmptyClipAndEvenWindow) {
  Rng rng(14);
  auto blk = random_block(8, rng);
  std::vector<Tensor> none;
  EXPECT_THROW(attention_forward(none, blk, 2, 3), std::invalid_argument);
  std::vector<Tensor> one{random_matrix(2, 8, rng)};
  EXPECT_THROW(attention_forward(one, blk, 2, 2), std::invalid_argument);
}

TEST(VideoEncoder, WindowOneEqualsIndependentImages) {
  Rng rng(15);
  const auto cfg = toy_config();
  auto w = init_clip_weights(cfg, 5, 21);
  auto frames = random_frames(4, cfg, rng);
  auto joint = encode_video({frames, {}}, w, cfg, 1);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    auto alone = encode_video({{frames[t]}, {}}, w, cfg, 3);
    for (std::size_t c = 0; c < cfg.embed_dim; ++c) EXPECT_NEAR(joint.at(t, c), alone.at(0, c), 1e-12);
  }
}

TEST(VideoEncoder, OutputsAreUnitNorm) {
  Rng rng(16);
  const auto cfg = toy_config();
  auto w = init_clip_weights(cfg, 5, 22);
  auto v = encode_video({random_frames(3, cfg, rng), {}}, w, cfg, 3);
  for (std::size_t t = 0; t < 3; ++t) {
    double n = 0.0;
    for (double x : v.row(t)) n += x * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
  }
}

TEST(VideoEncoder, FeaturePathOnlyNormalizes) {
  const auto cfg = toy_config();
  auto w = init_clip_weights(cfg, 5, 23);
  Rng rng(17);
  auto f = random_matrix(16, cfg.embed_dim, rng);
  auto v = encode_video({{}, f}, w, cfg, 3);
  for (std::size_t r = 0; r < 16; ++r) {
    double n = 0.0;
    for (double x : f.row(r)) n += x * x;
    for (std::size_t c = 0; c < cfg.embed_dim; ++c) EXPECT_NEAR(v.at(r, c), f.at(r, c) / std::sqrt(n), 1e-15);
  }
}

TEST(VideoEncoder, RejectsMixedInput) {
  const auto cfg = toy_config();
  auto w = init_clip_weights(cfg, 5, 24);
  Rng rng(18);
  EXPECT_THROW(encode_video({random_frames(2, cfg, rng), random_matrix(2, cfg.embed_dim, rng)}, w, cfg, 3),
               std::invalid_argument);
  EXPECT_THROW(encode_video({{}, {}}, w, cfg, 3), std::invalid_argument);
}

TEST(TextEncoder, UnitNormAndDeterministic) {
  const auto cfg = toy_config();
  auto w = init_clip_weights(cfg, 6, 25);
  Rng rng(19);
  auto seq = random_matrix(5, cfg.embed_dim, rng);
  auto a = encode_text(seq, w, cfg), b = encode_text(seq, w, cfg);
  double n = 0.0;
  for (double x : a.values()) n += x * x;
  EXPECT_NEAR(std::sqrt(n), 1.0, 1e-12);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.at(i), b.at(i));
}

TEST(TextEncoder, RejectsOverLengthSequence) {
  const auto cfg = toy_config();
  auto w = init_clip_weights(cfg, 6, 26);
  Rng rng(20);
  EXPECT_THROW(encode_text(random_matrix(cfg.max_tokens + 1, cfg.embed_dim, rng), w, cfg), std::invalid_argument);
}

TEST(TextEncoder, BatchedMixedLengthsMatchSingles) {
  const auto cfg = toy_config();
  auto w = init_clip_weights(cfg, 6, 27);
  Rng rng(21);
  std::vector<Tensor> seqs{random_matrix(3, cfg.embed_dim, rng), random_matrix(5, cfg.embed_dim, rng),
                           random_matrix(3, cfg.embed_dim, rng)};
  auto batch = encode_texts(seqs, w, cfg);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto one = encode_text(seqs[i], w, cfg);
    for (std::size_t c = 0; c < cfg.embed_dim; ++c) EXPECT_NEAR(batch.at(i, c), one.at(c), 1e-12);
  }
}

TEST(Interpolation, EndpointsAreBitwiseAndMidpointIsMean) {
  const auto cfg = toy_config();
  auto a = init_clip_weights(cfg, 6, 1), b = init_clip_weights(cfg, 6, 2);
  EXPECT_TRUE(interpolate_weights(a, b, 0.0).identical(a));
  EXPECT_TRUE(interpolate_weights(a, b, 1.0).identical(b));
  auto mid = interpolate_weights(a, b, 0.5);
  for (const auto& [name, t] : mid) {
    for (std::size_t i = 0; i < t.numel(); ++i) {
      EXPECT_NEAR(t.at(i), (a.get(name).at(i) + b.get(name).at(i)) / 2.0, 1e-15);
    }
  }
}

TEST(Interpolation, MismatchNamesTheParameter) {
  const auto cfg = toy_config();
  auto a = init_clip_weights(cfg, 6, 1), b = init_clip_weights(cfg, 7, 2);
  try {
    interpolate_weights(a, b, 0.5);
    FAIL() << "expected a mismatch error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("text.token_embedding"), std::string::npos) << e.what();
  }
  EXPECT_THROW(interpolate_weights(a, a, 1.5), std::invalid_argument);
}

TEST(ZeroShot, IdenticalClassesGiveUniformProbabilities) {
  Rng rng(22);
  auto e = random_matrix(1, 6, rng);
  auto c = random_matrix(1, 6, rng);
  auto p = clip_zero_shot_probs(e, concat({c, c, c, c}, 0));
  for (double x : p.values()) EXPECT_NEAR(x, 0.25, 1e-15);
}

TEST(ZeroShot, TwoClassHandComputedSoftmax) {
  Tensor e({1, 2}, {1.0, 0.0});
  Tensor classes({2, 2}, {1.0, 0.0, 0.0, 1.0});
  auto p = clip_zero_shot_probs(e, classes, 1.0);
  EXPECT_NEAR(p.at(0), std::exp(1.0) / (std::exp(1.0) + 1.0), 1e-12);
  EXPECT_NEAR(p.at(1), 1.0 / (std::exp(1.0) + 1.0), 1e-12);
  EXPECT_THROW(clip_zero_shot_probs(e, Tensor{}), std::invalid_argument);
}

TEST(EncoderConfigTest, RejectsBadSizes) {
  auto c = toy_config();
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = toy_config();
  c.temporal_window = 2;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
