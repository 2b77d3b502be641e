// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvclip/binary_io.hpp"
#include "dvclip/data.hpp"
#include "dvclip/encoders.hpp"
#include "dvclip/ops.hpp"
#include "dvclip/random.hpp"

namespace dvclip {

/// Which softmax weights pool the negative per-frame logits. `positive`
/// reuses the weights computed from the positive logits.
enum class NegativeWeights : std::uint8_t { positive = 0, negative = 1 };

inline const char* to_string(NegativeWeights n) { return n == NegativeWeights::positive ? "positive" : "negative"; }

inline NegativeWeights parse_negative_weights(const std::string& s) {
  if (s == "positive") return NegativeWeights::positive;
  if (s == "negative") return NegativeWeights::negative;
  throw std::invalid_argument("negative_weights must be 'positive' or 'negative', got '" + s + "'");
}

/// Asymmetric loss parameters and the similarity scale.
struct LossConfig {
  double gamma_plus = 1.0;
  double gamma_minus = 2.0;
  double clip_margin = 0.05;
  double logit_scale = 1.0;
  NegativeWeights negative_weights = NegativeWeights::positive;

  void validate() const {
    if (!(gamma_plus >= 0.0)) throw std::invalid_argument("gamma_plus must be >= 0");
    if (!(gamma_minus >= 0.0)) throw std::invalid_argument("gamma_minus must be >= 0");
    if (!(clip_margin >= 0.0 && clip_margin < 1.0)) throw std::invalid_argument("clip_margin must lie in [0, 1)");
    if (!(logit_scale > 0.0)) throw std::invalid_argument("logit_scale must be > 0");
  }

  bool operator==(const LossConfig&) const = default;
};

/// Learnable positive and negative context matrices [M, d], shared by all
/// classes. M = 0 is allowed and leaves both tensors undefined.
struct PromptPair {
  Tensor positive;
  Tensor negative;
  std::uint64_t seed = 0;

  std::size_t context_length() const { return positive.defined() ? positive.dim(0) : 0; }

  std::size_t trainable_count() const {
    return (positive.defined() ? positive.numel() : 0) + (negative.defined() ? negative.numel() : 0);
  }

  /// I.i.d. N(0, stddev^2) entries from `seed`.
  static PromptPair init(std::size_t context_length, std::size_t width, std::uint64_t seed, double stddev = 0.02) {
    PromptPair p;
    p.seed = seed;
    if (context_length == 0) return p;
    Rng rng(seed);
    std::vector<double> pos(context_length * width), neg(context_length * width);
    for (auto& x : pos) x = rng.normal(0.0, stddev);
    for (auto& x : neg) x = rng.normal(0.0, stddev);
    p.positive = Tensor({context_length, width}, std::move(pos));
    p.negative = Tensor({context_length, width}, std::move(neg));
    return p;
  }
};

/// Context rows followed by the class-name token embeddings.
inline Tensor assemble_class_prompt(const Tensor& context, const ActionClass& cls, const Vocabulary& vocab,
                                    const Tensor& embedding_table) {
  if (cls.name.empty() || Vocabulary::split_words(cls.name).empty()) {
    throw std::invalid_argument("class '" + cls.id + "' has an empty name");
  }
  Tensor words = gather_rows(embedding_table, vocab.encode(cls.name));
  if (!context.defined()) return words;
  if (context.rank() != 2 || context.dim(1) != embedding_table.dim(1)) {
    throw ShapeError("prompt context width " + shape_str(context.shape()) + " does not match embeddings " +
                     shape_str(embedding_table.shape()));
  }
  return concat({context, words}, 0);
}

/// Unit text embeddings [C, d] of `context` + each class name.
inline Tensor encode_class_prompts(const Tensor& context, std::span<const ActionClass> classes, const ClipModel& model) {
  if (classes.empty()) throw std::invalid_argument("no classes to encode");
  const auto& table = model.weights.get("text.token_embedding");
  std::vector<Tensor> seqs;
  seqs.reserve(classes.size());
  for (const auto& c : classes) seqs.push_back(assemble_class_prompt(context, c, model.vocab, table));
  return encode_texts(seqs, model.weights, model.config);
}

/// Per-frame logits: S[j, t] = logit_scale * cos(frame_t, class_j).
struct ScoreSheet {
  Tensor positive;  // [C, T]
  Tensor negative;  // [C, T]
};

inline ScoreSheet score_frames(const Tensor& frame_embeddings, const Tensor& positive_text, const Tensor& negative_text,
                               double logit_scale) {
  if (frame_embeddings.rank() != 2 || frame_embeddings.dim(0) == 0) {
    throw ShapeError("score_frames: frame embeddings must be [T, d]");
  }
  if (positive_text.shape() != negative_text.shape()) {
    throw ShapeError("score_frames: positive and negative class embeddings differ in shape");
  }
  return {scale(cosine_similarity(positive_text, frame_embeddings), logit_scale),
          scale(cosine_similarity(negative_text, frame_embeddings), logit_scale)};
}

/// Encodes the dual class prompts and scores every frame against them.
inline ScoreSheet score_frames(const Tensor& frame_embeddings, const PromptPair& prompts,
                               std::span<const ActionClass> classes, const ClipModel& model, double logit_scale) {
  Tensor pos = encode_class_prompts(prompts.positive, classes, model);
  Tensor neg = encode_class_prompts(prompts.negative, classes, model);
  return score_frames(frame_embeddings, pos, neg, logit_scale);
}

/// Class-level logits after temporal pooling.
struct AggregatedScores {
  Tensor positive;  // [C]
  Tensor negative;  // [C]
};

/// Softmax-over-frames pooling of per-frame logits. The weights come from
/// the positive logits and, by default, pool the negative logits as well.
inline AggregatedScores aggregate(const Tensor& positive, const Tensor& negative,
                                  NegativeWeights mode = NegativeWeights::positive) {
  if (positive.rank() != 2 || positive.shape() != negative.shape()) {
    throw ShapeError("aggregate: per-frame logits must be matching [C, T] matrices, got " +
                     shape_str(positive.shape()) + " and " + shape_str(negative.shape()));
  }
  // Frames are put in a canonical order first (columns sorted by their
  // logits) so the floating-point sums, and hence the result, do not
  // depend on frame order at all.
  const auto T = positive.dim(1), C = positive.dim(0);
  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), 0);
  auto column_less = [&](std::size_t a, std::size_t b) {
    for (std::size_t c = 0; c < C; ++c) {
      if (positive.at(c, a) != positive.at(c, b)) return positive.at(c, a) < positive.at(c, b);
    }
    for (std::size_t c = 0; c < C; ++c) {
      if (negative.at(c, a) != negative.at(c, b)) return negative.at(c, a) < negative.at(c, b);
    }
    return false;
  };
  Tensor pos = positive, neg = negative;
  if (!std::is_sorted(order.begin(), order.end(), column_less)) {
    std::sort(order.begin(), order.end(), column_less);
    pos = transpose(gather_rows(transpose(positive), order));
    neg = transpose(gather_rows(transpose(negative), order));
  }
  Tensor w_pos = softmax(pos, 1);
  Tensor w_neg = mode == NegativeWeights::positive ? w_pos : softmax(neg, 1);
  return {sum_axis(mul(w_pos, pos), 1), sum_axis(mul(w_neg, neg), 1)};
}

inline AggregatedScores aggregate(const ScoreSheet& sheet, NegativeWeights mode = NegativeWeights::positive) {
  return aggregate(sheet.positive, sheet.negative, mode);
}

/// Indices j with positive[j] > negative[j]; ties are absent.
inline std::vector<std::size_t> predict(std::span<const double> positive, std::span<const double> negative) {
  if (positive.size() != negative.size()) throw ShapeError("predict: score vectors differ in length");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < positive.size(); ++j) {
    if (positive[j] > negative[j]) out.push_back(j);
  }
  return out;
}

/// Two-way softmax exp(S+) / (exp(S+) + exp(S-)), elementwise.
inline double presence_probability(double positive, double negative) {
  const double x = positive - negative;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Asymmetric loss over class logits, averaged over all entries.
///   p = sigmoid(S+ - S-),  q = max(p - m, 0)
///   loss = -mean[ y (1-p)^g+ log p + (1-y) q^g- log(1-q) ]
inline Tensor asymmetric_loss(const Tensor& positive, const Tensor& negative, std::span<const double> targets,
                              const LossConfig& cfg) {
  cfg.validate();
  if (positive.shape() != negative.shape()) throw ShapeError("asymmetric_loss: score shapes differ");
  if (targets.size() != positive.numel()) {
    throw ShapeError("asymmetric_loss: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(positive.numel()) + " scores");
  }
  std::vector<double> y(targets.begin(), targets.end()), not_y(targets.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw std::invalid_argument("asymmetric_loss: targets must be 0 or 1");
    not_y[i] = 1.0 - y[i];
  }
  Tensor ty(positive.shape(), std::move(y));
  Tensor tn(positive.shape(), std::move(not_y));

  Tensor x = sub(positive, negative);
  Tensor log_p = log_sigmoid(x);
  Tensor one_minus_p = sigmoid(scale(x, -1.0));
  Tensor pos_term = mul(ty, log_p);
  if (cfg.gamma_plus != 0.0) pos_term = mul(pos_term, pow_scalar(one_minus_p, cfg.gamma_plus));

  Tensor neg_term;
  if (cfg.clip_margin == 0.0) {
    Tensor q = sigmoid(x);
    neg_term = mul(tn, log_sigmoid(scale(x, -1.0)));
    if (cfg.gamma_minus != 0.0) neg_term = mul(neg_term, pow_scalar(q, cfg.gamma_minus));
  } else {
    Tensor q = relu(add_scalar(sigmoid(x), -cfg.clip_margin));
    neg_term = mul(tn, log(add_scalar(scale(q, -1.0), 1.0)));
    if (cfg.gamma_minus != 0.0) neg_term = mul(neg_term, pow_scalar(q, cfg.gamma_minus));
  }
  return scale(mean(add(pos_term, neg_term)), -1.0);
}

// ---------------------------------------------------------------------------
// Prompt checkpoint (little-endian):
//   "DVCLIPP\0" u32 version, u64 M, u64 d, u64 seed,
//   f64 gamma_plus, gamma_minus, clip_margin, logit_scale, u8 negative_weights,
//   M*d f64 positive context, M*d f64 negative context
// ---------------------------------------------------------------------------

inline constexpr std::string_view kPromptsMagic{"DVCLIPP\0", 8};

inline void save_prompts(const PromptPair& p, std::size_t width, const LossConfig& loss,
                         const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.magic(kPromptsMagic, 1);
  w.u64(p.context_length());
  w.u64(width);
  w.u64(p.seed);
  w.f64(loss.gamma_plus);
  w.f64(loss.gamma_minus);
  w.f64(loss.clip_margin);
  w.f64(loss.logit_scale);
  w.u8(static_cast<std::uint8_t>(loss.negative_weights));
  if (p.context_length() > 0) {
    if (p.positive.dim(1) != width) throw ShapeError("save_prompts: context width mismatch");
    w.doubles(p.positive.values().data(), p.positive.numel());
    w.doubles(p.negative.values().data(), p.negative.numel());
  }
  w.finish();
}

struct PromptCheckpoint {
  PromptPair prompts;
  std::size_t width = 0;
  LossConfig loss;
};

inline PromptCheckpoint load_prompts(const std::filesystem::path& path) {
  BinaryReader r(path);
  const auto version = r.magic(kPromptsMagic);
  if (version != 1) throw FormatError("'" + path.string() + "': unsupported prompt checkpoint version");
  PromptCheckpoint c;
  const auto m = r.u64();
  c.width = r.u64();
  c.prompts.seed = r.u64();
  c.loss.gamma_plus = r.f64();
  c.loss.gamma_minus = r.f64();
  c.loss.clip_margin = r.f64();
  c.loss.logit_scale = r.f64();
  const auto mode = r.u8();
  if (mode > 1) throw FormatError("'" + path.string() + "': bad negative_weights flag");
  c.loss.negative_weights = static_cast<NegativeWeights>(mode);
  if (m > 0) {
    c.prompts.positive = Tensor({m, c.width}, r.doubles(m * c.width));
    c.prompts.negative = Tensor({m, c.width}, r.doubles(m * c.width));
  }
  if (!r.at_end()) throw FormatError("'" + path.string() + "': trailing bytes");
  c.loss.validate();
  return c;
}

}  // namespace dvclip
