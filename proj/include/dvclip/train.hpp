// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "dvclip/data.hpp"
#include "dvclip/encoders.hpp"
#include "dvclip/eval.hpp"
#include "dvclip/ops.hpp"
#include "dvclip/prompts.hpp"
#include "dvclip/random.hpp"
#include "dvclip/splits.hpp"
#include "dvclip/synth.hpp"

namespace dvclip {

enum class Stage { pretrain, finetune_temporal, prompts };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::pretrain: return "pretrain";
    case Stage::finetune_temporal: return "finetune_temporal";
    case Stage::prompts: return "prompts";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  if (s == "pretrain") return Stage::pretrain;
  if (s == "finetune_temporal" || s == "finetune") return Stage::finetune_temporal;
  if (s == "prompts") return Stage::prompts;
  throw std::invalid_argument("unknown stage '" + s + "'");
}

enum class OptimizerKind { sgd, adam };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw std::invalid_argument("optimizer must be 'sgd' or 'adam', got '" + s + "'");
}

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t warmup_epochs = 1;
  std::size_t batch_size = 64;
  std::size_t epochs = 10;
  std::size_t frames_per_clip = 16;
  std::size_t context_tokens = 64;
  std::uint64_t seed = 0;
  Stage stage = Stage::prompts;
  OptimizerKind optimizer = OptimizerKind::sgd;
  double momentum = 0.0;
  /// Logit scale of the contrastive and classification losses in the two
  /// encoder stages (CLIP's 1/0.07).
  double contrastive_scale = 1.0 / 0.07;
  std::size_t early_stop_patience = 5;
  double early_stop_min_delta = 1e-4;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (frames_per_clip == 0) throw std::invalid_argument("frames_per_clip must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
    if (!(contrastive_scale > 0.0)) throw std::invalid_argument("contrastive_scale must be > 0");
    if (early_stop_patience == 0) throw std::invalid_argument("early_stop_patience must be positive");
  }

  bool operator==(const TrainConfig&) const = default;
};

/// Linear warm-up from 0 to base_lr, then half-cosine decay to 0.
inline double cosine_lr(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double base_lr) {
  if (warmup_steps >= total_steps) {
    throw std::invalid_argument("cosine_lr: warm-up of " + std::to_string(warmup_steps) + " steps leaves nothing of " +
                                std::to_string(total_steps));
  }
  if (step > total_steps) throw std::invalid_argument("cosine_lr: step past the end of the schedule");
  if (step < warmup_steps) return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

/// SGD (optional momentum) or Adam over a fixed parameter list.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double momentum) : kind_(kind), momentum_(momentum) {}

  /// Applies one update from the accumulated gradients, then clears them.
  void step(std::span<Tensor* const> params, double lr) {
    if (state_.empty()) {
      for (auto* p : params) state_.push_back({std::vector<double>(p->numel(), 0.0), std::vector<double>(p->numel(), 0.0)});
    }
    if (state_.size() != params.size()) throw std::logic_error("optimizer parameter list changed between steps");
    ++t_;
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor& p = *params[k];
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto v = p.mutable_values();
      auto& [m1, m2] = state_[k];
      if (kind_ == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < v.size(); ++i) {
          m1[i] = momentum_ * m1[i] + g[i];
          v[i] -= lr * m1[i];
        }
      } else {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
        for (std::size_t i = 0; i < v.size(); ++i) {
          m1[i] = b1 * m1[i] + (1.0 - b1) * g[i];
          m2[i] = b2 * m2[i] + (1.0 - b2) * g[i] * g[i];
          v[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
        }
      }
      p.zero_grad();
    }
  }

 private:
  OptimizerKind kind_;
  double momentum_;
  std::size_t t_ = 0;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> state_;
};

// ---------------------------------------------------------------------------
// History
// ---------------------------------------------------------------------------

struct HistoryRecord {
  std::string kind;  // "step" or "epoch"
  std::size_t epoch = 0;
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  std::map<std::string, double> metrics;
};

struct TrainHistory {
  std::string stage;
  std::vector<HistoryRecord> records;
  bool stopped_early = false;

  std::vector<double> epoch_losses() const {
    std::vector<double> out;
    for (const auto& r : records)
      if (r.kind == "epoch") out.push_back(r.loss);
    return out;
  }
};

inline void save_history(const TrainHistory& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "#dvclip-history v1\n# stage|kind|epoch|step|lr|loss|metrics\n";
  out.precision(17);
  for (const auto& r : h.records) {
    out << h.stage << '|' << r.kind << '|' << r.epoch << '|' << r.step << '|' << r.lr << '|' << r.loss << '|';
    bool first = true;
    for (const auto& [k, v] : r.metrics) {
      out << (first ? "" : ";") << k << '=' << v;
      first = false;
    }
    out << '\n';
  }
}

/// True once the best loss of the last `patience` epochs improves on the
/// best before them by less than `min_delta`.
inline bool should_stop_early(std::span<const double> epoch_losses, std::size_t patience, double min_delta) {
  if (epoch_losses.size() <= patience) return false;
  const auto split = epoch_losses.end() - static_cast<std::ptrdiff_t>(patience);
  const double before = *std::min_element(epoch_losses.begin(), split);
  const double recent = *std::min_element(split, epoch_losses.end());
  return before - recent < min_delta;
}

/// SHA-256 over parameter names, shapes and raw value bytes, hex encoded.
inline std::string weights_digest(const ModelWeights& w) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 unavailable");
  }
  auto feed = [&](const void* data, std::size_t n) { EVP_DigestUpdate(ctx, data, n); };
  for (const auto& [name, t] : w) {
    feed(name.data(), name.size() + 1);
    for (auto d : t.shape()) {
      const auto u = static_cast<std::uint64_t>(d);
      feed(&u, sizeof u);
    }
    feed(t.values().data(), t.numel() * sizeof(double));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace detail {

inline void require_finite(double loss, const std::string& stage, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw std::runtime_error(stage + ": training diverged, non-finite loss at step " + std::to_string(step));
  }
}

using BatchLoss = std::function<Tensor(std::span<const std::size_t>)>;
using EpochHook = std::function<void(std::size_t epoch, HistoryRecord&)>;

// Shuffled mini-batches, warm-up + cosine schedule, early stopping.
inline TrainHistory run_training(const std::vector<Tensor*>& params, std::size_t items, const TrainConfig& cfg,
                                 const std::string& stage, std::size_t min_batch, const BatchLoss& batch_loss,
                                 const EpochHook& on_epoch = {}) {
  cfg.validate();
  if (items < min_batch) {
    throw std::invalid_argument(stage + ": " + std::to_string(items) + " training items, need at least " +
                                std::to_string(min_batch));
  }
  const auto batch = std::min(cfg.batch_size, items);
  // Partial trailing batches below min_batch are dropped.
  std::size_t per_epoch = items / batch;
  if (items % batch >= min_batch) ++per_epoch;
  const std::size_t total = per_epoch * cfg.epochs;
  const std::size_t warmup = per_epoch * cfg.warmup_epochs;
  if (warmup >= total) {
    throw std::invalid_argument(stage + ": " + std::to_string(cfg.warmup_epochs) + " warm-up epoch(s) need more than " +
                                std::to_string(cfg.epochs) + " epochs");
  }
  for (auto* p : params) p->set_requires_grad(true);
  Optimizer opt(cfg.optimizer, cfg.momentum);
  TrainHistory h;
  h.stage = stage;
  Rng rng(cfg.seed ^ 0x5eedf00dULL);
  std::vector<std::size_t> order(items);
  std::size_t step = 0;
  std::vector<double> epoch_losses;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < items; ++i) order[i] = i;
    rng.shuffle(order);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < per_epoch; ++b, ++step) {
      const auto lo = b * batch, hi = std::min(items, lo + batch);
      const double lr = cosine_lr(step, total, warmup, cfg.learning_rate);
      Tensor loss = batch_loss(std::span<const std::size_t>(order.data() + lo, hi - lo));
      const double value = loss.item();
      require_finite(value, stage, step);
      backward(loss);
      opt.step(params, lr);
      h.records.push_back({"step", epoch, step, lr, value, {}});
      sum += value;
      ++batches;
    }
    HistoryRecord rec{"epoch", epoch, step, cosine_lr(step, total, warmup, cfg.learning_rate), sum / batches, {}};
    if (on_epoch) on_epoch(epoch, rec);
    h.records.push_back(rec);
    epoch_losses.push_back(rec.loss);
    if (should_stop_early(epoch_losses, cfg.early_stop_patience, cfg.early_stop_min_delta)) {
      h.stopped_early = true;
      break;
    }
  }
  for (auto* p : params) p->set_requires_grad(false);
  return h;
}

// -sum_j T_ij log softmax(logits)_ij averaged over rows, T rows sum to one.
inline Tensor soft_cross_entropy(const Tensor& logits, const Tensor& targets, int axis) {
  Tensor logp = log_softmax(logits, axis);
  const double rows = static_cast<double>(axis == 1 ? logits.dim(0) : logits.dim(1));
  return scale(sum(mul(targets, logp)), -1.0 / rows);
}

inline Tensor caption_embeddings(std::span<const std::string> captions, const ClipModel& model) {
  std::vector<Tensor> seqs;
  seqs.reserve(captions.size());
  for (const auto& c : captions) seqs.push_back(embed_tokens(c, model.vocab, model.weights));
  return encode_texts(seqs, model.weights, model.config);
}

inline std::vector<Tensor*> parameters_with_prefix(ModelWeights& w, const std::string& prefix) {
  std::vector<Tensor*> out;
  for (auto& [name, t] : w)
    if (name.rfind(prefix, 0) == 0) out.push_back(&t);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stage 1: contrastive image-caption pretraining
// ---------------------------------------------------------------------------

struct StageResult {
  ClipModel model;
  TrainHistory history;
};

/// Symmetric in-batch contrastive loss. Items with the same content key
/// are mutual positives (uniform soft targets).
inline Tensor contrastive_loss(const Tensor& image_emb, const Tensor& text_emb,
                               std::span<const std::string> keys, double logit_scale) {
  const auto& captions = keys;
  const auto n = captions.size();
  if (n < 2) throw std::invalid_argument("contrastive loss needs a batch of at least 2");
  std::vector<double> t(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t same = 0;
    for (std::size_t j = 0; j < n; ++j) same += captions[i] == captions[j];
    for (std::size_t j = 0; j < n; ++j) t[i * n + j] = captions[i] == captions[j] ? 1.0 / same : 0.0;
  }
  Tensor targets({n, n}, std::move(t));  // symmetric
  Tensor logits = scale(matmul(image_emb, transpose(text_emb)), logit_scale);
  return scale(add(detail::soft_cross_entropy(logits, targets, 1), detail::soft_cross_entropy(logits, targets, 0)),
               0.5);
}

/// Batch loss of the pretraining objective; exposed for the initial-loss check.
inline Tensor pretrain_batch_loss(const ClipModel& model, std::span<const CaptionedImage> images,
                                  double logit_scale) {
  std::vector<Frame> frames;
  std::vector<std::string> captions, keys;
  for (const auto& im : images) {
    frames.push_back(im.image);
    captions.push_back(im.caption);
    keys.push_back(im.name.empty() ? im.caption : im.name);
  }
  Tensor img = encode_frames(frames, model.weights, model.config, 1);
  Tensor txt = detail::caption_embeddings(captions, model);
  return contrastive_loss(img, txt, keys, logit_scale);
}

inline StageResult pretrain_contrastive(const std::vector<CaptionedImage>& images, ClipModel model,
                                        const TrainConfig& cfg) {
  if (cfg.batch_size < 2) throw std::invalid_argument("pretrain: batch_size must be at least 2");
  for (const auto& im : images) model.vocab.encode(im.caption);
  model.weights = model.weights.clone();  // tensors are shared handles
  std::vector<Tensor*> params;
  for (auto& [_, t] : model.weights) params.push_back(&t);
  std::vector<CaptionedImage> batch;
  auto h = detail::run_training(params, images.size(), cfg, "pretrain", 2, [&](std::span<const std::size_t> idx) {
    batch.clear();
    for (auto i : idx) batch.push_back(images[i]);
    return pretrain_batch_loss(model, batch, cfg.contrastive_scale);
  });
  return {std::move(model), std::move(h)};
}

// ---------------------------------------------------------------------------
// Stage 2: temporal fine-tuning of the video encoder
// ---------------------------------------------------------------------------

/// Unit clip embedding: mean of the per-frame embeddings, renormalized.
inline Tensor clip_embedding(const Tensor& frame_embeddings) {
  return l2_normalize(scale(sum_axis(frame_embeddings, 0), 1.0 / static_cast<double>(frame_embeddings.dim(0))), 0);
}

/// Errors when a base class shares its (verb, object) pair or id with an
/// evaluation class.
inline void check_base_disjoint(std::span<const ActionClass> base, std::span<const ActionClass> evaluation) {
  std::set<std::string> ids, names;
  for (const auto& c : evaluation) {
    ids.insert(c.id);
    names.insert(c.verb + "\x1f" + c.object.value_or(""));
  }
  for (const auto& c : base) {
    if (ids.count(c.id) || names.count(c.verb + "\x1f" + c.object.value_or(""))) {
      throw std::invalid_argument("base class '" + c.id + "' (" + c.name + ") overlaps the evaluation classes");
    }
  }
}

/// Multi-label clip classification against frozen class-name embeddings;
/// only visual.* parameters update. Targets spread uniformly over labels.
inline StageResult finetune_temporal(ClipModel model, const std::vector<VideoSample>& base_clips,
                                     const std::vector<ActionClass>& base_classes,
                                     std::span<const ActionClass> evaluation_classes, const TrainConfig& cfg) {
  check_base_disjoint(base_classes, evaluation_classes);
  model.config.validate();
  model.weights = model.weights.clone();  // tensors are shared handles
  std::map<std::string, std::size_t> index;
  std::vector<std::string> names;
  for (const auto& c : base_classes) {
    index[c.id] = names.size();
    names.push_back(c.name);
  }
  for (const auto& s : base_clips) {
    if (s.frames.empty()) throw std::invalid_argument("finetune: clip '" + s.id + "' has no pixel frames");
    for (const auto& l : s.labels)
      if (!index.count(l)) throw std::invalid_argument("finetune: clip '" + s.id + "' has unknown label '" + l + "'");
  }
  const Tensor text = detail::caption_embeddings(names, model);  // frozen
  const auto k = names.size();
  auto params = detail::parameters_with_prefix(model.weights, "visual.");
  auto h = detail::run_training(params, base_clips.size(), cfg, "finetune_temporal", 1,
                                [&](std::span<const std::size_t> idx) {
                                  std::vector<Tensor> rows;
                                  std::vector<double> t(idx.size() * k, 0.0);
                                  for (std::size_t b = 0; b < idx.size(); ++b) {
                                    const auto& s = base_clips[idx[b]];
                                    rows.push_back(clip_embedding(
                                        encode_frames(s.frames, model.weights, model.config, model.config.temporal_window)));
                                    for (const auto& l : s.labels) t[b * k + index[l]] = 1.0 / s.labels.size();
                                  }
                                  Tensor logits = scale(matmul(stack_rows(rows), transpose(text)), cfg.contrastive_scale);
                                  return detail::soft_cross_entropy(logits, Tensor({idx.size(), k}, std::move(t)), 1);
                                });
  return {std::move(model), std::move(h)};
}

// ---------------------------------------------------------------------------
// Stage 3: prompt training
// ---------------------------------------------------------------------------

enum class UnseenPolicy { drop_clip, strip_labels };

/// Training view of a dataset under a split: clips showing an unseen class
/// are dropped (default) or keep only their seen labels.
inline std::vector<VideoSample> restrict_to_seen(const std::vector<VideoSample>& samples, const SplitSpec& split,
                                                 UnseenPolicy policy = UnseenPolicy::drop_clip) {
  std::vector<VideoSample> out;
  for (const auto& s : samples) {
    bool any_unseen = false;
    for (const auto& l : s.labels) any_unseen |= split.is_unseen(l);
    if (!any_unseen) {
      out.push_back(s);
    } else if (policy == UnseenPolicy::strip_labels) {
      VideoSample c = s;
      for (auto it = c.labels.begin(); it != c.labels.end();) it = split.is_unseen(*it) ? c.labels.erase(it) : std::next(it);
      out.push_back(std::move(c));
    }
  }
  return out;
}

struct PromptTrainResult {
  PromptPair prompts;
  TrainHistory history;
};

/// Per-frame embeddings of every clip under the model's temporal window.
inline std::vector<Tensor> precompute_frame_embeddings(const ClipModel& model, std::span<const VideoSample> samples) {
  std::vector<Tensor> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(encode_video(s.input(), model.weights, model.config, model.config.temporal_window));
  return out;
}

namespace detail {

// Class logits [B, C] for a batch of clips, frames scored in one product.
inline AggregatedScores batch_class_logits(const Tensor& pos_text, const Tensor& neg_text,
                                           std::span<const Tensor> frame_embs, const LossConfig& loss) {
  std::vector<std::size_t> offsets{0};
  for (const auto& f : frame_embs) offsets.push_back(offsets.back() + f.dim(0));
  Tensor frames = frame_embs.size() == 1 ? frame_embs[0] : concat(frame_embs, 0);
  auto sheet = score_frames(frames, pos_text, neg_text, loss.logit_scale);
  std::vector<Tensor> pos, neg;
  for (std::size_t b = 0; b < frame_embs.size(); ++b) {
    auto agg = aggregate(slice_cols(sheet.positive, offsets[b], offsets[b + 1]),
                         slice_cols(sheet.negative, offsets[b], offsets[b + 1]), loss.negative_weights);
    pos.push_back(agg.positive);
    neg.push_back(agg.negative);
  }
  return {stack_rows(pos), stack_rows(neg)};
}

}  // namespace detail

/// Class-level S+ and S- [videos, classes] without gradient tracking.
inline AggregatedScores class_logits(const ClipModel& model, const PromptPair& prompts,
                                     std::span<const ActionClass> classes, std::span<const Tensor> frame_embs,
                                     const LossConfig& loss) {
  Tensor pos = encode_class_prompts(prompts.positive, classes, model);
  Tensor neg = encode_class_prompts(prompts.negative, classes, model);
  return detail::batch_class_logits(pos, neg, frame_embs, loss);
}

/// Trains only the positive and negative contexts on seen classes; the
/// model is taken by const reference and never updated.
inline PromptTrainResult train_prompts(const ClipModel& model, std::span<const VideoSample> samples,
                                       const std::vector<ActionClass>& classes, const SplitSpec& split,
                                       const TrainConfig& cfg, const LossConfig& loss) {
  loss.validate();
  check_split_covers(split, classes);
  std::vector<ActionClass> seen;
  std::map<std::string, std::size_t> col;
  for (const auto& c : classes) {
    if (split.seen.count(c.id)) {
      col[c.id] = seen.size();
      seen.push_back(c);
    }
  }
  for (const auto& s : samples) {
    for (const auto& l : s.labels) {
      if (split.is_unseen(l)) {
        throw std::invalid_argument("split leak: training clip '" + s.id + "' carries unseen class '" + l + "'");
      }
      if (!col.count(l)) throw std::invalid_argument("training clip '" + s.id + "' has unknown label '" + l + "'");
    }
  }
  const auto frame_embs = precompute_frame_embeddings(model, samples);
  const auto c = seen.size();
  std::vector<double> targets(samples.size() * c, 0.0);
  for (std::size_t v = 0; v < samples.size(); ++v)
    for (const auto& l : samples[v].labels) targets[v * c + col[l]] = 1.0;

  PromptPair prompts = PromptPair::init(cfg.context_tokens, model.config.embed_dim, cfg.seed);
  std::vector<Tensor*> params;
  if (prompts.context_length() > 0) params = {&prompts.positive, &prompts.negative};

  auto batch_loss = [&](std::span<const std::size_t> idx) {
    Tensor pos = encode_class_prompts(prompts.positive, seen, model);
    Tensor neg = encode_class_prompts(prompts.negative, seen, model);
    std::vector<Tensor> frames;
    std::vector<double> y;
    for (auto i : idx) {
      frames.push_back(frame_embs[i]);
      y.insert(y.end(), targets.begin() + static_cast<std::ptrdiff_t>(i * c),
               targets.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
    }
    auto logits = detail::batch_class_logits(pos, neg, frames, loss);
    return asymmetric_loss(logits.positive, logits.negative, y, loss);
  };
  auto on_epoch = [&](std::size_t, HistoryRecord& rec) {
    auto logits = class_logits(model, prompts, seen, frame_embs, loss);
    ScoreMatrix m(c, samples.size());
    for (std::size_t v = 0; v < samples.size(); ++v) {
      for (std::size_t j = 0; j < c; ++j) {
        m.score(j, v) = logits.positive.at(v, j) - logits.negative.at(v, j);
        m.label(j, v) = static_cast<int>(targets[v * c + j]);
      }
    }
    rec.metrics["seen_map"] = mean_ap(m).value;
  };
  if (params.empty()) {
    // M = 0: nothing to learn, record the fixed loss once.
    TrainHistory h;
    h.stage = "prompts";
    std::vector<std::size_t> all(samples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    HistoryRecord rec{"epoch", 0, 0, 0.0, batch_loss(all).item(), {}};
    on_epoch(0, rec);
    h.records.push_back(rec);
    return {prompts, h};
  }
  auto h = detail::run_training(params, samples.size(), cfg, "prompts", 1, batch_loss, on_epoch);
  return {std::move(prompts), std::move(h)};
}

// ---------------------------------------------------------------------------
// Scoring for evaluation
// ---------------------------------------------------------------------------

/// Scores every (clip, class) pair with the dual prompts and with the plain
/// class-name similarity used by the threshold baseline.
inline ScoresFile score_dataset(const ClipModel& model, const PromptPair& prompts,
                                const std::vector<ActionClass>& classes, std::span<const VideoSample> samples,
                                const LossConfig& loss) {
  if (samples.empty()) throw std::invalid_argument("no clips to score");
  std::vector<std::string> vids, ids;
  std::map<std::string, std::size_t> col;
  for (const auto& s : samples) vids.push_back(s.id);
  for (const auto& c : classes) {
    col[c.id] = ids.size();
    ids.push_back(c.id);
  }
  ScoresFile out(vids, ids);
  const auto frame_embs = precompute_frame_embeddings(model, samples);
  auto logits = class_logits(model, prompts, classes, frame_embs, loss);
  Tensor plain = encode_class_prompts(Tensor(), classes, model);
  for (std::size_t v = 0; v < samples.size(); ++v) {
    Tensor video = clip_embedding(frame_embs[v]);
    Tensor sim = matmul(plain, video.reshaped({video.numel(), 1}));
    for (const auto& l : samples[v].labels) {
      auto it = col.find(l);
      if (it == col.end()) throw std::invalid_argument("clip '" + samples[v].id + "' has unknown label '" + l + "'");
      out.labels_and_pos.label(it->second, v) = 1;
    }
    for (std::size_t j = 0; j < classes.size(); ++j) {
      out.labels_and_pos.score(j, v) = logits.positive.at(v, j);
      out.s_neg[out.idx(j, v)] = logits.negative.at(v, j);
      out.similarity[out.idx(j, v)] = sim.at(j);
    }
  }
  return out;
}

}  // namespace dvclip
