// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvclip/ops.hpp"
#include "dvclip/random.hpp"
#include "dvclip/tensor.hpp"

namespace dvclip {

struct EncoderConfig {
  std::size_t embed_dim = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t patch_size = 8;
  std::size_t frame_size = 32;
  std::size_t channels = 3;
  std::size_t max_tokens = 77;
  /// Frames visible to each attention query: 1 is per-frame attention,
  /// 3 is the current frame plus both neighbours.
  std::size_t temporal_window = 3;
  std::size_t mlp_ratio = 4;

  std::size_t head_dim() const { return embed_dim / num_heads; }
  std::size_t patches_per_side() const { return frame_size / patch_size; }
  std::size_t num_patches() const { return patches_per_side() * patches_per_side(); }
  std::size_t tokens_per_frame() const { return num_patches() + 1; }
  std::size_t patch_dim() const { return patch_size * patch_size * channels; }

  void validate() const {
    if (embed_dim == 0 || num_layers == 0 || num_heads == 0 || patch_size == 0 || frame_size == 0 ||
        channels == 0 || max_tokens == 0 || temporal_window == 0 || mlp_ratio == 0) {
      throw std::invalid_argument("encoder config: all sizes must be positive");
    }
    if (embed_dim % num_heads != 0) {
      throw std::invalid_argument("encoder config: embed_dim " + std::to_string(embed_dim) +
                                  " is not divisible by num_heads " + std::to_string(num_heads));
    }
    if (temporal_window % 2 == 0) {
      throw std::invalid_argument("encoder config: temporal_window must be odd, got " +
                                  std::to_string(temporal_window));
    }
    if (frame_size % patch_size != 0) {
      throw std::invalid_argument("encoder config: frame_size must be a multiple of patch_size");
    }
  }

  bool operator==(const EncoderConfig&) const = default;
};

/// Word-level vocabulary. Words are lower-cased; ids follow insertion order.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(const std::vector<std::string>& words) {
    for (const auto& w : words) add(w);
  }

  static std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string w;
    while (is >> w) {
      std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return std::tolower(c); });
      out.push_back(w);
    }
    return out;
  }

  std::size_t add(const std::string& word) {
    auto lowered = split_words(word);
    if (lowered.size() != 1) throw std::invalid_argument("vocabulary entries must be single words: '" + word + "'");
    auto [it, inserted] = index_.emplace(lowered[0], words_.size());
    if (inserted) words_.push_back(lowered[0]);
    return it->second;
  }

  void add_text(const std::string& text) {
    for (const auto& w : split_words(text)) add(w);
  }

  std::vector<std::size_t> encode(const std::string& text) const {
    auto words = split_words(text);
    if (words.empty()) throw std::invalid_argument("cannot tokenize an empty class name");
    std::vector<std::size_t> ids;
    for (const auto& w : words) {
      auto it = index_.find(w);
      if (it == index_.end()) throw std::invalid_argument("unknown word '" + w + "' in '" + text + "'");
      ids.push_back(it->second);
    }
    return ids;
  }

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  bool operator==(const Vocabulary& o) const { return words_ == o.words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t> index_;
};

/// Named parameter set, ordered by name.
class ModelWeights {
 public:
  void set(const std::string& name, Tensor t) { params_.insert_or_assign(name, std::move(t)); }

  const Tensor& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return it->second;
  }

  Tensor& get(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  std::size_t size() const { return params_.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.numel();
    return n;
  }

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

  /// Deep copy; gradient tracking off.
  ModelWeights clone() const {
    ModelWeights out;
    for (const auto& [name, t] : params_) out.set(name, t.clone());
    return out;
  }

  /// Bitwise equality of names, shapes and values.
  bool identical(const ModelWeights& other) const {
    if (params_.size() != other.params_.size()) return false;
    for (auto a = params_.begin(), b = other.params_.begin(); a != params_.end(); ++a, ++b) {
      if (a->first != b->first || a->second.shape() != b->second.shape()) return false;
      if (!std::equal(a->second.values().begin(), a->second.values().end(), b->second.values().begin(),
                      [](double x, double y) { return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y); })) {
        return false;
      }
    }
    return true;
  }

 private:
  std::map<std::string, Tensor> params_;
};

/// Encoder configuration, vocabulary and weights travelling together.
struct ClipModel {
  EncoderConfig config;
  Vocabulary vocab;
  ModelWeights weights;
};

/// Elementwise (1 - ratio) * orig + ratio * ft over interpolation-compatible sets.
inline ModelWeights interpolate_weights(const ModelWeights& orig, const ModelWeights& ft, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw std::invalid_argument("interpolation ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
  for (const auto& [name, t] : orig) {
    if (!ft.contains(name)) throw std::invalid_argument("weight sets differ: '" + name + "' missing from fine-tuned set");
    if (ft.get(name).shape() != t.shape()) {
      throw std::invalid_argument("weight sets differ: '" + name + "' has shape " + shape_str(t.shape()) +
                                  " vs " + shape_str(ft.get(name).shape()));
    }
  }
  for (const auto& [name, t] : ft) {
    if (!orig.contains(name)) throw std::invalid_argument("weight sets differ: '" + name + "' missing from original set");
  }
  ModelWeights out;
  for (const auto& [name, a] : orig) {
    if (ratio == 0.0) {
      out.set(name, a.clone());
      continue;
    }
    const auto& b = ft.get(name);
    if (ratio == 1.0) {
      out.set(name, b.clone());
      continue;
    }
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 - ratio) * a.at(i) + ratio * b.at(i);
    out.set(name, Tensor(a.shape(), std::move(v)));
  }
  return out;
}

namespace detail {

inline Tensor random_tensor(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal(0.0, stddev);
  return Tensor(std::move(shape), std::move(v));
}

inline void init_transformer(ModelWeights& w, const std::string& prefix, const EncoderConfig& cfg, Rng& rng) {
  const auto d = cfg.embed_dim;
  const auto hidden = d * cfg.mlp_ratio;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double sh = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    const auto p = prefix + ".blocks." + std::to_string(l);
    w.set(p + ".ln1.gain", Tensor::full({d}, 1.0));
    w.set(p + ".ln1.bias", Tensor::zeros({d}));
    for (const char* proj : {"q", "k", "v", "o"}) {
      w.set(p + ".attn.w" + proj, random_tensor({d, d}, sd, rng));
      w.set(p + ".attn.b" + proj, Tensor::zeros({d}));
    }
    w.set(p + ".ln2.gain", Tensor::full({d}, 1.0));
    w.set(p + ".ln2.bias", Tensor::zeros({d}));
    w.set(p + ".mlp.w1", random_tensor({d, hidden}, sd, rng));
    w.set(p + ".mlp.b1", Tensor::zeros({hidden}));
    w.set(p + ".mlp.w2", random_tensor({hidden, d}, sh, rng));
    w.set(p + ".mlp.b2", Tensor::zeros({d}));
  }
}

}  // namespace detail

/// Random initial weights for both encoders.
inline ModelWeights init_clip_weights(const EncoderConfig& cfg, std::size_t vocab_size, std::uint64_t seed) {
  cfg.validate();
  if (vocab_size == 0) throw std::invalid_argument("vocabulary is empty");
  Rng rng(seed);
  ModelWeights w;
  const auto d = cfg.embed_dim;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  w.set("visual.patch.weight",
        detail::random_tensor({cfg.patch_dim(), d}, 1.0 / std::sqrt(static_cast<double>(cfg.patch_dim())), rng));
  w.set("visual.patch.bias", Tensor::zeros({d}));
  w.set("visual.cls", detail::random_tensor({1, d}, 0.02, rng));
  w.set("visual.pos", detail::random_tensor({cfg.tokens_per_frame(), d}, 0.02, rng));
  w.set("visual.ln_pre.gain", Tensor::full({d}, 1.0));
  w.set("visual.ln_pre.bias", Tensor::zeros({d}));
  detail::init_transformer(w, "visual", cfg, rng);
  w.set("visual.ln_post.gain", Tensor::full({d}, 1.0));
  w.set("visual.ln_post.bias", Tensor::zeros({d}));
  w.set("visual.proj", detail::random_tensor({d, d}, sd, rng));

  w.set("text.token_embedding", detail::random_tensor({vocab_size, d}, 0.02, rng));
  w.set("text.pos", detail::random_tensor({cfg.max_tokens, d}, 0.01, rng));
  detail::init_transformer(w, "text", cfg, rng);
  w.set("text.ln_final.gain", Tensor::full({d}, 1.0));
  w.set("text.ln_final.bias", Tensor::zeros({d}));
  w.set("text.proj", detail::random_tensor({d, d}, sd, rng));
  return w;
}

/// Projections of one self-attention layer.
struct AttentionBlock {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;

  static AttentionBlock from(const ModelWeights& w, const std::string& prefix) {
    return {w.get(prefix + ".wq"), w.get(prefix + ".bq"), w.get(prefix + ".wk"), w.get(prefix + ".bk"),
            w.get(prefix + ".wv"), w.get(prefix + ".bv"), w.get(prefix + ".wo"), w.get(prefix + ".bo")};
  }
};

namespace detail {

// Windowed multi-head attention over `frames` stacked row-wise
// ([frames * tokens, d]). Queries of frame t attend to the keys and values
// of frames max(0, t - w/2) ..= min(T - 1, t + w/2).
inline Tensor windowed_attention(const Tensor& stacked, std::size_t frames, std::size_t tokens,
                                 const AttentionBlock& blk, std::size_t num_heads, std::size_t window) {
  const auto d = stacked.dim(1);
  const auto dh = d / num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto half = window / 2;
  Tensor q = add(matmul(stacked, blk.wq), blk.bq);
  Tensor k = add(matmul(stacked, blk.wk), blk.bk);
  Tensor v = add(matmul(stacked, blk.wv), blk.bv);
  std::vector<Tensor> outs;
  outs.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto lo = t >= half ? t - half : 0;
    const auto hi = std::min(frames - 1, t + half);
    Tensor qt = slice_rows(q, t * tokens, (t + 1) * tokens);
    Tensor kw = slice_rows(k, lo * tokens, (hi + 1) * tokens);
    Tensor vw = slice_rows(v, lo * tokens, (hi + 1) * tokens);
    std::vector<Tensor> heads;
    heads.reserve(num_heads);
    for (std::size_t h = 0; h < num_heads; ++h) {
      Tensor qh = num_heads == 1 ? qt : slice_cols(qt, h * dh, (h + 1) * dh);
      Tensor kh = num_heads == 1 ? kw : slice_cols(kw, h * dh, (h + 1) * dh);
      Tensor vh = num_heads == 1 ? vw : slice_cols(vw, h * dh, (h + 1) * dh);
      Tensor att = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), 1);
      heads.push_back(matmul(att, vh));
    }
    outs.push_back(num_heads == 1 ? heads[0] : concat(heads, 1));
  }
  Tensor merged = frames == 1 ? outs[0] : concat(outs, 0);
  return add(matmul(merged, blk.wo), blk.bo);
}

// Pre-norm residual block: x + attn(ln1(x)), then x + mlp(ln2(x)).
inline Tensor transformer_block(const Tensor& x, std::size_t frames, std::size_t tokens, const ModelWeights& w,
                                const std::string& p, std::size_t num_heads, std::size_t window) {
  Tensor h = layer_norm(x, w.get(p + ".ln1.gain"), w.get(p + ".ln1.bias"));
  Tensor y = add(x, windowed_attention(h, frames, tokens, AttentionBlock::from(w, p + ".attn"), num_heads, window));
  Tensor m = layer_norm(y, w.get(p + ".ln2.gain"), w.get(p + ".ln2.bias"));
  m = relu(add(matmul(m, w.get(p + ".mlp.w1")), w.get(p + ".mlp.b1")));
  m = add(matmul(m, w.get(p + ".mlp.w2")), w.get(p + ".mlp.b2"));
  return add(y, m);
}

inline Tensor run_transformer(Tensor x, std::size_t frames, std::size_t tokens, const ModelWeights& w,
                              const std::string& prefix, const EncoderConfig& cfg, std::size_t window) {
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    x = transformer_block(x, frames, tokens, w, prefix + ".blocks." + std::to_string(l), cfg.num_heads, window);
  }
  return x;
}

}  // namespace detail

/// Multi-head self-attention over a clip. Each frame's queries see the
/// tokens of the frames inside the temporal window (clamped at the clip
/// edges); window 1 is independent per-frame attention.
inline std::vector<Tensor> attention_forward(std::span<const Tensor> frames, const AttentionBlock& block,
                                             std::size_t num_heads, std::size_t window) {
  if (frames.empty()) throw std::invalid_argument("attention_forward: empty frame list");
  if (window == 0 || window % 2 == 0) throw std::invalid_argument("attention_forward: window must be odd");
  const auto tokens = frames[0].dim(0);
  for (const auto& f : frames) {
    if (f.rank() != 2 || f.dim(0) != tokens || f.dim(1) != frames[0].dim(1)) {
      throw ShapeError("attention_forward: all frames need equal token counts and width");
    }
  }
  if (frames[0].dim(1) % num_heads != 0) throw ShapeError("attention_forward: width not divisible by heads");
  Tensor stacked = frames.size() == 1 ? frames[0] : concat(frames, 0);
  Tensor out = detail::windowed_attention(stacked, frames.size(), tokens, block, num_heads, window);
  std::vector<Tensor> result;
  result.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) result.push_back(slice_rows(out, t * tokens, (t + 1) * tokens));
  return result;
}

/// Height x width x channels pixel image with values in [0, 1].
struct Frame {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
  bool operator==(const Frame&) const = default;
};

/// A clip given either as pixel frames or as precomputed per-frame
/// features [T, d]; exactly one must be present.
struct VideoInput {
  std::vector<Frame> pixel_frames;
  Tensor features;
};

/// Flattens a frame into [num_patches, patch*patch*channels] row-major patches.
inline Tensor patchify(const Frame& frame, const EncoderConfig& cfg) {
  if (frame.height != cfg.frame_size || frame.width != cfg.frame_size || frame.channels != cfg.channels) {
    throw ShapeError("frame is " + std::to_string(frame.height) + "x" + std::to_string(frame.width) + "x" +
                     std::to_string(frame.channels) + ", encoder expects " + std::to_string(cfg.frame_size) + "x" +
                     std::to_string(cfg.frame_size) + "x" + std::to_string(cfg.channels));
  }
  const auto ps = cfg.patch_size, side = cfg.patches_per_side();
  std::vector<double> out;
  out.reserve(cfg.num_patches() * cfg.patch_dim());
  for (std::size_t py = 0; py < side; ++py)
    for (std::size_t px = 0; px < side; ++px)
      for (std::size_t y = 0; y < ps; ++y)
        for (std::size_t x = 0; x < ps; ++x)
          for (std::size_t c = 0; c < cfg.channels; ++c) out.push_back(frame.at(py * ps + y, px * ps + x, c));
  return Tensor({cfg.num_patches(), cfg.patch_dim()}, std::move(out));
}

/// Per-frame unit-norm embeddings [T, d] of a pixel clip with the given
/// temporal window.
inline Tensor encode_frames(std::span<const Frame> frames, const ModelWeights& w, const EncoderConfig& cfg,
                            std::size_t window) {
  if (frames.empty()) throw std::invalid_argument("encode_video: clip has no frames");
  if (window == 0 || window % 2 == 0) throw std::invalid_argument("encode_video: window must be odd");
  const auto tokens = cfg.tokens_per_frame();
  std::vector<Tensor> per_frame;
  per_frame.reserve(frames.size());
  const Tensor& cls = w.get("visual.cls");
  for (const auto& f : frames) {
    Tensor patches = add(matmul(patchify(f, cfg), w.get("visual.patch.weight")), w.get("visual.patch.bias"));
    per_frame.push_back(add(concat({cls, patches}, 0), w.get("visual.pos")));
  }
  Tensor x = per_frame.size() == 1 ? per_frame[0] : concat(per_frame, 0);
  x = layer_norm(x, w.get("visual.ln_pre.gain"), w.get("visual.ln_pre.bias"));
  x = detail::run_transformer(x, frames.size(), tokens, w, "visual", cfg, window);
  std::vector<std::size_t> cls_rows(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) cls_rows[t] = t * tokens;
  Tensor pooled = layer_norm(gather_rows(x, cls_rows), w.get("visual.ln_post.gain"), w.get("visual.ln_post.bias"));
  return l2_normalize(matmul(pooled, w.get("visual.proj")), 1);
}

/// Per-frame unit-norm embeddings [T, d]. Precomputed features bypass the
/// transformer and are only normalized.
inline Tensor encode_video(const VideoInput& video, const ModelWeights& w, const EncoderConfig& cfg,
                           std::size_t window) {
  const bool has_pixels = !video.pixel_frames.empty();
  const bool has_features = video.features.defined();
  if (has_pixels && has_features) throw std::invalid_argument("encode_video: clip mixes pixel frames and features");
  if (!has_pixels && !has_features) throw std::invalid_argument("encode_video: clip has no frames");
  if (has_features) {
    const auto& f = video.features;
    if (f.rank() != 2 || f.dim(1) != cfg.embed_dim) {
      throw ShapeError("encode_video: features must be [T, " + std::to_string(cfg.embed_dim) + "], got " +
                       shape_str(f.shape()));
    }
    return l2_normalize(f, 1);
  }
  return encode_frames(video.pixel_frames, w, cfg, window);
}

/// Token embeddings [L, d] of a whitespace-tokenized text.
inline Tensor embed_tokens(const std::string& text, const Vocabulary& vocab, const ModelWeights& w) {
  auto ids = vocab.encode(text);
  return gather_rows(w.get("text.token_embedding"), ids);
}

/// Unit-norm embeddings [B, d] of B equal-length token-embedding sequences.
/// The final position's hidden state is pooled.
inline Tensor encode_text_batch(std::span<const Tensor> sequences, const ModelWeights& w, const EncoderConfig& cfg) {
  if (sequences.empty()) throw std::invalid_argument("encode_text: no sequences");
  const auto len = sequences[0].dim(0);
  if (len > cfg.max_tokens) {
    throw std::invalid_argument("encode_text: sequence of " + std::to_string(len) + " tokens exceeds max_tokens " +
                                std::to_string(cfg.max_tokens));
  }
  Tensor pos = slice_rows(w.get("text.pos"), 0, len);
  std::vector<Tensor> rows;
  rows.reserve(sequences.size());
  for (const auto& s : sequences) {
    if (s.rank() != 2 || s.dim(0) != len || s.dim(1) != cfg.embed_dim) {
      throw ShapeError("encode_text: batched sequences must share shape [" + std::to_string(len) + ", " +
                       std::to_string(cfg.embed_dim) + "], got " + shape_str(s.shape()));
    }
    rows.push_back(add(s, pos));
  }
  Tensor x = rows.size() == 1 ? rows[0] : concat(rows, 0);
  x = detail::run_transformer(x, sequences.size(), len, w, "text", cfg, 1);
  std::vector<std::size_t> last(sequences.size());
  for (std::size_t b = 0; b < sequences.size(); ++b) last[b] = b * len + len - 1;
  Tensor pooled = layer_norm(gather_rows(x, last), w.get("text.ln_final.gain"), w.get("text.ln_final.bias"));
  return l2_normalize(matmul(pooled, w.get("text.proj")), 1);
}

/// Unit-norm embedding [d] of one token-embedding sequence [L, d].
inline Tensor encode_text(const Tensor& token_embeddings, const ModelWeights& w, const EncoderConfig& cfg) {
  if (token_embeddings.rank() != 2) throw ShapeError("encode_text: expected [L, d] token embeddings");
  if (token_embeddings.dim(0) > cfg.max_tokens) {
    throw std::invalid_argument("encode_text: sequence of " + std::to_string(token_embeddings.dim(0)) +
                                " tokens exceeds max_tokens " + std::to_string(cfg.max_tokens));
  }
  Tensor seq[1] = {token_embeddings};
  return encode_text_batch(seq, w, cfg).reshaped({cfg.embed_dim});
}

/// Encodes many sequences of mixed lengths; rows follow the input order.
inline Tensor encode_texts(std::span<const Tensor> sequences, const ModelWeights& w, const EncoderConfig& cfg) {
  if (sequences.empty()) throw std::invalid_argument("encode_text: no sequences");
  std::map<std::size_t, std::vector<std::size_t>> by_len;
  for (std::size_t i = 0; i < sequences.size(); ++i) by_len[sequences[i].dim(0)].push_back(i);
  if (by_len.size() == 1) return encode_text_batch(sequences, w, cfg);
  std::vector<Tensor> parts(sequences.size());
  for (const auto& [len, idx] : by_len) {
    std::vector<Tensor> group;
    for (auto i : idx) group.push_back(sequences[i]);
    Tensor enc = encode_text_batch(group, w, cfg);
    for (std::size_t j = 0; j < idx.size(); ++j) parts[idx[j]] = slice_rows(enc, j, j + 1);
  }
  return concat(parts, 0);
}

/// Softmax over temperature-scaled cosine similarities between one
/// embedding and each class embedding.
inline Tensor clip_zero_shot_probs(const Tensor& embedding, const Tensor& class_embeddings, double temperature = 1.0) {
  if (!class_embeddings.defined() || class_embeddings.numel() == 0) {
    throw std::invalid_argument("clip_zero_shot_probs: no classes");
  }
  Tensor classes = class_embeddings.rank() == 1 ? class_embeddings.reshaped({1, class_embeddings.numel()})
                                                : class_embeddings;
  Tensor sims = cosine_similarity(embedding, classes);
  return softmax(scale(sims, temperature).reshaped({classes.dim(0)}), 0);
}

inline Tensor clip_zero_shot_probs(const Tensor& embedding, std::span<const Tensor> class_embeddings,
                                   double temperature = 1.0) {
  if (class_embeddings.empty()) throw std::invalid_argument("clip_zero_shot_probs: no classes");
  return clip_zero_shot_probs(embedding, stack_rows(class_embeddings), temperature);
}

}  // namespace dvclip
