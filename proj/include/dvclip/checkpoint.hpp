// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "dvclip/binary_io.hpp"
#include "dvclip/encoders.hpp"

namespace dvclip {

// Weight checkpoint layout (little-endian):
//   "DVCLIPW\0" u32 version
//   9 x u64 encoder config fields
//   u32 vocab size, then length-prefixed words
//   u32 parameter count, then per parameter:
//     length-prefixed name, u32 rank, rank x u64 dims, row-major f64 values
inline constexpr std::string_view kWeightsMagic{"DVCLIPW\0", 8};
inline constexpr std::uint32_t kWeightsVersion = 1;

inline void save_model(const ClipModel& model, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.magic(kWeightsMagic, kWeightsVersion);
  const auto& c = model.config;
  for (auto v : {c.embed_dim, c.num_layers, c.num_heads, c.patch_size, c.frame_size, c.channels, c.max_tokens,
                 c.temporal_window, c.mlp_ratio}) {
    w.u64(v);
  }
  w.u32(static_cast<std::uint32_t>(model.vocab.size()));
  for (const auto& word : model.vocab.words()) w.str(word);
  w.u32(static_cast<std::uint32_t>(model.weights.size()));
  for (const auto& [name, t] : model.weights) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u64(d);
    w.doubles(t.values().data(), t.numel());
  }
  w.finish();
}

inline ClipModel load_model(const std::filesystem::path& path) {
  BinaryReader r(path);
  const auto version = r.magic(kWeightsMagic);
  if (version != kWeightsVersion) {
    throw FormatError("'" + path.string() + "': unsupported weights version " + std::to_string(version));
  }
  ClipModel m;
  auto& c = m.config;
  for (auto* field : {&c.embed_dim, &c.num_layers, &c.num_heads, &c.patch_size, &c.frame_size, &c.channels,
                      &c.max_tokens, &c.temporal_window, &c.mlp_ratio}) {
    *field = static_cast<std::size_t>(r.u64());
  }
  const auto nwords = r.u32();
  for (std::uint32_t i = 0; i < nwords; ++i) m.vocab.add(r.str());
  const auto nparams = r.u32();
  for (std::uint32_t i = 0; i < nparams; ++i) {
    auto name = r.str();
    const auto rank = r.u32();
    if (rank == 0 || rank > 8) throw FormatError("'" + path.string() + "': bad rank for '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.u64());
    auto values = r.doubles(shape_numel(shape));
    m.weights.set(name, Tensor(std::move(shape), std::move(values)));
  }
  if (!r.at_end()) throw FormatError("'" + path.string() + "': trailing bytes after last parameter");
  m.config.validate();
  return m;
}

}  // namespace dvclip
