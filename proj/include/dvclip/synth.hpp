// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvclip/data.hpp"
#include "dvclip/random.hpp"

namespace dvclip {

// Verbs are purely temporal (how an actor changes across frames) and
// objects purely spatial (shape and colour), so a single frame says
// nothing about the verb.

inline const std::vector<std::string>& known_verbs() {
  static const std::vector<std::string> v{"slide", "bob", "spin", "pulse", "blink", "orbit", "shake", "hold"};
  return v;
}

struct ObjectStyle {
  std::string name;
  std::array<double, 3> color;
  std::function<bool(double, double)> inside;  // local coordinates in [-1, 1]
};

inline const std::vector<ObjectStyle>& known_objects() {
  static const std::vector<ObjectStyle> v{
      {"square", {1.0, 0.15, 0.15}, [](double u, double v) { return std::abs(u) < 0.75 && std::abs(v) < 0.75; }},
      {"triangle", {0.15, 0.9, 0.2},
       [](double u, double v) { return v > -0.8 && v < 0.8 && std::abs(u) < 0.5 * (v + 0.8); }},
      {"bar", {0.2, 0.35, 1.0}, [](double u, double v) { return std::abs(u) < 0.9 && std::abs(v) < 0.3; }},
      {"cross", {1.0, 0.9, 0.1},
       [](double u, double v) {
         return (std::abs(u) < 0.25 && std::abs(v) < 0.9) || (std::abs(v) < 0.25 && std::abs(u) < 0.9);
       }},
      {"ell", {0.9, 0.2, 0.9},
       [](double u, double v) {
         return (u > -0.8 && u < -0.3 && std::abs(v) < 0.9) || (v > 0.4 && v < 0.9 && u > -0.8 && u < 0.8);
       }},
      {"tee", {0.1, 0.9, 0.9},
       [](double u, double v) {
         return (std::abs(u) < 0.9 && v > -0.9 && v < -0.4) || (std::abs(u) < 0.25 && std::abs(v) < 0.9);
       }},
      {"diamond", {1.0, 0.55, 0.1}, [](double u, double v) { return std::abs(u) + std::abs(v) < 0.9; }},
      {"arrow", {0.95, 0.95, 0.95},
       [](double u, double v) {
         return (std::abs(v) < 0.2 && u > -0.9 && u < 0.3) || (u >= 0.3 && u < 0.9 && std::abs(v) < 0.9 - u);
       }},
      {"ring", {0.55, 0.3, 0.85},
       [](double u, double v) {
         const double r = std::hypot(u, v);
         return r > 0.45 && r < 0.9;
       }},
  };
  return v;
}

inline const ObjectStyle& object_style(const std::string& name) {
  for (const auto& o : known_objects()) {
    if (o.name == name) return o;
  }
  throw std::invalid_argument("unknown synthetic object '" + name + "'");
}

inline void require_known_verb(const std::string& verb) {
  const auto& v = known_verbs();
  if (std::find(v.begin(), v.end(), verb) == v.end()) {
    throw std::invalid_argument("unknown synthetic verb '" + verb + "'");
  }
}

struct SynthConfig {
  std::vector<std::string> verbs{"slide", "bob", "spin", "pulse", "blink", "orbit"};
  std::vector<std::string> objects{"square", "triangle", "bar", "cross", "ell", "tee"};
  std::size_t frames_per_clip = 16;
  std::size_t frame_size = 32;
  std::size_t max_actions_per_clip = 3;
  std::size_t clips_per_class = 10;
  std::uint64_t seed = 0;
  SplitRole role = SplitRole::train;
  std::string id_prefix = "synth";

  static constexpr std::size_t kSlotSize = 16;

  std::size_t slots() const { return (frame_size / kSlotSize) * (frame_size / kSlotSize); }

  void validate() const {
    if (verbs.empty() || objects.empty() || verbs.size() * objects.size() < 2) {
      throw std::invalid_argument("synthetic config needs at least two verb/object combinations");
    }
    for (const auto& v : verbs) require_known_verb(v);
    for (const auto& o : objects) object_style(o);
    if (max_actions_per_clip == 0) throw std::invalid_argument("max_actions_per_clip must be at least 1");
    if (frames_per_clip == 0) throw std::invalid_argument("frames_per_clip must be positive");
    if (clips_per_class == 0) throw std::invalid_argument("clips_per_class must be positive");
    if (max_actions_per_clip > slots()) {
      throw std::invalid_argument("canvas " + std::to_string(frame_size) + "x" + std::to_string(frame_size) +
                                  " fits " + std::to_string(slots()) + " actors, " +
                                  std::to_string(max_actions_per_clip) + " requested");
    }
  }
};

/// Classes verbs x objects named "<verb> <object>", ids "s000", "s001", ...
inline std::vector<ActionClass> synthetic_classes(const std::vector<std::string>& verbs,
                                                  const std::vector<std::string>& objects) {
  std::vector<ActionClass> out;
  for (const auto& v : verbs) {
    for (const auto& o : objects) {
      char id[16];
      std::snprintf(id, sizeof id, "s%03zu", out.size());
      out.push_back({id, v + " " + o, v, o});
    }
  }
  return out;
}

/// Placement and jitter of one actor on the canvas.
struct ActorSpec {
  std::string verb;
  std::string object;
  double cx = 0.0;
  double cy = 0.0;
  double size = 1.0;
  double angle0 = 0.0;
  std::size_t phase = 0;
};

namespace detail {

struct ActorPose {
  double cx, cy, half, angle;
  bool visible;
};

// Every verb is a short periodic motion, visible in any three consecutive
// frames. The video encoder has no notion of frame order, so a motion and
// its time reverse (left vs right, grow vs shrink) would be the same verb
// to it; each verb here differs from the others even when played backwards.
inline constexpr std::size_t kMotionPeriod = 4;

inline ActorPose actor_pose(const ActorSpec& a, std::size_t frame, std::size_t /*frames*/, double slot) {
  const std::size_t k = (frame + a.phase) % kMotionPeriod;
  constexpr double wave[kMotionPeriod] = {-1.0, 0.0, 1.0, 0.0};  // triangle
  const double amp = 0.25 * slot;
  const double base_half = 0.2 * slot * a.size;
  ActorPose pose{a.cx, a.cy, base_half, a.angle0, true};
  const double turn = 2.0 * std::numbers::pi * static_cast<double>(k) / kMotionPeriod;
  if (a.verb == "slide") pose.cx += amp * wave[k];
  else if (a.verb == "bob") pose.cy += amp * wave[k];
  else if (a.verb == "shake") {
    pose.cx += 0.7 * amp * wave[k];
    pose.cy += 0.7 * amp * wave[k];
  } else if (a.verb == "orbit") {
    pose.cx += 0.8 * amp * std::cos(turn);
    pose.cy += 0.8 * amp * std::sin(turn);
  } else if (a.verb == "spin") pose.angle += 0.5 * static_cast<double>(frame + a.phase);
  else if (a.verb == "pulse") pose.half = base_half * (0.75 + 0.3 * wave[k]);
  else if (a.verb == "blink") pose.visible = (frame + a.phase) % 2 == 0;
  return pose;
}

}  // namespace detail

/// Renders actors onto a black canvas with 2x2 supersampling.
inline Frame render_frame(const std::vector<ActorSpec>& actors, std::size_t frame, std::size_t frames,
                          std::size_t frame_size) {
  Frame f{frame_size, frame_size, 3, std::vector<double>(frame_size * frame_size * 3, 0.0)};
  const double slot = static_cast<double>(SynthConfig::kSlotSize);
  for (const auto& a : actors) {
    const auto pose = detail::actor_pose(a, frame, frames, slot);
    if (!pose.visible) continue;
    const auto& style = object_style(a.object);
    const double c = std::cos(pose.angle), s = std::sin(pose.angle);
    const int lo_y = std::max(0, static_cast<int>(std::floor(pose.cy - 1.5 * pose.half)));
    const int hi_y = std::min(static_cast<int>(frame_size) - 1, static_cast<int>(std::ceil(pose.cy + 1.5 * pose.half)));
    const int lo_x = std::max(0, static_cast<int>(std::floor(pose.cx - 1.5 * pose.half)));
    const int hi_x = std::min(static_cast<int>(frame_size) - 1, static_cast<int>(std::ceil(pose.cx + 1.5 * pose.half)));
    for (int y = lo_y; y <= hi_y; ++y) {
      for (int x = lo_x; x <= hi_x; ++x) {
        int hits = 0;
        for (double oy : {0.25, 0.75}) {
          for (double ox : {0.25, 0.75}) {
            const double dx = (x + ox - pose.cx) / pose.half;
            const double dy = (y + oy - pose.cy) / pose.half;
            const double u = c * dx + s * dy;
            const double v = -s * dx + c * dy;
            hits += style.inside(u, v) ? 1 : 0;
          }
        }
        if (!hits) continue;
        const double cover = hits / 4.0;
        for (std::size_t ch = 0; ch < 3; ++ch) {
          auto& px = f.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), ch);
          px = std::min(1.0, std::max(px, cover * style.color[ch]));
        }
      }
    }
  }
  return f;
}

inline std::vector<Frame> render_clip(const std::vector<ActorSpec>& actors, std::size_t frames, std::size_t frame_size) {
  std::vector<Frame> out;
  out.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) out.push_back(render_frame(actors, t, frames, frame_size));
  return out;
}

namespace detail {

inline ActorSpec place_actor(const std::string& verb, const std::string& object, std::size_t slot_index,
                             std::size_t frame_size, Rng& rng) {
  const std::size_t per_row = frame_size / SynthConfig::kSlotSize;
  const double slot = static_cast<double>(SynthConfig::kSlotSize);
  ActorSpec a{verb, object, 0, 0, 1.0, 0.0};
  a.cx = (static_cast<double>(slot_index % per_row) + 0.5) * slot + rng.uniform(-0.75, 0.75);
  a.cy = (static_cast<double>(slot_index / per_row) + 0.5) * slot + rng.uniform(-0.75, 0.75);
  a.size = rng.uniform(0.9, 1.1);
  a.angle0 = rng.uniform(-0.15, 0.15);
  a.phase = rng.index(detail::kMotionPeriod);
  return a;
}

}  // namespace detail

struct SyntheticDataset {
  std::vector<ActionClass> classes;
  std::vector<VideoSample> samples;
};

/// Multi-label clips over an explicit class list. Each clip shows 1..max
/// distinct actions, one actor per canvas slot; labels are exactly the
/// rendered actions and every class occurs in at least clips_per_class clips.
/// The verb and object lists of `cfg` are not consulted.
inline SyntheticDataset generate_clips(const std::vector<ActionClass>& classes, const SynthConfig& cfg) {
  cfg.validate();
  if (classes.empty()) throw std::invalid_argument("no classes to render");
  for (const auto& c : classes) {
    require_known_verb(c.verb);
    if (!c.object) throw std::invalid_argument("class '" + c.id + "' has no object to render");
    object_style(*c.object);
  }
  SyntheticDataset ds;
  ds.classes = classes;
  const auto n = ds.classes.size();
  Rng rng(cfg.seed);
  std::vector<std::size_t> counts(n, 0);
  const auto max_actions = std::min(cfg.max_actions_per_clip, n);
  for (std::size_t clip = 0;; ++clip) {
    const auto lowest = *std::min_element(counts.begin(), counts.end());
    if (lowest >= cfg.clips_per_class) break;
    std::vector<std::size_t> candidates;
    for (std::size_t c = 0; c < n; ++c) {
      if (counts[c] == lowest) candidates.push_back(c);
    }
    std::vector<std::size_t> chosen{candidates[rng.index(candidates.size())]};
    const auto k = 1 + rng.index(max_actions);
    while (chosen.size() < k) {
      const auto c = rng.index(n);
      if (std::find(chosen.begin(), chosen.end(), c) == chosen.end()) chosen.push_back(c);
    }
    auto slots = rng.sample(cfg.slots(), chosen.size());
    std::vector<ActorSpec> actors;
    VideoSample s;
    char id[64];
    std::snprintf(id, sizeof id, "%s_%05zu", cfg.id_prefix.c_str(), clip);
    s.id = id;
    s.role = cfg.role;
    for (std::size_t i = 0; i < chosen.size(); ++i) {
      const auto& cls = ds.classes[chosen[i]];
      actors.push_back(detail::place_actor(cls.verb, *cls.object, slots[i], cfg.frame_size, rng));
      s.labels.insert(cls.id);
      ++counts[chosen[i]];
    }
    s.frames = render_clip(actors, cfg.frames_per_clip, cfg.frame_size);
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

/// Clips over the cross product verbs x objects.
inline SyntheticDataset generate_synthetic_dataset(const SynthConfig& cfg) {
  cfg.validate();
  return generate_clips(synthetic_classes(cfg.verbs, cfg.objects), cfg);
}

/// Single-frame image paired with its caption. `name` is the class name
/// ("<verb> <object>"); captions of the same name describe the same content.
struct CaptionedImage {
  Frame image;
  std::string caption;
  std::string name;
};

/// One object per image, drawn at a random point of its motion, captioned
/// with the full class name.
inline std::vector<CaptionedImage> make_captioned_images(const std::vector<ActionClass>& classes, std::size_t count,
                                                         std::size_t frames_per_clip, std::size_t frame_size,
                                                         std::uint64_t seed) {
  if (classes.empty()) throw std::invalid_argument("no classes to caption");
  const std::size_t slots = (frame_size / SynthConfig::kSlotSize) * (frame_size / SynthConfig::kSlotSize);
  if (slots == 0) throw std::invalid_argument("canvas too small for a single actor");
  Rng rng(seed);
  std::vector<CaptionedImage> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& cls = classes[i % classes.size()];
    if (!cls.object) throw std::invalid_argument("class '" + cls.id + "' has no object to render");
    auto actor = detail::place_actor(cls.verb, *cls.object, rng.index(slots), frame_size, rng);
    std::size_t frame = rng.index(frames_per_clip);
    // A blinking actor must be visible in its still image.
    if (cls.verb == "blink" && (frame + actor.phase) % 2 == 1) frame = frame == 0 ? 1 : frame - 1;
    out.push_back({render_frame({actor}, frame, frames_per_clip, frame_size), cls.name, cls.name});
  }
  return out;
}

}  // namespace dvclip
