// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvclip/data.hpp"
#include "dvclip/encoders.hpp"
#include "dvclip/pipeline.hpp"
#include "dvclip/prompts.hpp"
#include "dvclip/splits.hpp"
#include "dvclip/synth.hpp"
#include "dvclip/train.hpp"

namespace dvclip {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Every tunable of a run in one place. Paths are kept as strings; an
/// empty path means "not given".
struct RunConfig {
  std::uint64_t seed = 0;
  EncoderConfig encoder;
  SynthConfig synth;
  std::vector<std::string> base_verbs{"shake", "hold"};
  std::vector<std::string> base_objects{"diamond", "arrow", "ring"};
  std::size_t pretrain_images_per_class = 16;
  std::size_t caption_prefix_max = 0;
  std::size_t base_clips_per_class = 8;
  std::size_t test_clips_per_class = 6;
  TrainConfig train;
  LossConfig loss;
  SplitKind split_kind = SplitKind::random;
  double split_fraction = 0.5;
  double patch_ratio = 0.5;
  std::map<std::string, std::string> paths;
};

namespace detail {

inline std::string join(const std::vector<std::string>& v, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + v[i];
  return out;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string format_real(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const auto t = trim(text);
  T value{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("config key '" + key + "': expected " +
                      (std::is_floating_point_v<T> ? "a number" : "a non-negative integer") + ", got '" + text + "'");
  }
  return value;
}

struct ConfigKey {
  std::string name;
  std::vector<std::string> aliases;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Numeric key bound to a field of RunConfig.
template <typename T>
ConfigKey num(std::string name, std::vector<std::string> aliases, std::string help, std::function<T&(RunConfig&)> field) {
  auto set = [name, field](RunConfig& c, const std::string& v) { field(c) = parse_number<T>(name, v); };
  auto get = [field](const RunConfig& c) {
    const T v = field(const_cast<RunConfig&>(c));
    if constexpr (std::is_floating_point_v<T>) return format_real(v);
    else return std::to_string(v);
  };
  return {std::move(name), std::move(aliases), std::move(help), set, get};
}

inline ConfigKey text(std::string name, std::vector<std::string> aliases, std::string help,
                      std::function<void(RunConfig&, const std::string&)> set,
                      std::function<std::string(const RunConfig&)> get) {
  return {std::move(name), std::move(aliases), std::move(help), std::move(set), std::move(get)};
}

inline ConfigKey path_key(const std::string& name, std::vector<std::string> aliases, std::string help) {
  return text(
      name, std::move(aliases), std::move(help), [name](RunConfig& c, const std::string& v) { c.paths[name] = v; },
      [name](const RunConfig& c) {
        auto it = c.paths.find(name);
        return it == c.paths.end() ? std::string() : it->second;
      });
}

inline ConfigKey list_key(std::string name, std::string help, std::function<std::vector<std::string>&(RunConfig&)> f) {
  return text(
      std::move(name), {}, std::move(help), [f](RunConfig& c, const std::string& v) { f(c) = split_list(v); },
      [f](const RunConfig& c) { return join(f(const_cast<RunConfig&>(c))); });
}

}  // namespace detail

/// The key table: canonical name, aliases, setter and getter.
inline const std::vector<detail::ConfigKey>& config_keys() {
  using detail::num;
  using R = RunConfig;
  static const std::vector<detail::ConfigKey> keys = [] {
    std::vector<detail::ConfigKey> k;
    k.push_back(num<std::uint64_t>("seed", {}, "global seed", [](R& c) -> auto& { return c.seed; }));
    // encoder
    k.push_back(num<std::size_t>("embed_dim", {}, "embedding width d", [](R& c) -> auto& { return c.encoder.embed_dim; }));
    k.push_back(num<std::size_t>("num_layers", {}, "transformer layers", [](R& c) -> auto& { return c.encoder.num_layers; }));
    k.push_back(num<std::size_t>("num_heads", {}, "attention heads", [](R& c) -> auto& { return c.encoder.num_heads; }));
    k.push_back(num<std::size_t>("patch_size", {}, "patch side in pixels", [](R& c) -> auto& { return c.encoder.patch_size; }));
    k.push_back(detail::text(
        "frame_size", {}, "frame side in pixels (encoder and synthetic data)",
        [](R& c, const std::string& v) { c.encoder.frame_size = c.synth.frame_size = detail::parse_number<std::size_t>("frame_size", v); },
        [](const R& c) { return std::to_string(c.encoder.frame_size); }));
    k.push_back(num<std::size_t>("channels", {}, "colour channels", [](R& c) -> auto& { return c.encoder.channels; }));
    k.push_back(num<std::size_t>("max_tokens", {}, "text length limit", [](R& c) -> auto& { return c.encoder.max_tokens; }));
    k.push_back(num<std::size_t>("temporal_window", {"window"}, "frames per attention window (odd)",
                                 [](R& c) -> auto& { return c.encoder.temporal_window; }));
    k.push_back(num<std::size_t>("mlp_ratio", {}, "MLP hidden multiple", [](R& c) -> auto& { return c.encoder.mlp_ratio; }));
    // synthetic data
    k.push_back(detail::list_key("verbs", "evaluation verbs", [](R& c) -> auto& { return c.synth.verbs; }));
    k.push_back(detail::list_key("objects", "evaluation objects", [](R& c) -> auto& { return c.synth.objects; }));
    k.push_back(detail::list_key("base_verbs", "extra fine-tuning verbs", [](R& c) -> auto& { return c.base_verbs; }));
    k.push_back(detail::list_key("base_objects", "extra fine-tuning objects", [](R& c) -> auto& { return c.base_objects; }));
    k.push_back(num<std::size_t>("frames_per_clip", {"frames"}, "frames per clip T", [](R& c) -> auto& { return c.synth.frames_per_clip; }));
    k.push_back(num<std::size_t>("max_actions_per_clip", {}, "actors per clip", [](R& c) -> auto& { return c.synth.max_actions_per_clip; }));
    k.push_back(num<std::size_t>("clips_per_class", {}, "minimum clips per class", [](R& c) -> auto& { return c.synth.clips_per_class; }));
    k.push_back(detail::text(
        "role", {}, "train or test", [](R& c, const std::string& v) { c.synth.role = parse_split_role(v); },
        [](const R& c) { return std::string(to_string(c.synth.role)); }));
    k.push_back(num<std::size_t>("pretrain_images_per_class", {}, "captioned stills per class",
                                 [](R& c) -> auto& { return c.pretrain_images_per_class; }));
    k.push_back(num<std::size_t>("caption_prefix_max", {}, "filler words before pretraining captions",
                                 [](R& c) -> auto& { return c.caption_prefix_max; }));
    k.push_back(num<std::size_t>("test_clips_per_class", {}, "minimum test clips per class",
                                 [](R& c) -> auto& { return c.test_clips_per_class; }));
    k.push_back(num<std::size_t>("base_clips_per_class", {}, "fine-tuning clips per base class",
                                 [](R& c) -> auto& { return c.base_clips_per_class; }));
    // training
    k.push_back(num<double>("learning_rate", {"lr"}, "base learning rate", [](R& c) -> auto& { return c.train.learning_rate; }));
    k.push_back(num<std::size_t>("warmup_epochs", {}, "linear warm-up epochs", [](R& c) -> auto& { return c.train.warmup_epochs; }));
    k.push_back(num<std::size_t>("batch_size", {"batch"}, "mini-batch size", [](R& c) -> auto& { return c.train.batch_size; }));
    k.push_back(num<std::size_t>("epochs", {}, "epoch budget", [](R& c) -> auto& { return c.train.epochs; }));
    k.push_back(num<std::size_t>("context_tokens", {"M"}, "prompt context length M", [](R& c) -> auto& { return c.train.context_tokens; }));
    k.push_back(detail::text(
        "optimizer", {}, "sgd or adam", [](R& c, const std::string& v) { c.train.optimizer = parse_optimizer(v); },
        [](const R& c) { return std::string(to_string(c.train.optimizer)); }));
    k.push_back(num<double>("momentum", {}, "SGD momentum", [](R& c) -> auto& { return c.train.momentum; }));
    k.push_back(num<double>("contrastive_scale", {}, "logit scale of the encoder stages",
                            [](R& c) -> auto& { return c.train.contrastive_scale; }));
    k.push_back(num<std::size_t>("early_stop_patience", {}, "epochs without improvement",
                                 [](R& c) -> auto& { return c.train.early_stop_patience; }));
    k.push_back(num<double>("early_stop_min_delta", {}, "required loss improvement",
                            [](R& c) -> auto& { return c.train.early_stop_min_delta; }));
    // loss
    k.push_back(num<double>("gamma_plus", {}, "positive focusing exponent", [](R& c) -> auto& { return c.loss.gamma_plus; }));
    k.push_back(num<double>("gamma_minus", {}, "negative focusing exponent", [](R& c) -> auto& { return c.loss.gamma_minus; }));
    k.push_back(num<double>("clip_margin", {}, "negative probability margin", [](R& c) -> auto& { return c.loss.clip_margin; }));
    k.push_back(num<double>("logit_scale", {}, "similarity scale of the prompt logits", [](R& c) -> auto& { return c.loss.logit_scale; }));
    k.push_back(detail::text(
        "negative_weights", {}, "positive or negative",
        [](R& c, const std::string& v) { c.loss.negative_weights = parse_negative_weights(v); },
        [](const R& c) { return std::string(to_string(c.loss.negative_weights)); }));
    // split and patching
    k.push_back(detail::text(
        "split_kind", {"kind"}, "random, verb or object",
        [](R& c, const std::string& v) { c.split_kind = parse_split_kind(v); },
        [](const R& c) { return std::string(to_string(c.split_kind)); }));
    k.push_back(num<double>("split_fraction", {"fraction"}, "unseen fraction", [](R& c) -> auto& { return c.split_fraction; }));
    k.push_back(num<double>("patch_ratio", {"ratio"}, "interpolation ratio", [](R& c) -> auto& { return c.patch_ratio; }));
    // paths
    k.push_back(detail::path_key("class_map", {}, "class map file"));
    k.push_back(detail::path_key("annotations", {}, "annotation file"));
    k.push_back(detail::path_key("data", {"data_dir"}, "dataset directory"));
    k.push_back(detail::path_key("weights", {}, "model checkpoint"));
    k.push_back(detail::path_key("orig", {}, "original checkpoint"));
    k.push_back(detail::path_key("ft", {}, "fine-tuned checkpoint"));
    k.push_back(detail::path_key("prompts", {}, "prompt checkpoint"));
    k.push_back(detail::path_key("split", {"split_file"}, "split file"));
    k.push_back(detail::path_key("scores", {}, "scores file"));
    k.push_back(detail::path_key("out", {}, "output file"));
    return k;
  }();
  return keys;
}

/// Canonical name of `key` or one of its aliases; dashes match underscores.
inline const detail::ConfigKey& find_config_key(const std::string& key) {
  std::string k = key;
  std::replace(k.begin(), k.end(), '-', '_');
  for (const auto& e : config_keys()) {
    if (e.name == k || std::find(e.aliases.begin(), e.aliases.end(), k) != e.aliases.end()) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  const auto& k = find_config_key(key);
  try {
    k.set(c, value);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config key '" + k.name + "': " + e.what());
  }
}

inline void validate(const RunConfig& c) {
  c.encoder.validate();
  c.synth.validate();
  c.train.validate();
  c.loss.validate();
  if (!(c.split_fraction > 0.0 && c.split_fraction < 1.0)) throw ConfigError("split_fraction must lie in (0, 1)");
  if (!(c.patch_ratio >= 0.0 && c.patch_ratio <= 1.0)) throw ConfigError("patch_ratio must lie in [0, 1]");
  if (c.synth.frame_size != c.encoder.frame_size) {
    throw ConfigError("frame_size is shared by the encoder and the synthetic data");
  }
}

/// Parses key=value lines ('#' comments, blank lines ignored) into `c`.
inline void apply_config_text(RunConfig& c, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key=value, got '" + t + "'");
    }
    try {
      set_config_value(c, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

/// Defaults, then the file (if any), then overrides in order.
inline RunConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig c;
  c.synth.role = SplitRole::train;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(c, ss.str(), path.string());
  }
  for (const auto& [k, v] : overrides) {
    try {
      set_config_value(c, k, v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("override: ") + e.what());
    }
  }
  validate(c);
  return c;
}

/// Every key with its resolved value, one "key=value" per line, in table order.
inline std::string resolved_config_text(const RunConfig& c) {
  std::string out = "# resolved configuration\n";
  for (const auto& k : config_keys()) out += k.name + "=" + k.get(c) + "\n";
  return out;
}

inline ExperimentConfig experiment_config(const RunConfig& c) {
  ExperimentConfig e;
  e.encoder = c.encoder;
  e.eval_verbs = c.synth.verbs;
  e.eval_objects = c.synth.objects;
  e.base_verbs = c.base_verbs;
  e.base_objects = c.base_objects;
  e.pretrain_images_per_class = c.pretrain_images_per_class;
  e.caption_prefix_max = c.caption_prefix_max;
  e.base_clips_per_class = c.base_clips_per_class;
  e.train_clips_per_class = c.synth.clips_per_class;
  e.test_clips_per_class = c.test_clips_per_class;
  e.frames_per_clip = c.synth.frames_per_clip;
  e.max_actions_per_clip = c.synth.max_actions_per_clip;
  e.loss = c.loss;
  e.patch_ratio = c.patch_ratio;
  e.split_fraction = c.split_fraction;
  e.seed = c.seed;
  // One training section drives whichever stage a command runs.
  for (auto [tc, stage] : {std::pair{&e.pretrain, Stage::pretrain}, std::pair{&e.finetune, Stage::finetune_temporal},
                           std::pair{&e.prompts, Stage::prompts}}) {
    *tc = c.train;
    tc->stage = stage;
    tc->frames_per_clip = c.synth.frames_per_clip;
  }
  return e;
}

}  // namespace dvclip
