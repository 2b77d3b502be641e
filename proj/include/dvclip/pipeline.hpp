// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <tuple>
#include <utility>
#include <string>
#include <vector>

#include "dvclip/encoders.hpp"
#include "dvclip/eval.hpp"
#include "dvclip/prompts.hpp"
#include "dvclip/splits.hpp"
#include "dvclip/synth.hpp"
#include "dvclip/train.hpp"

namespace dvclip {

/// Vocabulary over the given verbs and objects, verbs first.
inline Vocabulary make_vocabulary(const std::vector<std::string>& verbs, const std::vector<std::string>& objects) {
  Vocabulary v;
  for (const auto& w : verbs) v.add_text(w);
  for (const auto& w : objects) v.add_text(w);
  return v;
}

/// Base classes for temporal fine-tuning: every (verb, object) pair over
/// the union vocabularies that is not an evaluation pair. Ids "b000", ...
inline std::vector<ActionClass> base_action_classes(const std::vector<std::string>& eval_verbs,
                                                    const std::vector<std::string>& eval_objects,
                                                    const std::vector<std::string>& base_verbs,
                                                    const std::vector<std::string>& base_objects) {
  std::vector<std::string> verbs = eval_verbs, objects = eval_objects;
  verbs.insert(verbs.end(), base_verbs.begin(), base_verbs.end());
  objects.insert(objects.end(), base_objects.begin(), base_objects.end());
  std::vector<ActionClass> out;
  for (const auto& v : verbs) {
    for (const auto& o : objects) {
      const bool eval_v = std::find(eval_verbs.begin(), eval_verbs.end(), v) != eval_verbs.end();
      const bool eval_o = std::find(eval_objects.begin(), eval_objects.end(), o) != eval_objects.end();
      if (eval_v && eval_o) continue;
      char id[16];
      std::snprintf(id, sizeof id, "b%03zu", out.size());
      out.push_back({id, v + " " + o, v, o});
    }
  }
  return out;
}

struct ExperimentConfig {
  EncoderConfig encoder;
  std::vector<std::string> eval_verbs{"slide", "bob", "spin", "pulse", "blink", "orbit"};
  std::vector<std::string> eval_objects{"square", "triangle", "bar", "cross", "ell", "tee"};
  std::vector<std::string> base_verbs{"shake", "hold"};
  std::vector<std::string> base_objects{"diamond", "arrow", "ring"};
  std::size_t pretrain_images_per_class = 16;
  /// Captions get 0..caption_prefix_max filler words in front of the class
  /// name. Off by default: uninformative prefixes teach the text encoder to
  /// ignore everything before the name, prompt contexts included.
  std::size_t caption_prefix_max = 0;
  std::vector<std::string> filler_words{"a", "the", "video", "clip", "of", "showing", "with", "some"};
  std::size_t base_clips_per_class = 4;
  std::size_t train_clips_per_class = 10;
  std::size_t test_clips_per_class = 6;
  std::size_t frames_per_clip = 16;
  std::size_t max_actions_per_clip = 3;
  TrainConfig pretrain;
  TrainConfig finetune;
  TrainConfig prompts;
  LossConfig loss;
  double patch_ratio = 0.5;
  double split_fraction = 0.5;
  std::uint64_t seed = 0;

  ExperimentConfig() {
    pretrain.stage = Stage::pretrain;
    finetune.stage = Stage::finetune_temporal;
    prompts.stage = Stage::prompts;
  }
};

/// The 6x6 synthetic experiment sized for a single CPU core. The encoder
/// stages use Adam (plain SGD at these budgets barely moves random
/// weights); prompts use a short context and a logit scale of 20 since
/// cosines alone span too narrow a range for the loss to separate classes.
inline ExperimentConfig desk_experiment_config() {
  ExperimentConfig c;
  c.max_actions_per_clip = 1;
  c.base_clips_per_class = 8;
  c.train_clips_per_class = 30;
  c.test_clips_per_class = 6;
  c.pretrain.epochs = 8;
  c.pretrain.optimizer = OptimizerKind::adam;
  c.finetune.epochs = 10;
  c.finetune.optimizer = OptimizerKind::adam;
  c.finetune.batch_size = 16;
  c.finetune.learning_rate = 3e-3;
  c.prompts.epochs = 60;
  c.prompts.optimizer = OptimizerKind::adam;
  c.prompts.learning_rate = 1e-2;
  c.prompts.batch_size = 16;
  c.prompts.context_tokens = 16;
  c.prompts.early_stop_patience = 100;
  c.loss.logit_scale = 20.0;
  return c;
}

/// Every verb and object the encoders ever see: evaluation first, then base.
inline std::pair<std::vector<std::string>, std::vector<std::string>> all_words(const ExperimentConfig& cfg) {
  std::vector<std::string> verbs = cfg.eval_verbs, objects = cfg.eval_objects;
  verbs.insert(verbs.end(), cfg.base_verbs.begin(), cfg.base_verbs.end());
  objects.insert(objects.end(), cfg.base_objects.begin(), cfg.base_objects.end());
  return {verbs, objects};
}

/// Randomly initialised model over the full vocabulary.
inline ClipModel initial_model(const ExperimentConfig& cfg) {
  const auto [verbs, objects] = all_words(cfg);
  ClipModel m{cfg.encoder, make_vocabulary(verbs, objects), {}};
  for (const auto& w : cfg.filler_words) m.vocab.add_text(w);
  m.weights = init_clip_weights(cfg.encoder, m.vocab.size(), cfg.seed);
  return m;
}

/// Captioned stills for every (verb, object) pair of the vocabulary.
inline std::vector<CaptionedImage> pretrain_images(const ExperimentConfig& cfg) {
  const auto [verbs, objects] = all_words(cfg);
  const auto classes = synthetic_classes(verbs, objects);
  auto images = make_captioned_images(classes, classes.size() * cfg.pretrain_images_per_class, cfg.frames_per_clip,
                                      cfg.encoder.frame_size, cfg.seed + 1);
  if (cfg.caption_prefix_max > 0 && !cfg.filler_words.empty()) {
    Rng rng(cfg.seed + 9);
    for (auto& im : images) {
      std::string prefix;
      for (auto k = rng.index(cfg.caption_prefix_max + 1); k > 0; --k) {
        prefix += cfg.filler_words[rng.index(cfg.filler_words.size())] + " ";
      }
      im.caption = prefix + im.caption;
    }
  }
  return images;
}

inline SynthConfig eval_synth_config(const ExperimentConfig& cfg) {
  SynthConfig sc;
  sc.verbs = cfg.eval_verbs;
  sc.objects = cfg.eval_objects;
  sc.frames_per_clip = cfg.frames_per_clip;
  sc.frame_size = cfg.encoder.frame_size;
  sc.max_actions_per_clip = cfg.max_actions_per_clip;
  return sc;
}

inline std::vector<ActionClass> eval_classes(const ExperimentConfig& cfg) {
  return synthetic_classes(cfg.eval_verbs, cfg.eval_objects);
}

struct BaseData {
  std::vector<ActionClass> classes;
  std::vector<VideoSample> clips;
};

/// Fine-tuning clips over the base classes, disjoint from evaluation.
inline BaseData base_data(const ExperimentConfig& cfg) {
  BaseData out;
  out.classes = base_action_classes(cfg.eval_verbs, cfg.eval_objects, cfg.base_verbs, cfg.base_objects);
  auto sc = eval_synth_config(cfg);
  sc.clips_per_class = cfg.base_clips_per_class;
  sc.seed = cfg.seed + 3;
  sc.id_prefix = "base";
  out.clips = generate_clips(out.classes, sc).samples;
  return out;
}

/// Evaluation train and test sets over the eval classes.
inline std::pair<SyntheticDataset, SyntheticDataset> eval_datasets(const ExperimentConfig& cfg) {
  auto sc = eval_synth_config(cfg);
  sc.clips_per_class = cfg.train_clips_per_class;
  sc.seed = cfg.seed + 5;
  sc.role = SplitRole::train;
  sc.id_prefix = "train";
  auto train = generate_synthetic_dataset(sc);
  sc.clips_per_class = cfg.test_clips_per_class;
  sc.seed = cfg.seed + 6;
  sc.role = SplitRole::test;
  sc.id_prefix = "test";
  return {std::move(train), generate_synthetic_dataset(sc)};
}

inline StageResult run_pretrain(const ExperimentConfig& cfg, const ClipModel& init, double* initial_loss = nullptr) {
  const auto images = pretrain_images(cfg);
  if (initial_loss) {
    const auto n = std::min(images.size(), cfg.pretrain.batch_size);
    *initial_loss = pretrain_batch_loss(init, std::span(images).first(n), cfg.pretrain.contrastive_scale).item();
  }
  TrainConfig pc = cfg.pretrain;
  pc.seed = cfg.seed + 2;
  return pretrain_contrastive(images, init, pc);
}

inline StageResult run_finetune(const ExperimentConfig& cfg, const ClipModel& original) {
  const auto base = base_data(cfg);
  TrainConfig fc = cfg.finetune;
  fc.seed = cfg.seed + 4;
  return finetune_temporal(original, base.clips, base.classes, eval_classes(cfg), fc);
}

/// Shared upstream artifacts: both encoders and the evaluation data.
struct PreparedModels {
  ClipModel original;
  ClipModel finetuned;
  ClipModel patched;
  TrainHistory pretrain_history;
  TrainHistory finetune_history;
  double pretrain_initial_loss = 0.0;
  std::vector<ActionClass> classes;
  SyntheticDataset train;
  SyntheticDataset test;
};

using ProgressFn = std::function<void(const std::string&)>;

inline PreparedModels prepare_models(const ExperimentConfig& cfg, const ProgressFn& progress = {}) {
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };
  PreparedModels out;
  say("pretrain");
  auto pre = run_pretrain(cfg, initial_model(cfg), &out.pretrain_initial_loss);
  out.original = std::move(pre.model);
  out.pretrain_history = std::move(pre.history);

  say("finetune");
  auto ft = run_finetune(cfg, out.original);
  out.finetuned = std::move(ft.model);
  out.finetune_history = std::move(ft.history);

  out.patched = out.original;
  out.patched.weights = interpolate_weights(out.original.weights, out.finetuned.weights, cfg.patch_ratio);

  out.classes = eval_classes(cfg);
  std::tie(out.train, out.test) = eval_datasets(cfg);
  return out;
}

struct SplitRun {
  SplitSpec split;
  PromptTrainResult prompts;
  ScoresFile scores;
  EvalReport dual;
  EvalReport baseline;
  std::string frozen_digest_before;
  std::string frozen_digest_after;
};

inline SplitRun run_split(const ExperimentConfig& cfg, const PreparedModels& m, SplitKind kind,
                          const ProgressFn& progress = {}) {
  SplitRun out;
  out.split = make_split(kind, m.classes, cfg.split_fraction, cfg.seed + 7);
  auto train = restrict_to_seen(m.train.samples, out.split, UnseenPolicy::strip_labels);
  if (progress) progress(std::string("prompts (") + to_string(kind) + "): " + std::to_string(train.size()) + " clips");
  TrainConfig tc = cfg.prompts;
  tc.seed = cfg.seed + 8;
  out.frozen_digest_before = weights_digest(m.patched.weights);
  out.prompts = train_prompts(m.patched, train, m.classes, out.split, tc, cfg.loss);
  out.frozen_digest_after = weights_digest(m.patched.weights);
  out.scores = score_dataset(m.patched, out.prompts.prompts, m.classes, m.test.samples, cfg.loss);
  out.dual = build_report(out.scores, Method::dual_prompt, m.classes, &out.split);
  out.baseline = build_report(out.scores, Method::threshold_baseline, m.classes, &out.split);
  return out;
}

}  // namespace dvclip
