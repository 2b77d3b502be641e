// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line front end. Every subcommand reads a resolved RunConfig,
// works inside one run directory and writes its artifacts there:
//
//   <run>/resolved-<command>.cfg   the exact configuration used
//   <run>/checkpoints/             orig.ckpt ft.ckpt patched.ckpt prompts-<kind>.ckpt
//   <run>/splits/                  <kind>.json
//   <run>/metrics/                 split/eval/report tables
//   <run>/logs/                    training histories
//   <run>/data/                    synthetic dataset (synth-data)
//
// The run directory is --run-dir, else $DVCLIP_RUN_ROOT/default, else
// ./runs/default.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <sstream>
#include <string>
#include <vector>

#include "dvclip/checkpoint.hpp"
#include "dvclip/config.hpp"
#include "dvclip/data.hpp"
#include "dvclip/eval.hpp"
#include "dvclip/pipeline.hpp"
#include "dvclip/splits.hpp"
#include "dvclip/train.hpp"

namespace dvclip {

namespace fs = std::filesystem;

/// A missing input file. The message names the path.
class MissingInput : public std::runtime_error {
 public:
  explicit MissingInput(const fs::path& p) : std::runtime_error("missing input file '" + p.string() + "'") {}
};

/// Evaluation data read back from a dataset directory.
struct DataDir {
  std::vector<ActionClass> classes;
  std::vector<VideoSample> train;
  std::vector<VideoSample> test;
};

inline void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw MissingInput(p);
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + p.string() + "' failed");
}

inline std::string read_text(const fs::path& p) {
  require_file(p);
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes synth.cfg, classes.txt and manifest.txt. The pixels are not
/// stored; they are regenerated from synth.cfg on load.
inline DataDir write_synthetic_data_dir(const RunConfig& cfg, const fs::path& dir) {
  const auto e = experiment_config(cfg);
  auto [train, test] = eval_datasets(e);
  fs::create_directories(dir);
  write_text(dir / "synth.cfg", resolved_config_text(cfg));
  save_class_map(train.classes, dir / "classes.txt");
  auto manifest = manifest_of(train.samples);
  for (auto& m : manifest_of(test.samples)) manifest.push_back(std::move(m));
  save_manifest(manifest, dir / "manifest.txt");
  return {train.classes, std::move(train.samples), std::move(test.samples)};
}

/// Loads a dataset directory: either a synthetic one (synth.cfg) or one
/// with precomputed features (features.bin). The manifest is checked
/// against what was regenerated or loaded.
inline DataDir load_data_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingInput(dir);
  require_file(dir / "classes.txt");
  require_file(dir / "manifest.txt");
  DataDir out;
  out.classes = load_class_map(dir / "classes.txt");
  const auto manifest = load_manifest(dir / "manifest.txt");
  std::vector<VideoSample> all;
  if (fs::exists(dir / "synth.cfg")) {
    RunConfig c;
    apply_config_text(c, read_text(dir / "synth.cfg"), (dir / "synth.cfg").string());
    validate(c);
    auto [train, test] = eval_datasets(experiment_config(c));
    all = std::move(train.samples);
    for (auto& s : test.samples) all.push_back(std::move(s));
    if (manifest_of(all) != manifest) {
      throw FormatError("'" + (dir / "manifest.txt").string() + "' does not match the clips regenerated from synth.cfg");
    }
  } else {
    require_file(dir / "features.bin");
    std::map<std::string, Tensor> feats;
    for (auto& f : load_frame_features(dir / "features.bin")) feats[f.id] = std::move(f.features);
    for (const auto& m : manifest) {
      auto it = feats.find(m.id);
      if (it == feats.end()) throw FormatError("clip '" + m.id + "' has no features in features.bin");
      VideoSample s;
      s.id = m.id;
      s.features = it->second;
      s.labels = m.labels;
      s.role = m.role;
      all.push_back(std::move(s));
    }
  }
  for (auto& s : all) (s.role == SplitRole::train ? out.train : out.test).push_back(std::move(s));
  return out;
}

/// Parses a metrics file written by format_report into
/// (section, id, metric) -> value; confusion grids are skipped.
inline std::map<std::tuple<std::string, std::string, std::string>, double> load_metrics(const fs::path& p) {
  std::map<std::tuple<std::string, std::string, std::string>, double> out;
  std::istringstream in(read_text(p));
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind("#confusion", 0) == 0) break;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    auto f = split_escaped(line, '|');
    if (f.size() != 4) throw FormatError(p.string() + ": malformed metrics line '" + line + "'");
    out[{unescape(f[0]), unescape(f[1]), unescape(f[2])}] = parse_double(f[3], p.string());
  }
  return out;
}

/// Table-I/III/IV-shaped delimited tables from the eval metrics in `metrics`.
inline std::string render_report(const fs::path& metrics) {
  std::ostringstream os;
  std::vector<std::string> split_tables;
  std::map<std::string, std::map<std::string, std::map<std::tuple<std::string, std::string, std::string>, double>>> evals;
  if (!fs::is_directory(metrics)) throw MissingInput(metrics);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(metrics)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const auto name = p.filename().string();
    if (name.rfind("split-", 0) == 0) split_tables.push_back(read_text(p));
    for (const char* method : {"dual-prompt", "threshold-baseline"}) {
      const std::string suffix = std::string("-") + method + ".txt";
      if (name.rfind("eval-", 0) == 0 && name.size() > suffix.size() + 5 &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
        evals[name.substr(5, name.size() - 5 - suffix.size())][method] = load_metrics(p);
      }
    }
  }
  auto get = [](const auto& m, const std::string& a, const std::string& b, const std::string& c) -> std::string {
    auto it = m.find({a, b, c});
    return it == m.end() ? "-" : format_value(it->second);
  };
  os << "## split statistics\n";
  for (const auto& t : split_tables) os << t;
  os << "\n## methods (split|method|map_zsl|map_gzsl|map_seen)\n";
  for (const auto& [kind, methods] : evals) {
    for (const auto& [method, m] : methods) {
      os << kind << '|' << method << '|' << get(m, "summary", method, "map_zsl") << '|'
         << get(m, "summary", method, "map_gzsl") << '|' << get(m, "summary", method, "map_seen") << '\n';
    }
  }
  os << "\n## subsets (split|method|bucket|classes|map)\n";
  for (const auto& [kind, methods] : evals) {
    for (const auto& [method, m] : methods) {
      for (auto b : kAllBuckets) {
        os << kind << '|' << method << '|' << to_string(b) << '|' << get(m, "bucket", to_string(b), "classes") << '|'
           << get(m, "bucket", to_string(b), "map") << '\n';
      }
    }
  }
  os << "\n## split protocols (split|map_zsl|map_gzsl)\n";
  for (const auto& [kind, methods] : evals) {
    auto it = methods.find("dual-prompt");
    if (it == methods.end()) continue;
    os << kind << '|' << get(it->second, "summary", "dual-prompt", "map_zsl") << '|'
       << get(it->second, "summary", "dual-prompt", "map_gzsl") << '\n';
  }
  return os.str();
}

namespace detail {

struct CliContext {
  RunConfig cfg;
  fs::path run;
  std::ostream& out;

  fs::path path(const std::string& key, const fs::path& fallback) const {
    auto it = cfg.paths.find(key);
    return it == cfg.paths.end() || it->second.empty() ? fallback : fs::path(it->second);
  }
  std::string kind() const { return to_string(cfg.split_kind); }
};

inline void cmd_synth_data(CliContext& c) {
  const auto dir = c.path("out", c.run / "data");
  auto d = write_synthetic_data_dir(c.cfg, dir);
  c.out << "wrote " << d.train.size() << " train and " << d.test.size() << " test clips over " << d.classes.size()
        << " classes to " << dir.string() << '\n';
}

inline void cmd_pretrain(CliContext& c) {
  const auto e = experiment_config(c.cfg);
  double initial = 0.0;
  auto r = run_pretrain(e, initial_model(e), &initial);
  const auto out = c.path("out", c.run / "checkpoints" / "orig.ckpt");
  fs::create_directories(out.parent_path());
  save_model(r.model, out);
  save_history(r.history, c.run / "logs" / "pretrain.history");
  const auto losses = r.history.epoch_losses();
  c.out << "pretrain: initial loss " << format_value(initial) << ", final epoch loss "
        << (losses.empty() ? std::string("-") : format_value(losses.back())) << ", wrote " << out.string() << '\n';
}

inline void cmd_finetune(CliContext& c) {
  const auto in = c.path("weights", c.run / "checkpoints" / "orig.ckpt");
  require_file(in);
  auto e = experiment_config(c.cfg);
  const auto orig = load_model(in);
  e.encoder = orig.config;
  e.encoder.temporal_window = c.cfg.encoder.temporal_window;
  auto r = run_finetune(e, orig);
  const auto out = c.path("out", c.run / "checkpoints" / "ft.ckpt");
  fs::create_directories(out.parent_path());
  save_model(r.model, out);
  save_history(r.history, c.run / "logs" / "finetune.history");
  const auto losses = r.history.epoch_losses();
  c.out << "finetune: epoch loss " << format_value(losses.front()) << " -> " << format_value(losses.back())
        << ", wrote " << out.string() << '\n';
}

inline void cmd_patch(CliContext& c) {
  const auto a = c.path("orig", c.run / "checkpoints" / "orig.ckpt");
  const auto b = c.path("ft", c.run / "checkpoints" / "ft.ckpt");
  require_file(a);
  require_file(b);
  auto orig = load_model(a);
  const auto ft = load_model(b);
  if (orig.vocab.words() != ft.vocab.words()) throw std::invalid_argument("patch: checkpoints have different vocabularies");
  orig.weights = interpolate_weights(orig.weights, ft.weights, c.cfg.patch_ratio);
  orig.config.temporal_window = ft.config.temporal_window;
  const auto out = c.path("out", c.run / "checkpoints" / "patched.ckpt");
  fs::create_directories(out.parent_path());
  save_model(orig, out);
  c.out << "patch: ratio " << format_value(c.cfg.patch_ratio) << ", wrote " << out.string() << '\n';
}

inline std::vector<ActionClass> split_classes(const CliContext& c) {
  if (auto it = c.cfg.paths.find("class_map"); it != c.cfg.paths.end() && !it->second.empty()) {
    require_file(it->second);
    return load_class_map(it->second);
  }
  if (auto it = c.cfg.paths.find("data"); it != c.cfg.paths.end() && !it->second.empty()) {
    require_file(fs::path(it->second) / "classes.txt");
    return load_class_map(fs::path(it->second) / "classes.txt");
  }
  return eval_classes(experiment_config(c.cfg));
}

inline void cmd_split(CliContext& c) {
  const auto classes = split_classes(c);
  const auto split = make_split(c.cfg.split_kind, classes, c.cfg.split_fraction, c.cfg.seed);
  const auto out = c.path("out", c.run / "splits" / (c.kind() + ".json"));
  fs::create_directories(out.parent_path());
  save_split(split, out);
  const auto table = format_split_stats_table({{c.kind(), split_stats(split, classes)}});
  write_text(c.run / "metrics" / ("split-" + c.kind() + ".txt"), table);
  c.out << table;
}

inline void cmd_train_prompts(CliContext& c) {
  const auto wpath = c.path("weights", c.run / "checkpoints" / "patched.ckpt");
  const auto spath = c.path("split", c.run / "splits" / (c.kind() + ".json"));
  const auto dpath = c.path("data", c.run / "data");
  require_file(wpath);
  require_file(spath);
  const auto model = load_model(wpath);
  const auto split = load_split(spath);
  const auto data = load_data_dir(dpath);
  check_split_covers(split, data.classes);
  auto tc = experiment_config(c.cfg).prompts;
  const auto before = weights_digest(model.weights);
  auto r = train_prompts(model, restrict_to_seen(data.train, split, UnseenPolicy::strip_labels), data.classes, split,
                         tc, c.cfg.loss);
  const auto after = weights_digest(model.weights);
  if (before != after) throw std::logic_error("train-prompts: frozen weights changed");
  const auto kind = to_string(split.kind);
  const auto out = c.path("out", c.run / "checkpoints" / ("prompts-" + std::string(kind) + ".ckpt"));
  fs::create_directories(out.parent_path());
  save_prompts(r.prompts, model.config.embed_dim, c.cfg.loss, out);
  save_history(r.history, c.run / "logs" / ("prompts-" + std::string(kind) + ".history"));
  write_text(c.run / "metrics" / ("frozen-" + std::string(kind) + ".txt"),
             "frozen_digest_before|" + before + "\nfrozen_digest_after|" + after + "\ntrainable_parameters|" +
                 std::to_string(r.prompts.trainable_count()) + "\n");
  c.out << "train-prompts: " << r.prompts.trainable_count() << " trainable parameters, frozen digest " << after
        << ", wrote " << out.string() << '\n';
}

inline void cmd_eval(CliContext& c) {
  const auto spath = c.path("split", c.run / "splits" / (c.kind() + ".json"));
  require_file(spath);
  const auto split = load_split(spath);
  const std::string kind = to_string(split.kind);
  const auto wpath = c.path("weights", c.run / "checkpoints" / "patched.ckpt");
  const auto ppath = c.path("prompts", c.run / "checkpoints" / ("prompts-" + kind + ".ckpt"));
  const auto dpath = c.path("data", c.run / "data");
  require_file(wpath);
  require_file(ppath);
  const auto model = load_model(wpath);
  const auto pc = load_prompts(ppath);
  const auto data = load_data_dir(dpath);
  check_split_covers(split, data.classes);
  const auto scores = score_dataset(model, pc.prompts, data.classes, data.test, pc.loss);
  const auto dir = c.run / "metrics";
  fs::create_directories(dir);
  save_scores(scores, c.path("scores", dir / ("scores-" + kind + ".txt")));
  std::vector<EvalReport> reports;
  for (auto method : {Method::dual_prompt, Method::threshold_baseline}) {
    reports.push_back(build_report(scores, method, data.classes, &split));
    write_text(dir / ("eval-" + kind + "-" + to_string(method) + ".txt"), format_report(reports.back()));
  }
  c.out << format_method_table(reports);
}

inline void cmd_report(CliContext& c) {
  const auto text = render_report(c.run / "metrics");
  write_text(c.path("out", c.run / "metrics" / "report.txt"), text);
  c.out << text;
}

inline void cmd_import_charades(CliContext& c) {
  const auto cm = c.path("class_map", {});
  const auto an = c.path("annotations", {});
  if (cm.empty()) throw std::invalid_argument("import-charades needs --class-map");
  require_file(cm);
  ClassMapReport rep;
  const auto classes = load_class_map(cm, &rep);
  const auto dir = c.path("out", c.run / "charades");
  fs::create_directories(dir);
  save_class_map(classes, dir / "classes.txt");
  std::ostringstream os;
  os << "classes|" << rep.classes << "\nverbs|" << rep.verbs << "\nobjects|" << rep.objects << "\nverb_object_classes|"
     << rep.verb_object_classes << "\nverb_only_classes|" << rep.verb_only_classes << '\n';
  if (!an.empty()) {
    require_file(an);
    const auto ann = load_charades_annotations(an, classes);
    std::vector<ManifestEntry> manifest;
    for (const auto& clip : ann.clips) manifest.push_back({clip.id, c.cfg.synth.role, clip.labels});
    save_manifest(manifest, dir / "manifest.txt");
    os << "clips|" << ann.clips.size() << "\nwarnings|" << ann.warnings.size() << '\n';
    for (const auto& w : ann.warnings) os << "warning|" << w << '\n';
  }
  write_text(c.run / "metrics" / "import.txt", os.str());
  c.out << os.str();
}

}  // namespace detail

inline fs::path default_run_dir() {
  const char* root = std::getenv("DVCLIP_RUN_ROOT");
  return fs::path(root && *root ? root : "runs") / "default";
}

/// Parses argv, runs one subcommand and returns the exit status. Errors
/// go to `err` with a nonzero status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Dual-prompt zero-shot multi-label video recognition pipeline", "dvclip"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  using Handler = void (*)(detail::CliContext&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"synth-data", "Generate the synthetic dataset directory", detail::cmd_synth_data},
      {"pretrain", "Contrastive pretraining from random weights", detail::cmd_pretrain},
      {"finetune", "Temporal fine-tuning of the video encoder", detail::cmd_finetune},
      {"patch", "Interpolate original and fine-tuned weights", detail::cmd_patch},
      {"split", "Build a seen/unseen class split", detail::cmd_split},
      {"train-prompts", "Train the dual prompts with all weights frozen", detail::cmd_train_prompts},
      {"eval", "Score the test clips and write evaluation reports", detail::cmd_eval},
      {"report", "Render summary tables from stored metrics", detail::cmd_report},
      {"import-charades", "Validate a class map and convert annotations", detail::cmd_import_charades},
  };

  struct Parsed {
    std::string config_file;
    std::string run_dir;
    std::vector<std::pair<std::string, std::string>> overrides;
  };
  Parsed parsed;
  Handler chosen = nullptr;
  // Each config key (and alias) becomes --key and --key-with-dashes.
  for (const auto& [name, help, handler] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", parsed.config_file, "key=value configuration file");
    sub->add_option("--run-dir", parsed.run_dir, "run directory");
    for (const auto& key : config_keys()) {
      std::vector<std::string> names{key.name};
      names.insert(names.end(), key.aliases.begin(), key.aliases.end());
      std::string flags;
      std::set<std::string> used;
      for (auto n : names) {
        std::replace(n.begin(), n.end(), '_', '-');
        if (!used.insert(n).second) continue;
        flags += (flags.empty() ? "" : ",") + std::string(n.size() == 1 ? "-" : "--") + n;
      }
      const std::string canonical = key.name;
      sub->add_option_function<std::string>(
             flags, [&parsed, canonical](const std::string& v) { parsed.overrides.emplace_back(canonical, v); },
             key.help)
          ->type_name("VALUE");
    }
    sub->callback([&chosen, h = handler] { chosen = h; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  if (!chosen) return 2;

  try {
    if (!parsed.config_file.empty()) require_file(parsed.config_file);
    const auto cfg = load_config(parsed.config_file, parsed.overrides);
    const fs::path run = parsed.run_dir.empty() ? default_run_dir() : fs::path(parsed.run_dir);
    for (const char* sub : {"checkpoints", "splits", "metrics", "logs"}) fs::create_directories(run / sub);
    const auto* sc = app.get_subcommands().front();
    write_text(run / ("resolved-" + sc->get_name() + ".cfg"), resolved_config_text(cfg));
    detail::CliContext ctx{cfg, run, out};
    chosen(ctx);
  } catch (const std::exception& e) {
    err << "dvclip: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace dvclip
