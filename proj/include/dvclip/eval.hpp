// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvclip/data.hpp"
#include "dvclip/splits.hpp"

namespace dvclip {

/// Average precision: the mean, over positive videos, of precision at the
/// rank of that video. Scores are sorted descending with ties kept in
/// video order. Returns nullopt when there are no positives.
inline std::optional<double> average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("average_precision: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

/// Scores and binary labels laid out class x video.
struct ScoreMatrix {
  std::size_t classes = 0;
  std::size_t videos = 0;
  std::vector<double> scores;  // [class * videos + video]
  std::vector<int> labels;

  ScoreMatrix() = default;
  ScoreMatrix(std::size_t c, std::size_t v) : classes(c), videos(v), scores(c * v, 0.0), labels(c * v, 0) {}

  double& score(std::size_t c, std::size_t v) { return scores[c * videos + v]; }
  double score(std::size_t c, std::size_t v) const { return scores[c * videos + v]; }
  int& label(std::size_t c, std::size_t v) { return labels[c * videos + v]; }
  int label(std::size_t c, std::size_t v) const { return labels[c * videos + v]; }

  std::span<const double> class_scores(std::size_t c) const { return {scores.data() + c * videos, videos}; }
  std::span<const int> class_labels(std::size_t c) const { return {labels.data() + c * videos, videos}; }
};

struct MeanApResult {
  double value = 0.0;
  std::size_t classes_used = 0;
  std::size_t classes_skipped = 0;  // no positive video
  std::map<std::size_t, double> per_class;
};

/// Mean of per-class AP over `subset`, skipping classes without positives.
inline MeanApResult mean_ap(const ScoreMatrix& m, std::span<const std::size_t> subset) {
  if (m.scores.size() != m.classes * m.videos || m.labels.size() != m.scores.size()) {
    throw ShapeError("mean_ap: score and label matrices disagree in shape");
  }
  MeanApResult r;
  double total = 0.0;
  for (auto c : subset) {
    if (c >= m.classes) throw ShapeError("mean_ap: class index out of range");
    auto ap = average_precision(m.class_scores(c), m.class_labels(c));
    if (!ap) {
      ++r.classes_skipped;
      continue;
    }
    r.per_class[c] = *ap;
    total += *ap;
    ++r.classes_used;
  }
  if (r.classes_used == 0) throw std::invalid_argument("mean_ap: no class in the subset has a positive video");
  r.value = total / static_cast<double>(r.classes_used);
  return r;
}

inline MeanApResult mean_ap(const ScoreMatrix& m) {
  std::vector<std::size_t> all(m.classes);
  std::iota(all.begin(), all.end(), 0);
  return mean_ap(m, all);
}

/// Square counts over the classes of one cluster: entry (a, b) counts the
/// videos whose true labels include a and whose thresholded predictions
/// include b.
struct ConfusionMatrix {
  std::vector<std::size_t> classes;  // class indices of the cluster
  std::vector<std::size_t> counts;   // row-major, true x predicted

  std::size_t at(std::size_t a, std::size_t b) const { return counts[a * classes.size() + b]; }
  bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix binarize_and_confuse(const ScoreMatrix& probabilities, double threshold,
                                            std::span<const std::size_t> cluster) {
  if (cluster.empty()) throw std::invalid_argument("binarize_and_confuse: empty cluster");
  ConfusionMatrix cm{{cluster.begin(), cluster.end()}, std::vector<std::size_t>(cluster.size() * cluster.size(), 0)};
  for (std::size_t v = 0; v < probabilities.videos; ++v) {
    for (std::size_t a = 0; a < cluster.size(); ++a) {
      if (!probabilities.label(cluster[a], v)) continue;
      for (std::size_t b = 0; b < cluster.size(); ++b) {
        if (probabilities.score(cluster[b], v) > threshold) ++cm.counts[a * cluster.size() + b];
      }
    }
  }
  return cm;
}

/// Maps cosine similarities in [-1, 1] to [0, 1].
inline double rescale_similarity(double s) { return 0.5 * (s + 1.0); }

/// Per video, the classes whose rescaled similarity exceeds `threshold`.
inline std::vector<std::vector<std::size_t>> baseline_threshold_predict(const ScoreMatrix& similarities,
                                                                        double threshold = 0.5) {
  std::vector<std::vector<std::size_t>> out(similarities.videos);
  for (std::size_t v = 0; v < similarities.videos; ++v) {
    for (std::size_t c = 0; c < similarities.classes; ++c) {
      if (rescale_similarity(similarities.score(c, v)) > threshold) out[v].push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scores file: per video and class, the aggregated dual-prompt logits and
// the prompt-free similarity used by the threshold baseline.
//   #dvclip-scores v1
//   video|class|label|s_pos|s_neg|similarity
// ---------------------------------------------------------------------------

struct ScoreRow {
  std::string video;
  std::string class_id;
  int label = 0;
  double s_pos = 0.0;
  double s_neg = 0.0;
  double similarity = 0.0;
};

struct ScoresFile {
  std::vector<std::string> videos;
  std::vector<std::string> class_ids;
  ScoreMatrix labels_and_pos;
  std::vector<double> s_neg;       // class x video
  std::vector<double> similarity;  // class x video

  ScoresFile() = default;
  ScoresFile(std::vector<std::string> v, std::vector<std::string> c)
      : videos(std::move(v)), class_ids(std::move(c)), labels_and_pos(class_ids.size(), videos.size()),
        s_neg(class_ids.size() * videos.size(), 0.0), similarity(class_ids.size() * videos.size(), 0.0) {}

  std::size_t idx(std::size_t c, std::size_t v) const { return c * videos.size() + v; }
};

inline void save_scores(const ScoresFile& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "#dvclip-scores v1\n# video|class|label|s_pos|s_neg|similarity\n";
  out.precision(17);
  for (std::size_t v = 0; v < s.videos.size(); ++v) {
    for (std::size_t c = 0; c < s.class_ids.size(); ++c) {
      out << escape(s.videos[v]) << '|' << escape(s.class_ids[c]) << '|' << s.labels_and_pos.label(c, v) << '|'
          << s.labels_and_pos.score(c, v) << '|' << s.s_neg[s.idx(c, v)] << '|' << s.similarity[s.idx(c, v)] << '\n';
    }
  }
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

inline ScoresFile load_scores(const std::filesystem::path& path) {
  auto rec = read_text_records(path, "scores", 1);
  std::vector<ScoreRow> rows;
  std::vector<std::string> videos, classes;
  std::map<std::string, std::size_t> vi, ci;
  for (const auto& [lineno, line] : rec.lines) {
    const auto where = path.string() + ":" + std::to_string(lineno);
    auto f = split_escaped(line, '|');
    if (f.size() != 6) throw FormatError(where + ": expected 6 fields");
    ScoreRow r{unescape(f[0]), unescape(f[1]), 0, 0, 0, 0};
    const double lab = parse_double(f[2], where);
    if (lab != 0.0 && lab != 1.0) throw FormatError(where + ": label must be 0 or 1");
    r.label = static_cast<int>(lab);
    r.s_pos = parse_double(f[3], where);
    r.s_neg = parse_double(f[4], where);
    r.similarity = parse_double(f[5], where);
    if (vi.emplace(r.video, videos.size()).second) videos.push_back(r.video);
    if (ci.emplace(r.class_id, classes.size()).second) classes.push_back(r.class_id);
    rows.push_back(std::move(r));
  }
  ScoresFile s(videos, classes);
  if (rows.size() != videos.size() * classes.size()) throw FormatError(path.string() + ": incomplete score grid");
  std::vector<char> filled(rows.size(), 0);
  for (const auto& r : rows) {
    const auto c = ci[r.class_id], v = vi[r.video];
    if (filled[s.idx(c, v)]++) throw FormatError(path.string() + ": duplicate row for " + r.video + "/" + r.class_id);
    s.labels_and_pos.label(c, v) = r.label;
    s.labels_and_pos.score(c, v) = r.s_pos;
    s.s_neg[s.idx(c, v)] = r.s_neg;
    s.similarity[s.idx(c, v)] = r.similarity;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

enum class Method { dual_prompt, threshold_baseline };

inline const char* to_string(Method m) { return m == Method::dual_prompt ? "dual-prompt" : "threshold-baseline"; }

/// Ranking scores and thresholdable probabilities for one method.
struct MethodScores {
  ScoreMatrix ranking;       // used for AP
  ScoreMatrix probability;   // thresholded at 0.5 for predictions and confusion
};

inline MethodScores method_scores(const ScoresFile& s, Method method) {
  MethodScores out{ScoreMatrix(s.class_ids.size(), s.videos.size()), ScoreMatrix(s.class_ids.size(), s.videos.size())};
  out.ranking.labels = s.labels_and_pos.labels;
  out.probability.labels = s.labels_and_pos.labels;
  for (std::size_t i = 0; i < s.labels_and_pos.scores.size(); ++i) {
    // Rank on the unsaturated margin; probabilities only feed thresholds.
    if (method == Method::dual_prompt) {
      const double x = s.labels_and_pos.scores[i] - s.s_neg[i];
      out.ranking.scores[i] = x;
      out.probability.scores[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    } else {
      out.ranking.scores[i] = s.similarity[i];
      out.probability.scores[i] = rescale_similarity(s.similarity[i]);
    }
  }
  return out;
}

struct EvalReport {
  Method method = Method::dual_prompt;
  std::vector<std::string> class_ids;
  std::map<std::string, double> per_class_ap;
  double map_all = 0.0;       // GZSL: all classes
  std::optional<double> map_unseen;  // ZSL
  std::optional<double> map_seen;
  std::size_t skipped_classes = 0;
  std::map<std::string, std::optional<double>> bucket_map;
  std::map<std::string, std::size_t> bucket_size;
  std::vector<std::pair<std::string, ConfusionMatrix>> verb_confusion;
  std::vector<std::pair<std::string, ConfusionMatrix>> object_confusion;
  double prevalence_unseen = 0.0;  // mean positive rate of unseen classes
  double prevalence_all = 0.0;
};

namespace detail {

inline std::optional<double> subset_map(const ScoreMatrix& m, const std::vector<std::size_t>& subset) {
  if (subset.empty()) return std::nullopt;
  try {
    return mean_ap(m, subset).value;
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

inline double mean_prevalence(const ScoreMatrix& m, const std::vector<std::size_t>& subset) {
  double total = 0.0;
  std::size_t used = 0;
  for (auto c : subset) {
    auto lab = m.class_labels(c);
    const auto pos = std::count_if(lab.begin(), lab.end(), [](int x) { return x != 0; });
    if (pos == 0) continue;
    total += static_cast<double>(pos) / static_cast<double>(m.videos);
    ++used;
  }
  return used ? total / static_cast<double>(used) : 0.0;
}

}  // namespace detail

/// Builds the full report for one method from a scores file, a class map
/// and (optionally) the split that defines seen and unseen classes.
inline EvalReport build_report(const ScoresFile& s, Method method, const std::vector<ActionClass>& classes,
                               const SplitSpec* split) {
  const auto ms = method_scores(s, method);
  EvalReport r;
  r.method = method;
  r.class_ids = s.class_ids;
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < s.class_ids.size(); ++c) col[s.class_ids[c]] = c;

  auto all = mean_ap(ms.ranking);
  r.map_all = all.value;
  r.skipped_classes = all.classes_skipped;
  for (const auto& [c, ap] : all.per_class) r.per_class_ap[s.class_ids[c]] = ap;
  std::vector<std::size_t> every(s.class_ids.size());
  std::iota(every.begin(), every.end(), 0);
  r.prevalence_all = detail::mean_prevalence(ms.ranking, every);

  if (split) {
    std::vector<std::size_t> seen, unseen;
    for (std::size_t c = 0; c < s.class_ids.size(); ++c) {
      (split->is_unseen(s.class_ids[c]) ? unseen : seen).push_back(c);
    }
    r.map_seen = detail::subset_map(ms.ranking, seen);
    r.map_unseen = detail::subset_map(ms.ranking, unseen);
    r.prevalence_unseen = detail::mean_prevalence(ms.ranking, unseen);
    for (const auto& [bucket, ids] : subset_partition(*split, classes)) {
      std::vector<std::size_t> idx;
      for (const auto& id : ids) {
        if (col.count(id)) idx.push_back(col[id]);
      }
      r.bucket_size[to_string(bucket)] = ids.size();
      r.bucket_map[to_string(bucket)] = detail::subset_map(ms.ranking, idx);
    }
  }

  std::map<std::string, std::vector<std::size_t>> by_verb, by_object;
  for (const auto& c : classes) {
    if (!col.count(c.id)) continue;
    by_verb[c.verb].push_back(col[c.id]);
    if (c.object) by_object[*c.object].push_back(col[c.id]);
  }
  for (const auto& [verb, idx] : by_verb) r.verb_confusion.emplace_back(verb, binarize_and_confuse(ms.probability, 0.5, idx));
  for (const auto& [obj, idx] : by_object) r.object_confusion.emplace_back(obj, binarize_and_confuse(ms.probability, 0.5, idx));
  return r;
}

inline std::string format_value(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Delimited metrics table "section|id|metric|value" followed by the
/// confusion grids.
inline std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  const std::string m = to_string(r.method);
  os << "#dvclip-metrics v1\n";
  os << "section|id|metric|value\n";
  os << "summary|" << m << "|map_gzsl|" << format_value(r.map_all) << '\n';
  if (r.map_unseen) os << "summary|" << m << "|map_zsl|" << format_value(*r.map_unseen) << '\n';
  if (r.map_seen) os << "summary|" << m << "|map_seen|" << format_value(*r.map_seen) << '\n';
  os << "summary|" << m << "|skipped_classes|" << r.skipped_classes << '\n';
  os << "summary|" << m << "|prevalence_all|" << format_value(r.prevalence_all) << '\n';
  os << "summary|" << m << "|prevalence_unseen|" << format_value(r.prevalence_unseen) << '\n';
  for (const auto& [id, ap] : r.per_class_ap) os << "class|" << escape(id) << "|ap|" << format_value(ap) << '\n';
  for (const auto& [b, v] : r.bucket_map) {
    os << "bucket|" << b << "|classes|" << r.bucket_size.at(b) << '\n';
    if (v) os << "bucket|" << b << "|map|" << format_value(*v) << '\n';
  }
  auto grids = [&](const char* kind, const auto& list) {
    for (const auto& [name, cm] : list) {
      os << "#confusion " << kind << ' ' << name << '\n';
      os << "true\\pred";
      for (auto c : cm.classes) os << '|' << r.class_ids[c];
      os << '\n';
      for (std::size_t a = 0; a < cm.classes.size(); ++a) {
        os << r.class_ids[cm.classes[a]];
        for (std::size_t b = 0; b < cm.classes.size(); ++b) os << '|' << cm.at(a, b);
        os << '\n';
      }
    }
  };
  grids("verb", r.verb_confusion);
  grids("object", r.object_confusion);
  return os.str();
}

/// Method comparison rows: method | mAP ZSL | mAP on all classes.
inline std::string format_method_table(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "method|map_zsl|map_gzsl\n";
  for (const auto& r : reports) {
    os << to_string(r.method) << '|' << (r.map_unseen ? format_value(*r.map_unseen) : "-") << '|'
       << format_value(r.map_all) << '\n';
  }
  return os.str();
}

}  // namespace dvclip
