// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dvclip/data.hpp"
#include "dvclip/random.hpp"

namespace dvclip {

enum class SplitKind { random, verb, object };

inline const char* to_string(SplitKind k) {
  switch (k) {
    case SplitKind::random: return "random";
    case SplitKind::verb: return "verb";
    case SplitKind::object: return "object";
  }
  return "?";
}

inline SplitKind parse_split_kind(const std::string& s) {
  if (s == "random") return SplitKind::random;
  if (s == "verb") return SplitKind::verb;
  if (s == "object") return SplitKind::object;
  throw std::invalid_argument("unknown split kind '" + s + "' (expected random, verb or object)");
}

/// Class-level partition into seen (training) and unseen (test) classes.
struct SplitSpec {
  SplitKind kind = SplitKind::random;
  std::uint64_t seed = 0;
  double fraction = 0.5;
  std::set<std::string> seen;
  std::set<std::string> unseen;
  /// Verbs or objects whose clusters were made unseen.
  std::vector<std::string> provenance;

  bool is_unseen(const std::string& id) const { return unseen.count(id) > 0; }
  bool operator==(const SplitSpec&) const = default;
};

/// Round half up, used for every class and cluster count.
inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

namespace detail {

inline void check_fraction(double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
}

// Picks round(fraction * clusters) clusters uniformly; their classes go unseen.
inline SplitSpec cluster_split(const std::vector<ActionClass>& classes, SplitKind kind, double fraction,
                               std::uint64_t seed) {
  check_fraction(fraction);
  std::map<std::string, std::vector<std::string>> clusters;
  for (const auto& c : classes) {
    if (kind == SplitKind::verb) {
      if (c.verb.empty()) throw std::invalid_argument("class '" + c.id + "' has no verb");
      clusters[c.verb].push_back(c.id);
    } else if (c.object) {
      clusters[*c.object].push_back(c.id);
    }
  }
  const char* what = kind == SplitKind::verb ? "verb" : "object";
  if (clusters.size() < 2) {
    throw std::invalid_argument(std::string("a ") + what + " split needs at least two distinct " + what + "s");
  }
  const auto k = round_half_up(fraction * static_cast<double>(clusters.size()));
  if (k == 0 || k >= clusters.size()) {
    throw std::invalid_argument("fraction " + std::to_string(fraction) + " leaves one side of the " + what +
                                " split empty");
  }
  std::vector<std::string> names;
  for (const auto& [name, _] : clusters) names.push_back(name);
  Rng rng(seed);
  SplitSpec s{kind, seed, fraction, {}, {}, {}};
  for (auto i : rng.sample(names.size(), k)) {
    s.provenance.push_back(names[i]);
    for (const auto& id : clusters[names[i]]) s.unseen.insert(id);
  }
  std::sort(s.provenance.begin(), s.provenance.end());
  for (const auto& c : classes) {
    if (!s.unseen.count(c.id)) s.seen.insert(c.id);
  }
  if (s.seen.empty()) throw std::invalid_argument("split leaves no seen classes");
  return s;
}

}  // namespace detail

/// Uniformly samples round(fraction * N) classes as unseen.
inline SplitSpec make_random_split(const std::vector<ActionClass>& classes, double fraction, std::uint64_t seed) {
  detail::check_fraction(fraction);
  if (classes.size() < 2) throw std::invalid_argument("a split needs at least two classes");
  const auto k = round_half_up(fraction * static_cast<double>(classes.size()));
  if (k == 0 || k >= classes.size()) {
    throw std::invalid_argument("fraction " + std::to_string(fraction) + " leaves one side of the split empty");
  }
  Rng rng(seed);
  SplitSpec s{SplitKind::random, seed, fraction, {}, {}, {}};
  for (auto i : rng.sample(classes.size(), k)) s.unseen.insert(classes[i].id);
  for (const auto& c : classes) {
    if (!s.unseen.count(c.id)) s.seen.insert(c.id);
  }
  return s;
}

/// Whole verb clusters become unseen.
inline SplitSpec make_verb_split(const std::vector<ActionClass>& classes, double fraction, std::uint64_t seed) {
  return detail::cluster_split(classes, SplitKind::verb, fraction, seed);
}

/// Whole object clusters become unseen; verb-only classes stay seen.
inline SplitSpec make_object_split(const std::vector<ActionClass>& classes, double fraction, std::uint64_t seed) {
  return detail::cluster_split(classes, SplitKind::object, fraction, seed);
}

inline SplitSpec make_split(SplitKind kind, const std::vector<ActionClass>& classes, double fraction,
                            std::uint64_t seed) {
  switch (kind) {
    case SplitKind::random: return make_random_split(classes, fraction, seed);
    case SplitKind::verb: return make_verb_split(classes, fraction, seed);
    case SplitKind::object: return make_object_split(classes, fraction, seed);
  }
  throw std::invalid_argument("unknown split kind");
}

/// Unseen-side statistics in the layout of the split-details table.
struct SplitStats {
  std::size_t unseen_verbs = 0;
  std::size_t total_verbs = 0;
  std::size_t unseen_objects = 0;
  std::size_t total_objects = 0;
  std::size_t unseen_classes = 0;

  double unseen_verb_pct() const { return total_verbs ? 100.0 * unseen_verbs / total_verbs : 0.0; }
  double unseen_object_pct() const { return total_objects ? 100.0 * unseen_objects / total_objects : 0.0; }
  bool operator==(const SplitStats&) const = default;
};

/// Counts test-class verbs and objects that never occur in a seen class.
inline SplitStats split_stats(const SplitSpec& split, const std::vector<ActionClass>& classes) {
  std::set<std::string> all_verbs, all_objects, seen_verbs, seen_objects, test_verbs, test_objects;
  for (const auto& c : classes) {
    all_verbs.insert(c.verb);
    if (c.object) all_objects.insert(*c.object);
    if (split.seen.count(c.id)) {
      seen_verbs.insert(c.verb);
      if (c.object) seen_objects.insert(*c.object);
    } else if (split.unseen.count(c.id)) {
      test_verbs.insert(c.verb);
      if (c.object) test_objects.insert(*c.object);
    }
  }
  SplitStats s;
  s.total_verbs = all_verbs.size();
  s.total_objects = all_objects.size();
  for (const auto& v : test_verbs) s.unseen_verbs += seen_verbs.count(v) ? 0 : 1;
  for (const auto& o : test_objects) s.unseen_objects += seen_objects.count(o) ? 0 : 1;
  s.unseen_classes = split.unseen.size();
  return s;
}

inline std::string format_split_stats_table(const std::vector<std::pair<std::string, SplitStats>>& rows) {
  std::ostringstream os;
  os << "split|unseen_verbs_pct|unseen_verbs|unseen_objects_pct|unseen_objects|unseen_classes\n";
  os.setf(std::ios::fixed);
  os.precision(1);
  for (const auto& [name, s] : rows) {
    os << name << '|' << s.unseen_verb_pct() << '|' << s.unseen_verbs << '/' << s.total_verbs << '|'
       << s.unseen_object_pct() << '|' << s.unseen_objects << '/' << s.total_objects << '|' << s.unseen_classes
       << '\n';
  }
  return os.str();
}

/// Compositional buckets of unseen classes: verb seen/unseen crossed with
/// object seen/unseen/not present.
enum class Bucket { vs_os, vs_ou, vu_os, vu_ou, vs_no, vu_no };

inline const char* to_string(Bucket b) {
  switch (b) {
    case Bucket::vs_os: return "VS-OS";
    case Bucket::vs_ou: return "VS-OU";
    case Bucket::vu_os: return "VU-OS";
    case Bucket::vu_ou: return "VU-OU";
    case Bucket::vs_no: return "VS-NO";
    case Bucket::vu_no: return "VU-NO";
  }
  return "?";
}

inline constexpr Bucket kAllBuckets[] = {Bucket::vs_os, Bucket::vs_ou, Bucket::vu_os,
                                         Bucket::vu_ou, Bucket::vs_no, Bucket::vu_no};

inline std::map<Bucket, std::vector<std::string>> subset_partition(const SplitSpec& split,
                                                                   const std::vector<ActionClass>& classes) {
  std::set<std::string> seen_verbs, seen_objects;
  for (const auto& c : classes) {
    if (split.seen.count(c.id)) {
      seen_verbs.insert(c.verb);
      if (c.object) seen_objects.insert(*c.object);
    }
  }
  std::map<Bucket, std::vector<std::string>> out;
  for (auto b : kAllBuckets) out[b];
  for (const auto& c : classes) {
    if (!split.unseen.count(c.id)) continue;
    const bool vs = seen_verbs.count(c.verb) > 0;
    Bucket b;
    if (!c.object) b = vs ? Bucket::vs_no : Bucket::vu_no;
    else if (seen_objects.count(*c.object)) b = vs ? Bucket::vs_os : Bucket::vu_os;
    else b = vs ? Bucket::vs_ou : Bucket::vu_ou;
    out[b].push_back(c.id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Split file (JSON)
// ---------------------------------------------------------------------------

inline nlohmann::json split_to_json(const SplitSpec& s) {
  return {{"format", "dvclip-split"}, {"version", 1},          {"kind", to_string(s.kind)},
          {"seed", s.seed},           {"fraction", s.fraction}, {"seen", s.seen},
          {"unseen", s.unseen},       {"provenance", s.provenance}};
}

inline SplitSpec split_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "dvclip-split") throw FormatError("not a dvclip split file");
  if (j.value("version", 0) != 1) throw FormatError("unsupported split file version");
  SplitSpec s;
  s.kind = parse_split_kind(j.at("kind").get<std::string>());
  s.seed = j.at("seed").get<std::uint64_t>();
  s.fraction = j.at("fraction").get<double>();
  s.seen = j.at("seen").get<std::set<std::string>>();
  s.unseen = j.at("unseen").get<std::set<std::string>>();
  s.provenance = j.at("provenance").get<std::vector<std::string>>();
  for (const auto& id : s.seen) {
    if (s.unseen.count(id)) throw FormatError("split file lists '" + id + "' as both seen and unseen");
  }
  return s;
}

inline void save_split(const SplitSpec& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << split_to_json(s).dump(2) << '\n';
}

inline SplitSpec load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  return split_from_json(j);
}

/// Checks that the split covers exactly the class map.
inline void check_split_covers(const SplitSpec& s, const std::vector<ActionClass>& classes) {
  std::set<std::string> ids;
  for (const auto& c : classes) ids.insert(c.id);
  for (const auto& id : s.seen)
    if (!ids.count(id)) throw std::invalid_argument("split names unknown class '" + id + "'");
  for (const auto& id : s.unseen)
    if (!ids.count(id)) throw std::invalid_argument("split names unknown class '" + id + "'");
  if (s.seen.size() + s.unseen.size() != ids.size()) throw std::invalid_argument("split does not cover the class map");
}

}  // namespace dvclip
