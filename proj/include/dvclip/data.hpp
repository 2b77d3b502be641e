// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvclip/binary_io.hpp"
#include "dvclip/encoders.hpp"

namespace dvclip {

/// One action class; verb-only classes carry no object.
struct ActionClass {
  std::string id;
  std::string name;
  std::string verb;
  std::optional<std::string> object;

  bool has_object() const { return object.has_value(); }
  bool operator==(const ActionClass&) const = default;
};

enum class SplitRole { train, test };

inline const char* to_string(SplitRole r) { return r == SplitRole::train ? "train" : "test"; }

inline SplitRole parse_split_role(const std::string& s) {
  if (s == "train") return SplitRole::train;
  if (s == "test") return SplitRole::test;
  throw FormatError("unknown split role '" + s + "'");
}

/// A clip with its multi-label target. Exactly one of pixel frames or
/// precomputed features is present.
struct VideoSample {
  std::string id;
  std::vector<Frame> frames;
  Tensor features;
  std::set<std::string> labels;
  SplitRole role = SplitRole::train;

  VideoInput input() const { return {frames, features}; }
};

// ---------------------------------------------------------------------------
// Delimited text records
//
// Fields are separated by a single character ('|' between fields, ';'
// between list items). A backslash makes the following character literal,
// so "\|" "\;" and "\\" embed the delimiters and the backslash itself.
// Every file starts with a "#dvclip-<kind> v<version>" header line; other
// lines starting with '#' and blank lines are ignored.
// ---------------------------------------------------------------------------

/// Splits on unescaped `delim`, leaving escape sequences in place.
inline std::vector<std::string> split_escaped(const std::string& line, char delim) {
  std::vector<std::string> out(1);
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\\' && i + 1 < line.size()) {
      out.back() += c;
      out.back() += line[++i];
    } else if (c == delim) {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

inline std::string unescape(const std::string& field) {
  std::string out;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (field[i] == '\\' && i + 1 < field.size()) ++i;
    out += field[i];
  }
  return out;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|' || c == ';' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Numbered content lines of a headed text file.
struct TextRecords {
  std::vector<std::pair<std::size_t, std::string>> lines;
};

inline TextRecords read_text_records(const std::filesystem::path& path, const std::string& kind, int version) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  const std::string header = "#dvclip-" + kind + " v" + std::to_string(version);
  TextRecords rec;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!saw_header) {
      if (trim(line).empty()) continue;
      if (trim(line) != header) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected header '" + header + "'");
      }
      saw_header = true;
      continue;
    }
    if (trim(line).empty() || line[0] == '#') continue;
    rec.lines.emplace_back(lineno, line);
  }
  if (!saw_header) throw FormatError(path.string() + ": missing header '" + header + "'");
  return rec;
}

inline double parse_double(const std::string& s, const std::string& context) {
  const auto t = trim(s);
  double v = 0.0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || p != t.data() + t.size()) {
    throw FormatError(context + ": '" + s + "' is not a number");
  }
  return v;
}

// ---------------------------------------------------------------------------
// Class map
// ---------------------------------------------------------------------------

struct ClassMapReport {
  std::size_t classes = 0;
  std::size_t verbs = 0;
  std::size_t objects = 0;
  std::size_t verb_object_classes = 0;
  std::size_t verb_only_classes = 0;
};

inline ClassMapReport validate_class_map(const std::vector<ActionClass>& classes) {
  std::set<std::string> ids, verbs, objects;
  ClassMapReport rep;
  for (const auto& c : classes) {
    if (c.id.empty()) throw FormatError("class with empty id");
    if (!ids.insert(c.id).second) throw FormatError("duplicate class id '" + c.id + "'");
    if (c.verb.empty()) throw FormatError("class '" + c.id + "' has no verb");
    verbs.insert(c.verb);
    if (c.object) {
      objects.insert(*c.object);
      ++rep.verb_object_classes;
    } else {
      ++rep.verb_only_classes;
    }
  }
  rep.classes = classes.size();
  rep.verbs = verbs.size();
  rep.objects = objects.size();
  return rep;
}

/// Parses "id|name|verb|object" records; the object field may be empty.
inline std::vector<ActionClass> load_class_map(const std::filesystem::path& path, ClassMapReport* report = nullptr) {
  auto rec = read_text_records(path, "classmap", 1);
  std::vector<ActionClass> out;
  std::set<std::string> ids;
  for (const auto& [lineno, line] : rec.lines) {
    const auto where = path.string() + ":" + std::to_string(lineno);
    auto f = split_escaped(line, '|');
    if (f.size() != 4) throw FormatError(where + ": expected 4 fields id|name|verb|object, got " + std::to_string(f.size()));
    ActionClass c{trim(unescape(f[0])), trim(unescape(f[1])), trim(unescape(f[2])), std::nullopt};
    const auto obj = trim(unescape(f[3]));
    if (!obj.empty()) c.object = obj;
    if (c.id.empty()) throw FormatError(where + ": empty class id");
    if (c.verb.empty()) throw FormatError(where + ": class '" + c.id + "' has no verb");
    if (c.name.empty()) throw FormatError(where + ": class '" + c.id + "' has no name");
    if (!ids.insert(c.id).second) throw FormatError(where + ": duplicate class id '" + c.id + "'");
    out.push_back(std::move(c));
  }
  auto rep = validate_class_map(out);
  if (report) *report = rep;
  return out;
}

inline void save_class_map(const std::vector<ActionClass>& classes, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "#dvclip-classmap v1\n# id|name|verb|object\n";
  for (const auto& c : classes) {
    out << escape(c.id) << '|' << escape(c.name) << '|' << escape(c.verb) << '|' << escape(c.object.value_or(""))
        << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

inline std::map<std::string, std::size_t> class_index(const std::vector<ActionClass>& classes) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < classes.size(); ++i) idx.emplace(classes[i].id, i);
  return idx;
}

// ---------------------------------------------------------------------------
// Charades-style annotations: "clip_id|class start end;class start end"
// ---------------------------------------------------------------------------

struct ActionInterval {
  std::string class_id;
  double start_sec = 0.0;
  double end_sec = 0.0;
};

struct AnnotatedClip {
  std::string id;
  std::set<std::string> labels;
  std::vector<ActionInterval> actions;
};

struct AnnotationFile {
  std::vector<AnnotatedClip> clips;
  std::vector<std::string> warnings;
};

inline AnnotationFile load_charades_annotations(const std::filesystem::path& path,
                                                const std::vector<ActionClass>& classes) {
  const auto known = class_index(classes);
  auto rec = read_text_records(path, "annotations", 1);
  AnnotationFile out;
  std::set<std::string> seen_ids;
  for (const auto& [lineno, line] : rec.lines) {
    const auto where = path.string() + ":" + std::to_string(lineno);
    auto f = split_escaped(line, '|');
    if (f.size() != 2) throw FormatError(where + ": expected 'clip_id|actions'");
    AnnotatedClip clip;
    clip.id = trim(unescape(f[0]));
    if (clip.id.empty()) throw FormatError(where + ": empty clip id");
    if (!seen_ids.insert(clip.id).second) throw FormatError(where + ": duplicate clip id '" + clip.id + "'");
    if (trim(f[1]).empty()) {
      out.warnings.push_back("clip " + clip.id + " has no actions");
      out.clips.push_back(std::move(clip));
      continue;
    }
    for (const auto& entry : split_escaped(f[1], ';')) {
      std::istringstream is(unescape(entry));
      std::vector<std::string> parts;
      std::string tok;
      while (is >> tok) parts.push_back(tok);
      if (parts.size() != 3) {
        throw FormatError(where + ": clip " + clip.id + ": action entry '" + trim(entry) +
                          "' must be 'class_id start_sec end_sec'");
      }
      if (!known.count(parts[0])) throw FormatError(where + ": clip " + clip.id + ": unknown class id '" + parts[0] + "'");
      ActionInterval a{parts[0], parse_double(parts[1], where + ": clip " + clip.id),
                       parse_double(parts[2], where + ": clip " + clip.id)};
      clip.labels.insert(a.class_id);
      clip.actions.push_back(std::move(a));
    }
    out.clips.push_back(std::move(clip));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset manifest: "clip_id|role|label;label"
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string id;
  SplitRole role = SplitRole::train;
  std::set<std::string> labels;
  bool operator==(const ManifestEntry&) const = default;
};

inline void save_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "#dvclip-manifest v1\n# clip_id|role|labels\n";
  for (const auto& e : entries) {
    out << escape(e.id) << '|' << to_string(e.role) << '|';
    bool first = true;
    for (const auto& l : e.labels) {
      if (!first) out << ';';
      out << escape(l);
      first = false;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

inline std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  auto rec = read_text_records(path, "manifest", 1);
  std::vector<ManifestEntry> out;
  for (const auto& [lineno, line] : rec.lines) {
    const auto where = path.string() + ":" + std::to_string(lineno);
    auto f = split_escaped(line, '|');
    if (f.size() != 3) throw FormatError(where + ": expected 'clip_id|role|labels'");
    ManifestEntry e;
    e.id = trim(unescape(f[0]));
    e.role = parse_split_role(trim(f[1]));
    if (!trim(f[2]).empty()) {
      for (const auto& l : split_escaped(f[2], ';')) e.labels.insert(trim(unescape(l)));
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<ManifestEntry> manifest_of(const std::vector<VideoSample>& samples) {
  std::vector<ManifestEntry> out;
  for (const auto& s : samples) out.push_back({s.id, s.role, s.labels});
  return out;
}

// ---------------------------------------------------------------------------
// Frame-feature container (binary):
//   "DVCLIPF\0" u32 version, u32 clip count,
//   per clip: length-prefixed id, u64 T, u64 d, T*d row-major f64
// ---------------------------------------------------------------------------

inline constexpr std::string_view kFeaturesMagic{"DVCLIPF\0", 8};

struct ClipFeatures {
  std::string id;
  Tensor features;  // [T, d]
};

inline void save_frame_features(const std::vector<ClipFeatures>& clips, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.magic(kFeaturesMagic, 1);
  w.u32(static_cast<std::uint32_t>(clips.size()));
  for (const auto& c : clips) {
    if (c.features.rank() != 2) throw ShapeError("clip '" + c.id + "': features must be [T, d]");
    w.str(c.id);
    w.u64(c.features.dim(0));
    w.u64(c.features.dim(1));
    w.doubles(c.features.values().data(), c.features.numel());
  }
  w.finish();
}

inline std::vector<ClipFeatures> load_frame_features(const std::filesystem::path& path) {
  BinaryReader r(path);
  const auto version = r.magic(kFeaturesMagic);
  if (version != 1) throw FormatError("'" + path.string() + "': unsupported feature container version");
  const auto n = r.u32();
  std::vector<ClipFeatures> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    ClipFeatures c;
    c.id = r.str();
    const auto t = r.u64();
    const auto d = r.u64();
    if (t == 0 || d == 0) throw FormatError("'" + path.string() + "': clip '" + c.id + "' declares an empty matrix");
    if (t * d > r.remaining() / sizeof(double)) {
      throw FormatError("'" + path.string() + "': clip '" + c.id + "' declares " + std::to_string(t) + "x" +
                        std::to_string(d) + " values but the file is shorter");
    }
    c.features = Tensor({t, d}, r.doubles(t * d));
    out.push_back(std::move(c));
  }
  if (!r.at_end()) throw FormatError("'" + path.string() + "': trailing bytes after the declared clips");
  return out;
}

}  // namespace dvclip
