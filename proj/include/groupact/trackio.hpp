#pragma once

// Track files (`frame,person,x,y,w,h` CSV) and activity annotations
// (one JSON record per line).

#include <algorithm>
#include <array>
#include <charconv>
#include <limits>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "taxonomy.hpp"

namespace groupact {

/// Minimum bounding box of one person in one frame, in pixels.
struct MbbSample {
  Frame frame = 0;
  PersonId person = 0;
  double x = 0, y = 0, w = 0, h = 0;

  friend bool operator==(const MbbSample&, const MbbSample&) = default;
};

struct FrameInterval {
  Frame first = 0;
  Frame last = 0;

  bool contains(Frame t) const { return first <= t && t <= last; }
  friend bool operator==(const FrameInterval&, const FrameInterval&) = default;
};

/// Validated per-person tracks. Immutable after construction.
class TrackSet {
public:
  TrackSet() = default;

  // Throws DataError on duplicates or non-positive boxes.
  static TrackSet from_samples(std::vector<MbbSample> samples) {
    TrackSet ts;
    for (const auto& s : samples) {
      check_sample(s);
      ts.tracks_[s.person].push_back(s);
    }
    for (auto& [person, track] : ts.tracks_) {
      std::sort(track.begin(), track.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
      for (std::size_t k = 1; k < track.size(); ++k)
        if (track[k].frame == track[k - 1].frame)
          throw DataError("duplicate sample for frame " + std::to_string(track[k].frame) + ", person " +
                          std::to_string(person));
    }
    ts.count_ = samples.size();
    return ts;
  }

  static void check_sample(const MbbSample& s) {
    if (s.frame < 0) throw DataError("negative frame index " + std::to_string(s.frame));
    if (!(s.w > 0.0) || !(s.h > 0.0))
      throw DataError("non-positive box size for frame " + std::to_string(s.frame) + ", person " +
                      std::to_string(s.person));
    if (!std::isfinite(s.x) || !std::isfinite(s.y) || !std::isfinite(s.w) || !std::isfinite(s.h))
      throw DataError("non-finite coordinate for frame " + std::to_string(s.frame));
  }

  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  std::vector<PersonId> persons() const {
    std::vector<PersonId> out;
    for (const auto& [p, _] : tracks_) out.push_back(p);
    return out;
  }

  std::span<const MbbSample> track(PersonId p) const {
    auto it = tracks_.find(p);
    if (it == tracks_.end()) return {};
    return it->second;
  }

  const MbbSample* at(Frame t, PersonId p) const {
    auto tr = track(p);
    auto it = std::lower_bound(tr.begin(), tr.end(), t, [](const MbbSample& s, Frame f) { return s.frame < f; });
    return it != tr.end() && it->frame == t ? &*it : nullptr;
  }

  std::optional<FrameInterval> frame_range() const {
    if (empty()) return std::nullopt;
    FrameInterval r{std::numeric_limits<Frame>::max(), std::numeric_limits<Frame>::min()};
    for (const auto& [_, tr] : tracks_) {
      r.first = std::min(r.first, tr.front().frame);
      r.last = std::max(r.last, tr.back().frame);
    }
    return r;
  }

  // Missing-frame intervals inside a person's own [first, last] span.
  std::vector<FrameInterval> gaps(PersonId p) const {
    std::vector<FrameInterval> out;
    auto tr = track(p);
    for (std::size_t k = 1; k < tr.size(); ++k)
      if (tr[k].frame > tr[k - 1].frame + 1) out.push_back({tr[k - 1].frame + 1, tr[k].frame - 1});
    return out;
  }

  std::vector<MbbSample> samples() const {
    std::vector<MbbSample> out;
    out.reserve(count_);
    for (const auto& [_, tr] : tracks_) out.insert(out.end(), tr.begin(), tr.end());
    return out;
  }

  friend bool operator==(const TrackSet& a, const TrackSet& b) { return a.tracks_ == b.tracks_; }

private:
  std::map<PersonId, std::vector<MbbSample>> tracks_;
  std::size_t count_ = 0;
};

enum class ParseMode { Strict, Lenient };

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string at_line(std::size_t line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

} // namespace detail

/// Parses `frame,person,x,y,w,h` lines. `#` starts a comment line; blank lines
/// are skipped. Strict mode throws on the first problem; lenient mode drops
/// the offending line and records it in `issues`.
inline TrackSet parse_tracks(std::istream& in, ParseMode mode = ParseMode::Strict,
                             std::vector<ParseIssue>* issues = nullptr) {
  std::vector<MbbSample> samples;
  std::set<std::pair<Frame, PersonId>> seen;
  std::string raw;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) {
    if (mode == ParseMode::Strict) throw DataError(detail::at_line(lineno, msg));
    if (issues) issues->push_back({lineno, msg});
  };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (fields.size() != 6) {
      fail("expected 6 fields, got " + std::to_string(fields.size()));
      continue;
    }
    MbbSample s;
    if (!detail::parse_number(fields[0], s.frame) || !detail::parse_number(fields[1], s.person) ||
        !detail::parse_number(fields[2], s.x) || !detail::parse_number(fields[3], s.y) ||
        !detail::parse_number(fields[4], s.w) || !detail::parse_number(fields[5], s.h)) {
      fail("malformed numeric field");
      continue;
    }
    try {
      TrackSet::check_sample(s);
    } catch (const DataError& e) {
      fail(e.what());
      continue;
    }
    if (!seen.insert({s.frame, s.person}).second) {
      fail("duplicate sample for frame " + std::to_string(s.frame) + ", person " + std::to_string(s.person));
      continue;
    }
    samples.push_back(s);
  }
  return TrackSet::from_samples(std::move(samples));
}

inline TrackSet parse_tracks(std::string_view text, ParseMode mode = ParseMode::Strict,
                             std::vector<ParseIssue>* issues = nullptr) {
  std::istringstream in{std::string(text)};
  return parse_tracks(in, mode, issues);
}

inline void write_tracks(std::ostream& out, const TrackSet& tracks) {
  out << "# frame,person,x,y,w,h\n";
  auto samples = tracks.samples();
  std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) {
    return std::pair(a.frame, a.person) < std::pair(b.frame, b.person);
  });
  char buf[64];
  auto num = [&](double v) {
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  };
  for (const auto& s : samples)
    out << s.frame << ',' << s.person << ',' << num(s.x) << ',' << num(s.y) << ',' << num(s.w) << ','
        << num(s.h) << '\n';
}

// ---------------------------------------------------------------------------
// Annotations

enum class AnnotationLevel { Symmetric, Intergroup };

struct AnnotationRecord {
  AnnotationLevel level = AnnotationLevel::Symmetric;
  std::string label;
  FrameInterval frames;
  std::string group_id;               // symmetric records
  std::vector<PersonId> members;      // symmetric records, sorted
  std::array<std::string, 2> groups;  // intergroup records

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

struct TruthGroup {
  std::string id;
  std::vector<PersonId> members;
  std::string label;
};

struct TruthLink {
  std::size_t first = 0;  // indices into TruthFrame::groups
  std::size_t second = 0;
  std::string label;
};

struct TruthFrame {
  std::vector<TruthGroup> groups;
  std::vector<TruthLink> links;
};

class AnnotationSet {
public:
  AnnotationSet() = default;

  // Validates labels against the taxonomy, group references, and that
  // symmetric groups never share a person at the same frame.
  AnnotationSet(std::vector<AnnotationRecord> records, const Taxonomy& taxonomy) : records_(std::move(records)) {
    std::map<std::string, std::size_t> declared;
    for (std::size_t r = 0; r < records_.size(); ++r) {
      auto& rec = records_[r];
      const auto* info = taxonomy.find(rec.label);
      if (!info) throw DataError("record " + std::to_string(r + 1) + ": unknown activity label '" + rec.label + "'");
      if (rec.frames.first < 0 || rec.frames.first > rec.frames.last)
        throw DataError("record " + std::to_string(r + 1) + ": invalid frame interval");
      if (rec.level == AnnotationLevel::Symmetric) {
        if (!info->group_level())
          throw DataError("record " + std::to_string(r + 1) + ": '" + rec.label + "' is not a group activity");
        if (rec.group_id.empty()) throw DataError("record " + std::to_string(r + 1) + ": missing group_id");
        if (rec.members.empty()) throw DataError("record " + std::to_string(r + 1) + ": empty member set");
        std::sort(rec.members.begin(), rec.members.end());
        if (std::adjacent_find(rec.members.begin(), rec.members.end()) != rec.members.end())
          throw DataError("record " + std::to_string(r + 1) + ": repeated member");
        if (rec.label == kSingle && rec.members.size() != 1)
          throw DataError("record " + std::to_string(r + 1) + ": 'single' groups have exactly one member");
        if (!declared.emplace(rec.group_id, r).second)
          throw DataError("record " + std::to_string(r + 1) + ": duplicate group_id '" + rec.group_id + "'");
      } else {
        if (!info->intergroup())
          throw DataError("record " + std::to_string(r + 1) + ": '" + rec.label + "' is not an inter-group activity");
        for (const auto& g : rec.groups)
          if (!declared.contains(g))
            throw DataError("record " + std::to_string(r + 1) + ": undeclared group '" + g + "'");
        if (rec.groups[0] == rec.groups[1])
          throw DataError("record " + std::to_string(r + 1) + ": a group cannot interact with itself");
      }
    }
    for (std::size_t a = 0; a < records_.size(); ++a) {
      const auto& ra = records_[a];
      if (ra.level != AnnotationLevel::Symmetric) continue;
      for (std::size_t b = a + 1; b < records_.size(); ++b) {
        const auto& rb = records_[b];
        if (rb.level != AnnotationLevel::Symmetric) continue;
        if (rb.frames.first > ra.frames.last || ra.frames.first > rb.frames.last) continue;
        std::vector<PersonId> common;
        std::set_intersection(ra.members.begin(), ra.members.end(), rb.members.begin(), rb.members.end(),
                              std::back_inserter(common));
        if (!common.empty())
          throw DataError("person " + std::to_string(common.front()) + " is in groups '" + ra.group_id + "' and '" +
                          rb.group_id + "' at the same time");
      }
    }
  }

  const std::vector<AnnotationRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  std::optional<FrameInterval> frame_range() const {
    if (records_.empty()) return std::nullopt;
    FrameInterval r{std::numeric_limits<Frame>::max(), std::numeric_limits<Frame>::min()};
    for (const auto& rec : records_) {
      r.first = std::min(r.first, rec.frames.first);
      r.last = std::max(r.last, rec.frames.last);
    }
    return r;
  }

  const AnnotationRecord* group(std::string_view id) const {
    for (const auto& r : records_)
      if (r.level == AnnotationLevel::Symmetric && r.group_id == id) return &r;
    return nullptr;
  }

  // Frames covered by at least one symmetric record.
  bool annotated(Frame t) const {
    return std::any_of(records_.begin(), records_.end(), [t](const AnnotationRecord& r) {
      return r.level == AnnotationLevel::Symmetric && r.frames.contains(t);
    });
  }

  TruthFrame at(Frame t) const {
    TruthFrame tf;
    std::map<std::string, std::size_t> index;
    for (const auto& r : records_)
      if (r.level == AnnotationLevel::Symmetric && r.frames.contains(t)) {
        index[r.group_id] = tf.groups.size();
        tf.groups.push_back({r.group_id, r.members, r.label});
      }
    for (const auto& r : records_) {
      if (r.level != AnnotationLevel::Intergroup || !r.frames.contains(t)) continue;
      auto a = index.find(r.groups[0]);
      auto b = index.find(r.groups[1]);
      if (a == index.end() || b == index.end()) continue;
      tf.links.push_back({a->second, b->second, r.label});
    }
    return tf;
  }

private:
  std::vector<AnnotationRecord> records_;
};

inline AnnotationRecord annotation_from_json(const nlohmann::json& j) {
  AnnotationRecord rec;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "sym")
    rec.level = AnnotationLevel::Symmetric;
  else if (kind == "asym")
    rec.level = AnnotationLevel::Intergroup;
  else
    throw DataError("unknown record kind '" + kind + "'");
  rec.label = j.at("label").get<std::string>();
  const auto& frames = j.at("frames");
  if (!frames.is_array() || frames.size() != 2) throw DataError("'frames' must be [first, last]");
  rec.frames = {frames[0].get<Frame>(), frames[1].get<Frame>()};
  if (rec.level == AnnotationLevel::Symmetric) {
    rec.group_id = j.at("group_id").get<std::string>();
    rec.members = j.at("members").get<std::vector<PersonId>>();
  } else {
    const auto& g = j.at("groups");
    if (!g.is_array() || g.size() != 2) throw DataError("asymmetric records reference exactly two groups");
    rec.groups = {g[0].get<std::string>(), g[1].get<std::string>()};
  }
  return rec;
}

inline nlohmann::json annotation_to_json(const AnnotationRecord& rec) {
  nlohmann::json j;
  j["kind"] = rec.level == AnnotationLevel::Symmetric ? "sym" : "asym";
  j["label"] = rec.label;
  j["frames"] = {rec.frames.first, rec.frames.last};
  if (rec.level == AnnotationLevel::Symmetric) {
    j["group_id"] = rec.group_id;
    j["members"] = rec.members;
  } else {
    j["groups"] = {rec.groups[0], rec.groups[1]};
  }
  return j;
}

inline AnnotationSet parse_annotations(std::istream& in, const Taxonomy& taxonomy = Taxonomy::standard()) {
  std::vector<AnnotationRecord> records;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto line = detail::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    try {
      records.push_back(annotation_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(detail::at_line(lineno, e.what()));
    } catch (const DataError& e) {
      throw DataError(detail::at_line(lineno, e.what()));
    }
  }
  return AnnotationSet(std::move(records), taxonomy);
}

inline AnnotationSet parse_annotations(std::string_view text, const Taxonomy& taxonomy = Taxonomy::standard()) {
  std::istringstream in{std::string(text)};
  return parse_annotations(in, taxonomy);
}

inline void write_annotations(std::ostream& out, const AnnotationSet& set) {
  for (const auto& r : set.records()) out << annotation_to_json(r).dump() << '\n';
}

} // namespace groupact
