#pragma once

// Frame-level error rates of detections against annotated ground truth.

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "grad.hpp"
#include "trackio.hpp"

namespace groupact {

struct Ratio {
  std::size_t numerator = 0;
  std::size_t denominator = 0;

  std::optional<double> value() const {
    if (denominator == 0) return std::nullopt;
    return static_cast<double>(numerator) / static_cast<double>(denominator);
  }
};

struct ActivityRates {
  Ratio miss;  // positive frames without a detection of the activity
  Ratio fa;    // negative frames with a detection of the activity
};

struct EvalReport {
  std::size_t frames = 0;
  Ratio tfer;  // frames with a wrong symmetric or inter-group label
  Ratio gcer;  // frames with a mis-clustered person
  Ratio eder;  // frames with either
  std::map<std::string, ActivityRates> activities;
  std::vector<Frame> error_frames;
};

/// People of the truth partition whose predicted group differs (as a member
/// set) from their true group. People missing from the prediction count as
/// mis-clustered.
inline std::set<PersonId> partition_match(std::span<const std::vector<PersonId>> predicted,
                                          std::span<const std::vector<PersonId>> truth) {
  std::map<PersonId, const std::vector<PersonId>*> where;
  for (const auto& g : predicted)
    for (PersonId p : g) where[p] = &g;
  std::set<PersonId> out;
  for (const auto& g : truth)
    for (PersonId p : g) {
      auto it = where.find(p);
      if (it == where.end() || *it->second != g) out.insert(p);
    }
  return out;
}

namespace detail {

struct FrameVerdict {
  bool clustering = false;
  bool label = false;
};

inline FrameVerdict judge(const FrameDetection* det, const TruthFrame& tf) {
  FrameVerdict v;
  if (!det) return {true, true};
  std::vector<std::vector<PersonId>> pred, truth;
  for (const auto& g : det->groups) pred.push_back(g.members);
  for (const auto& g : tf.groups) truth.push_back(g.members);
  v.clustering = !partition_match(pred, truth).empty();

  std::map<PersonId, std::size_t> group_of;
  for (std::size_t g = 0; g < det->groups.size(); ++g)
    for (PersonId p : det->groups[g].members) group_of[p] = g;
  for (const auto& g : tf.groups)
    for (PersonId p : g.members) {
      auto it = group_of.find(p);
      if (it == group_of.end() || det->groups[it->second].label != g.label) v.label = true;
    }
  std::map<std::pair<std::size_t, std::size_t>, std::string> link;
  for (const auto& l : det->links) {
    std::size_t a = 0, b = 0;
    for (std::size_t g = 0; g < det->groups.size(); ++g) {
      if (det->groups[g].id == l.first) a = g;
      if (det->groups[g].id == l.second) b = g;
    }
    link[{std::min(a, b), std::max(a, b)}] = l.label;
  }
  for (const auto& l : tf.links)
    for (PersonId x : tf.groups[l.first].members)
      for (PersonId y : tf.groups[l.second].members) {
        auto gx = group_of.find(x), gy = group_of.find(y);
        if (gx == group_of.end() || gy == group_of.end() || gx->second == gy->second) {
          v.label = true;
          continue;
        }
        auto it = link.find({std::min(gx->second, gy->second), std::max(gx->second, gy->second)});
        if (it == link.end() || it->second != l.label) v.label = true;
      }
  return v;
}

inline std::set<std::string> present(const FrameDetection* det) {
  std::set<std::string> out;
  if (!det) return out;
  for (const auto& g : det->groups) out.insert(g.label);
  for (const auto& l : det->links) out.insert(l.label);
  return out;
}

inline std::set<std::string> present(const TruthFrame& tf) {
  std::set<std::string> out;
  for (const auto& g : tf.groups) out.insert(g.label);
  for (const auto& l : tf.links) out.insert(l.label);
  return out;
}

} // namespace detail

/// Scores annotated frames inside the detections' frame range. Frames listed
/// in `exclude` (e.g. a warm-up span) are left out.
inline EvalReport score(std::span<const FrameDetection> dets, const AnnotationSet& truth, const Taxonomy& taxonomy,
                        const std::set<Frame>& exclude = {}) {
  EvalReport rep;
  const auto tr = truth.frame_range();
  if (dets.empty() || !tr) throw DataError("nothing to evaluate: empty detections or truth");
  std::map<Frame, const FrameDetection*> by_frame;
  Frame lo = dets.front().frame, hi = dets.front().frame;
  for (const auto& d : dets) {
    by_frame[d.frame] = &d;
    lo = std::min(lo, d.frame);
    hi = std::max(hi, d.frame);
  }
  if (hi < tr->first || lo > tr->last) throw DataError("detection and truth frame ranges are disjoint");
  for (const auto& name : taxonomy.names()) rep.activities[name];
  for (Frame t = std::max(lo, tr->first); t <= std::min(hi, tr->last); ++t) {
    if (!truth.annotated(t) || exclude.contains(t)) continue;
    const auto tf = truth.at(t);
    auto it = by_frame.find(t);
    const FrameDetection* det = it == by_frame.end() ? nullptr : it->second;
    const auto v = detail::judge(det, tf);
    ++rep.frames;
    rep.gcer.numerator += v.clustering;
    rep.tfer.numerator += v.label;
    if (v.clustering || v.label) {
      ++rep.eder.numerator;
      rep.error_frames.push_back(t);
    }
    const auto want = detail::present(tf), got = detail::present(det);
    for (auto& [name, r] : rep.activities) {
      if (want.contains(name)) {
        ++r.miss.denominator;
        r.miss.numerator += !got.contains(name);
      } else {
        ++r.fa.denominator;
        r.fa.numerator += got.contains(name);
      }
    }
  }
  rep.tfer.denominator = rep.gcer.denominator = rep.eder.denominator = rep.frames;
  return rep;
}

namespace detail {

inline std::string ratio_text(const Ratio& r) {
  const auto v = r.value();
  if (!v) return "undefined (0/0)";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f (%zu/%zu)", *v, r.numerator, r.denominator);
  return buf;
}

} // namespace detail

inline void write_report(std::ostream& out, const EvalReport& r) {
  out << "frames: " << r.frames << '\n';
  out << "tfer: " << detail::ratio_text(r.tfer) << '\n';
  out << "gcer: " << detail::ratio_text(r.gcer) << '\n';
  out << "eder: " << detail::ratio_text(r.eder) << '\n';
  for (const auto& [name, a] : r.activities) {
    out << "miss[" << name << "]: " << detail::ratio_text(a.miss) << '\n';
    out << "fa[" << name << "]: " << detail::ratio_text(a.fa) << '\n';
  }
}

inline void write_activity_csv(std::ostream& out, const EvalReport& r) {
  out << "activity,miss,miss_frames,positive_frames,fa,fa_frames,negative_frames\n";
  auto v = [](const Ratio& x) {
    const auto val = x.value();
    if (!val) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *val);
    return std::string(buf);
  };
  for (const auto& [name, a] : r.activities)
    out << name << ',' << v(a.miss) << ',' << a.miss.numerator << ',' << a.miss.denominator << ',' << v(a.fa) << ','
        << a.fa.numerator << ',' << a.fa.denominator << '\n';
}

} // namespace groupact
