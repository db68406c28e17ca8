#pragma once

// Builds training segments from annotated tracks and fits one model per
// activity.

#include <map>
#include <string>
#include <vector>

#include "ahmm.hpp"
#include "features.hpp"
#include "hmm.hpp"
#include "model_bank.hpp"
#include "trackio.hpp"

namespace groupact {

struct TrainingConfig {
  BankConfig bank;
  std::size_t states = 2;
  std::size_t mixtures = 2;
  std::size_t stride = 5;          // frames between consecutive training windows
  std::size_t max_segments = 150;  // per activity and model type, evenly thinned
  std::size_t max_iters = 30;
  double tol = 1e-4;
  std::uint64_t seed = 0;
  bool synchronous = false;  // train every pair model with eps == 1
};

struct Dataset {
  TrackSet tracks;
  AnnotationSet annotations;
};

struct TrainingSegments {
  std::map<std::string, std::vector<SequencePair>, std::less<>> pairs;
  std::map<std::string, std::vector<Sequence>, std::less<>> groups;
};

struct ActivityTrainingLog {
  std::string name;
  std::size_t pair_segments = 0, group_segments = 0;
  std::vector<double> pair_log_likelihoods, group_log_likelihoods;
  bool mixture_fallback = false;
};

struct BankTrainingResult {
  ActivityModelBank bank;
  std::vector<ActivityTrainingLog> log;
};

namespace detail {

// Full-length trajectories of `members` over the window ending at t, or empty.
inline std::vector<Trajectory> window_trajectories(const TrackSet& tracks, std::span<const PersonId> members, Frame t,
                                                   std::size_t len) {
  std::vector<Trajectory> out;
  for (PersonId p : members) {
    auto tr = trajectory(tracks, p, t, len);
    if (tr.size() < len) return {};
    out.push_back(std::move(tr));
  }
  return out;
}

inline std::vector<const Trajectory*> pointers(const std::vector<Trajectory>& v) {
  std::vector<const Trajectory*> out;
  for (const auto& t : v) out.push_back(&t);
  return out;
}

inline SequencePair ordered_pair(const Trajectory& a, const Trajectory& b) {
  return {pair_features(a, b), pair_features(b, a)};
}

// Evenly spaced subset of at most `cap` elements, order kept.
template <class T>
std::vector<T> thin(std::vector<T> v, std::size_t cap) {
  if (v.size() <= cap || cap == 0) return v;
  std::vector<T> out;
  out.reserve(cap);
  for (std::size_t k = 0; k < cap; ++k) out.push_back(std::move(v[k * v.size() / cap]));
  return out;
}

} // namespace detail

/// Windows of length L slide through every annotated interval.
///
/// Symmetric groups yield member pairs in both orders, and for three or more
/// members each member against the centroid of the others; every group
/// yields its group-feature window. Inter-group records yield the cross
/// pairs and the centroid pair, with the faster group's person as the first
/// stream (both orders for symmetric relations such as Ignore).
inline TrainingSegments collect_segments(std::span<const Dataset> data, const Taxonomy& taxonomy,
                                         const TrainingConfig& cfg) {
  TrainingSegments segs;
  const std::size_t len = cfg.bank.window;
  const std::size_t stride = std::max<std::size_t>(cfg.stride, 1);
  for (const auto& ds : data) {
    for (const auto& rec : ds.annotations.records()) {
      const auto& info = taxonomy.at(rec.label);
      for (Frame t = rec.frames.first + static_cast<Frame>(len); t <= rec.frames.last; t += static_cast<Frame>(stride)) {
        if (rec.level == AnnotationLevel::Symmetric) {
          const auto trajs = detail::window_trajectories(ds.tracks, rec.members, t, len);
          if (trajs.empty()) continue;
          const auto ptrs = detail::pointers(trajs);
          if (info.group_level()) segs.groups[rec.label].push_back(group_features(ptrs));
          if (!info.pairwise) continue;
          for (std::size_t a = 0; a < trajs.size(); ++a)
            for (std::size_t b = 0; b < trajs.size(); ++b)
              if (a != b) segs.pairs[rec.label].push_back(detail::ordered_pair(trajs[a], trajs[b]));
          if (trajs.size() >= 3)
            for (std::size_t a = 0; a < trajs.size(); ++a) {
              std::vector<const Trajectory*> others;
              for (std::size_t b = 0; b < trajs.size(); ++b)
                if (b != a) others.push_back(&trajs[b]);
              const auto centroid = mean_trajectory(others);
              segs.pairs[rec.label].push_back(detail::ordered_pair(trajs[a], centroid));
              segs.pairs[rec.label].push_back(detail::ordered_pair(centroid, trajs[a]));
            }
        } else {
          const auto* ga = ds.annotations.group(rec.groups[0]);
          const auto* gb = ds.annotations.group(rec.groups[1]);
          if (!ga->frames.contains(t) || !gb->frames.contains(t)) continue;
          auto ta = detail::window_trajectories(ds.tracks, ga->members, t, len);
          auto tb = detail::window_trajectories(ds.tracks, gb->members, t, len);
          if (ta.empty() || tb.empty()) continue;
          // First stream from the faster group.
          if (mean_group_speed(detail::pointers(ta)) > mean_group_speed(detail::pointers(tb))) std::swap(ta, tb);
          auto& out = segs.pairs[rec.label];
          const bool both = info.symmetric();
          for (const auto& a : ta)
            for (const auto& b : tb) {
              out.push_back(detail::ordered_pair(b, a));
              if (both) out.push_back(detail::ordered_pair(a, b));
            }
          const auto ca = mean_trajectory(detail::pointers(ta));
          const auto cb = mean_trajectory(detail::pointers(tb));
          out.push_back(detail::ordered_pair(cb, ca));
          if (both) out.push_back(detail::ordered_pair(ca, cb));
        }
      }
    }
  }
  for (auto& [name, v] : segs.pairs) v = detail::thin(std::move(v), cfg.max_segments);
  for (auto& [name, v] : segs.groups) v = detail::thin(std::move(v), cfg.max_segments);
  return segs;
}

/// Fits every activity of the taxonomy. Throws DataError naming the first
/// activity (in name order) that has no training window.
inline BankTrainingResult train_bank(const TrainingSegments& segs, const Taxonomy& taxonomy, const TrainingConfig& cfg) {
  BankTrainingResult res;
  res.bank.taxonomy = taxonomy;
  res.bank.config = cfg.bank;
  std::uint64_t salt = 0;
  for (const auto& a : taxonomy.activities()) {
    ++salt;
    const auto pit = segs.pairs.find(a.name);
    const auto git = segs.groups.find(a.name);
    if (a.pairwise && (pit == segs.pairs.end() || pit->second.empty()))
      throw DataError("no training data for activity " + a.name);
    if (a.group_level() && (git == segs.groups.end() || git->second.empty()))
      throw DataError("no training data for activity " + a.name);
    ActivityModel m;
    m.name = a.name;
    m.kind = a.kind;
    ActivityTrainingLog log;
    log.name = a.name;
    if (a.pairwise) {
      PairTrainingConfig pc;
      pc.states = cfg.states;
      pc.mixtures = cfg.mixtures;
      pc.slack = cfg.bank.slack;
      pc.seed = cfg.seed * 1000003ULL + salt;
      pc.max_iters = cfg.max_iters;
      pc.tol = cfg.tol;
      pc.synchronous = cfg.synchronous;
      auto r = train_pair_model(pit->second, pc);
      m.pair = std::move(r.model);
      m.mixture_fallback = m.mixture_fallback || r.mixture_fallback;
      log.pair_segments = pit->second.size();
      log.pair_log_likelihoods = std::move(r.log_likelihoods);
    }
    if (a.group_level()) {
      HmmTrainingConfig hc;
      hc.states = cfg.states;
      hc.mixtures = cfg.mixtures;
      hc.seed = cfg.seed * 1000003ULL + salt + 500;
      hc.max_iters = cfg.max_iters;
      hc.tol = cfg.tol;
      auto r = train_group_model(git->second, hc);
      m.group = std::move(r.model);
      m.mixture_fallback = m.mixture_fallback || r.mixture_fallback;
      log.group_segments = git->second.size();
      log.group_log_likelihoods = std::move(r.log_likelihoods);
    }
    log.mixture_fallback = m.mixture_fallback;
    res.bank.models.emplace(a.name, std::move(m));
    res.log.push_back(std::move(log));
  }
  res.bank.validate();
  return res;
}

inline BankTrainingResult train_bank(std::span<const Dataset> data, const Taxonomy& taxonomy,
                                     const TrainingConfig& cfg) {
  return train_bank(collect_segments(data, taxonomy, cfg), taxonomy, cfg);
}

} // namespace groupact
