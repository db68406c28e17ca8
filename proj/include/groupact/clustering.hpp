#pragma once

// Seed-representative-centered clustering of the people at one frame into
// disjoint symmetric groups.

#include <algorithm>
#include <functional>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "correlation.hpp"
#include "features.hpp"
#include "model_bank.hpp"
#include "trackio.hpp"

namespace groupact {

/// Correlation bookkeeping for one frame. Person trajectories and person-pair
/// profiles are computed once and cached.
class FrameContext {
public:
  using Correlator = std::function<std::optional<CorrelationProfile>(const Trajectory&, const Trajectory&)>;

  FrameContext(const ActivityModelBank& bank, const TrackSet& tracks, Frame t) : FrameContext(bank, tracks, t, {}) {}

  /// `correlate` replaces the model-based metric when set.
  FrameContext(const ActivityModelBank& bank, const TrackSet& tracks, Frame t, Correlator correlate)
      : bank_(&bank), tracks_(&tracks), t_(t), correlate_(std::move(correlate)) {
    for (PersonId p : tracks.persons()) {
      auto tr = trajectory(tracks, p, t, bank.config.window);
      if (tr.size() >= 2) {
        persons_.push_back(p);
        trajs_.emplace(p, std::move(tr));
      }
    }
  }

  const ActivityModelBank& bank() const { return *bank_; }
  const TrackSet& tracks() const { return *tracks_; }
  Frame frame() const { return t_; }

  // People with at least two motion frames ending at t, ascending.
  const std::vector<PersonId>& persons() const { return persons_; }
  const Trajectory& trajectory_of(PersonId p) const { return trajs_.at(p); }

  /// co_i(j, t); i and j must be evaluable.
  const CorrelationProfile& profile(PersonId i, PersonId j) {
    auto key = std::pair{i, j};
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      auto p = compute(trajs_.at(i), trajs_.at(j));
      if (!p) throw ModelError("correlation undefined for an evaluable pair");
      note(*p);
      it = cache_.emplace(key, std::move(*p)).first;
    }
    return it->second;
  }

  /// Correlation between arbitrary (possibly virtual) people.
  std::optional<CorrelationProfile> profile(const Trajectory& a, const Trajectory& b) {
    auto p = compute(a, b);
    if (p) note(*p);
    return p;
  }

  const std::string& label(PersonId i, PersonId j) { return profile(i, j).label; }

  // Largest |sum co - 1| over every profile computed so far, and their count.
  double max_normalization_error() const { return max_norm_err_; }
  std::size_t profiles_computed() const { return profiles_; }

private:
  std::optional<CorrelationProfile> compute(const Trajectory& a, const Trajectory& b) const {
    return correlate_ ? correlate_(a, b) : correlation(*bank_, a, b);
  }

  void note(const CorrelationProfile& p) {
    double s = 0;
    for (double c : p.co) s += c;
    max_norm_err_ = std::max(max_norm_err_, std::abs(s - 1.0));
    ++profiles_;
  }

  const ActivityModelBank* bank_;
  const TrackSet* tracks_;
  Frame t_;
  Correlator correlate_;
  std::vector<PersonId> persons_;
  std::map<PersonId, Trajectory> trajs_;
  std::map<std::pair<PersonId, PersonId>, CorrelationProfile> cache_;
  double max_norm_err_ = 0;
  std::size_t profiles_ = 0;
};

enum class SeedKind { Active, Pair, Merged };

struct ClusterSeed {
  std::vector<PersonId> members;  // sorted
  SeedKind kind = SeedKind::Active;
  std::optional<std::string> label;
  double strength = 0;  // weaker of the two directed correlations for pair seeds

  friend bool operator==(const ClusterSeed&, const ClusterSeed&) = default;
};

struct SymmetricGroup {
  std::vector<PersonId> members;       // sorted
  std::vector<PersonId> seed_members;  // empty for unattached singletons
  std::string label;

  friend bool operator==(const SymmetricGroup&, const SymmetricGroup&) = default;
};

struct Partition {
  Frame frame = 0;
  std::vector<SymmetricGroup> groups;  // ordered by smallest member

  friend bool operator==(const Partition&, const Partition&) = default;
};

/// Throws std::logic_error unless the groups are disjoint and cover exactly
/// `persons`.
inline void check_partition(const Partition& p, std::span<const PersonId> persons) {
  std::vector<PersonId> all;
  for (const auto& g : p.groups) {
    if (g.members.empty()) throw std::logic_error("partition: empty group");
    all.insert(all.end(), g.members.begin(), g.members.end());
  }
  std::sort(all.begin(), all.end());
  if (std::adjacent_find(all.begin(), all.end()) != all.end()) throw std::logic_error("partition: groups overlap");
  std::vector<PersonId> want(persons.begin(), persons.end());
  std::sort(want.begin(), want.end());
  if (all != want) throw std::logic_error("partition: groups do not cover the evaluable people");
}

namespace detail {

// Every ordered pair inside `members` carries label `lambda`.
inline bool all_pairs_agree(FrameContext& ctx, std::span<const PersonId> members, const std::string& lambda) {
  for (PersonId a : members)
    for (PersonId b : members)
      if (a != b && ctx.label(a, b) != lambda) return false;
  return true;
}

inline std::vector<PersonId> merged(std::span<const PersonId> a, std::span<const PersonId> b) {
  std::vector<PersonId> u(a.begin(), a.end());
  u.insert(u.end(), b.begin(), b.end());
  std::sort(u.begin(), u.end());
  return u;
}

} // namespace detail

/// Active people (body-size change above tc) become singleton seeds; pairs
/// whose directed correlations both exceed to under one shared grouping
/// label become pair seeds. Output: active seeds by id, then pair seeds by
/// descending strength (ties by ids).
inline std::vector<ClusterSeed> detect_seeds(FrameContext& ctx, double tc, double to) {
  std::vector<ClusterSeed> seeds;
  const auto& people = ctx.persons();
  for (PersonId p : people) {
    const auto& tr = ctx.trajectory_of(p);
    if (body_size_change(tr.back()) > tc) seeds.push_back({{p}, SeedKind::Active, std::nullopt, 0.0});
  }
  std::vector<ClusterSeed> pairs;
  const auto& tax = ctx.bank().taxonomy;
  for (std::size_t a = 0; a < people.size(); ++a)
    for (std::size_t b = a + 1; b < people.size(); ++b) {
      const auto& pij = ctx.profile(people[a], people[b]);
      const auto& pji = ctx.profile(people[b], people[a]);
      if (pij.label != pji.label || !tax.is_grouping(pij.label)) continue;
      const double cij = pij[pij.label], cji = pji[pji.label];
      if (cij > to && cji > to)
        pairs.push_back({{people[a], people[b]}, SeedKind::Pair, pij.label, std::min(cij, cji)});
    }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const ClusterSeed& x, const ClusterSeed& y) { return x.strength > y.strength; });
  seeds.insert(seeds.end(), pairs.begin(), pairs.end());
  return seeds;
}

/// Makes seeds disjoint and merges seeds whose union agrees, over every
/// ordered pair, on one grouping label.
///
/// Pair seeds are taken strongest first: one sharing a member with an
/// earlier seed joins it when the union still agrees on that seed's label;
/// otherwise its extra member is left for assignment. Active seeds already
/// covered by a pair seed are dropped. Then seeds are merged greedily in
/// index order until no merge applies.
inline std::vector<ClusterSeed> merge_seeds(FrameContext& ctx, std::vector<ClusterSeed> seeds) {
  std::vector<ClusterSeed> out;
  std::map<PersonId, std::size_t> owner;
  for (const auto& s : seeds) {
    if (s.kind != SeedKind::Pair) continue;
    const PersonId a = s.members[0], b = s.members[1];
    const bool ha = owner.contains(a), hb = owner.contains(b);
    if (!ha && !hb) {
      owner[a] = owner[b] = out.size();
      out.push_back(s);
    } else if (ha != hb) {
      const std::size_t k = ha ? owner[a] : owner[b];
      const PersonId extra = ha ? b : a;
      auto& seed = out[k];
      if (seed.label != s.label) continue;
      auto u = detail::merged(seed.members, std::vector<PersonId>{extra});
      if (!detail::all_pairs_agree(ctx, u, *seed.label)) continue;
      seed.members = std::move(u);
      seed.kind = SeedKind::Merged;
      owner[extra] = k;
    }
  }
  for (const auto& s : seeds)
    if (s.kind == SeedKind::Active && !owner.contains(s.members[0])) {
      owner[s.members[0]] = out.size();
      out.push_back(s);
    }

  const auto& tax = ctx.bank().taxonomy;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t x = 0; x < out.size() && !changed; ++x)
      for (std::size_t y = x + 1; y < out.size() && !changed; ++y) {
        const auto u = detail::merged(out[x].members, out[y].members);
        const std::string lambda = ctx.label(out[x].members.front(), out[y].members.front());
        if (!tax.is_grouping(lambda)) continue;
        if ((out[x].label && *out[x].label != lambda) || (out[y].label && *out[y].label != lambda)) continue;
        if (!detail::all_pairs_agree(ctx, u, lambda)) continue;
        out[x].members = u;
        out[x].label = lambda;
        out[x].kind = SeedKind::Merged;
        out[x].strength = std::max(out[x].strength, out[y].strength);
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(y));
        changed = true;
      }
  }
  return out;
}

/// Per-frame mean of the seed members' motion: a virtual person.
inline std::vector<Trajectory> seed_representatives(const FrameContext& ctx, std::span<const ClusterSeed> seeds) {
  std::vector<Trajectory> out;
  for (const auto& s : seeds) {
    std::vector<const Trajectory*> ptrs;
    for (PersonId p : s.members) ptrs.push_back(&ctx.trajectory_of(p));
    out.push_back(mean_trajectory(ptrs));
  }
  return out;
}

/// Every person outside the seeds joins the seed whose representative it
/// correlates with most strongly under a grouping label (ties to the earlier
/// seed), or stays alone as "single". An unlabeled active seed that gains
/// members takes the grouping label with the largest summed correlation of
/// its new members; alone it is "single".
inline Partition assign_remaining(FrameContext& ctx, std::span<const ClusterSeed> seeds,
                                  std::span<const Trajectory> reps) {
  const auto& tax = ctx.bank().taxonomy;
  std::vector<std::vector<PersonId>> joined(seeds.size());
  std::vector<std::vector<CorrelationProfile>> joined_profiles(seeds.size());
  std::vector<PersonId> singles;
  std::map<PersonId, bool> in_seed;
  for (const auto& s : seeds)
    for (PersonId p : s.members) in_seed[p] = true;
  for (PersonId p : ctx.persons()) {
    if (in_seed.contains(p)) continue;
    std::optional<std::size_t> best;
    double best_co = -1;
    std::optional<CorrelationProfile> best_profile;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      auto prof = ctx.profile(ctx.trajectory_of(p), reps[k]);
      if (!prof || !tax.is_grouping(prof->label)) continue;
      const double c = (*prof)[prof->label];
      if (c > best_co) best = k, best_co = c, best_profile = std::move(prof);
    }
    if (best) {
      joined[*best].push_back(p);
      joined_profiles[*best].push_back(std::move(*best_profile));
    } else {
      singles.push_back(p);
    }
  }

  Partition part;
  part.frame = ctx.frame();
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    SymmetricGroup g;
    g.seed_members = seeds[k].members;
    g.members = detail::merged(seeds[k].members, joined[k]);
    if (seeds[k].label) {
      g.label = *seeds[k].label;
    } else if (joined[k].empty()) {
      g.label = std::string(kSingle);
    } else {
      double best = -1;
      for (const auto& name : tax.grouping()) {
        double s = 0;
        for (const auto& prof : joined_profiles[k]) s += prof[name];
        if (s > best) best = s, g.label = name;
      }
    }
    part.groups.push_back(std::move(g));
  }
  for (PersonId p : singles) part.groups.push_back({{p}, {}, std::string(kSingle)});
  std::sort(part.groups.begin(), part.groups.end(),
            [](const SymmetricGroup& a, const SymmetricGroup& b) { return a.members.front() < b.members.front(); });
  return part;
}

/// Steps 1 to 4 for one frame.
inline Partition cluster_frame(FrameContext& ctx, double tc, double to) {
  auto seeds = merge_seeds(ctx, detect_seeds(ctx, tc, to));
  const auto reps = seed_representatives(ctx, seeds);
  auto part = assign_remaining(ctx, seeds, reps);
  check_partition(part, ctx.persons());
  return part;
}

} // namespace groupact
