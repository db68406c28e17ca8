#pragma once

// Activity correlation metric co_i(j, t): for every pairwise activity the
// alignment lattice of (F_i, F_j) is run over the window, the mass in the
// terminal band is summed over states, and the masses are normalized across
// activities.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ahmm.hpp"
#include "features.hpp"
#include "model_bank.hpp"

namespace groupact {

struct CorrelationProfile {
  std::vector<std::string> activities;  // sorted
  std::vector<double> co;               // same order, sums to 1
  std::vector<double> log_mass;         // unnormalized per-activity log mass
  std::string label;

  double operator[](std::string_view name) const {
    for (std::size_t a = 0; a < activities.size(); ++a)
      if (activities[a] == name) return co[a];
    return 0.0;
  }

  friend bool operator==(const CorrelationProfile&, const CorrelationProfile&) = default;
};

/// Softmax over activities; label is the argmax, ties to the smallest name.
/// Empty when every mass is -inf.
inline std::optional<CorrelationProfile> profile_from_log_masses(std::vector<std::string> names,
                                                                 std::vector<double> log_mass) {
  if (names.empty() || names.size() != log_mass.size())
    throw std::invalid_argument("profile_from_log_masses: size mismatch");
  const double z = log_sum_exp(log_mass);
  if (z == kNegInf || !std::isfinite(z)) return std::nullopt;
  CorrelationProfile p;
  p.co.resize(names.size());
  std::size_t best = 0;
  for (std::size_t a = 0; a < names.size(); ++a) {
    p.co[a] = std::exp(log_mass[a] - z);
    if (p.co[a] > p.co[best] || (p.co[a] == p.co[best] && names[a] < names[best])) best = a;
  }
  p.label = names[best];
  p.activities = std::move(names);
  p.log_mass = std::move(log_mass);
  return p;
}

/// Correlation of the two given pair-feature streams (F_i first).
inline std::optional<CorrelationProfile> correlation(const ActivityModelBank& bank, const Sequence& fi,
                                                     const Sequence& fj) {
  const auto names = bank.taxonomy.pairwise();
  std::vector<double> mass;
  mass.reserve(names.size());
  for (const auto& name : names) {
    const auto lat = ahmm_forward(*bank.at(name).pair, fi, fj, bank.config.slack);
    double m = kNegInf;
    for (std::size_t k = 0; k < lat.states; ++k) m = log_add(m, lat.terminal_log_mass(k));
    mass.push_back(m);
  }
  return profile_from_log_masses(names, std::move(mass));
}

/// co_a(b): `a` and `b` are real or virtual people; both are cut to their
/// common tail, at most the bank's window. Needs at least 2 frames.
inline std::optional<CorrelationProfile> correlation(const ActivityModelBank& bank, const Trajectory& a,
                                                     const Trajectory& b) {
  const std::size_t n = std::min({a.size(), b.size(), bank.config.window});
  if (n < 2) return std::nullopt;
  const Trajectory ta(a.end() - static_cast<std::ptrdiff_t>(n), a.end());
  const Trajectory tb(b.end() - static_cast<std::ptrdiff_t>(n), b.end());
  return correlation(bank, pair_features(ta, tb), pair_features(tb, ta));
}

inline std::optional<CorrelationProfile> correlation(const ActivityModelBank& bank, const TrackSet& tracks,
                                                     PersonId i, PersonId j, Frame t) {
  return correlation(bank, trajectory(tracks, i, t, bank.config.window), trajectory(tracks, j, t, bank.config.window));
}

/// Both argument orders: (co_i(j, t), co_j(i, t)).
inline std::optional<std::pair<CorrelationProfile, CorrelationProfile>> asymmetry_check(
    const ActivityModelBank& bank, const TrackSet& tracks, PersonId i, PersonId j, Frame t) {
  auto ij = correlation(bank, tracks, i, j, t);
  auto ji = correlation(bank, tracks, j, i, t);
  if (!ij || !ji) return std::nullopt;
  return std::pair{std::move(*ij), std::move(*ji)};
}

} // namespace groupact
