#pragma once

// Group representatives: a selected member (P), the mean of all members (V),
// or the mean of the members whose normalized score exceeds T_R (SV).

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "clustering.hpp"
#include "features.hpp"

namespace groupact {

enum class GrKind { P, V, SV };

inline const char* gr_name(GrKind k) { return k == GrKind::P ? "p" : k == GrKind::V ? "v" : "sv"; }

struct GroupRepresentative {
  GrKind kind = GrKind::V;
  Trajectory trajectory;
  std::optional<PersonId> person;  // P
  std::vector<PersonId> subset;    // people averaged into the trajectory
  bool fallback = false;           // SV with no member above T_R
};

/// Entry-weighted state-marginal density log sum_k pi_k b_k(x) of the
/// activity's single-stream emissions; 0 for activities without a pair model.
inline double marginal_log_density(const ActivityModel& m, std::span<const double> x) {
  if (!m.pair) return 0.0;
  const auto& pm = *m.pair;
  double v = kNegInf;
  for (std::size_t k = 0; k < pm.states(); ++k)
    v = log_add(v, pm.topology.log_entry(k) + pm.marginal[k].log_density(x));
  return v;
}

inline GroupRepresentative v_gr(const FrameContext& ctx, std::span<const PersonId> members) {
  if (members.empty()) throw std::invalid_argument("v_gr: empty group");
  std::vector<const Trajectory*> ptrs;
  for (PersonId p : members) ptrs.push_back(&ctx.trajectory_of(p));
  GroupRepresentative gr;
  gr.kind = GrKind::V;
  gr.trajectory = mean_trajectory(ptrs);
  gr.subset.assign(members.begin(), members.end());
  return gr;
}

/// log p(F_i(t) | theta) + sum_{j != i} co_j^theta(i, t) per member, where
/// F_i(t) is the member's pair observation against the group mean.
inline std::vector<double> member_scores(FrameContext& ctx, std::span<const PersonId> members,
                                         const std::string& label) {
  std::vector<double> scores;
  if (members.size() == 1) return {0.0};
  const auto& model = ctx.bank().at(label);
  const auto centre = v_gr(ctx, members).trajectory;
  for (PersonId i : members) {
    const auto obs = pair_observation(ctx.trajectory_of(i).back(), centre.back()).values();
    double s = marginal_log_density(model, obs);
    for (PersonId j : members)
      if (j != i) s += ctx.profile(j, i)[label];
    scores.push_back(s);
  }
  return scores;
}

/// Scores normalized to sum to one (softmax of the log scores).
inline std::vector<double> normalized_scores(std::span<const double> log_scores) {
  const double z = log_sum_exp(log_scores);
  std::vector<double> out;
  for (double s : log_scores) out.push_back(std::exp(s - z));
  return out;
}

/// Indices with normalized score above tr; may be empty.
inline std::vector<std::size_t> representative_subset(std::span<const double> log_scores, double tr) {
  const auto n = normalized_scores(log_scores);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n.size(); ++i)
    if (n[i] > tr) out.push_back(i);
  return out;
}

/// Highest score; ties to the earliest (smallest id, members being sorted).
inline std::size_t best_member(std::span<const double> log_scores) {
  return static_cast<std::size_t>(std::max_element(log_scores.begin(), log_scores.end()) - log_scores.begin());
}

inline GroupRepresentative p_gr(FrameContext& ctx, std::span<const PersonId> members, const std::string& label) {
  if (members.empty()) throw std::invalid_argument("p_gr: empty group");
  const auto scores = member_scores(ctx, members, label);
  const PersonId p = members[best_member(scores)];
  GroupRepresentative gr;
  gr.kind = GrKind::P;
  gr.person = p;
  gr.subset = {p};
  gr.trajectory = ctx.trajectory_of(p);
  return gr;
}

inline GroupRepresentative sv_gr(FrameContext& ctx, std::span<const PersonId> members, const std::string& label,
                                 double tr) {
  if (members.empty()) throw std::invalid_argument("sv_gr: empty group");
  const auto scores = member_scores(ctx, members, label);
  const auto idx = representative_subset(scores, tr);
  if (idx.empty()) {
    auto gr = v_gr(ctx, members);
    gr.kind = GrKind::SV;
    gr.fallback = true;
    return gr;
  }
  std::vector<PersonId> subset;
  for (std::size_t i : idx) subset.push_back(members[i]);
  auto gr = v_gr(ctx, subset);
  gr.kind = GrKind::SV;
  return gr;
}

inline GroupRepresentative group_representative(FrameContext& ctx, std::span<const PersonId> members,
                                                const std::string& label, GrKind kind, double tr) {
  switch (kind) {
  case GrKind::P: return p_gr(ctx, members, label);
  case GrKind::V: return v_gr(ctx, members);
  case GrKind::SV: return sv_gr(ctx, members, label, tr);
  }
  throw std::invalid_argument("unknown representative kind");
}

} // namespace groupact
