#pragma once

// Per-frame detection: clustering, symmetric labels, group representatives,
// and labels between every pair of groups.

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clustering.hpp"
#include "grouprep.hpp"
#include "model_bank.hpp"
#include "trackio.hpp"

namespace groupact {

struct PipelineConfig {
  GrKind gr = GrKind::SV;
  int variant = 1;             // 1: seed label, 2: group-feature HMM plus correlation prior
  bool majority_vote = false;  // inter-group labels by cross-pair votes instead of representatives
  double tc = 0.1;
  double to = 0.95;
  double tr = 0.3;
  std::optional<std::size_t> window;  // override of the bank's L
  std::optional<std::size_t> slack;   // override of the bank's slack
  bool smooth = false;                // majority filter over +-2 frames
  bool debug = false;                 // record representative details

  void validate() const {
    for (double v : {tc, to, tr})
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("thresholds must lie in [0, 1]");
    if (variant != 1 && variant != 2) throw std::invalid_argument("variant must be 1 or 2");
  }
};

struct GrDebug {
  std::string kind;
  std::optional<PersonId> person;
  std::vector<PersonId> subset;
  bool fallback = false;

  friend bool operator==(const GrDebug&, const GrDebug&) = default;
};

struct DetectedGroup {
  std::string id;
  std::vector<PersonId> members;
  std::string label;
  std::optional<GrDebug> gr;

  friend bool operator==(const DetectedGroup&, const DetectedGroup&) = default;
};

// `first` is the slower group (inner argument), `second` the faster one.
struct DetectedLink {
  std::string first, second;
  std::string label;

  friend bool operator==(const DetectedLink&, const DetectedLink&) = default;
};

struct FrameDetection {
  Frame frame = 0;
  std::vector<DetectedGroup> groups;
  std::vector<DetectedLink> links;
  std::string skipped;  // reason when no person could be evaluated

  const DetectedGroup* group(std::string_view id) const {
    for (const auto& g : groups)
      if (g.id == id) return &g;
    return nullptr;
  }

  friend bool operator==(const FrameDetection&, const FrameDetection&) = default;
};

struct PipelineDiagnostics {
  std::size_t frames = 0;
  std::size_t profiles = 0;
  double max_normalization_error = 0;
};

/// Bank with the pipeline's window and slack overrides applied.
inline ActivityModelBank configured_bank(const ActivityModelBank& bank, const PipelineConfig& cfg) {
  ActivityModelBank b = bank;
  if (cfg.window) b.config.window = *cfg.window;
  if (cfg.slack) b.config.slack = *cfg.slack;
  if (b.config.window < 2 || b.config.slack >= b.config.window)
    throw std::invalid_argument("window must be at least 2 and slack below it");
  b.config.tc = cfg.tc;
  b.config.to = cfg.to;
  b.config.tr = cfg.tr;
  b.validate();
  return b;
}

/// Variant 1 keeps the clustering label; variant 2 maximizes the group-HMM
/// log-likelihood plus the summed member correlations over grouping
/// activities. Singletons are "single" in both.
inline std::string recognize_symmetric(FrameContext& ctx, const SymmetricGroup& g, int variant) {
  if (g.members.size() == 1) return std::string(kSingle);
  if (variant == 1) return g.label;
  std::vector<const Trajectory*> ptrs;
  for (PersonId p : g.members) ptrs.push_back(&ctx.trajectory_of(p));
  const auto feats = group_features(ptrs);
  std::string best;
  double best_score = kNegInf;
  for (const auto& name : ctx.bank().taxonomy.grouping()) {
    double s = ctx.bank().at(name).group->log_likelihood(feats);
    for (PersonId i : g.members)
      for (PersonId j : g.members)
        if (i != j) s += ctx.profile(i, j)[name];
    if (best.empty() || s > best_score) best = name, best_score = s;
  }
  return best;
}

/// True when `b` is the slower group and must become the inner argument.
inline bool slower_second(const FrameContext& ctx, std::span<const PersonId> a, std::span<const PersonId> b) {
  auto speed_of = [&](std::span<const PersonId> g) {
    std::vector<const Trajectory*> ptrs;
    for (PersonId p : g) ptrs.push_back(&ctx.trajectory_of(p));
    return mean_group_speed(ptrs);
  };
  return speed_of(b) < speed_of(a);
}

/// Argmax over inter-group candidates of log co_{GR_B}(GR_A) plus the summed
/// cross correlations co_j(i), i in A, j in B. A must be the slower group.
inline std::optional<std::string> recognize_intergroup(FrameContext& ctx, std::span<const PersonId> a,
                                                       const GroupRepresentative& gr_a, std::span<const PersonId> b,
                                                       const GroupRepresentative& gr_b) {
  const auto prof = ctx.profile(gr_b.trajectory, gr_a.trajectory);
  if (!prof) return std::nullopt;
  std::string best;
  double best_score = kNegInf;
  for (const auto& name : ctx.bank().taxonomy.intergroup()) {
    double s = safe_log((*prof)[name]);
    for (PersonId i : a)
      for (PersonId j : b) s += ctx.profile(j, i)[name];
    if (best.empty() || s > best_score) best = name, best_score = s;
  }
  return best;
}

/// Cross pairs (i in A, j in B) vote with argmax over the inter-group
/// candidates of co_j(i); ties to the larger summed correlation, then name.
inline std::string majority_vote_intergroup(FrameContext& ctx, std::span<const PersonId> a,
                                            std::span<const PersonId> b) {
  const auto names = ctx.bank().taxonomy.intergroup();
  std::vector<std::size_t> votes(names.size(), 0);
  std::vector<double> sums(names.size(), 0.0);
  for (PersonId i : a)
    for (PersonId j : b) {
      const auto& p = ctx.profile(j, i);
      std::size_t best = 0;
      for (std::size_t n = 0; n < names.size(); ++n) {
        sums[n] += p[names[n]];
        if (p[names[n]] > p[names[best]]) best = n;
      }
      ++votes[best];
    }
  std::size_t best = 0;
  for (std::size_t n = 1; n < names.size(); ++n)
    if (votes[n] > votes[best] || (votes[n] == votes[best] && sums[n] > sums[best])) best = n;
  return names[best];
}

inline FrameDetection detect_frame(FrameContext& ctx, const PipelineConfig& cfg) {
  FrameDetection det;
  det.frame = ctx.frame();
  if (ctx.persons().empty()) {
    det.skipped = "no_features";
    return det;
  }
  const auto part = cluster_frame(ctx, cfg.tc, cfg.to);
  std::vector<GroupRepresentative> reps;
  for (std::size_t g = 0; g < part.groups.size(); ++g) {
    const auto& grp = part.groups[g];
    DetectedGroup dg;
    dg.id = "G" + std::to_string(g + 1);
    dg.members = grp.members;
    dg.label = recognize_symmetric(ctx, grp, cfg.variant);
    if (!cfg.majority_vote) {
      reps.push_back(group_representative(ctx, grp.members, dg.label, cfg.gr, cfg.tr));
      if (cfg.debug) dg.gr = GrDebug{gr_name(cfg.gr), reps.back().person, reps.back().subset, reps.back().fallback};
    }
    det.groups.push_back(std::move(dg));
  }
  for (std::size_t x = 0; x < part.groups.size(); ++x)
    for (std::size_t y = x + 1; y < part.groups.size(); ++y) {
      std::size_t a = x, b = y;
      if (slower_second(ctx, part.groups[x].members, part.groups[y].members)) std::swap(a, b);
      const auto& ma = part.groups[a].members;
      const auto& mb = part.groups[b].members;
      std::optional<std::string> label;
      if (cfg.majority_vote) label = majority_vote_intergroup(ctx, ma, mb);
      else label = recognize_intergroup(ctx, ma, reps[a], mb, reps[b]);
      if (label) det.links.push_back({det.groups[a].id, det.groups[b].id, *label});
    }
  return det;
}

/// Replaces each label by the majority over frames t-2..t+2 in which the
/// same member set (or pair of member sets) was detected; ties keep it.
inline void smooth_detections(std::vector<FrameDetection>& dets, std::size_t radius = 2) {
  using Members = std::vector<PersonId>;
  std::vector<std::map<Members, std::string>> glabel(dets.size());
  std::vector<std::map<std::pair<Members, Members>, std::string>> llabel(dets.size());
  for (std::size_t f = 0; f < dets.size(); ++f) {
    for (const auto& g : dets[f].groups) glabel[f][g.members] = g.label;
    for (const auto& l : dets[f].links)
      llabel[f][{dets[f].group(l.first)->members, dets[f].group(l.second)->members}] = l.label;
  }
  auto vote = [&](auto& table, std::size_t f, const auto& key, const std::string& current) {
    std::map<std::string, int> count;
    const std::size_t lo = f >= radius ? f - radius : 0, hi = std::min(dets.size() - 1, f + radius);
    for (std::size_t u = lo; u <= hi; ++u) {
      auto it = table[u].find(key);
      if (it != table[u].end()) ++count[it->second];
    }
    std::string best = current;
    for (const auto& [label, c] : count)
      if (c > count[best]) best = label;
    return best;
  };
  std::vector<FrameDetection> out = dets;
  for (std::size_t f = 0; f < dets.size(); ++f) {
    for (auto& g : out[f].groups) g.label = vote(glabel, f, g.members, g.label);
    for (auto& l : out[f].links)
      l.label = vote(llabel, f, std::pair{dets[f].group(l.first)->members, dets[f].group(l.second)->members}, l.label);
  }
  dets = std::move(out);
}

/// Every frame of the track range (or `range`), in order.
inline std::vector<FrameDetection> run_pipeline(const ActivityModelBank& bank_in, const TrackSet& tracks,
                                                const PipelineConfig& cfg,
                                                std::optional<FrameInterval> range = std::nullopt,
                                                PipelineDiagnostics* diag = nullptr) {
  cfg.validate();
  const auto bank = configured_bank(bank_in, cfg);
  std::vector<FrameDetection> out;
  const auto tr = tracks.frame_range();
  if (!tr) return out;
  const FrameInterval r = range ? *range : *tr;
  for (Frame t = r.first; t <= r.last; ++t) {
    FrameContext ctx(bank, tracks, t);
    out.push_back(detect_frame(ctx, cfg));
    if (diag) {
      ++diag->frames;
      diag->profiles += ctx.profiles_computed();
      diag->max_normalization_error = std::max(diag->max_normalization_error, ctx.max_normalization_error());
    }
  }
  if (cfg.smooth) smooth_detections(out);
  return out;
}

// ---------------------------------------------------------------------------
// Detection files: one JSON object per frame, keys in sorted order.

inline nlohmann::json detection_to_json(const FrameDetection& d) {
  using nlohmann::json;
  json groups = json::array();
  for (const auto& g : d.groups) {
    json jg = {{"id", g.id}, {"members", g.members}, {"label", g.label}};
    if (g.gr) {
      json jr = {{"kind", g.gr->kind}, {"subset", g.gr->subset}, {"fallback", g.gr->fallback}};
      if (g.gr->person) jr["person"] = *g.gr->person;
      jg["gr"] = std::move(jr);
    }
    groups.push_back(std::move(jg));
  }
  json links = json::array();
  for (const auto& l : d.links) links.push_back({{"groups", {l.first, l.second}}, {"label", l.label}});
  json j = {{"frame", d.frame}, {"groups", std::move(groups)}, {"links", std::move(links)}};
  if (!d.skipped.empty()) j["skipped"] = d.skipped;
  return j;
}

inline FrameDetection detection_from_json(const nlohmann::json& j) {
  FrameDetection d;
  d.frame = j.at("frame").get<Frame>();
  for (const auto& jg : j.at("groups")) {
    DetectedGroup g{jg.at("id").get<std::string>(), jg.at("members").get<std::vector<PersonId>>(),
                    jg.at("label").get<std::string>(), std::nullopt};
    std::sort(g.members.begin(), g.members.end());
    if (jg.contains("gr")) {
      const auto& jr = jg.at("gr");
      GrDebug r{jr.at("kind").get<std::string>(), std::nullopt, jr.at("subset").get<std::vector<PersonId>>(),
                jr.at("fallback").get<bool>()};
      if (jr.contains("person")) r.person = jr.at("person").get<PersonId>();
      g.gr = std::move(r);
    }
    d.groups.push_back(std::move(g));
  }
  for (const auto& jl : j.at("links")) {
    const auto ids = jl.at("groups").get<std::vector<std::string>>();
    if (ids.size() != 2) throw DataError("link must name two groups");
    if (!d.group(ids[0]) || !d.group(ids[1])) throw DataError("link references unknown group");
    d.links.push_back({ids[0], ids[1], jl.at("label").get<std::string>()});
  }
  if (j.contains("skipped")) d.skipped = j.at("skipped").get<std::string>();
  return d;
}

inline void write_detections(std::ostream& out, std::span<const FrameDetection> dets) {
  for (const auto& d : dets) out << detection_to_json(d).dump() << '\n';
}

inline std::vector<FrameDetection> parse_detections(std::istream& in) {
  std::vector<FrameDetection> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (detail::trim(line).empty()) continue;
    try {
      out.push_back(detection_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(detail::at_line(n, std::string("bad detection record: ") + e.what()));
    } catch (const DataError& e) {
      throw DataError(detail::at_line(n, e.what()));
    }
  }
  return out;
}

/// Ground truth as detections: one record per annotated frame, groups in
/// annotation order with ids taken from the annotations.
inline std::vector<FrameDetection> truth_detections(const AnnotationSet& truth) {
  std::vector<FrameDetection> out;
  const auto r = truth.frame_range();
  if (!r) return out;
  for (Frame t = r->first; t <= r->last; ++t) {
    if (!truth.annotated(t)) continue;
    const auto tf = truth.at(t);
    FrameDetection d;
    d.frame = t;
    for (const auto& g : tf.groups) d.groups.push_back({g.id, g.members, g.label, std::nullopt});
    for (const auto& l : tf.links) d.links.push_back({tf.groups[l.first].id, tf.groups[l.second].id, l.label});
    out.push_back(std::move(d));
  }
  return out;
}

} // namespace groupact
