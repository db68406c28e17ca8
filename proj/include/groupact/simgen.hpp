#pragma once

// Deterministic multi-agent scenarios with exact ground truth.
//
// Agents move by constant-velocity kinematics. A symmetric group moves its
// members with a shared velocity profile (with a walking-gait oscillation);
// a member may follow that profile with a delay of k frames. Inter-group
// events override the velocity of the groups involved: Approach and Chase
// steer the first group toward the second, Split drives the two groups
// apart. People left out of every group become "single" groups, and every
// pair of co-existing groups without an event is annotated Ignore.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "taxonomy.hpp"
#include "trackio.hpp"

namespace groupact {

struct Vec2 {
  double x = 0, y = 0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct AgentSpec {
  PersonId id = 0;
  Vec2 position;
  double w = 20, h = 50;
  Vec2 velocity;  // used while the agent is in no group
};

struct GroupEventSpec {
  std::string id;
  std::string activity;
  std::vector<PersonId> members;
  FrameInterval frames;
  Vec2 velocity;
  double jitter = 0;                    // per-frame positional jitter around the anchor (px)
  double box_jitter = 0;                // relative per-frame box scale jitter
  std::map<PersonId, int> async;        // member -> delay of the velocity profile (frames)
  std::map<PersonId, Vec2> drift;       // member -> extra velocity (planted outliers)
};

struct InteractionSpec {
  std::string activity;
  std::array<std::string, 2> groups;  // [actor, target]
  FrameInterval frames;
  double speed = 1.0;  // Approach, Chase: speed of the actor toward the target
  Vec2 vector;         // Split: velocity of the actor; the target moves opposite
};

struct ScenarioSpec {
  std::uint64_t seed = 0;
  Frame duration = 300;
  double noise = 0.2;       // positional Gaussian sigma (px)
  double box_noise = 0.01;  // relative Gaussian sigma of w and h
  double gait_amplitude = 0.25;
  double gait_period = 16;
  std::vector<AgentSpec> agents;
  std::vector<GroupEventSpec> groups;
  std::vector<InteractionSpec> interactions;
};

struct Scenario {
  TrackSet tracks;
  AnnotationSet annotations;
};

namespace detail {

inline Vec2 vec_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 2) throw DataError("vector must have two components");
  return {v[0], v[1]};
}

inline FrameInterval interval_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<Frame>>();
  if (v.size() != 2) throw DataError("frames must be [first, last]");
  return {v[0], v[1]};
}

} // namespace detail

inline ScenarioSpec scenario_from_json(const nlohmann::json& j) {
  try {
    ScenarioSpec s;
    s.seed = j.value("seed", std::uint64_t{0});
    s.duration = j.value("duration", Frame{300});
    s.noise = j.value("noise", 0.2);
    s.box_noise = j.value("box_noise", 0.01);
    s.gait_amplitude = j.value("gait_amplitude", 0.25);
    s.gait_period = j.value("gait_period", 16.0);
    for (const auto& a : j.at("agents")) {
      AgentSpec ag;
      ag.id = a.at("id").get<PersonId>();
      ag.position = {a.at("x").get<double>(), a.at("y").get<double>()};
      ag.w = a.value("w", 20.0);
      ag.h = a.value("h", 50.0);
      if (a.contains("velocity")) ag.velocity = detail::vec_from(a.at("velocity"));
      s.agents.push_back(ag);
    }
    const auto groups = j.value("groups", nlohmann::json::array());
    for (const auto& g : groups) {
      GroupEventSpec e;
      e.id = g.at("id").get<std::string>();
      e.activity = g.at("activity").get<std::string>();
      e.members = g.at("members").get<std::vector<PersonId>>();
      e.frames = g.contains("frames") ? detail::interval_from(g.at("frames")) : FrameInterval{0, s.duration - 1};
      if (g.contains("velocity")) e.velocity = detail::vec_from(g.at("velocity"));
      e.jitter = g.value("jitter", e.activity == "Fight" ? 2.5 : 0.0);
      e.box_jitter = g.value("box_jitter", e.activity == "Fight" ? 0.25 : 0.0);
      const auto async = g.value("async", nlohmann::json::object());
      for (const auto& [k, v] : async.items()) e.async[std::stoll(k)] = v.get<int>();
      const auto drift = g.value("drift", nlohmann::json::object());
      for (const auto& [k, v] : drift.items()) e.drift[std::stoll(k)] = detail::vec_from(v);
      s.groups.push_back(std::move(e));
    }
    const auto interactions = j.value("interactions", nlohmann::json::array());
    for (const auto& i : interactions) {
      InteractionSpec e;
      e.activity = i.at("activity").get<std::string>();
      const auto gs = i.at("groups").get<std::vector<std::string>>();
      if (gs.size() != 2) throw DataError("interaction must name two groups");
      e.groups = {gs[0], gs[1]};
      e.frames = i.contains("frames") ? detail::interval_from(i.at("frames")) : FrameInterval{0, s.duration - 1};
      e.speed = i.value("speed", 1.0);
      if (i.contains("vector")) e.vector = detail::vec_from(i.at("vector"));
      s.interactions.push_back(std::move(e));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad scenario spec: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("bad scenario spec: ") + e.what());
  }
}

inline void validate(const ScenarioSpec& s, const Taxonomy& tax) {
  if (s.duration < 2) throw DataError("scenario: duration must be at least 2 frames");
  if (!(s.noise >= 0) || !(s.box_noise >= 0)) throw DataError("scenario: noise must be non-negative");
  std::set<PersonId> ids;
  for (const auto& a : s.agents) {
    if (!ids.insert(a.id).second) throw DataError("scenario: duplicate agent " + std::to_string(a.id));
    if (!(a.w > 0 && a.h > 0)) throw DataError("scenario: agent boxes must have positive size");
  }
  auto check_interval = [&](const FrameInterval& f, const std::string& what) {
    if (f.first < 0 || f.last >= s.duration || f.first > f.last)
      throw DataError("scenario: " + what + " interval outside the duration");
  };
  std::set<std::string> gids;
  for (std::size_t g = 0; g < s.groups.size(); ++g) {
    const auto& e = s.groups[g];
    const auto* info = tax.find(e.activity);
    if (!info || !info->group_level()) throw DataError("scenario: group " + e.id + " has no group activity");
    if (!gids.insert(e.id).second) throw DataError("scenario: duplicate group " + e.id);
    if (e.members.empty()) throw DataError("scenario: group " + e.id + " is empty");
    check_interval(e.frames, "group " + e.id);
    for (PersonId p : e.members)
      if (!ids.contains(p)) throw DataError("scenario: group " + e.id + " references missing agent " + std::to_string(p));
    for (const auto& [p, k] : e.async)
      if (k < 0 || std::find(e.members.begin(), e.members.end(), p) == e.members.end())
        throw DataError("scenario: bad asynchrony entry in group " + e.id);
    for (std::size_t h = 0; h < g; ++h) {
      const auto& o = s.groups[h];
      if (o.frames.first > e.frames.last || e.frames.first > o.frames.last) continue;
      for (PersonId p : e.members)
        if (std::find(o.members.begin(), o.members.end(), p) != o.members.end())
          throw DataError("scenario: agent " + std::to_string(p) + " in overlapping groups " + o.id + " and " + e.id);
    }
  }
  for (std::size_t i = 0; i < s.interactions.size(); ++i) {
    const auto& e = s.interactions[i];
    const auto* info = tax.find(e.activity);
    if (!info || !info->intergroup()) throw DataError("scenario: '" + e.activity + "' is not an inter-group activity");
    check_interval(e.frames, "interaction");
    for (const auto& g : e.groups)
      if (!gids.contains(g)) throw DataError("scenario: interaction references missing group " + g);
    if (e.groups[0] == e.groups[1]) throw DataError("scenario: interaction of a group with itself");
    for (std::size_t h = 0; h < i; ++h) {
      const auto& o = s.interactions[h];
      if (o.frames.first > e.frames.last || e.frames.first > o.frames.last) continue;
      for (const auto& g : e.groups)
        if (g == o.groups[0] || g == o.groups[1])
          throw DataError("scenario: group " + g + " is in two overlapping interactions");
    }
  }
}

/// Tracks and annotations; bit-identical for identical specs.
inline Scenario generate(const ScenarioSpec& spec, const Taxonomy& tax = Taxonomy::standard()) {
  validate(spec, tax);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const std::size_t n = spec.agents.size();
  const Frame T = spec.duration;

  std::map<PersonId, std::size_t> index;
  for (std::size_t a = 0; a < n; ++a) index[spec.agents[a].id] = a;

  // Group of each agent per frame (-1: none).
  std::vector<std::vector<int>> group_of(n, std::vector<int>(static_cast<std::size_t>(T), -1));
  for (std::size_t g = 0; g < spec.groups.size(); ++g)
    for (PersonId p : spec.groups[g].members)
      for (Frame t = spec.groups[g].frames.first; t <= spec.groups[g].frames.last; ++t)
        group_of[index[p]][static_cast<std::size_t>(t)] = static_cast<int>(g);
  std::map<std::string, std::size_t> gindex;
  for (std::size_t g = 0; g < spec.groups.size(); ++g) gindex[spec.groups[g].id] = g;

  std::vector<Vec2> anchor(n);
  for (std::size_t a = 0; a < n; ++a) anchor[a] = spec.agents[a].position;
  std::vector<MbbSample> samples;
  samples.reserve(n * static_cast<std::size_t>(T));
  const double omega = 2.0 * std::numbers::pi / spec.gait_period;

  auto centroid = [&](std::size_t g) {
    Vec2 c;
    for (PersonId p : spec.groups[g].members) c.x += anchor[index[p]].x, c.y += anchor[index[p]].y;
    const double k = static_cast<double>(spec.groups[g].members.size());
    return Vec2{c.x / k, c.y / k};
  };

  std::vector<std::vector<Vec2>> history;  // group velocities per frame
  for (Frame t = 0; t < T; ++t) {
    // Base velocity of each group at this frame; interactions override it.
    std::vector<Vec2> gvel(spec.groups.size());
    for (std::size_t g = 0; g < spec.groups.size(); ++g) gvel[g] = spec.groups[g].velocity;
    for (const auto& e : spec.interactions) {
      if (!e.frames.contains(t)) continue;
      const std::size_t actor = gindex[e.groups[0]], target = gindex[e.groups[1]];
      if (e.activity == "Split") {
        gvel[actor] = e.vector;
        gvel[target] = {-e.vector.x, -e.vector.y};
      } else if (e.activity == "Approach" || e.activity == "Chase") {
        const Vec2 a = centroid(actor), b = centroid(target);
        const double dx = b.x - a.x, dy = b.y - a.y, d = std::hypot(dx, dy);
        gvel[actor] = d > 1e-9 ? Vec2{e.speed * dx / d, e.speed * dy / d} : Vec2{};
      }
    }
    history.push_back(gvel);
    for (std::size_t a = 0; a < n; ++a) {
      const auto& ag = spec.agents[a];
      const int g = group_of[a][static_cast<std::size_t>(t)];
      Vec2 v = ag.velocity;
      double jitter = 0, box_jitter = 0;
      int delay = 0;
      if (g >= 0) {
        const auto& ge = spec.groups[static_cast<std::size_t>(g)];
        jitter = ge.jitter;
        box_jitter = ge.box_jitter;
        if (auto it = ge.async.find(ag.id); it != ge.async.end()) delay = it->second;
        v = t >= delay ? history[static_cast<std::size_t>(t - delay)][static_cast<std::size_t>(g)] : Vec2{};
        if (auto it = ge.drift.find(ag.id); it != ge.drift.end()) v.x += it->second.x, v.y += it->second.y;
      }
      // Walking gait: speed and width oscillate; a delayed member lags the
      // group's profile by `delay` frames and is still at rest before it.
      const double phase = omega * static_cast<double>(t - delay);
      const double gait = t >= delay ? 1.0 + spec.gait_amplitude * std::sin(phase) : 0.0;
      if (t > 0) anchor[a].x += v.x * gait, anchor[a].y += v.y * gait;
      const bool moving = std::hypot(v.x, v.y) > 1e-9;
      const double sway = moving ? 1.0 + 0.1 * spec.gait_amplitude * std::sin(2 * phase) : 1.0;
      const double jx = jitter > 0 ? jitter * unit(rng) : 0.0;
      const double jy = jitter > 0 ? jitter * unit(rng) : 0.0;
      const double scale = box_jitter > 0 ? std::clamp(1.0 + box_jitter * unit(rng), 0.5, 1.5) : 1.0;
      MbbSample s;
      s.frame = t;
      s.person = ag.id;
      s.x = anchor[a].x + jx + spec.noise * unit(rng);
      s.y = anchor[a].y + jy + spec.noise * unit(rng);
      s.w = ag.w * sway * scale * std::max(0.2, 1.0 + spec.box_noise * unit(rng));
      s.h = ag.h * scale * std::max(0.2, 1.0 + spec.box_noise * unit(rng));
      samples.push_back(s);
    }
  }

  // Annotations: declared groups, "single" groups for uncovered spans, the
  // planted interactions, and Ignore for every other co-existing pair.
  std::vector<AnnotationRecord> recs;
  for (const auto& g : spec.groups)
    recs.push_back({AnnotationLevel::Symmetric, g.activity, g.frames, g.id, g.members, {}});
  for (std::size_t a = 0; a < n; ++a) {
    Frame t = 0;
    int k = 0;
    while (t < T) {
      if (group_of[a][static_cast<std::size_t>(t)] >= 0) {
        ++t;
        continue;
      }
      Frame u = t;
      while (u + 1 < T && group_of[a][static_cast<std::size_t>(u + 1)] < 0) ++u;
      const std::string id = "s" + std::to_string(spec.agents[a].id) + (k ? "_" + std::to_string(k) : "");
      recs.push_back({AnnotationLevel::Symmetric, std::string(kSingle), {t, u}, id, {spec.agents[a].id}, {}});
      ++k;
      t = u + 1;
    }
  }
  const std::size_t nsym = recs.size();
  for (const auto& e : spec.interactions) recs.push_back({AnnotationLevel::Intergroup, e.activity, e.frames, {}, {}, e.groups});
  for (std::size_t x = 0; x < nsym; ++x)
    for (std::size_t y = x + 1; y < nsym; ++y) {
      const auto& rx = recs[x];
      const auto& ry = recs[y];
      const Frame lo = std::max(rx.frames.first, ry.frames.first), hi = std::min(rx.frames.last, ry.frames.last);
      Frame start = -1;
      for (Frame t = lo; t <= hi + 1; ++t) {
        bool free = t <= hi;
        if (free)
          for (const auto& e : spec.interactions)
            if (e.frames.contains(t) && ((e.groups[0] == rx.group_id && e.groups[1] == ry.group_id) ||
                                         (e.groups[0] == ry.group_id && e.groups[1] == rx.group_id)))
              free = false;
        if (free && start < 0) start = t;
        if (!free && start >= 0) {
          recs.push_back({AnnotationLevel::Intergroup, std::string(kIgnore), {start, t - 1}, {}, {}, {rx.group_id, ry.group_id}});
          start = -1;
        }
      }
    }
  return {TrackSet::from_samples(std::move(samples)), AnnotationSet(std::move(recs), tax)};
}

} // namespace groupact
