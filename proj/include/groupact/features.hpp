#pragma once

// Bounding-box features: the six pairwise observations, the five group
// observations and the per-person body-size change.

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "common.hpp"
#include "trackio.hpp"

namespace groupact {

struct Box {
  double x = 0, y = 0, w = 1, h = 1;
  friend bool operator==(const Box&, const Box&) = default;
};

/// A person's state at frame t together with frame t-1: every feature is a
/// function of these eight numbers, and averaging them builds the virtual
/// people used as seed and group representatives.
struct MotionFrame {
  Box prev;
  Box cur;
  friend bool operator==(const MotionFrame&, const MotionFrame&) = default;
};

// Consecutive motion frames ending at some frame; the last entry is "now".
using Trajectory = std::vector<MotionFrame>;

struct PairObservation {
  static constexpr std::size_t kDim = 6;

  double change_of_width = 0;
  double change_of_height = 0;
  double speed = 0;
  double average_distance = 0;
  double speed_difference = 0;
  double motion_direction_angle = 0;

  std::array<double, kDim> values() const {
    return {change_of_width, change_of_height, speed, average_distance, speed_difference, motion_direction_angle};
  }
};

struct GroupObservation {
  static constexpr std::size_t kDim = 5;

  double avg_change_of_width = 0;
  double avg_change_of_height = 0;
  double avg_speed = 0;
  double avg_distance = 0;
  double speed_variance = 0;

  std::array<double, kDim> values() const {
    return {avg_change_of_width, avg_change_of_height, avg_speed, avg_distance, speed_variance};
  }
};

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

inline double speed(const MotionFrame& m) { return std::hypot(m.cur.x - m.prev.x, m.cur.y - m.prev.y); }

// Direction of displacement; 0 for a stationary person.
inline double heading(const MotionFrame& m) {
  const double dx = m.cur.x - m.prev.x, dy = m.cur.y - m.prev.y;
  if (dx == 0.0 && dy == 0.0) return 0.0;
  return std::atan2(dy, dx);
}

/// Features of `i` when correlating it with `j`.
inline PairObservation pair_observation(const MotionFrame& i, const MotionFrame& j) {
  PairObservation o;
  o.change_of_width = std::abs(i.cur.w - i.prev.w) / i.cur.w;
  o.change_of_height = std::abs(i.cur.h - i.prev.h) / i.cur.h;
  o.speed = speed(i);
  const double mx = (i.cur.x + j.cur.x) / 2.0, my = (i.cur.y + j.cur.y) / 2.0;
  o.average_distance = std::hypot(i.cur.x - mx, i.cur.y - my);
  o.speed_difference = (o.speed - speed(j)) / 2.0;
  o.motion_direction_angle = wrap_angle(heading(i) - heading(j));
  return o;
}

/// |W(t)H(t) - W(t-1)H(t-1)| / (W(t)H(t)).
inline double body_size_change(const MotionFrame& m) {
  const double now = m.cur.w * m.cur.h;
  return std::abs(now - m.prev.w * m.prev.h) / now;
}

inline GroupObservation group_observation(std::span<const MotionFrame> members) {
  if (members.empty()) throw std::invalid_argument("group_observation: empty group");
  const double n = static_cast<double>(members.size());
  GroupObservation g;
  double cx = 0, cy = 0;
  for (const auto& m : members) {
    g.avg_change_of_width += std::abs(m.cur.w - m.prev.w) / m.cur.w;
    g.avg_change_of_height += std::abs(m.cur.h - m.prev.h) / m.cur.h;
    g.avg_speed += speed(m);
    cx += m.cur.x;
    cy += m.cur.y;
  }
  g.avg_change_of_width /= n;
  g.avg_change_of_height /= n;
  g.avg_speed /= n;
  cx /= n;
  cy /= n;
  for (const auto& m : members) {
    g.avg_distance += std::hypot(m.cur.x - cx, m.cur.y - cy);
    const double d = speed(m) - g.avg_speed;
    g.speed_variance += d * d;
  }
  g.avg_distance /= n;
  g.speed_variance /= n;
  return g;
}

inline MotionFrame mean_frame(std::span<const MotionFrame> frames) {
  if (frames.empty()) throw std::invalid_argument("mean_frame: no frames");
  MotionFrame m{{0, 0, 0, 0}, {0, 0, 0, 0}};
  for (const auto& f : frames) {
    m.prev.x += f.prev.x, m.prev.y += f.prev.y, m.prev.w += f.prev.w, m.prev.h += f.prev.h;
    m.cur.x += f.cur.x, m.cur.y += f.cur.y, m.cur.w += f.cur.w, m.cur.h += f.cur.h;
  }
  const double n = static_cast<double>(frames.size());
  for (Box* b : {&m.prev, &m.cur}) b->x /= n, b->y /= n, b->w /= n, b->h /= n;
  return m;
}

// ---------------------------------------------------------------------------
// Track lookups. A missing sample yields std::nullopt (the frame is skipped).

inline std::optional<MotionFrame> motion_frame(const TrackSet& tracks, PersonId p, Frame t) {
  const auto* cur = tracks.at(t, p);
  const auto* prev = t > 0 ? tracks.at(t - 1, p) : nullptr;
  if (!cur || !prev) return std::nullopt;
  return MotionFrame{{prev->x, prev->y, prev->w, prev->h}, {cur->x, cur->y, cur->w, cur->h}};
}

inline std::optional<PairObservation> pair_observation(const TrackSet& tracks, PersonId i, PersonId j, Frame t) {
  auto mi = motion_frame(tracks, i, t);
  auto mj = motion_frame(tracks, j, t);
  if (!mi || !mj) return std::nullopt;
  return pair_observation(*mi, *mj);
}

inline std::optional<double> body_size_change(const TrackSet& tracks, PersonId p, Frame t) {
  auto m = motion_frame(tracks, p, t);
  if (!m) return std::nullopt;
  return body_size_change(*m);
}

inline std::optional<GroupObservation> group_observation(const TrackSet& tracks, std::span<const PersonId> members,
                                                         Frame t) {
  if (members.empty()) throw std::invalid_argument("group_observation: empty group");
  std::vector<MotionFrame> frames;
  for (PersonId p : members) {
    auto m = motion_frame(tracks, p, t);
    if (!m) return std::nullopt;
    frames.push_back(*m);
  }
  return group_observation(frames);
}

/// Longest run of consecutive motion frames ending at `t`, capped at
/// `max_len`. Empty when the person lacks samples at t or t-1.
inline Trajectory trajectory(const TrackSet& tracks, PersonId p, Frame t, std::size_t max_len) {
  Trajectory out;
  for (Frame u = t; out.size() < max_len; --u) {
    auto m = motion_frame(tracks, p, u);
    if (!m) break;
    out.push_back(*m);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Sequences over windows. Trajectories of different lengths are aligned at
// their last frame and cut to the shortest.

inline std::size_t common_length(std::span<const Trajectory* const> trajs) {
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto* tr : trajs) n = std::min(n, tr->size());
  return trajs.empty() ? 0 : n;
}

/// Pair observations of `a` with respect to `b` over their common window.
inline Sequence pair_features(const Trajectory& a, const Trajectory& b) {
  const std::size_t n = std::min(a.size(), b.size());
  Sequence seq(PairObservation::kDim);
  for (std::size_t k = 0; k < n; ++k) {
    const auto v = pair_observation(a[a.size() - n + k], b[b.size() - n + k]).values();
    seq.push_back(v);
  }
  return seq;
}

inline Trajectory mean_trajectory(std::span<const Trajectory* const> trajs) {
  const std::size_t n = common_length(trajs);
  Trajectory out(n);
  std::vector<MotionFrame> frame(trajs.size());
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = 0; m < trajs.size(); ++m) frame[m] = (*trajs[m])[trajs[m]->size() - n + k];
    out[k] = mean_frame(frame);
  }
  return out;
}

inline Sequence group_features(std::span<const Trajectory* const> trajs) {
  const std::size_t n = common_length(trajs);
  Sequence seq(GroupObservation::kDim);
  std::vector<MotionFrame> frame(trajs.size());
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t m = 0; m < trajs.size(); ++m) frame[m] = (*trajs[m])[trajs[m]->size() - n + k];
    seq.push_back(group_observation(frame).values());
  }
  return seq;
}

// Mean of the per-frame group average speed; orders groups for the
// inter-group metric.
inline double mean_group_speed(std::span<const Trajectory* const> trajs) {
  const std::size_t n = common_length(trajs);
  if (n == 0) return 0.0;
  double total = 0;
  for (const auto* tr : trajs)
    for (std::size_t k = tr->size() - n; k < tr->size(); ++k) total += speed((*tr)[k]);
  return total / static_cast<double>(n * trajs.size());
}

} // namespace groupact
