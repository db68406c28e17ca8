#include <gtest/gtest.h>

#include <cmath>

#include <groupact/simgen.hpp>

#include "scenario_bank.hpp"

using namespace groupact;
using nlohmann::json;

namespace {

ScenarioSpec quiet(const std::string& text) {
  auto s = scenario_from_json(json::parse(text));
  s.noise = 0;
  s.box_noise = 0;
  return s;
}

double centroid_distance(const TrackSet& ts, Frame t, const std::vector<PersonId>& a, const std::vector<PersonId>& b) {
  auto centre = [&](const std::vector<PersonId>& g) {
    double x = 0, y = 0;
    for (PersonId p : g) x += ts.at(t, p)->x, y += ts.at(t, p)->y;
    return std::pair{x / static_cast<double>(g.size()), y / static_cast<double>(g.size())};
  };
  const auto [ax, ay] = centre(a);
  const auto [bx, by] = centre(b);
  return std::hypot(ax - bx, ay - by);
}

} // namespace

TEST(Simgen, DeterministicPerSeed) {
  const auto spec = scenarios::load("fight_approach");
  const auto a = generate(spec), b = generate(spec);
  EXPECT_EQ(a.tracks, b.tracks);
  EXPECT_EQ(a.annotations.records(), b.annotations.records());
  auto other = spec;
  other.seed += 1;
  EXPECT_FALSE(generate(other).tracks == a.tracks);
}

TEST(Simgen, EveryScenarioGenerates) {
  for (const auto& name : scenarios::all_names()) {
    const auto spec = scenarios::load(name);
    const auto sc = generate(spec);
    EXPECT_EQ(sc.tracks.size(), spec.agents.size() * static_cast<std::size_t>(spec.duration)) << name;
    // A multi-member group plus at least one other group.
    EXPECT_GE(spec.agents.size(), 3u) << name;
    for (Frame t = 0; t < spec.duration; ++t) {
      const auto tf = sc.annotations.at(t);
      std::size_t covered = 0;
      for (const auto& g : tf.groups) covered += g.members.size();
      ASSERT_EQ(covered, spec.agents.size()) << name << " frame " << t;
      const std::size_t pairs = tf.groups.size() * (tf.groups.size() - 1) / 2;
      ASSERT_EQ(tf.links.size(), pairs) << name << " frame " << t;
    }
  }
}

TEST(Simgen, AnnotationsFillSinglesAndIgnore) {
  const auto sc = generate(quiet(R"({"seed":1,"duration":20,
      "agents":[{"id":1,"x":0,"y":0},{"id":2,"x":30,"y":0},{"id":3,"x":500,"y":0}],
      "groups":[{"id":"g","activity":"WalkTogether","members":[1,2],"frames":[5,19],"velocity":[1,0]},
                {"id":"a","activity":"single","members":[3]}],
      "interactions":[{"activity":"Approach","groups":["a","g"],"frames":[10,19]}]})"));
  const auto& ann = sc.annotations;
  ASSERT_TRUE(ann.group("s1"));
  EXPECT_EQ(ann.group("s1")->frames, (FrameInterval{0, 4}));
  EXPECT_FALSE(ann.group("s3"));
  const auto early = ann.at(2);
  EXPECT_EQ(early.groups.size(), 3u);
  for (const auto& l : early.links) EXPECT_EQ(l.label, "Ignore");
  EXPECT_EQ(early.links.size(), 3u);
  const auto mid = ann.at(7);
  ASSERT_EQ(mid.links.size(), 1u);
  EXPECT_EQ(mid.links[0].label, "Ignore");
  const auto late = ann.at(15);
  ASSERT_EQ(late.links.size(), 1u);
  EXPECT_EQ(late.links[0].label, "Approach");
  EXPECT_EQ(late.groups[late.links[0].first].id, "a");
}

TEST(Simgen, DelayedMemberLagsTheGroup) {
  const auto spec = quiet(R"({"seed":4,"duration":60,"agents":[{"id":1,"x":0,"y":0},{"id":2,"x":30,"y":0}],
      "groups":[{"id":"g","activity":"WalkTogether","members":[1,2],"velocity":[1.5,0.5],"async":{"2":5}}]})");
  const auto ts = generate(spec).tracks;
  for (Frame t = 0; t < 5; ++t) EXPECT_DOUBLE_EQ(ts.at(t, 2)->x, 30.0);
  for (Frame t = 6; t < 60; ++t) {
    const double lead = ts.at(t - 5, 1)->x - ts.at(t - 6, 1)->x;
    const double lag = ts.at(t, 2)->x - ts.at(t - 1, 2)->x;
    EXPECT_NEAR(lag, lead, 1e-9) << t;
  }
}

TEST(Simgen, DriftSeparatesAnOutlier) {
  const auto spec = quiet(R"({"seed":4,"duration":50,"gait_amplitude":0,"agents":[{"id":1,"x":0,"y":0},{"id":2,"x":30,"y":0}],
      "groups":[{"id":"g","activity":"InGroup","members":[1,2],"drift":{"2":[0.5,-0.2]}}]})");
  const auto ts = generate(spec).tracks;
  EXPECT_NEAR(ts.at(49, 1)->x, 0.0, 1e-9);
  EXPECT_NEAR(ts.at(49, 2)->x - 30.0, 49 * 0.5, 1e-9);
  EXPECT_NEAR(ts.at(49, 2)->y, -49 * 0.2, 1e-9);
}

TEST(Simgen, InteractionsMoveGroups) {
  const auto base = std::string(R"({"seed":2,"duration":100,"agents":[{"id":1,"x":0,"y":0},{"id":2,"x":20,"y":0},
      {"id":3,"x":300,"y":0}],"groups":[{"id":"g","activity":"WalkTogether","members":[1,2]},
      {"id":"a","activity":"single","members":[3]}],"interactions":[)");
  const std::vector<PersonId> g{1, 2}, a{3};
  const auto approach = generate(quiet(base + R"({"activity":"Approach","groups":["a","g"],"speed":1.0}]})")).tracks;
  EXPECT_LT(centroid_distance(approach, 99, g, a), centroid_distance(approach, 0, g, a) - 50);
  EXPECT_DOUBLE_EQ(approach.at(99, 1)->x, approach.at(0, 1)->x);
  const auto split = generate(quiet(base + R"({"activity":"Split","groups":["a","g"],"vector":[1.0,0]}]})")).tracks;
  EXPECT_GT(centroid_distance(split, 99, g, a), centroid_distance(split, 0, g, a) + 100);
  EXPECT_LT(split.at(99, 1)->x, split.at(0, 1)->x);
}

TEST(Simgen, FightDefaultsToJitter) {
  const auto spec = scenario_from_json(json::parse(R"({"agents":[{"id":1,"x":0,"y":0},{"id":2,"x":9,"y":0}],
      "groups":[{"id":"f","activity":"Fight","members":[1,2]}]})"));
  EXPECT_DOUBLE_EQ(spec.groups[0].jitter, 2.5);
  EXPECT_DOUBLE_EQ(spec.groups[0].box_jitter, 0.25);
  EXPECT_EQ(spec.groups[0].frames, (FrameInterval{0, 299}));
}

TEST(Simgen, ValidationErrors) {
  auto bad = [](const std::string& text) {
    EXPECT_THROW(generate(scenario_from_json(json::parse(text))), DataError) << text;
  };
  bad(R"({"agents":[{"id":1,"x":0,"y":0},{"id":1,"x":0,"y":0}]})");
  bad(R"({"agents":[{"id":1,"x":0,"y":0}],"groups":[{"id":"g","activity":"Chase","members":[1]}]})");
  bad(R"({"agents":[{"id":1,"x":0,"y":0}],"groups":[{"id":"g","activity":"Fight","members":[2]}]})");
  bad(R"({"agents":[{"id":1,"x":0,"y":0}],"groups":[{"id":"g","activity":"Fight","members":[1],"frames":[0,400]}]})");
  bad(R"({"agents":[{"id":1,"x":0,"y":0}],"groups":[{"id":"g","activity":"Fight","members":[1]},
      {"id":"h","activity":"Fight","members":[1]}]})");
  bad(R"({"agents":[{"id":1,"x":0,"y":0}],"groups":[{"id":"g","activity":"Fight","members":[1]}],
      "interactions":[{"activity":"Approach","groups":["g","x"]}]})");
  bad(R"({"agents":[{"id":1,"x":0,"y":0}],"groups":[{"id":"g","activity":"Fight","members":[1],"async":{"1":-2}}]})");
  bad(R"({"duration":1,"agents":[{"id":1,"x":0,"y":0}]})");
  EXPECT_THROW(scenario_from_json(json::parse(R"({"agents":[{"id":1}]})")), DataError);
  EXPECT_THROW(scenario_from_json(json::parse(R"({"agents":[{"id":1,"x":0,"y":0,"velocity":[1]}]})")), DataError);
}
