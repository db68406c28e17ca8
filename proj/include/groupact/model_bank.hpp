#pragma once

// Per-activity models and their versioned JSON file format.

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "ahmm.hpp"
#include "hmm.hpp"
#include "taxonomy.hpp"

namespace groupact {

inline constexpr std::string_view kModelFormatVersion = "1";

/// Pairwise activities carry a two-stream model over pair features;
/// group-level activities carry an HMM over group features. Symmetric
/// grouping activities have both.
struct ActivityModel {
  std::string name;
  ActivityKind kind = ActivityKind::Symmetric;
  std::optional<PairModel> pair;
  std::optional<GroupModel> group;
  bool mixture_fallback = false;

  friend bool operator==(const ActivityModel&, const ActivityModel&) = default;
};

struct BankConfig {
  std::size_t window = 25;  // correlation window L (frames)
  std::size_t slack = 5;    // alignment slack at the window end
  double tc = 0.1;          // active-person threshold
  double to = 0.95;         // pair-seed correlation threshold
  double tr = 0.3;          // representative-subset threshold

  friend bool operator==(const BankConfig&, const BankConfig&) = default;
};

struct ActivityModelBank {
  Taxonomy taxonomy;
  std::map<std::string, ActivityModel, std::less<>> models;
  BankConfig config;

  const ActivityModel& at(std::string_view name) const {
    auto it = models.find(name);
    if (it == models.end()) throw ModelError("no model for activity " + std::string(name));
    return it->second;
  }

  void validate() const {
    if (config.window < 2) throw ModelError("model bank: window must be at least 2");
    if (config.slack >= config.window) throw ModelError("model bank: slack must be below the window length");
    std::size_t pair_dim = 0;
    for (const auto& a : taxonomy.activities()) {
      const auto it = models.find(a.name);
      if (it == models.end()) throw ModelError("model bank: missing model for " + a.name);
      const auto& m = it->second;
      if (m.kind != a.kind) throw ModelError("model bank: kind mismatch for " + a.name);
      if (a.pairwise) {
        if (!m.pair) throw ModelError("model bank: missing pair model for " + a.name);
        m.pair->validate();
        if (pair_dim == 0) pair_dim = m.pair->dim();
        if (m.pair->dim() != pair_dim) throw ModelError("model bank: pair models disagree on dimension");
      }
      if (a.group_level() && !m.group) throw ModelError("model bank: missing group model for " + a.name);
    }
    if (models.size() != taxonomy.size()) throw ModelError("model bank: model for activity outside taxonomy");
  }

  friend bool operator==(const ActivityModelBank&, const ActivityModelBank&) = default;
};

// ---------------------------------------------------------------------------
// JSON form. nlohmann writes doubles with max_digits10, so every parameter
// round-trips exactly.

namespace detail {

using nlohmann::json;

inline json mixture_json(const GaussianMixture& g) {
  json comps = json::array();
  for (const auto& c : g.components()) comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"var", c.var}});
  return comps;
}

inline GaussianMixture mixture_from(const json& j) {
  std::vector<GaussianComponent> comps;
  for (const auto& c : j)
    comps.push_back({c.at("weight").get<double>(), c.at("mean").get<std::vector<double>>(),
                     c.at("var").get<std::vector<double>>()});
  return GaussianMixture(std::move(comps));
}

inline json topology_json(const Topology& t) {
  return {{"entry", t.entry()}, {"trans", t.trans()}, {"exit", t.exit()}};
}

inline Topology topology_from(const json& j) {
  return Topology(j.at("entry").get<std::vector<double>>(), j.at("trans").get<std::vector<double>>(),
                  j.at("exit").get<std::vector<double>>());
}

inline json mixtures_json(const std::vector<GaussianMixture>& gs) {
  json out = json::array();
  for (const auto& g : gs) out.push_back(mixture_json(g));
  return out;
}

inline std::vector<GaussianMixture> mixtures_from(const json& j) {
  std::vector<GaussianMixture> out;
  for (const auto& g : j) out.push_back(mixture_from(g));
  return out;
}

inline const char* kind_name(ActivityKind k) { return k == ActivityKind::Symmetric ? "symmetric" : "asymmetric"; }

inline ActivityKind kind_from(const std::string& s) {
  if (s == "symmetric") return ActivityKind::Symmetric;
  if (s == "asymmetric") return ActivityKind::Asymmetric;
  throw ModelError("unknown activity kind: " + s);
}

} // namespace detail

inline nlohmann::json bank_to_json(const ActivityModelBank& bank) {
  using detail::json;
  json acts = json::array();
  for (const auto& a : bank.taxonomy.activities())
    acts.push_back({{"name", a.name}, {"kind", detail::kind_name(a.kind)}, {"pairwise", a.pairwise}, {"grouping", a.grouping}});
  json models = json::object();
  for (const auto& [name, m] : bank.models) {
    json jm = {{"kind", detail::kind_name(m.kind)}, {"mixture_fallback", m.mixture_fallback}};
    if (m.pair)
      jm["pair"] = {{"topology", detail::topology_json(m.pair->topology)},
                    {"advance", m.pair->advance},
                    {"joint", detail::mixtures_json(m.pair->joint)},
                    {"marginal", detail::mixtures_json(m.pair->marginal)},
                    {"synchronous", m.pair->synchronous}};
    if (m.group)
      jm["group"] = {{"topology", detail::topology_json(m.group->topology)},
                     {"emissions", detail::mixtures_json(m.group->emissions)}};
    models[name] = std::move(jm);
  }
  const auto& c = bank.config;
  return {{"format_version", std::string(kModelFormatVersion)},
          {"taxonomy", std::move(acts)},
          {"config", {{"window", c.window}, {"slack", c.slack}, {"tc", c.tc}, {"to", c.to}, {"tr", c.tr}}},
          {"models", std::move(models)}};
}

inline ActivityModelBank bank_from_json(const nlohmann::json& j) {
  try {
    const auto version = j.at("format_version").get<std::string>();
    if (version != kModelFormatVersion)
      throw ModelError("model format version mismatch: file has " + version + ", expected " +
                       std::string(kModelFormatVersion));
    ActivityModelBank bank;
    std::vector<ActivityInfo> acts;
    for (const auto& a : j.at("taxonomy"))
      acts.push_back({a.at("name").get<std::string>(), detail::kind_from(a.at("kind").get<std::string>()),
                      a.at("pairwise").get<bool>(), a.at("grouping").get<bool>()});
    bank.taxonomy = Taxonomy(std::move(acts));
    const auto& c = j.at("config");
    bank.config = {c.at("window").get<std::size_t>(), c.at("slack").get<std::size_t>(), c.at("tc").get<double>(),
                   c.at("to").get<double>(), c.at("tr").get<double>()};
    for (const auto& [name, jm] : j.at("models").items()) {
      ActivityModel m;
      m.name = name;
      m.kind = detail::kind_from(jm.at("kind").get<std::string>());
      m.mixture_fallback = jm.at("mixture_fallback").get<bool>();
      if (jm.contains("pair")) {
        const auto& p = jm.at("pair");
        m.pair = PairModel{detail::topology_from(p.at("topology")), p.at("advance").get<std::vector<double>>(),
                           detail::mixtures_from(p.at("joint")), detail::mixtures_from(p.at("marginal")),
                           p.at("synchronous").get<bool>()};
      }
      if (jm.contains("group")) {
        const auto& g = jm.at("group");
        m.group = GroupModel{detail::topology_from(g.at("topology")), detail::mixtures_from(g.at("emissions"))};
      }
      bank.models.emplace(name, std::move(m));
    }
    bank.validate();
    return bank;
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("corrupted model file: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelError(std::string("corrupted model file: ") + e.what());
  } catch (const DataError& e) {
    throw ModelError(std::string("corrupted model file: ") + e.what());
  }
}

inline void save_model(const ActivityModelBank& bank, std::ostream& out) {
  bank.validate();
  out << bank_to_json(bank).dump(1) << '\n';
}

inline ActivityModelBank load_model(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("model file parse error: ") + e.what());
  }
  return bank_from_json(j);
}

inline std::string save_model_string(const ActivityModelBank& bank) {
  std::ostringstream os;
  save_model(bank, os);
  return os.str();
}

inline ActivityModelBank load_model_string(const std::string& text) {
  std::istringstream is(text);
  return load_model(is);
}

} // namespace groupact
