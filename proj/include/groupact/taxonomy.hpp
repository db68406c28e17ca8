#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"

namespace groupact {

enum class ActivityKind { Symmetric, Asymmetric };

inline constexpr std::string_view kSingle = "single";
inline constexpr std::string_view kIgnore = "Ignore";

/// One activity of the symmetric/asymmetric structure.
///
/// `pairwise` activities own a two-stream model and take part in the
/// correlation metric. `grouping` activities are the symmetric ones that may
/// hold a symmetric group together; symmetric activities that do not group
/// (Ignore) are the non-interaction candidates between groups. The `single`
/// activity exists only at group level for people left unclustered.
struct ActivityInfo {
  std::string name;
  ActivityKind kind = ActivityKind::Symmetric;
  bool pairwise = true;
  bool grouping = false;

  bool symmetric() const { return kind == ActivityKind::Symmetric; }
  // Candidate label for the relation between two symmetric groups.
  bool intergroup() const { return pairwise && !grouping; }
  // Activities with a group-feature model.
  bool group_level() const { return symmetric() && (grouping || !pairwise); }

  friend bool operator==(const ActivityInfo&, const ActivityInfo&) = default;
};

class Taxonomy {
public:
  Taxonomy() = default;
  explicit Taxonomy(std::vector<ActivityInfo> activities) : activities_(std::move(activities)) {
    std::sort(activities_.begin(), activities_.end(),
              [](const ActivityInfo& a, const ActivityInfo& b) { return a.name < b.name; });
    for (std::size_t i = 1; i < activities_.size(); ++i)
      if (activities_[i].name == activities_[i - 1].name)
        throw DataError("duplicate activity in taxonomy: " + activities_[i].name);
    for (const auto& a : activities_) {
      if (a.name.empty()) throw DataError("empty activity name in taxonomy");
      if (!a.symmetric() && a.grouping) throw DataError("asymmetric activity cannot form groups: " + a.name);
      if (!a.pairwise && !a.symmetric()) throw DataError("group-only activity must be symmetric: " + a.name);
    }
  }

  // InGroup, WalkTogether, Fight, RunTogether, Ignore (symmetric);
  // Approach, Split, Chase (asymmetric); plus group-level "single".
  static Taxonomy standard() {
    using K = ActivityKind;
    return Taxonomy({
        {"InGroup", K::Symmetric, true, true},
        {"WalkTogether", K::Symmetric, true, true},
        {"Fight", K::Symmetric, true, true},
        {"RunTogether", K::Symmetric, true, true},
        {std::string(kIgnore), K::Symmetric, true, false},
        {"Approach", K::Asymmetric, true, false},
        {"Split", K::Asymmetric, true, false},
        {"Chase", K::Asymmetric, true, false},
        {std::string(kSingle), K::Symmetric, false, false},
    });
  }

  const std::vector<ActivityInfo>& activities() const { return activities_; }
  std::size_t size() const { return activities_.size(); }

  const ActivityInfo* find(std::string_view name) const {
    auto it = std::lower_bound(activities_.begin(), activities_.end(), name,
                               [](const ActivityInfo& a, std::string_view n) { return a.name < n; });
    return it != activities_.end() && it->name == name ? &*it : nullptr;
  }
  bool contains(std::string_view name) const { return find(name) != nullptr; }

  const ActivityInfo& at(std::string_view name) const {
    if (const auto* a = find(name)) return *a;
    throw DataError("unknown activity label: " + std::string(name));
  }

  bool is_grouping(std::string_view name) const {
    const auto* a = find(name);
    return a && a->grouping;
  }

  // Names sorted lexicographically; every list below keeps that order.
  std::vector<std::string> names() const { return select([](const ActivityInfo&) { return true; }); }
  std::vector<std::string> pairwise() const { return select([](const ActivityInfo& a) { return a.pairwise; }); }
  std::vector<std::string> grouping() const { return select([](const ActivityInfo& a) { return a.grouping; }); }
  std::vector<std::string> intergroup() const { return select([](const ActivityInfo& a) { return a.intergroup(); }); }
  std::vector<std::string> group_level() const { return select([](const ActivityInfo& a) { return a.group_level(); }); }

  friend bool operator==(const Taxonomy&, const Taxonomy&) = default;

private:
  template <class Pred>
  std::vector<std::string> select(Pred pred) const {
    std::vector<std::string> out;
    for (const auto& a : activities_)
      if (pred(a)) out.push_back(a.name);
    return out;
  }

  std::vector<ActivityInfo> activities_;
};

} // namespace groupact
