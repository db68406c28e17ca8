#pragma once

// Model banks for tests: random parameters (serialization, normalization)
// and a small bank trained on generated scenarios (pipeline behavior).

#include <random>

#include <groupact/model_bank.hpp>
#include <groupact/simgen.hpp>
#include <groupact/training.hpp>

#include "oracle.hpp"
#include "scenario_bank.hpp"

namespace fixtures {

using namespace groupact;

inline GroupModel random_group_model(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  GroupModel g;
  std::vector<double> trans, exit;
  for (std::size_t l = 0; l < n; ++l) {
    auto row = oracle::random_simplex(rng, n + 1);
    trans.insert(trans.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n));
    exit.push_back(row[n]);
  }
  g.topology = Topology(oracle::random_simplex(rng, n), trans, exit);
  for (std::size_t k = 0; k < n; ++k) g.emissions.push_back(oracle::random_mixture(rng, dim, 1 + k % 2));
  return g;
}

inline ActivityModelBank random_bank(std::mt19937_64& rng, std::size_t window = 25, std::size_t slack = 5) {
  ActivityModelBank bank;
  bank.taxonomy = Taxonomy::standard();
  bank.config.window = window;
  bank.config.slack = slack;
  std::uniform_int_distribution<std::size_t> states(1, 3);
  for (const auto& a : bank.taxonomy.activities()) {
    ActivityModel m;
    m.name = a.name;
    m.kind = a.kind;
    m.mixture_fallback = rng() % 2 == 0;
    if (a.pairwise) m.pair = oracle::random_model(rng, states(rng), PairObservation::kDim, rng() % 4 == 0);
    if (a.group_level()) m.group = random_group_model(rng, states(rng), GroupObservation::kDim);
    bank.models.emplace(a.name, std::move(m));
  }
  bank.validate();
  return bank;
}

// Trained once per test binary on reseeded variants of every scenario.
inline const ActivityModelBank& trained_bank() {
  static const ActivityModelBank bank = scenarios::train_on(scenarios::all_names()).bank;
  return bank;
}

} // namespace fixtures
