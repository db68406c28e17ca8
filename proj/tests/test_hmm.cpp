#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <groupact/hmm.hpp>

#include "oracle.hpp"

using namespace groupact;

namespace {

GroupModel random_group_model(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  GroupModel m;
  std::vector<double> trans, exit;
  for (std::size_t l = 0; l < n; ++l) {
    auto row = oracle::random_simplex(rng, n + 1);
    trans.insert(trans.end(), row.begin(), row.begin() + static_cast<std::ptrdiff_t>(n));
    exit.push_back(row[n]);
  }
  m.topology = Topology(oracle::random_simplex(rng, n), trans, exit);
  for (std::size_t k = 0; k < n; ++k) m.emissions.push_back(oracle::random_mixture(rng, dim, 1 + k % 2));
  return m;
}

// Sum over all state paths in probability space.
double enumerate(const GroupModel& m, const Sequence& seq) {
  const std::size_t n = m.topology.states(), T = seq.size();
  std::vector<std::size_t> k(T, 0);
  double total = 0;
  for (;;) {
    double p = m.topology.entry(k[0]) * oracle::mixture_pdf(m.emissions[k[0]], seq[0]);
    for (std::size_t t = 1; t < T; ++t)
      p *= m.topology.trans(k[t - 1], k[t]) * oracle::mixture_pdf(m.emissions[k[t]], seq[t]);
    total += p * m.topology.exit(k[T - 1]);
    std::size_t pos = 0;
    while (pos < T && ++k[pos] == n) k[pos++] = 0;
    if (pos == T) break;
  }
  return total;
}

} // namespace

TEST(Topology, Validation) {
  EXPECT_NO_THROW(Topology({1.0}, {0.9}, {0.1}));
  EXPECT_THROW(Topology({}, {}, {}), std::invalid_argument);
  EXPECT_THROW(Topology({0.5}, {0.9}, {0.1}), std::invalid_argument);
  EXPECT_THROW(Topology({1.0}, {0.8}, {0.1}), std::invalid_argument);
  EXPECT_THROW(Topology({1.0}, {1.2}, {-0.2}), std::invalid_argument);
  EXPECT_THROW(Topology({0.5, 0.5}, {1.0}, {0.0, 0.0}), std::invalid_argument);
  const auto t = Topology::initial(3, 0.8, 0.1);
  for (std::size_t l = 0; l < 3; ++l) {
    double s = t.exit(l);
    for (std::size_t k = 0; k < 3; ++k) s += t.trans(l, k);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_NEAR(t.trans(1, 1), 0.8 * 0.9, 1e-12);
}

TEST(Topology, AccumulatorKeepsFloor) {
  TopologyAccumulator acc(2);
  acc.add_entry(0, 5.0);
  acc.add_trans(0, 0, 10.0);
  acc.add_exit(0, 1.0);
  const auto t = acc.estimate(Topology::initial(2, 0.5, 0.2));
  EXPECT_GE(t.entry(1), kTransitionFloor * (1 - 1e-12));
  EXPECT_GE(t.trans(0, 1), kTransitionFloor * (1 - 1e-12));
  EXPECT_NEAR(t.trans(0, 0), (1 - kTransitionFloor) * 10.0 / 11.0, 1e-9);
  // Unvisited state 1 keeps its current row.
  EXPECT_NEAR(t.trans(1, 1), 0.5 * 0.8, 1e-9);
}

TEST(GroupHmm, ForwardMatchesEnumeration) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rep % 3, T = 1 + rep % 6;
    const auto m = random_group_model(rng, n, 2);
    const auto seq = oracle::random_sequence(rng, T, 2);
    EXPECT_NEAR(std::exp(m.log_likelihood(seq) - std::log(enumerate(m, seq))), 1.0, 1e-9);
  }
}

TEST(GroupHmm, BackwardAgreesWithForward) {
  std::mt19937_64 rng(19);
  const auto m = random_group_model(rng, 3, 4);
  const auto seq = oracle::random_sequence(rng, 30, 4);
  auto le = [&](std::size_t k, std::size_t t) { return m.emissions[k].log_density(seq[t]); };
  const auto lat = hmm_forward(m.topology, seq.size(), le);
  const auto beta = hmm_backward(m.topology, seq.size(), le);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    double s = kNegInf;
    for (std::size_t k = 0; k < 3; ++k) s = log_add(s, lat(t, k) + beta[t * 3 + k]);
    EXPECT_NEAR(s, lat.log_likelihood, 1e-9 * std::abs(lat.log_likelihood));
  }
  EXPECT_THROW(m.log_likelihood(oracle::random_sequence(rng, 3, 2)), ModelError);
}

TEST(GroupHmm, TrainingIsMonotoneAndSeparatesRegimes) {
  std::mt19937_64 rng(4);
  std::vector<Sequence> segs;
  for (int s = 0; s < 12; ++s) {
    Sequence seq(2);
    for (int t = 0; t < 20; ++t) {
      const double mu = t < 10 ? -3.0 : 3.0;
      seq.push_back(std::vector<double>{std::normal_distribution<double>(mu, 0.5)(rng),
                                        std::normal_distribution<double>(-mu, 0.5)(rng)});
    }
    segs.push_back(seq);
  }
  HmmTrainingConfig cfg;
  cfg.mixtures = 1;
  const auto res = train_group_model(segs, cfg);
  ASSERT_GE(res.log_likelihoods.size(), 2u);
  for (std::size_t i = 1; i < res.log_likelihoods.size(); ++i)
    EXPECT_GE(res.log_likelihoods[i], res.log_likelihoods[i - 1] - 1e-9 * std::abs(res.log_likelihoods[i - 1]));
  std::vector<double> means;
  for (const auto& e : res.model.emissions) means.push_back(e.components()[0].mean[0]);
  std::sort(means.begin(), means.end());
  EXPECT_NEAR(means[0], -3.0, 0.3);
  EXPECT_NEAR(means[1], 3.0, 0.3);
  // The two-state chain beats a shuffled sequence of the same values.
  Sequence shuffled(2);
  for (int t = 0; t < 20; ++t) shuffled.push_back(segs[0][t % 2 ? t / 2 : 10 + t / 2]);
  EXPECT_GT(res.model.log_likelihood(segs[0]), res.model.log_likelihood(shuffled));
}

TEST(GroupHmm, TooLittleDataFallsBackToOneComponent) {
  std::mt19937_64 rng(1);
  std::vector<Sequence> segs{oracle::random_sequence(rng, 4, 5)};
  const auto res = train_group_model(segs, {});
  EXPECT_TRUE(res.mixture_fallback);
  for (const auto& e : res.model.emissions) EXPECT_EQ(e.size(), 1u);
  EXPECT_THROW(train_group_model(std::vector<Sequence>{}, {}), std::invalid_argument);
}
