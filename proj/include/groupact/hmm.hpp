#pragma once

// Left-to-right-free HMM topology with explicit entry and exit probabilities,
// the log-space forward/backward recursions over an arbitrary emission
// callback, and Baum-Welch for the group-feature models.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "common.hpp"
#include "gmm.hpp"

namespace groupact {

inline constexpr double kTransitionFloor = 1e-6;

/// Emitting states 0..N-1 between a non-emitting start and finish state.
/// Each row of `trans` plus the state's exit probability sums to one.
class Topology {
public:
  Topology() = default;

  Topology(std::vector<double> entry, std::vector<double> trans, std::vector<double> exit)
      : n_(entry.size()), entry_(std::move(entry)), trans_(std::move(trans)), exit_(std::move(exit)) {
    if (n_ == 0) throw std::invalid_argument("Topology: no states");
    if (trans_.size() != n_ * n_ || exit_.size() != n_) throw std::invalid_argument("Topology: shape mismatch");
    auto check = [](double p) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("Topology: probability out of range");
    };
    double es = 0;
    for (double p : entry_) check(p), es += p;
    if (std::abs(es - 1.0) > 1e-9) throw std::invalid_argument("Topology: entry must sum to 1");
    for (std::size_t l = 0; l < n_; ++l) {
      double rs = exit_[l];
      check(exit_[l]);
      for (std::size_t k = 0; k < n_; ++k) check(trans_[l * n_ + k]), rs += trans_[l * n_ + k];
      if (std::abs(rs - 1.0) > 1e-9) throw std::invalid_argument("Topology: row plus exit must sum to 1");
    }
    normalize();
  }

  // Uniform entry, `stay` self-loop mass, `exit` mass per state.
  static Topology initial(std::size_t n, double stay, double exit) {
    std::vector<double> entry(n, 1.0 / static_cast<double>(n));
    std::vector<double> trans(n * n);
    for (std::size_t l = 0; l < n; ++l)
      for (std::size_t k = 0; k < n; ++k)
        trans[l * n + k] = n == 1 ? 1.0 - exit : (l == k ? stay : (1.0 - stay) / static_cast<double>(n - 1)) * (1.0 - exit);
    return Topology(std::move(entry), std::move(trans), std::vector<double>(n, exit));
  }

  std::size_t states() const { return n_; }
  double entry(std::size_t k) const { return entry_[k]; }
  double trans(std::size_t l, std::size_t k) const { return trans_[l * n_ + k]; }
  double exit(std::size_t l) const { return exit_[l]; }
  double log_entry(std::size_t k) const { return log_entry_[k]; }
  double log_trans(std::size_t l, std::size_t k) const { return log_trans_[l * n_ + k]; }
  double log_exit(std::size_t l) const { return log_exit_[l]; }

  const std::vector<double>& entry() const { return entry_; }
  const std::vector<double>& trans() const { return trans_; }
  const std::vector<double>& exit() const { return exit_; }

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.entry_ == b.entry_ && a.trans_ == b.trans_ && a.exit_ == b.exit_;
  }

private:
  void normalize() {
    log_entry_.resize(n_);
    log_trans_.resize(n_ * n_);
    log_exit_.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) log_entry_[k] = safe_log(entry_[k]);
    for (std::size_t i = 0; i < n_ * n_; ++i) log_trans_[i] = safe_log(trans_[i]);
    for (std::size_t k = 0; k < n_; ++k) log_exit_[k] = safe_log(exit_[k]);
  }

  std::size_t n_ = 0;
  std::vector<double> entry_, trans_, exit_;
  std::vector<double> log_entry_, log_trans_, log_exit_;
};

/// Expected entry / transition / exit counts; `estimate` is the constrained
/// maximizer with every probability kept at or above `kTransitionFloor`.
class TopologyAccumulator {
public:
  explicit TopologyAccumulator(std::size_t n) : n_(n), entry_(n, 0.0), trans_(n * n, 0.0), exit_(n, 0.0) {}

  void add_entry(std::size_t k, double w) { entry_[k] += w; }
  void add_trans(std::size_t l, std::size_t k, double w) { trans_[l * n_ + k] += w; }
  void add_exit(std::size_t l, double w) { exit_[l] += w; }

  Topology estimate(const Topology& current) const {
    std::vector<double> entry = entry_;
    double es = 0;
    for (double e : entry) es += e;
    if (!(es > 0)) entry = current.entry();
    entry = floored_weights(entry, kTransitionFloor);
    std::vector<double> trans(n_ * n_), exit(n_);
    for (std::size_t l = 0; l < n_; ++l) {
      std::vector<double> row(n_ + 1);
      double rs = 0;
      for (std::size_t k = 0; k < n_; ++k) rs += row[k] = trans_[l * n_ + k];
      rs += row[n_] = exit_[l];
      if (!(rs > 0)) {
        for (std::size_t k = 0; k < n_; ++k) row[k] = current.trans(l, k);
        row[n_] = current.exit(l);
      }
      row = floored_weights(row, kTransitionFloor);
      for (std::size_t k = 0; k < n_; ++k) trans[l * n_ + k] = row[k];
      exit[l] = row[n_];
    }
    return Topology(std::move(entry), std::move(trans), std::move(exit));
  }

private:
  std::size_t n_;
  std::vector<double> entry_, trans_, exit_;
};

/// log alpha(t, k) for t in [0, T), plus log p(sequence) including exit.
struct HmmLattice {
  std::size_t length = 0;
  std::size_t states = 0;
  std::vector<double> log_alpha;
  double log_likelihood = kNegInf;

  double operator()(std::size_t t, std::size_t k) const { return log_alpha[t * states + k]; }
};

/// Synchronous forward pass. `log_emit(k, t)` is the log emission density of
/// observation t in state k.
template <class LogEmit>
HmmLattice hmm_forward(const Topology& top, std::size_t length, LogEmit&& log_emit) {
  if (length == 0) throw std::invalid_argument("hmm_forward: empty sequence");
  const std::size_t n = top.states();
  HmmLattice lat{length, n, std::vector<double>(length * n, kNegInf), kNegInf};
  std::vector<double> terms(n);
  for (std::size_t k = 0; k < n; ++k) lat.log_alpha[k] = top.log_entry(k) + log_emit(k, 0);
  for (std::size_t t = 1; t < length; ++t)
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t l = 0; l < n; ++l) terms[l] = lat(t - 1, l) + top.log_trans(l, k);
      lat.log_alpha[t * n + k] = log_sum_exp(terms) + log_emit(k, t);
    }
  for (std::size_t k = 0; k < n; ++k) terms[k] = lat(length - 1, k) + top.log_exit(k);
  lat.log_likelihood = log_sum_exp(terms);
  return lat;
}

/// log beta(t, k): probability of observations after t and the exit.
template <class LogEmit>
std::vector<double> hmm_backward(const Topology& top, std::size_t length, LogEmit&& log_emit) {
  const std::size_t n = top.states();
  std::vector<double> beta(length * n, kNegInf), terms(n);
  for (std::size_t k = 0; k < n; ++k) beta[(length - 1) * n + k] = top.log_exit(k);
  for (std::size_t t = length - 1; t-- > 0;)
    for (std::size_t l = 0; l < n; ++l) {
      for (std::size_t k = 0; k < n; ++k)
        terms[k] = top.log_trans(l, k) + log_emit(k, t + 1) + beta[(t + 1) * n + k];
      beta[t * n + l] = log_sum_exp(terms);
    }
  return beta;
}

// ---------------------------------------------------------------------------
// Group-feature HMM

struct GroupModel {
  Topology topology;
  std::vector<GaussianMixture> emissions;

  std::size_t dim() const { return emissions.empty() ? 0 : emissions.front().dim(); }

  double log_likelihood(const Sequence& seq) const {
    if (seq.dim() != dim()) throw ModelError("group model: observation dimension mismatch");
    return hmm_forward(topology, seq.size(), [&](std::size_t k, std::size_t t) {
             return emissions[k].log_density(seq[t]);
           }).log_likelihood;
  }

  friend bool operator==(const GroupModel&, const GroupModel&) = default;
};

struct HmmTrainingConfig {
  std::size_t states = 2;
  std::size_t mixtures = 2;
  std::uint64_t seed = 0;
  std::size_t max_iters = 40;
  double tol = 1e-4;
  double var_floor = kVarianceFloor;
};

struct GroupTrainingResult {
  GroupModel model;
  std::vector<double> log_likelihoods;
  bool mixture_fallback = false;
};

namespace detail {

// Samples per mixture component needed before a multi-component fit is tried.
inline bool enough_for_mixture(std::size_t samples, std::size_t dim, std::size_t mixtures) {
  return mixtures > 1 && samples >= 2 * mixtures * (dim + 1);
}

// Frames of each segment split into `states` consecutive chunks.
inline std::size_t chunk_state(std::size_t t, std::size_t length, std::size_t states) {
  return std::min(states - 1, t * states / std::max<std::size_t>(length, 1));
}

inline GaussianMixture init_mixture(const Sequence& data, std::size_t mixtures, std::uint64_t seed, double floor,
                                    bool& fallback) {
  if (data.empty()) {
    fallback = true;
    return GaussianMixture({{1.0, std::vector<double>(data.dim(), 0.0), std::vector<double>(data.dim(), 1.0)}},
                           floor);
  }
  std::size_t k = mixtures;
  if (!enough_for_mixture(data.size(), data.dim(), mixtures)) {
    if (mixtures > 1) fallback = true;
    k = 1;
  }
  return kmeans_mixture(data, k, seed, floor);
}

} // namespace detail

/// Baum-Welch over GMM-emission HMMs; log-likelihood is non-decreasing.
inline GroupTrainingResult train_group_model(std::span<const Sequence> segments, const HmmTrainingConfig& cfg) {
  if (segments.empty()) throw std::invalid_argument("train_group_model: no segments");
  const std::size_t dim = segments.front().dim(), n = cfg.states;
  double mean_len = 0;
  for (const auto& s : segments) {
    if (s.dim() != dim) throw std::invalid_argument("train_group_model: inconsistent dimensions");
    if (s.empty()) throw std::invalid_argument("train_group_model: empty segment");
    mean_len += static_cast<double>(s.size()) / static_cast<double>(segments.size());
  }
  GroupTrainingResult res;
  std::vector<Sequence> per_state(n, Sequence(dim));
  for (const auto& s : segments)
    for (std::size_t t = 0; t < s.size(); ++t) per_state[detail::chunk_state(t, s.size(), n)].push_back(s[t]);
  for (std::size_t k = 0; k < n; ++k)
    res.model.emissions.push_back(
        detail::init_mixture(per_state[k], cfg.mixtures, cfg.seed + 7919 * k, cfg.var_floor, res.mixture_fallback));
  res.model.topology = Topology::initial(n, 0.8, std::clamp(1.0 / mean_len, 1e-3, 0.5));

  for (std::size_t it = 0;; ++it) {
    auto& model = res.model;
    TopologyAccumulator top_acc(n);
    std::vector<GmmAccumulator> em_acc;
    for (const auto& g : model.emissions) em_acc.emplace_back(g);
    double ll = 0;
    for (const auto& seg : segments) {
      const std::size_t T = seg.size();
      std::vector<double> emit(T * n);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < n; ++k) emit[t * n + k] = model.emissions[k].log_density(seg[t]);
      auto le = [&](std::size_t k, std::size_t t) { return emit[t * n + k]; };
      auto fwd = hmm_forward(model.topology, T, le);
      auto beta = hmm_backward(model.topology, T, le);
      const double z = fwd.log_likelihood;
      ll += z;
      for (std::size_t k = 0; k < n; ++k) {
        top_acc.add_entry(k, std::exp(fwd(0, k) + beta[k] - z));
        top_acc.add_exit(k, std::exp(fwd(T - 1, k) + model.topology.log_exit(k) - z));
      }
      for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t k = 0; k < n; ++k) em_acc[k].add(seg[t], std::exp(fwd(t, k) + beta[t * n + k] - z));
        if (t + 1 < T)
          for (std::size_t l = 0; l < n; ++l)
            for (std::size_t k = 0; k < n; ++k)
              top_acc.add_trans(l, k,
                                std::exp(fwd(t, l) + model.topology.log_trans(l, k) + le(k, t + 1) +
                                         beta[(t + 1) * n + k] - z));
      }
    }
    res.log_likelihoods.push_back(ll);
    const std::size_t m = res.log_likelihoods.size();
    if (m >= 2) {
      const double prev = res.log_likelihoods[m - 2];
      if (ll - prev <= cfg.tol * std::max(1.0, std::abs(prev))) break;
    }
    if (it >= cfg.max_iters) break;
    GroupModel next;
    next.topology = top_acc.estimate(model.topology);
    for (auto& acc : em_acc) next.emissions.push_back(acc.estimate(cfg.var_floor));
    res.model = std::move(next);
  }
  return res;
}

} // namespace groupact
