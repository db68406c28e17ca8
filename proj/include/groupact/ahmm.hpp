#pragma once

// Asynchronous two-stream HMM. The first stream F_i (length S) is aligned to
// the second stream F_j (length T >= S) by a hidden monotone variable s: at
// every step of F_j the model either advances s and emits the pair
// (F_i(s), F_j(t)) with probability eps_k, or holds s and emits F_j(t) alone.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "common.hpp"
#include "gmm.hpp"
#include "hmm.hpp"

namespace groupact {

inline constexpr double kAdvanceMin = 1e-3;

struct PairModel {
  Topology topology;
  std::vector<double> advance;            // eps_k
  std::vector<GaussianMixture> joint;     // over F_i(s) ++ F_j(t)
  std::vector<GaussianMixture> marginal;  // over F_j(t)
  bool synchronous = false;               // eps == 1: every step advances

  std::size_t states() const { return topology.states(); }
  std::size_t dim() const { return marginal.empty() ? 0 : marginal.front().dim(); }

  double advance_prob(std::size_t k) const { return synchronous ? 1.0 : advance[k]; }
  double log_advance(std::size_t k) const { return synchronous ? 0.0 : std::log(advance[k]); }
  double log_hold(std::size_t k) const { return synchronous ? kNegInf : std::log1p(-advance[k]); }

  void validate() const {
    const std::size_t n = states();
    if (n == 0 || advance.size() != n || joint.size() != n || marginal.size() != n)
      throw ModelError("pair model: per-state parameter count mismatch");
    for (std::size_t k = 0; k < n; ++k) {
      if (!synchronous && !(advance[k] >= kAdvanceMin && advance[k] <= 1.0 - kAdvanceMin))
        throw ModelError("pair model: advance probability outside [1e-3, 1-1e-3]");
      if (marginal[k].dim() != dim() || joint[k].dim() != 2 * dim())
        throw ModelError("pair model: emission dimension mismatch");
    }
  }

  friend bool operator==(const PairModel&, const PairModel&) = default;
};

/// Per-pair emission terms. The joint density factors per component over the
/// two halves of the concatenated vector, so only O((S + T) N M) Gaussian
/// evaluations are needed for the O(S T N) lattice.
class PairEmissions {
public:
  PairEmissions(const PairModel& model, const Sequence& fi, const Sequence& fj)
      : model_(&model), s_(fi.size()), t_(fj.size()), n_(model.states()) {
    const std::size_t d = model.dim();
    if (fi.dim() != d || fj.dim() != d) throw ModelError("pair model: observation dimension mismatch");
    m_ = 0;
    for (const auto& g : model.joint) m_ = std::max(m_, g.size());
    a_.assign(n_ * m_ * s_, kNegInf);
    b_.assign(n_ * m_ * t_, kNegInf);
    marg_.assign(n_ * t_, kNegInf);
    for (std::size_t k = 0; k < n_; ++k) {
      const auto& g = model.joint[k];
      for (std::size_t c = 0; c < g.size(); ++c) {
        for (std::size_t s = 0; s < s_; ++s) a_[(k * m_ + c) * s_ + s] = g.log_norm(c) - 0.5 * g.mahalanobis(c, fi[s], 0);
        for (std::size_t t = 0; t < t_; ++t) b_[(k * m_ + c) * t_ + t] = -0.5 * g.mahalanobis(c, fj[t], d);
      }
      for (std::size_t t = 0; t < t_; ++t) marg_[k * t_ + t] = model.marginal[k].log_density(fj[t]);
    }
  }

  // 0-based observation indices.
  double joint(std::size_t k, std::size_t s, std::size_t t) const {
    const std::size_t nc = model_->joint[k].size();
    double best = kNegInf;
    double v[16];
    for (std::size_t c = 0; c < nc; ++c) {
      v[c] = a_[(k * m_ + c) * s_ + s] + b_[(k * m_ + c) * t_ + t];
      best = std::max(best, v[c]);
    }
    if (nc == 1) return best;
    double sum = 0;
    for (std::size_t c = 0; c < nc; ++c) sum += std::exp(v[c] - best);
    return best + std::log(sum);
  }

  double marginal(std::size_t k, std::size_t t) const { return marg_[k * t_ + t]; }

private:
  const PairModel* model_;
  std::size_t s_, t_, n_, m_ = 0;
  std::vector<double> a_, b_, marg_;
};

/// log alpha(s, k, t) for s in [0, S] (s = 0: no F_i observation consumed
/// yet), t in [1, T]; cells that cannot reach the terminal band hold -inf.
struct AlignmentLattice {
  std::size_t first_len = 0;   // S
  std::size_t second_len = 0;  // T
  std::size_t states = 0;
  std::size_t terminal_first = 1, terminal_last = 0;  // terminal band of s at t = T
  std::vector<double> log_alpha;
  double log_likelihood = kNegInf;

  std::size_t index(std::size_t s, std::size_t k, std::size_t t) const {
    return ((t - 1) * (first_len + 1) + s) * states + k;
  }
  double operator()(std::size_t s, std::size_t k, std::size_t t) const { return log_alpha[index(s, k, t)]; }

  /// log sum over the terminal band of alpha(s, k, T), without exit.
  double terminal_log_mass(std::size_t k) const {
    double m = kNegInf;
    for (std::size_t s = terminal_first; s <= terminal_last; ++s) m = log_add(m, (*this)(s, k, second_len));
    return m;
  }
};

/// Band [max(1, T - slack), min(S, T + slack)] of alignment positions that
/// count at the last step.
inline std::pair<std::size_t, std::size_t> terminal_band(std::size_t first_len, std::size_t second_len,
                                                         std::size_t slack) {
  const std::size_t lo = second_len > slack ? std::max<std::size_t>(1, second_len - slack) : 1;
  const std::size_t hi = std::min(first_len, second_len + slack);
  return {lo, hi};
}

namespace detail {

// The lag t - s never decreases, so cells lagging by more than T - lo are dead.
inline bool live(std::size_t s, std::size_t t, std::size_t max_lag) { return s <= t && t - s <= max_lag; }

inline AlignmentLattice ahmm_forward(const PairModel& model, const PairEmissions& em, std::size_t first_len,
                                     std::size_t second_len, std::size_t slack) {
  const std::size_t S = first_len, T = second_len, n = model.states();
  AlignmentLattice lat;
  lat.first_len = S;
  lat.second_len = T;
  lat.states = n;
  std::tie(lat.terminal_first, lat.terminal_last) = terminal_band(S, T, slack);
  lat.log_alpha.assign(T * (S + 1) * n, kNegInf);
  if (lat.terminal_first > lat.terminal_last) return lat;
  const std::size_t max_lag = T - lat.terminal_first;
  const auto& top = model.topology;

  for (std::size_t k = 0; k < n; ++k) {
    if (live(0, 1, max_lag)) lat.log_alpha[lat.index(0, k, 1)] = top.log_entry(k) + model.log_hold(k) + em.marginal(k, 0);
    if (S >= 1) lat.log_alpha[lat.index(1, k, 1)] = top.log_entry(k) + model.log_advance(k) + em.joint(k, 0, 0);
  }
  std::vector<double> pred((S + 1) * n, kNegInf), terms(n);
  for (std::size_t t = 2; t <= T; ++t) {
    const std::size_t s_lo = t > max_lag ? t - max_lag : 0;
    const std::size_t s_hi = std::min(S, t);
    // pred(s, k) = log sum_l alpha(s, l, t-1) a_lk
    for (std::size_t s = s_lo > 0 ? s_lo - 1 : 0; s <= std::min(S, t - 1); ++s)
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l < n; ++l) terms[l] = lat(s, l, t - 1) + top.log_trans(l, k);
        pred[s * n + k] = log_sum_exp(terms);
      }
    for (std::size_t s = s_lo; s <= s_hi; ++s)
      for (std::size_t k = 0; k < n; ++k) {
        double a = kNegInf;
        if (s >= 1) a = model.log_advance(k) + em.joint(k, s - 1, t - 1) + pred[(s - 1) * n + k];
        if (s <= t - 1 && !model.synchronous) a = log_add(a, model.log_hold(k) + em.marginal(k, t - 1) + pred[s * n + k]);
        lat.log_alpha[lat.index(s, k, t)] = a;
      }
  }
  double z = kNegInf;
  for (std::size_t s = lat.terminal_first; s <= lat.terminal_last; ++s)
    for (std::size_t k = 0; k < n; ++k) z = log_add(z, lat(s, k, T) + top.log_exit(k));
  lat.log_likelihood = z;
  return lat;
}

} // namespace detail

/// Forward recursion over the alignment lattice. The total likelihood sums
/// the exits of every alignment that ends inside the terminal band.
inline AlignmentLattice ahmm_forward(const PairModel& model, const Sequence& fi, const Sequence& fj,
                                     std::size_t slack) {
  if (fi.empty() || fj.empty()) throw std::invalid_argument("ahmm_forward: empty sequence");
  if (fi.size() > fj.size()) throw std::invalid_argument("ahmm_forward: first stream longer than second");
  PairEmissions em(model, fi, fj);
  return detail::ahmm_forward(model, em, fi.size(), fj.size(), slack);
}

/// Synchronous pair HMM over the joint emissions of (F_i(t), F_j(t)).
inline double pair_hmm_log_likelihood(const PairModel& model, const Sequence& fi, const Sequence& fj) {
  if (fi.size() != fj.size() || fi.empty()) throw std::invalid_argument("pair_hmm_log_likelihood: length mismatch");
  PairEmissions em(model, fi, fj);
  return hmm_forward(model.topology, fi.size(), [&](std::size_t k, std::size_t t) { return em.joint(k, t, t); })
      .log_likelihood;
}

// ---------------------------------------------------------------------------
// Training

struct SequencePair {
  Sequence first;   // F_i
  Sequence second;  // F_j
};

struct PairTrainingConfig {
  std::size_t states = 2;
  std::size_t mixtures = 2;
  std::size_t slack = 5;
  std::uint64_t seed = 0;
  std::size_t max_iters = 40;
  double tol = 1e-4;
  double var_floor = kVarianceFloor;
  bool synchronous = false;
};

struct PairTrainingResult {
  PairModel model;
  std::vector<double> log_likelihoods;
  bool mixture_fallback = false;
};

namespace detail {

inline PairModel initial_pair_model(std::span<const SequencePair> segments, const PairTrainingConfig& cfg,
                                    bool& fallback) {
  const std::size_t d = segments.front().first.dim(), n = cfg.states;
  Sequence joint_all(2 * d);
  std::vector<double> row(2 * d);
  double mean_len = 0;
  for (const auto& seg : segments) {
    for (std::size_t t = 0; t < seg.first.size(); ++t) {
      std::copy(seg.first[t].begin(), seg.first[t].end(), row.begin());
      std::copy(seg.second[t].begin(), seg.second[t].end(), row.begin() + static_cast<std::ptrdiff_t>(d));
      joint_all.push_back(row);
    }
    mean_len += static_cast<double>(seg.second.size()) / static_cast<double>(segments.size());
  }
  // States start as clusters of the diagonally aligned pairs.
  std::vector<std::size_t> state(joint_all.size(), 0);
  if (n > 1 && joint_all.size() >= n) state = kmeans(joint_all, n, cfg.seed ^ 0x5bd1e995ULL);
  std::vector<Sequence> joint_data(n, Sequence(2 * d)), marg_data(n, Sequence(d));
  for (std::size_t r = 0; r < joint_all.size(); ++r) {
    joint_data[state[r]].push_back(joint_all[r]);
    marg_data[state[r]].push_back(joint_all[r].subspan(d));
  }
  PairModel m;
  m.synchronous = cfg.synchronous;
  m.topology = Topology::initial(n, 0.8, std::clamp(1.0 / mean_len, 1e-3, 0.5));
  for (std::size_t k = 0; k < n; ++k) {
    m.joint.push_back(init_mixture(joint_data[k], cfg.mixtures, cfg.seed + 31 * k + 1, cfg.var_floor, fallback));
    m.marginal.push_back(init_mixture(marg_data[k], cfg.mixtures, cfg.seed + 31 * k + 2, cfg.var_floor, fallback));
    m.advance.push_back(cfg.synchronous ? 1.0 : 0.9);
  }
  return m;
}

} // namespace detail

/// Backward pass matching `ahmm_forward`: log beta(s, k, t), same indexing.
inline std::vector<double> ahmm_backward(const PairModel& model, const PairEmissions& em,
                                         const AlignmentLattice& lat) {
  const std::size_t S = lat.first_len, T = lat.second_len, n = lat.states;
  std::vector<double> beta(lat.log_alpha.size(), kNegInf);
  if (lat.terminal_first > lat.terminal_last) return beta;
  const std::size_t max_lag = T - lat.terminal_first;
  const auto& top = model.topology;
  for (std::size_t s = lat.terminal_first; s <= lat.terminal_last; ++s)
    for (std::size_t k = 0; k < n; ++k) beta[lat.index(s, k, T)] = top.log_exit(k);
  std::vector<double> next(n);
  for (std::size_t t = T; t-- > 1;) {
    const std::size_t s_lo = t > max_lag ? t - max_lag : 0;
    for (std::size_t s = s_lo; s <= std::min(S, t); ++s) {
      // next(k): emission into step t+1 from alignment s, state k
      for (std::size_t k = 0; k < n; ++k) {
        double v = kNegInf;
        if (s + 1 <= S) v = model.log_advance(k) + em.joint(k, s, t) + beta[lat.index(s + 1, k, t + 1)];
        if (!model.synchronous) v = log_add(v, model.log_hold(k) + em.marginal(k, t) + beta[lat.index(s, k, t + 1)]);
        next[k] = v;
      }
      for (std::size_t l = 0; l < n; ++l) {
        double v = kNegInf;
        for (std::size_t k = 0; k < n; ++k) v = log_add(v, top.log_trans(l, k) + next[k]);
        beta[lat.index(s, l, t)] = v;
      }
    }
  }
  return beta;
}

/// EM over the alignment lattice: expected entry/transition/exit counts,
/// advance and hold counts per state, and emission responsibilities (joint
/// mixtures on advance steps, marginal mixtures on hold steps). The total
/// log-likelihood over segments is non-decreasing.
inline PairTrainingResult train_pair_model(std::span<const SequencePair> segments, const PairTrainingConfig& cfg) {
  if (segments.empty()) throw std::invalid_argument("train_pair_model: no segments");
  const std::size_t d = segments.front().first.dim(), n = cfg.states;
  for (const auto& seg : segments) {
    if (seg.first.dim() != d || seg.second.dim() != d)
      throw std::invalid_argument("train_pair_model: inconsistent dimensions");
    if (seg.first.empty() || seg.first.size() != seg.second.size())
      throw std::invalid_argument("train_pair_model: segments need two equal-length non-empty streams");
  }
  PairTrainingResult res;
  res.model = detail::initial_pair_model(segments, cfg, res.mixture_fallback);

  for (std::size_t it = 0;; ++it) {
    const PairModel& model = res.model;
    const auto& top = model.topology;
    TopologyAccumulator top_acc(n);
    std::vector<GmmAccumulator> joint_acc, marg_acc;
    for (std::size_t k = 0; k < n; ++k) {
      joint_acc.emplace_back(model.joint[k]);
      marg_acc.emplace_back(model.marginal[k]);
    }
    std::vector<double> adv_count(n, 0.0), hold_count(n, 0.0);
    double ll = 0;

    for (const auto& seg : segments) {
      const auto& fi = seg.first;
      const auto& fj = seg.second;
      const std::size_t S = fi.size(), T = fj.size();
      PairEmissions em(model, fi, fj);
      const auto lat = detail::ahmm_forward(model, em, S, T, cfg.slack);
      const double z = lat.log_likelihood;
      if (z == kNegInf) continue;
      ll += z;
      const auto beta = ahmm_backward(model, em, lat);
      const std::size_t max_lag = T - lat.terminal_first;
      std::vector<double> hold_w(n * T, 0.0);

      auto visit = [&](std::size_t s, std::size_t k, std::size_t t, double log_pred_adv, double log_pred_hold) {
        const double b = beta[lat.index(s, k, t)];
        if (b == kNegInf) return;
        if (s >= 1 && log_pred_adv != kNegInf) {
          const double w = std::exp(model.log_advance(k) + em.joint(k, s - 1, t - 1) + log_pred_adv + b - z);
          adv_count[k] += w;
          joint_acc[k].add(fi[s - 1], fj[t - 1], w);
        }
        if (!model.synchronous && log_pred_hold != kNegInf) {
          const double w = std::exp(model.log_hold(k) + em.marginal(k, t - 1) + log_pred_hold + b - z);
          hold_count[k] += w;
          hold_w[k * T + (t - 1)] += w;
        }
      };

      for (std::size_t k = 0; k < n; ++k) {
        top_acc.add_entry(k, std::exp(lat(0, k, 1) + beta[lat.index(0, k, 1)] - z) +
                                 (S >= 1 ? std::exp(lat(1, k, 1) + beta[lat.index(1, k, 1)] - z) : 0.0));
        visit(1, k, 1, top.log_entry(k), kNegInf);
        visit(0, k, 1, kNegInf, top.log_entry(k));
      }
      std::vector<double> terms(n);
      for (std::size_t t = 2; t <= T; ++t) {
        const std::size_t s_lo = t > max_lag ? t - max_lag : 0;
        for (std::size_t s = s_lo; s <= std::min(S, t); ++s)
          for (std::size_t k = 0; k < n; ++k) {
            const double b = beta[lat.index(s, k, t)];
            if (b == kNegInf) continue;
            double pa = kNegInf, ph = kNegInf;
            const double e_adv = s >= 1 ? model.log_advance(k) + em.joint(k, s - 1, t - 1) : kNegInf;
            const double e_hold = model.synchronous || s > t - 1 ? kNegInf : model.log_hold(k) + em.marginal(k, t - 1);
            for (std::size_t l = 0; l < n; ++l) {
              const double from_adv = s >= 1 ? lat(s - 1, l, t - 1) + top.log_trans(l, k) : kNegInf;
              const double from_hold = s <= t - 1 ? lat(s, l, t - 1) + top.log_trans(l, k) : kNegInf;
              pa = log_add(pa, from_adv);
              ph = log_add(ph, from_hold);
              const double xi = log_add(from_adv + e_adv, from_hold + e_hold) + b - z;
              if (xi != kNegInf) top_acc.add_trans(l, k, std::exp(xi));
            }
            visit(s, k, t, pa, s <= t - 1 ? ph : kNegInf);
          }
      }
      for (std::size_t s = lat.terminal_first; s <= lat.terminal_last; ++s)
        for (std::size_t k = 0; k < n; ++k) top_acc.add_exit(k, std::exp(lat(s, k, T) + top.log_exit(k) - z));
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t t = 0; t < T; ++t) marg_acc[k].add(fj[t], hold_w[k * T + t]);
    }

    res.log_likelihoods.push_back(ll);
    const std::size_t m = res.log_likelihoods.size();
    if (m >= 2) {
      const double prev = res.log_likelihoods[m - 2];
      if (ll - prev <= cfg.tol * std::max(1.0, std::abs(prev))) break;
    }
    if (it >= cfg.max_iters) break;

    PairModel next;
    next.synchronous = model.synchronous;
    next.topology = top_acc.estimate(top);
    for (std::size_t k = 0; k < n; ++k) {
      next.joint.push_back(joint_acc[k].estimate(cfg.var_floor));
      next.marginal.push_back(marg_acc[k].estimate(cfg.var_floor));
      if (model.synchronous) {
        next.advance.push_back(1.0);
      } else {
        const double tot = adv_count[k] + hold_count[k];
        const double eps = tot > 0 ? adv_count[k] / tot : model.advance[k];
        next.advance.push_back(std::clamp(eps, kAdvanceMin, 1.0 - kAdvanceMin));
      }
    }
    res.model = std::move(next);
  }
  return res;
}

} // namespace groupact
