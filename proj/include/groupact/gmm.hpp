#pragma once

// Diagonal-covariance Gaussian mixtures: densities, EM fitting, and the
// weighted sufficient statistics used by the sequence-model M-steps.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "common.hpp"

namespace groupact {

inline constexpr double kVarianceFloor = 1e-6;
inline constexpr double kWeightFloor = 1e-8;

struct GaussianComponent {
  double weight = 1.0;
  std::vector<double> mean;
  std::vector<double> var;

  friend bool operator==(const GaussianComponent&, const GaussianComponent&) = default;
};

class GaussianMixture {
public:
  GaussianMixture() = default;

  explicit GaussianMixture(std::vector<GaussianComponent> components, double var_floor = kVarianceFloor)
      : components_(std::move(components)) {
    if (components_.empty()) throw std::invalid_argument("GaussianMixture: no components");
    dim_ = components_.front().mean.size();
    if (dim_ == 0) throw std::invalid_argument("GaussianMixture: zero dimension");
    double total = 0;
    for (const auto& c : components_) {
      if (c.mean.size() != dim_ || c.var.size() != dim_)
        throw std::invalid_argument("GaussianMixture: inconsistent component dimension");
      if (!(c.weight > 0.0)) throw std::invalid_argument("GaussianMixture: weights must be positive");
      for (std::size_t d = 0; d < dim_; ++d) {
        if (!std::isfinite(c.mean[d])) throw std::invalid_argument("GaussianMixture: non-finite mean");
        if (!(c.var[d] >= var_floor * (1.0 - 1e-12)) || !std::isfinite(c.var[d]))
          throw std::invalid_argument("GaussianMixture: variance below floor");
      }
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("GaussianMixture: weights must sum to 1");
    cache();
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return components_.size(); }
  const std::vector<GaussianComponent>& components() const { return components_; }

  // log w_c - (1/2) sum_d log(2 pi var_d)
  double log_norm(std::size_t c) const { return log_norm_[c]; }

  /// -(1/2) sum over dims [offset, offset + x.size()) of the squared
  /// standardized distance and log(2 pi var): a diagonal density factors over
  /// any split of the dimensions.
  double partial_log_density(std::size_t c, std::span<const double> x, std::size_t offset) const {
    const auto& comp = components_[c];
    const double* iv = inv_var_.data() + c * dim_;
    double acc = 0;
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double diff = x[d] - comp.mean[offset + d];
      acc += diff * diff * iv[offset + d] + log_two_pi_var_[c * dim_ + offset + d];
    }
    return -0.5 * acc;
  }

  // sum over dims [offset, offset + x.size()) of (x_d - mean_d)^2 / var_d
  double mahalanobis(std::size_t c, std::span<const double> x, std::size_t offset) const {
    const auto& mean = components_[c].mean;
    const double* iv = inv_var_.data() + c * dim_;
    double acc = 0;
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double diff = x[d] - mean[offset + d];
      acc += diff * diff * iv[offset + d];
    }
    return acc;
  }

  double component_log_density(std::size_t c, std::span<const double> x) const {
    const auto& comp = components_[c];
    const double* iv = inv_var_.data() + c * dim_;
    double acc = 0;
    for (std::size_t d = 0; d < dim_; ++d) {
      const double diff = x[d] - comp.mean[d];
      acc += diff * diff * iv[d];
    }
    return log_norm_[c] - 0.5 * acc;
  }

  double log_density(std::span<const double> x) const {
    if (x.size() != dim_) throw std::invalid_argument("GaussianMixture::log_density: dimension mismatch");
    double best = kNegInf;
    double terms[16];
    std::vector<double> spill;
    double* t = terms;
    if (size() > 16) {
      spill.resize(size());
      t = spill.data();
    }
    for (std::size_t c = 0; c < size(); ++c) {
      t[c] = component_log_density(c, x);
      best = std::max(best, t[c]);
    }
    double s = 0;
    for (std::size_t c = 0; c < size(); ++c) s += std::exp(t[c] - best);
    return best + std::log(s);
  }

  friend bool operator==(const GaussianMixture& a, const GaussianMixture& b) {
    return a.components_ == b.components_;
  }

private:
  void cache() {
    log_norm_.assign(size(), 0.0);
    inv_var_.assign(size() * dim_, 0.0);
    log_two_pi_var_.assign(size() * dim_, 0.0);
    for (std::size_t c = 0; c < size(); ++c) {
      double ln = std::log(components_[c].weight);
      for (std::size_t d = 0; d < dim_; ++d) {
        const double v = components_[c].var[d];
        inv_var_[c * dim_ + d] = 1.0 / v;
        log_two_pi_var_[c * dim_ + d] = std::log(2.0 * std::numbers::pi * v);
        ln -= 0.5 * log_two_pi_var_[c * dim_ + d];
      }
      log_norm_[c] = ln;
    }
  }

  std::size_t dim_ = 0;
  std::vector<GaussianComponent> components_;
  std::vector<double> log_norm_;
  std::vector<double> inv_var_;
  std::vector<double> log_two_pi_var_;
};

/// Maximizes sum_c r_c log w_c subject to w_c >= floor and sum w_c = 1.
inline std::vector<double> floored_weights(std::span<const double> occupancy, double floor = kWeightFloor) {
  const std::size_t k = occupancy.size();
  std::vector<bool> pinned(k, false);
  std::vector<double> w(k, floor);
  while (true) {
    double free_mass = 1.0, free_occ = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (pinned[c])
        free_mass -= floor;
      else
        free_occ += occupancy[c];
    }
    if (free_occ <= 0.0) {
      // Nothing observed: spread the free mass evenly.
      std::size_t nfree = std::count(pinned.begin(), pinned.end(), false);
      for (std::size_t c = 0; c < k; ++c) w[c] = pinned[c] ? floor : free_mass / static_cast<double>(nfree);
      return w;
    }
    bool changed = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (pinned[c]) continue;
      w[c] = free_mass * occupancy[c] / free_occ;
      if (w[c] < floor) pinned[c] = changed = true;
    }
    if (!changed) {
      for (std::size_t c = 0; c < k; ++c)
        if (pinned[c]) w[c] = floor;
      return w;
    }
  }
}

/// Weighted sufficient statistics for one mixture. Responsibilities are taken
/// under the mixture passed at construction, so a sweep of `add` followed by
/// `estimate` is one EM update.
class GmmAccumulator {
public:
  explicit GmmAccumulator(const GaussianMixture& current)
      : current_(&current),
        occ_(current.size(), 0.0),
        sum_(current.size() * current.dim(), 0.0),
        sumsq_(current.size() * current.dim(), 0.0) {}

  // x = head ++ tail; tail may be empty.
  void add(std::span<const double> head, std::span<const double> tail, double weight) {
    if (!(weight > 0.0)) return;
    const std::size_t k = current_->size();
    double resp[16];
    std::vector<double> spill;
    double* r = resp;
    if (k > 16) {
      spill.resize(k);
      r = spill.data();
    }
    double best = kNegInf;
    for (std::size_t c = 0; c < k; ++c) {
      r[c] = current_->log_norm(c) -
             0.5 * (current_->mahalanobis(c, head, 0) + current_->mahalanobis(c, tail, head.size()));
      best = std::max(best, r[c]);
    }
    double s = 0;
    for (std::size_t c = 0; c < k; ++c) s += (r[c] = std::exp(r[c] - best));
    for (std::size_t c = 0; c < k; ++c) add_component(c, head, tail, weight * r[c] / s);
  }

  void add(std::span<const double> x, double weight) { add(x, {}, weight); }

  // Adds with explicit per-component responsibilities (summing to 1).
  void add_component(std::size_t c, std::span<const double> head, std::span<const double> tail, double w) {
    if (!(w > 0.0)) return;
    const std::size_t dim = current_->dim();
    occ_[c] += w;
    double* su = sum_.data() + c * dim;
    double* sq = sumsq_.data() + c * dim;
    for (std::size_t d = 0; d < head.size(); ++d) {
      su[d] += w * head[d];
      sq[d] += w * head[d] * head[d];
    }
    for (std::size_t d = 0; d < tail.size(); ++d) {
      su[head.size() + d] += w * tail[d];
      sq[head.size() + d] += w * tail[d] * tail[d];
    }
  }

  double total_weight() const {
    double t = 0;
    for (double o : occ_) t += o;
    return t;
  }

  /// M-step. Components with no occupancy keep their current parameters;
  /// a mixture with no data at all is returned unchanged.
  GaussianMixture estimate(double var_floor = kVarianceFloor) const {
    if (!(total_weight() > 0.0)) return *current_;
    const std::size_t dim = current_->dim();
    auto w = floored_weights(occ_);
    std::vector<GaussianComponent> comps;
    for (std::size_t c = 0; c < current_->size(); ++c) {
      GaussianComponent g = current_->components()[c];
      g.weight = w[c];
      if (occ_[c] > 1e-300) {
        for (std::size_t d = 0; d < dim; ++d) {
          const double m = sum_[c * dim + d] / occ_[c];
          g.mean[d] = m;
          g.var[d] = std::max(sumsq_[c * dim + d] / occ_[c] - m * m, var_floor);
        }
      }
      comps.push_back(std::move(g));
    }
    return GaussianMixture(std::move(comps), var_floor);
  }

private:
  const GaussianMixture* current_;
  std::vector<double> occ_;
  std::vector<double> sum_;
  std::vector<double> sumsq_;
};

// ---------------------------------------------------------------------------
// Stand-alone EM

struct EmOptions {
  std::size_t max_iters = 200;
  double tol = 1e-4;  // relative log-likelihood improvement
  double var_floor = kVarianceFloor;
  std::uint64_t seed = 0;
};

struct EmResult {
  GaussianMixture mixture;
  std::vector<double> log_likelihoods;  // one per evaluated parameter set
  bool converged = false;
};

namespace detail {

// Per-dimension scale used to standardize k-means distances.
inline std::vector<double> dimension_scale(const Sequence& xs) {
  const std::size_t n = xs.size(), dim = xs.dim();
  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += xs[t][d];
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t d = 0; d < dim; ++d) sd[d] += (xs[t][d] - mean[d]) * (xs[t][d] - mean[d]);
  for (auto& s : sd) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 1e-12)) s = 1.0;
  }
  return sd;
}

/// k-means++ seeding followed by Lloyd iterations on standardized data.
/// Returns a cluster index per sample.
inline std::vector<std::size_t> kmeans(const Sequence& xs, std::size_t k, std::uint64_t seed,
                                       std::size_t iters = 25) {
  const std::size_t n = xs.size(), dim = xs.dim();
  const auto scale = dimension_scale(xs);
  auto dist2 = [&](std::span<const double> a, std::span<const double> b) {
    double s = 0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double z = (a[d] - b[d]) / scale[d];
      s += z * z;
    }
    return s;
  };
  std::mt19937_64 rng(seed);
  Sequence centers(dim);
  centers.push_back(xs[rng() % n]);
  std::vector<double> best(n);
  while (centers.size() < k) {
    double total = 0;
    for (std::size_t t = 0; t < n; ++t) {
      best[t] = std::numeric_limits<double>::max();
      for (std::size_t c = 0; c < centers.size(); ++c) best[t] = std::min(best[t], dist2(xs[t], centers[c]));
      total += best[t];
    }
    std::size_t pick = 0;
    if (total > 0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= best[pick];
        if (u <= 0) break;
      }
    } else {
      pick = rng() % n;
    }
    centers.push_back(xs[pick]);
  }
  std::vector<std::size_t> label(n, 0);
  for (std::size_t it = 0; it < iters; ++it) {
    bool changed = it == 0;
    for (std::size_t t = 0; t < n; ++t) {
      std::size_t arg = 0;
      double bd = dist2(xs[t], centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = dist2(xs[t], centers[c]);
        if (d < bd) bd = d, arg = c;
      }
      if (label[t] != arg) label[t] = arg, changed = true;
    }
    if (!changed) break;
    Sequence next(dim, k);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t t = 0; t < n; ++t) {
      ++count[label[t]];
      for (std::size_t d = 0; d < dim; ++d) next[label[t]][d] += xs[t][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) {
        for (std::size_t d = 0; d < dim; ++d) next[c][d] = centers[c][d];
      } else {
        for (std::size_t d = 0; d < dim; ++d) next[c][d] /= static_cast<double>(count[c]);
      }
    }
    centers = std::move(next);
  }
  return label;
}

} // namespace detail

/// Mixture initialized from a hard clustering: per-cluster moments, with the
/// pooled moments standing in for clusters too small to estimate a variance.
inline GaussianMixture mixture_from_labels(const Sequence& xs, std::span<const std::size_t> label, std::size_t k,
                                           double var_floor = kVarianceFloor) {
  const std::size_t n = xs.size(), dim = xs.dim();
  std::vector<double> gmean(dim, 0.0), gvar(dim, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t d = 0; d < dim; ++d) gmean[d] += xs[t][d] / static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t d = 0; d < dim; ++d) gvar[d] += (xs[t][d] - gmean[d]) * (xs[t][d] - gmean[d]) / static_cast<double>(n);
  std::vector<GaussianComponent> comps(k);
  std::vector<double> count(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) comps[c] = {0.0, std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (std::size_t t = 0; t < n; ++t) {
    count[label[t]] += 1;
    for (std::size_t d = 0; d < dim; ++d) comps[label[t]].mean[d] += xs[t][d];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] == 0) {
      comps[c].mean = gmean;
      continue;
    }
    for (auto& m : comps[c].mean) m /= count[c];
  }
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t d = 0; d < dim; ++d) {
      const double z = xs[t][d] - comps[label[t]].mean[d];
      comps[label[t]].var[d] += z * z;
    }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < dim; ++d) {
      double v = count[c] >= 2 ? comps[c].var[d] / count[c] : gvar[d];
      comps[c].var[d] = std::max(v, var_floor);
    }
  }
  auto w = floored_weights(count, 1e-3);
  for (std::size_t c = 0; c < k; ++c) comps[c].weight = w[c];
  return GaussianMixture(std::move(comps), var_floor);
}

inline GaussianMixture kmeans_mixture(const Sequence& xs, std::size_t k, std::uint64_t seed,
                                      double var_floor = kVarianceFloor) {
  if (xs.size() < k || k == 0) throw std::invalid_argument("kmeans_mixture: need at least k samples");
  const auto label = detail::kmeans(xs, k, seed);
  return mixture_from_labels(xs, label, k, var_floor);
}

inline double total_log_likelihood(const GaussianMixture& g, const Sequence& xs) {
  double ll = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) ll += g.log_density(xs[t]);
  return ll;
}

/// EM for a diagonal mixture, initialized by seeded k-means. The returned
/// log-likelihood sequence is non-decreasing.
inline EmResult fit_em(const Sequence& xs, std::size_t k, const EmOptions& opts = {}) {
  if (xs.size() < k || k == 0) throw std::invalid_argument("fit_em: need at least k samples");
  EmResult res;
  res.mixture = kmeans_mixture(xs, k, opts.seed, opts.var_floor);
  for (std::size_t it = 0;; ++it) {
    GmmAccumulator acc(res.mixture);
    double ll = 0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      ll += res.mixture.log_density(xs[t]);
      acc.add(xs[t], 1.0);
    }
    res.log_likelihoods.push_back(ll);
    const std::size_t n = res.log_likelihoods.size();
    if (n >= 2) {
      const double prev = res.log_likelihoods[n - 2];
      if (ll - prev <= opts.tol * std::max(1.0, std::abs(prev))) {
        res.converged = true;
        break;
      }
    }
    if (it >= opts.max_iters) break;
    res.mixture = acc.estimate(opts.var_floor);
  }
  return res;
}

} // namespace groupact
