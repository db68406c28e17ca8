#pragma once

// Shared scalar types, error classes and log-space helpers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace groupact {

using PersonId = std::int64_t;
using Frame = std::int64_t;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Malformed or inconsistent input data (tracks, annotations, scenarios).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Model files that cannot be loaded or models that do not fit the data.
class ModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : kNegInf; }

// Row-major fixed-width sequence of observation vectors.
class Sequence {
public:
  Sequence() = default;
  explicit Sequence(std::size_t dim) : dim_(dim) {}
  Sequence(std::size_t dim, std::size_t length) : dim_(dim), data_(dim * length, 0.0) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return data_.empty(); }

  void push_back(std::span<const double> row) {
    if (row.size() != dim_) throw std::invalid_argument("Sequence::push_back: dimension mismatch");
    data_.insert(data_.end(), row.begin(), row.end());
  }

  std::span<const double> operator[](std::size_t t) const { return {data_.data() + t * dim_, dim_}; }
  std::span<double> operator[](std::size_t t) { return {data_.data() + t * dim_, dim_}; }

  // Last `n` rows as a new sequence.
  Sequence tail(std::size_t n) const {
    n = std::min(n, size());
    Sequence out(dim_);
    out.data_.assign(data_.end() - static_cast<std::ptrdiff_t>(n * dim_), data_.end());
    return out;
  }

  friend bool operator==(const Sequence&, const Sequence&) = default;

private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

} // namespace groupact
