#pragma once

// Dense row-major matrices, softmax/normalization helpers, a counter-based
// random stream and the central-difference gradient oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "g2l/errors.hpp"

namespace g2l {

using Vector = std::vector<double>;

// Row-major matrix of doubles. Rows usually hold one embedding each.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
      throw DomainError("matrix data length does not match rows x cols");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Matrix& operator+=(const Matrix& o) {
    if (o.rows_ != rows_ || o.cols_ != cols_) throw DomainError("matrix shape mismatch in +=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// A matrix whose rows are feature vectors. `normalized` records that every
// row was brought to unit norm.
struct EmbeddingMatrix {
  Matrix values;
  bool normalized = false;

  std::size_t rows() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
  std::span<const double> row(std::size_t r) const { return values.row(r); }

  bool operator==(const EmbeddingMatrix&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

// Pairwise summation; result does not depend on how callers chunk the work.
inline double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DomainError("cosine_similarity: dimension mismatch");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine_similarity: zero-norm input");
  return dot(a, b) / (na * nb);
}

// Softmax of a single row after dividing by temperature; max-subtracted.
inline void softmax_inplace(std::span<double> row, double temperature = 1.0) {
  if (!(temperature > 0.0)) throw DomainError("softmax: temperature must be > 0");
  if (row.empty()) return;
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : row) mx = std::max(mx, v / temperature);
  double total = 0.0;
  for (double& v : row) {
    v = std::exp(v / temperature - mx);
    total += v;
  }
  for (double& v : row) v /= total;
}

inline Matrix row_softmax(const Matrix& m, double temperature = 1.0) {
  if (!(temperature > 0.0)) throw DomainError("row_softmax: temperature must be > 0");
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) softmax_inplace(out.row(r), temperature);
  return out;
}

inline constexpr double kMinRowNorm = 1e-12;
inline constexpr double kUnitNormTolerance = 1e-9;

inline Matrix l2_normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const double n = norm(row);
    if (!(n > kMinRowNorm))
      throw DomainError("l2_normalize_rows: row " + std::to_string(r) + " has near-zero norm");
    for (double& v : row) v /= n;
  }
  return out;
}

inline bool rows_unit_norm(const Matrix& m, double tol = kUnitNormTolerance) {
  for (std::size_t r = 0; r < m.rows(); ++r)
    if (std::abs(norm(m.row(r)) - 1.0) > tol) return false;
  return true;
}

inline EmbeddingMatrix make_embeddings(const Matrix& raw) {
  return EmbeddingMatrix{l2_normalize_rows(raw), true};
}

// Gradient of the map y -> y/|y| applied to an upstream gradient.
// `unit` is the normalized output, `length` the pre-normalization norm.
inline void normalize_backward(std::span<const double> unit, double length,
                               std::span<const double> upstream, std::span<double> out) {
  const double proj = dot(upstream, unit);
  for (std::size_t i = 0; i < unit.size(); ++i) out[i] = (upstream[i] - proj * unit[i]) / length;
}

// Central differences, one entry at a time.
inline Matrix finite_diff_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                                   double h = 1e-5) {
  if (!(h > 0.0)) throw DomainError("finite_diff_gradient: step must be > 0");
  Matrix probe = x;
  Matrix grad(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double fp = f(probe);
    probe.data()[i] = orig - h;
    const double fm = f(probe);
    probe.data()[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw DomainError("finite_diff_gradient: non-finite function value at entry " +
                        std::to_string(i));
    grad.data()[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

// |g - g_hat| / max(1, |g|, |g_hat|), maximised over entries.
inline double max_relative_error(const Matrix& g, const Matrix& g_hat) {
  if (g.size() != g_hat.size()) throw DomainError("max_relative_error: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double a = g.data()[i];
    const double b = g_hat.data()[i];
    const double scale = std::max({1.0, std::abs(a), std::abs(b)});
    worst = std::max(worst, std::abs(a - b) / scale);
  }
  return worst;
}

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based generator: draw k is a pure function of (seed, stream, k),
// so sequences are identical on every platform and streams never overlap in
// practice. Not thread-shareable; derive one stream per worker instead.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_(stream_id), key_(mix64(seed ^ mix64(stream_id ^ 0x5851f42d4c957f2dULL))) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    const std::uint64_t c = counter_++;
    return mix64(key_ + mix64(c * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
  }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n) by rejection; unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw DomainError("uniform_index: empty range");
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // A child stream whose identity depends on this stream and `tag`.
  RngStream derive(std::uint64_t tag) const { return RngStream(mix64(key_ ^ tag), tag); }

  template <class T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline Matrix random_normal_matrix(std::size_t rows, std::size_t cols, RngStream& rng,
                                   double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = scale * rng.normal();
  return m;
}

}  // namespace g2l
