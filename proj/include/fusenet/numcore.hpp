// Copyright 2026 The FuseNet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major tensors, the handful of activations the layers need, and a
// seeded random stream whose output does not depend on the standard library
// implementation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fusenet/errors.hpp"

namespace fusenet {

using Tensor1D = std::vector<double>;

inline std::string shape_str(std::size_t rows, std::size_t cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

inline std::string shape_str(std::size_t len) {
  return "[" + std::to_string(len) + "]";
}

class Tensor2D {
 public:
  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("Tensor2D data length " + std::to_string(data_.size()) +
                       " does not match " + shape_str(rows_, cols_));
    }
  }

  static Tensor2D identity(std::size_t n) {
    Tensor2D t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::string shape() const { return shape_str(rows_, cols_); }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Tensor2D&, const Tensor2D&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(),
                     [](double x) { return std::isfinite(x); });
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// y += alpha * x
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline Tensor1D concat(std::initializer_list<std::span<const double>> parts) {
  Tensor1D out;
  std::size_t n = 0;
  for (auto p : parts) n += p.size();
  out.reserve(n);
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

/// W^T x + b, with W stored in x (rows) by output (cols).
inline Tensor1D affine(const Tensor2D& W, std::span<const double> x,
                       std::span<const double> b) {
  if (W.rows() != x.size() || W.cols() != b.size()) {
    throw ShapeError("affine: W " + W.shape() + " vs x " + shape_str(x.size()) +
                     ", b " + shape_str(b.size()));
  }
  Tensor1D y(b.begin(), b.end());
  for (std::size_t i = 0; i < W.rows(); ++i) {
    if (x[i] != 0.0) axpy(x[i], W.row(i), y);
  }
  return y;
}

/// W * v, i.e. the input-side gradient of affine for upstream v.
inline Tensor1D matvec(const Tensor2D& W, std::span<const double> v) {
  if (W.cols() != v.size()) {
    throw ShapeError("matvec: W " + W.shape() + " vs v " + shape_str(v.size()));
  }
  Tensor1D y(W.rows());
  for (std::size_t i = 0; i < W.rows(); ++i) y[i] = dot(W.row(i), v);
  return y;
}

/// G += x v^T (accumulates the weight gradient of affine).
inline void add_outer(std::span<const double> x, std::span<const double> v,
                      Tensor2D& G) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != 0.0) axpy(x[i], v, G.row(i));
  }
}

inline Tensor1D softmax(std::span<const double> z) {
  if (z.empty()) throw ArgumentError("softmax: empty input");
  const double m = *std::max_element(z.begin(), z.end());
  Tensor1D out(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

inline double sigmoid(double z) {
  // Split by sign so exp never overflows.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double tanh_act(double z) { return std::tanh(z); }

inline Tensor1D sigmoid(std::span<const double> z) {
  Tensor1D out(z.size());
  std::transform(z.begin(), z.end(), out.begin(),
                 [](double v) { return sigmoid(v); });
  return out;
}

inline Tensor1D tanh_act(std::span<const double> z) {
  Tensor1D out(z.size());
  std::transform(z.begin(), z.end(), out.begin(),
                 [](double v) { return std::tanh(v); });
  return out;
}

/// Seeded random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions are implemented here rather than taken from
/// <random> because the standard leaves those algorithms to the vendor, which
/// would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  /// Deterministically derives an independent seed from a base seed and
  /// a pair of stream identifiers (splitmix64 finalizer).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0) {
    auto mix = [](std::uint64_t x) {
      x += 0x9e3779b97f4a7c15ULL;
      x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
      x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
      return x ^ (x >> 31);
    };
    return mix(mix(mix(seed) ^ a) ^ b);
  }

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), rejection sampled to avoid modulo bias.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw ArgumentError("Rng::uniform_int: empty range");
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() -
        std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller; one draw per call.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::vector<T>& xs) {
    for (std::size_t i = xs.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(i));
      std::swap(xs[i - 1], xs[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Glorot/Xavier uniform fill for a fan_in x fan_out matrix.
inline void glorot_uniform(Tensor2D& W, Rng& rng) {
  const double limit =
      std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
  for (double& v : W.values()) v = rng.uniform(-limit, limit);
}

}  // namespace fusenet
