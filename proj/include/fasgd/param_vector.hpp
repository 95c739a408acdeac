// Copyright 2026 The fasgd-sim Authors. All Rights Reserved.
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

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fasgd/errors.hpp"

namespace fasgd {

// Fixed-length flat array of doubles. Holds parameters, gradients and the
// per-coordinate optimizer statistics. The length is set on construction and
// never changes afterwards.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t n, double fill = 0.0) : values_(n, fill) {}
  ParamVector(std::initializer_list<double> init) : values_(init) {}
  explicit ParamVector(std::vector<double> values) : values_(std::move(values)) {}

  ParamVector(const ParamVector&) = default;
  ParamVector(ParamVector&&) noexcept = default;

  // Assignment keeps the length invariant: only equal lengths (or assigning
  // into a default-constructed, empty vector) are allowed.
  ParamVector& operator=(const ParamVector& other) {
    check_assign(other.size());
    values_ = other.values_;
    return *this;
  }
  ParamVector& operator=(ParamVector&& other) {
    check_assign(other.size());
    values_ = std::move(other.values_);
    return *this;
  }

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  std::span<double> span() noexcept { return values_; }
  std::span<const double> span() const noexcept { return values_; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  void fill(double v) {
    for (double& x : values_) x = v;
  }

  bool all_finite() const noexcept {
    for (double x : values_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  void check_assign(std::size_t n) const {
    if (!values_.empty() && n != values_.size()) {
      throw ConfigError("ParamVector length is fixed at " + std::to_string(values_.size()) +
                        ", cannot assign length " + std::to_string(n));
    }
  }

  std::vector<double> values_;
};

inline void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ConfigError(std::string(op) + ": length mismatch (" + std::to_string(a) + " vs " +
                      std::to_string(b) + ")");
  }
}

// a*x + y, inputs untouched.
inline ParamVector axpy(double a, const ParamVector& x, const ParamVector& y) {
  require_same_length(x.size(), y.size(), "axpy");
  ParamVector out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) out[j] = a * x[j] + y[j];
  return out;
}

// y += a*x, same arithmetic as axpy() but without the allocation.
inline void axpy_inplace(double a, const ParamVector& x, ParamVector& y) {
  require_same_length(x.size(), y.size(), "axpy");
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = a * x[j] + y[j];
}

enum class ElementwiseOp { kMul, kSquare, kSqrt, kRecipSqrtEps };

namespace detail {

inline double shifted_root(double x, double eps, std::size_t j) {
  const double shifted = x + eps;
  if (!(shifted >= 0.0)) {
    throw NumericError("negative or NaN argument to sqrt at coordinate " + std::to_string(j) +
                       " (value " + std::to_string(shifted) + ")");
  }
  return std::sqrt(shifted);
}

}  // namespace detail

// Unary forms: square, sqrt(x + eps), 1/sqrt(x + eps).
inline ParamVector elementwise(ElementwiseOp op, const ParamVector& x, double eps = 0.0) {
  ParamVector out(x.size());
  switch (op) {
    case ElementwiseOp::kSquare:
      for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] * x[j];
      break;
    case ElementwiseOp::kSqrt:
      for (std::size_t j = 0; j < x.size(); ++j) out[j] = detail::shifted_root(x[j], eps, j);
      break;
    case ElementwiseOp::kRecipSqrtEps:
      for (std::size_t j = 0; j < x.size(); ++j) out[j] = 1.0 / detail::shifted_root(x[j], eps, j);
      break;
    case ElementwiseOp::kMul:
      throw ConfigError("elementwise: mul needs two operands");
  }
  return out;
}

// Binary form; only mul is binary.
inline ParamVector elementwise(ElementwiseOp op, const ParamVector& x, const ParamVector& y) {
  if (op != ElementwiseOp::kMul) throw ConfigError("elementwise: only mul takes two operands");
  require_same_length(x.size(), y.size(), "elementwise mul");
  ParamVector out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] * y[j];
  return out;
}

// Reductions below sum left to right in index order.

inline double sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

inline double mean(const ParamVector& x) {
  return x.empty() ? 0.0 : sum(x.span()) / static_cast<double>(x.size());
}

inline double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double norm_inf(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::fmax(m, std::fabs(v));
  return m;
}

}  // namespace fasgd
