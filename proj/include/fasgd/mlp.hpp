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
#include <span>
#include <string>
#include <vector>

#include "fasgd/errors.hpp"
#include "fasgd/param_vector.hpp"
#include "fasgd/rng.hpp"

namespace fasgd {

// Layer sizes of a one-hidden-layer ReLU perceptron.
//
// All parameters live in one flat ParamVector, laid out as
//
//   [ w1 : inputs x hidden | b1 : hidden | w2 : hidden x outputs | b2 : outputs ]
//
// with both weight matrices stored row-major by their input unit, i.e.
// w1(i, j) = params[i * hidden + j] and w2(j, k) = params[w2_offset() + j * outputs + k].
struct MlpShape {
  std::size_t inputs = 784;
  std::size_t hidden = 200;
  std::size_t outputs = 10;

  std::size_t w1_offset() const noexcept { return 0; }
  std::size_t b1_offset() const noexcept { return inputs * hidden; }
  std::size_t w2_offset() const noexcept { return b1_offset() + hidden; }
  std::size_t b2_offset() const noexcept { return w2_offset() + hidden * outputs; }
  std::size_t param_count() const noexcept { return b2_offset() + outputs; }

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

inline constexpr std::size_t kMnistPixels = 784;
inline constexpr std::size_t kMnistClasses = 10;

// mu input rows (row-major, `dim` columns) and their class labels.
struct Minibatch {
  std::size_t dim = 0;
  std::vector<double> inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t s) const { return {inputs.data() + s * dim, dim}; }

  // Concatenation, used to build merged batches.
  void append(const Minibatch& other) {
    if (dim == 0) dim = other.dim;
    require_same_length(dim, other.dim, "Minibatch::append");
    inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  }
};

// Activations kept by forward() for backward().
struct ForwardCache {
  std::vector<double> hidden;  // mu x hidden, post-ReLU
  std::vector<double> probs;   // mu x outputs, softmax
};

struct ForwardResult {
  double cost = 0.0;  // mean negative log-likelihood
  ForwardCache cache;
};

class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpShape shape) : shape_(shape) {}

  const MlpShape& shape() const noexcept { return shape_; }
  std::size_t param_count() const noexcept { return shape_.param_count(); }

  ForwardResult forward(const ParamVector& params, const Minibatch& batch) const {
    check(params, batch);
    const std::size_t n_in = shape_.inputs, n_h = shape_.hidden, n_out = shape_.outputs;
    const double* w1 = params.data() + shape_.w1_offset();
    const double* b1 = params.data() + shape_.b1_offset();
    const double* w2 = params.data() + shape_.w2_offset();
    const double* b2 = params.data() + shape_.b2_offset();

    ForwardResult out;
    out.cache.hidden.assign(batch.size() * n_h, 0.0);
    out.cache.probs.assign(batch.size() * n_out, 0.0);
    std::vector<double> logits(n_out);

    double total = 0.0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const double* x = batch.inputs.data() + s * n_in;
      double* h = out.cache.hidden.data() + s * n_h;
      for (std::size_t j = 0; j < n_h; ++j) h[j] = b1[j];
      for (std::size_t i = 0; i < n_in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* row = w1 + i * n_h;
        for (std::size_t j = 0; j < n_h; ++j) h[j] += xi * row[j];
      }
      for (std::size_t j = 0; j < n_h; ++j) h[j] = h[j] > 0.0 ? h[j] : 0.0;

      for (std::size_t k = 0; k < n_out; ++k) logits[k] = b2[k];
      for (std::size_t j = 0; j < n_h; ++j) {
        const double hj = h[j];
        if (hj == 0.0) continue;
        const double* row = w2 + j * n_out;
        for (std::size_t k = 0; k < n_out; ++k) logits[k] += hj * row[k];
      }

      double zmax = logits[0];
      for (std::size_t k = 1; k < n_out; ++k) zmax = std::fmax(zmax, logits[k]);
      double denom = 0.0;
      double* p = out.cache.probs.data() + s * n_out;
      for (std::size_t k = 0; k < n_out; ++k) {
        p[k] = std::exp(logits[k] - zmax);
        denom += p[k];
      }
      for (std::size_t k = 0; k < n_out; ++k) p[k] /= denom;
      const auto label = static_cast<std::size_t>(batch.labels[s]);
      total += -(logits[label] - zmax - std::log(denom));
    }
    out.cost = total / static_cast<double>(batch.size());
    return out;
  }

  double cost(const ParamVector& params, const Minibatch& batch) const {
    return forward(params, batch).cost;
  }

  // Gradient of the mean NLL over the batch, in the parameter layout.
  ParamVector backward(const ParamVector& params, const Minibatch& batch,
                       const ForwardCache& cache) const {
    check(params, batch);
    const std::size_t n_in = shape_.inputs, n_h = shape_.hidden, n_out = shape_.outputs;
    if (cache.hidden.size() != batch.size() * n_h || cache.probs.size() != batch.size() * n_out) {
      throw ConfigError("Mlp::backward: cache does not match batch");
    }
    const double* w2 = params.data() + shape_.w2_offset();

    ParamVector grad(shape_.param_count());
    double* gw1 = grad.data() + shape_.w1_offset();
    double* gb1 = grad.data() + shape_.b1_offset();
    double* gw2 = grad.data() + shape_.w2_offset();
    double* gb2 = grad.data() + shape_.b2_offset();

    const double inv_mu = 1.0 / static_cast<double>(batch.size());
    std::vector<double> dlogit(n_out), dh(n_h);
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const double* x = batch.inputs.data() + s * n_in;
      const double* h = cache.hidden.data() + s * n_h;
      const double* p = cache.probs.data() + s * n_out;
      const auto label = static_cast<std::size_t>(batch.labels[s]);

      for (std::size_t k = 0; k < n_out; ++k) {
        dlogit[k] = (p[k] - (k == label ? 1.0 : 0.0)) * inv_mu;
        gb2[k] += dlogit[k];
      }
      for (std::size_t j = 0; j < n_h; ++j) {
        const double hj = h[j];
        if (hj == 0.0) {
          dh[j] = 0.0;
          continue;
        }
        const double* wrow = w2 + j * n_out;
        double* grow = gw2 + j * n_out;
        double acc = 0.0;
        for (std::size_t k = 0; k < n_out; ++k) {
          grow[k] += hj * dlogit[k];
          acc += wrow[k] * dlogit[k];
        }
        dh[j] = acc;
        gb1[j] += acc;
      }
      for (std::size_t i = 0; i < n_in; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        double* grow = gw1 + i * n_h;
        for (std::size_t j = 0; j < n_h; ++j) grow[j] += xi * dh[j];
      }
    }
    return grad;
  }

  // Convenience: forward then backward. Returns the gradient, cost via out-param.
  ParamVector gradient(const ParamVector& params, const Minibatch& batch,
                       double* cost_out = nullptr) const {
    ForwardResult fr = forward(params, batch);
    if (cost_out != nullptr) *cost_out = fr.cost;
    return backward(params, batch, fr.cache);
  }

  // Glorot-uniform weights, zero biases. Draws are consumed in layout order
  // (all of w1, then all of w2).
  ParamVector init_params(RngStream& rng) const {
    ParamVector params(shape_.param_count());
    const double r1 = glorot_bound(shape_.inputs, shape_.hidden);
    const double r2 = glorot_bound(shape_.hidden, shape_.outputs);
    for (std::size_t j = 0; j < shape_.inputs * shape_.hidden; ++j) {
      params[shape_.w1_offset() + j] = (2.0 * rng.next_uniform() - 1.0) * r1;
    }
    for (std::size_t j = 0; j < shape_.hidden * shape_.outputs; ++j) {
      params[shape_.w2_offset() + j] = (2.0 * rng.next_uniform() - 1.0) * r2;
    }
    return params;
  }

  static double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  }

 private:
  void check(const ParamVector& params, const Minibatch& batch) const {
    if (params.size() != shape_.param_count()) {
      throw ConfigError("Mlp: expected " + std::to_string(shape_.param_count()) +
                        " parameters, got " + std::to_string(params.size()));
    }
    if (batch.size() == 0) throw ConfigError("Mlp: empty minibatch");
    if (batch.dim != shape_.inputs || batch.inputs.size() != batch.size() * shape_.inputs) {
      throw ConfigError("Mlp: minibatch input width does not match the model");
    }
    for (int label : batch.labels) {
      if (label < 0 || static_cast<std::size_t>(label) >= shape_.outputs) {
        throw ConfigError("Mlp: label " + std::to_string(label) + " out of range");
      }
    }
  }

  MlpShape shape_;
};

}  // namespace fasgd
