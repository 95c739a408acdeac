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

// Central finite-difference check of Mlp::backward.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fasgd/mlp.hpp"
#include "fasgd/param_vector.hpp"
#include "fasgd/rng.hpp"

namespace fasgd {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

// |a - b| / max(|a|, |b|, floor). The floor keeps coordinates whose true
// gradient is ~0 (dead ReLU units) from dividing round-off by zero.
inline double relative_error(double a, double b, double floor = 1e-8) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

// Compares `coords` randomly chosen gradient coordinates against
// (f(x + h) - f(x - h)) / 2h.
inline GradcheckResult check_gradient(const Mlp& model, const ParamVector& params,
                                      const Minibatch& batch, RngStream& rng,
                                      std::size_t coords = 20, double h = 1e-5) {
  const ParamVector analytic = model.gradient(params, batch);
  GradcheckResult out;
  ParamVector probe = params;
  for (std::size_t k = 0; k < coords; ++k) {
    auto j = static_cast<std::size_t>(rng.next_uniform() * static_cast<double>(params.size()));
    j = std::min(j, params.size() - 1);
    const double saved = probe[j];
    probe[j] = saved + h;
    const double up = model.cost(probe, batch);
    probe[j] = saved - h;
    const double down = model.cost(probe, batch);
    probe[j] = saved;
    const double numeric = (up - down) / (2.0 * h);
    out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic[j], numeric));
    ++out.coordinates;
  }
  return out;
}

// Random problem on a small network: Glorot weights, biases ~ U(-0.1, 0.1),
// inputs ~ U(0, 1), uniformly random labels.
struct GradcheckProblem {
  Mlp model;
  ParamVector params;
  Minibatch batch;
};

inline GradcheckProblem make_gradcheck_problem(std::uint64_t seed, MlpShape shape = {6, 4, 3},
                                               std::size_t batch_size = 5) {
  GradcheckProblem p{Mlp(shape), {}, {}};
  RngStream rng(seed, "gradcheck");
  p.params = p.model.init_params(rng);
  for (std::size_t j = 0; j < shape.hidden; ++j) {
    p.params[shape.b1_offset() + j] = 0.2 * rng.next_uniform() - 0.1;
  }
  for (std::size_t k = 0; k < shape.outputs; ++k) {
    p.params[shape.b2_offset() + k] = 0.2 * rng.next_uniform() - 0.1;
  }
  p.batch.dim = shape.inputs;
  for (std::size_t s = 0; s < batch_size; ++s) {
    for (std::size_t i = 0; i < shape.inputs; ++i) p.batch.inputs.push_back(rng.next_uniform());
    auto label = static_cast<int>(rng.next_uniform() * static_cast<double>(shape.outputs));
    p.batch.labels.push_back(std::min(label, static_cast<int>(shape.outputs) - 1));
  }
  return p;
}

// The standard check: 6-4-3 network, `coords` coordinates for each of `seeds` seeds.
inline GradcheckResult run_gradcheck(std::uint64_t first_seed = 1, std::size_t seeds = 5,
                                     std::size_t coords = 20, double h = 1e-5) {
  GradcheckResult total;
  for (std::size_t k = 0; k < seeds; ++k) {
    const auto problem = make_gradcheck_problem(first_seed + k);
    RngStream coord_rng(first_seed + k, "gradcheck-coords");
    const auto r = check_gradient(problem.model, problem.params, problem.batch, coord_rng, coords, h);
    total.max_rel_error = std::max(total.max_rel_error, r.max_rel_error);
    total.coordinates += r.coordinates;
  }
  return total;
}

}  // namespace fasgd
