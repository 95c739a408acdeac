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

// Built-in consistency checks behind `fasgd_sim selftest`.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fasgd/dispatcher.hpp"
#include "fasgd/metrics.hpp"

namespace fasgd {

// Largest per-coordinate relative difference |a - b| / max(|a|, |b|, floor);
// coordinates that are both exactly zero count as equal.
inline double max_relative_difference(const ParamVector& a, const ParamVector& b,
                                      double floor = 0.0) {
  require_same_length(a.size(), b.size(), "max_relative_difference");
  double worst = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double scale = std::max({std::fabs(a[j]), std::fabs(b[j]), floor});
    if (scale == 0.0) continue;
    worst = std::max(worst, std::fabs(a[j] - b[j]) / scale);
  }
  return worst;
}

inline double rms(const ParamVector& x) {
  return x.empty() ? 0.0 : norm2(x.span()) / std::sqrt(static_cast<double>(x.size()));
}

struct Divergence {
  // max |a - b| / max(|a|, |b|)
  double strict = 0.0;
  // max |a - b| / max(|a|, |b|, rms(a)); coordinates passing through zero
  // are compared at the scale of the whole vector.
  double scaled = 0.0;
};

// Runs the synchronous policy for `steps` steps and replays, round by round,
// plain SGD on the union of the round's minibatches (concatenated in
// ascending client order). Reports the worst differences between the two
// parameter vectors seen after any completed round.
inline Divergence sync_vanilla_divergence(RunConfig cfg, const SimData& data, std::int64_t steps) {
  cfg.policy = Policy::kSync;
  cfg.drops_enabled = false;
  cfg.iterations = steps;
  Simulation sim(cfg, data);

  ParamVector vanilla = sim.server().params();
  std::map<int, Minibatch> round;
  Divergence worst;
  sim.set_observer([&](const SimEvent& ev) {
    round[ev.client] = data.train->gather(ev.batch_indices);
    if (!ev.wrote) return;
    Minibatch merged;
    for (const auto& [id, b] : round) merged.append(b);
    round.clear();
    const ParamVector g = sim.model().gradient(vanilla, merged);
    axpy_inplace(-cfg.alpha, g, vanilla);
    const ParamVector& synced = sim.server().params();
    worst.strict = std::max(worst.strict, max_relative_difference(vanilla, synced));
    worst.scaled = std::max(worst.scaled, max_relative_difference(vanilla, synced, rms(synced)));
  });
  for (std::int64_t k = 0; k < steps; ++k) sim.step();
  return worst;
}

// Small synthetic configuration that the self checks run on.
inline RunConfig selftest_config() {
  RunConfig c;
  c.policy = Policy::kFasgd;
  c.lambda = 4;
  c.mu = 8;
  c.alpha = 0.005;
  c.iterations = 200;
  c.eval_every = 50;
  c.seed = 7;
  c.data_source = DataSource::kSynthetic;
  c.synthetic_n = 600;
  c.train_size = 500;
  c.val_size = 100;
  return c;
}

}  // namespace fasgd
