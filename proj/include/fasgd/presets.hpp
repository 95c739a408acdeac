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

// Experiment presets: the constant mu*lambda = 128 grid, the lambda-scaling
// sweep at mu = 128, and the bandwidth sweep over c_fetch / c_push.

#include <optional>
#include <string>
#include <vector>

#include "fasgd/config.hpp"
#include "fasgd/dispatcher.hpp"
#include "fasgd/errors.hpp"

namespace fasgd {

inline constexpr double kSasgdAlpha = 0.04;
inline constexpr double kFasgdAlpha = 0.005;
inline constexpr std::int64_t kDeskIterations = 20000;
inline constexpr std::int64_t kCalibrationWarmup = 500;

struct PresetMember {
  std::string name;
  RunConfig config;
  // Bandwidth sweep only: transmit rate the c value is calibrated for.
  std::optional<double> push_rate_target;
  std::optional<double> fetch_rate_target;
};

struct Preset {
  std::string name;
  std::vector<PresetMember> members;
};

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"grid128", "lambda_scale", "bandwidth"};
  return names;
}

// Desk-scale defaults shared by every preset member. Callers override seed,
// iterations and data fields on top.
inline RunConfig preset_base() {
  RunConfig c;
  c.iterations = kDeskIterations;
  c.eval_every = 500;
  c.train_size = 10000;
  c.val_size = 2000;
  return c;
}

inline RunConfig with_policy(RunConfig c, Policy p) {
  c.policy = p;
  c.alpha = p == Policy::kFasgd ? kFasgdAlpha : kSasgdAlpha;
  return c;
}

// Transmit rates the bandwidth sweep targets, on each side separately.
inline const std::vector<double>& bandwidth_rate_ladder() {
  static const std::vector<double> rates = {1.0, 0.5, 0.2, 0.1};
  return rates;
}

inline std::string rate_tag(double rate) {
  return std::to_string(static_cast<int>(rate * 100.0 + 0.5));
}

// c that gives transmit probability `rate` when the mean std is s_mean:
// solves 1 / (1 + c / (s_mean + eps)) = rate.
inline double c_for_rate(double rate, double s_mean, double eps_bw) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ConfigError("target rate must be in (0, 1]");
  return (s_mean + eps_bw) * (1.0 / rate - 1.0);
}

inline Preset make_preset(const std::string& name, const RunConfig& base = preset_base()) {
  Preset p;
  p.name = name;
  if (name == "grid128") {
    const std::pair<std::int64_t, std::int64_t> grid[] = {{1, 128}, {4, 32}, {8, 16}, {32, 4}};
    for (Policy pol : {Policy::kSasgd, Policy::kFasgd}) {
      for (auto [mu, lambda] : grid) {
        RunConfig c = with_policy(base, pol);
        c.mu = mu;
        c.lambda = lambda;
        p.members.push_back({"grid128_" + to_string(pol) + "_mu" + std::to_string(mu) + "_lambda" +
                                 std::to_string(lambda),
                             c, std::nullopt, std::nullopt});
      }
    }
  } else if (name == "lambda_scale") {
    for (Policy pol : {Policy::kSasgd, Policy::kFasgd}) {
      for (std::int64_t lambda : {250, 500, 1000, 10000}) {
        RunConfig c = with_policy(base, pol);
        c.mu = 128;
        c.lambda = lambda;
        p.members.push_back(
            {"lambda_scale_" + to_string(pol) + "_lambda" + std::to_string(lambda), c,
             std::nullopt, std::nullopt});
      }
    }
  } else if (name == "bandwidth") {
    RunConfig fasgd = with_policy(base, Policy::kFasgd);
    fasgd.mu = 8;
    fasgd.lambda = 16;
    p.members.push_back({"bandwidth_baseline", fasgd, std::nullopt, std::nullopt});
    for (double rate : bandwidth_rate_ladder()) {
      RunConfig c = fasgd;
      c.drops_enabled = true;
      p.members.push_back({"bandwidth_fetch" + rate_tag(rate), c, std::nullopt, rate});
    }
    for (double rate : bandwidth_rate_ladder()) {
      RunConfig c = fasgd;
      c.drops_enabled = true;
      p.members.push_back({"bandwidth_push" + rate_tag(rate), c, rate, std::nullopt});
    }
  } else {
    std::string msg = "unknown preset '" + name + "' (expected one of:";
    for (const auto& n : preset_names()) msg += " " + n;
    throw ConfigError(msg + ")");
  }
  return p;
}

// Mean of the server's std moving average after `warmup` drop-free steps of cfg.
inline double observe_mean_std(RunConfig cfg, const SimData& data,
                               std::int64_t warmup = kCalibrationWarmup) {
  cfg.drops_enabled = false;
  cfg.iterations = warmup;
  Simulation sim(cfg, data);
  for (std::int64_t k = 0; k < warmup; ++k) sim.step();
  return sim.server().mean_std();
}

// Fills c_push / c_fetch of members that carry a rate target, using the mean
// std observed after a warmup of the first member's configuration.
inline double calibrate_bandwidth(Preset& preset, const SimData& data,
                                  std::int64_t warmup = kCalibrationWarmup) {
  if (preset.members.empty()) return 0.0;
  RunConfig probe = preset.members.front().config;
  probe.policy = Policy::kFasgd;
  const double s_mean = observe_mean_std(probe, data, warmup);
  for (auto& m : preset.members) {
    if (m.push_rate_target) m.config.c_push = c_for_rate(*m.push_rate_target, s_mean, m.config.eps_bw);
    if (m.fetch_rate_target) {
      m.config.c_fetch = c_for_rate(*m.fetch_rate_target, s_mean, m.config.eps_bw);
    }
  }
  return s_mean;
}

}  // namespace fasgd
