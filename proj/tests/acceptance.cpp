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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fail. Long-running: the convergence criteria train
// 784-200-10 networks for 20,000 iterations each.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fasgd/dispatcher.hpp"
#include "fasgd/gradcheck.hpp"
#include "fasgd/presets.hpp"
#include "fasgd/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace fasgd;

namespace {

constexpr double kSyncRelTol = 1e-12;
constexpr std::int64_t kSyncSteps = 500;
constexpr double kGradcheckTol = 1e-4;
constexpr std::int64_t kIdentitySteps = 1000;
constexpr double kStatsTol = 1e-12;
constexpr int kStatsStreams = 20;
constexpr int kOrderingSeeds = 4;
constexpr int kOrderingWins = 3;
constexpr std::int64_t kTrainIterations = kDeskIterations;
constexpr double kFetchTargetRate = 0.10;
constexpr double kFetchRateCeiling = 0.12;
constexpr double kFetchCostRatio = 1.10;
constexpr double kPushForcedRate = 0.5;
constexpr std::int64_t kPushIterations = 5000;
constexpr double kBStaleTol = 1e-12;

struct Outcome {
  bool pass;
  std::string detail;
};

struct Context {
  SimData data;
  RunConfig base;
  std::vector<MetricsLog> logs;
};

std::string fmt(double x, int prec = 6) {
  std::ostringstream o;
  o.precision(prec);
  o << x;
  return o.str();
}

RunConfig make_config(const Context& ctx, Policy p, std::int64_t mu, std::int64_t lambda,
                      std::uint64_t seed) {
  RunConfig c = with_policy(ctx.base, p);
  c.mu = mu;
  c.lambda = lambda;
  c.seed = seed;
  c.iterations = kTrainIterations;
  c.eval_every = 1000;
  return c;
}

MetricsLog train(Context& ctx, const RunConfig& c) {
  MetricsLog log = run(c, ctx.data);
  ctx.logs.push_back(log);
  return log;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism(Context& ctx) {
  RunConfig c = make_config(ctx, Policy::kFasgd, 8, 16, 11);
  c.iterations = 2000;
  c.eval_every = 250;
  c.bstale_every = 100;
  c.drops_enabled = true;
  c.c_fetch = 0.002;
  c.c_push = 0.0005;
  const fs::path dir = fs::temp_directory_path() / "fasgd_acceptance";
  fs::create_directories(dir);
  std::vector<std::string> bytes;
  for (const char* name : {"a.csv", "b.csv"}) {
    MetricsLog log = run(c, ctx.data);
    write_csv(log, (dir / name).string());
    bytes.push_back(slurp(dir / name));
    ctx.logs.push_back(std::move(log));
  }
  const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
  return {same, std::to_string(bytes[0].size()) + " bytes, " + (same ? "identical" : "DIFFERENT")};
}

Outcome sync_vanilla(Context& ctx) {
  RunConfig c = make_config(ctx, Policy::kSync, 8, 4, 3);
  c.alpha = 0.04;
  const Divergence d = sync_vanilla_divergence(c, ctx.data, kSyncSteps);
  return {d.scaled <= kSyncRelTol,
          "max rel diff (rms-floored) " + fmt(d.scaled) + ", unfloored " + fmt(d.strict) +
              ", tol " + fmt(kSyncRelTol)};
}

Outcome gradcheck(Context&) {
  const GradcheckResult r = run_gradcheck(1, 5, 20);
  return {r.max_rel_error <= kGradcheckTol,
          "max rel err " + fmt(r.max_rel_error) + " over " + std::to_string(r.coordinates) +
              " coordinates, tol " + fmt(kGradcheckTol)};
}

ParamVector final_params(const RunConfig& c, const SimData& data) {
  Simulation sim(c, data);
  for (std::int64_t k = 0; k < c.iterations; ++k) sim.step();
  return sim.server().params();
}

Outcome identities(Context& ctx) {
  RunConfig sasgd = make_config(ctx, Policy::kSasgd, 8, 4, 21);
  sasgd.iterations = kIdentitySteps;
  sasgd.alpha = kFasgdAlpha;
  RunConfig frozen = with_policy(sasgd, Policy::kFasgd);
  frozen.freeze_v = true;
  const bool a = final_params(sasgd, ctx.data) == final_params(frozen, ctx.data);

  RunConfig single = make_config(ctx, Policy::kSasgd, 8, 1, 22);
  single.iterations = kIdentitySteps;
  RunConfig asgd = with_policy(single, Policy::kAsgd);
  asgd.alpha = single.alpha;
  const bool b = final_params(single, ctx.data) == final_params(asgd, ctx.data);
  return {a && b, std::string("(a) frozen-v FASGD == SASGD: ") + (a ? "bit-identical" : "differ") +
                      "; (b) SASGD lambda=1 == ASGD: " + (b ? "bit-identical" : "differ")};
}

Outcome stats_oracle(Context&) {
  std::mt19937_64 gen(2024);
  double worst = 0.0;
  for (int t = 0; t < kStatsStreams; ++t) {
    std::normal_distribution<double> dist(std::ldexp(1.0, t % 5 - 2), 0.5 + t);
    const double gamma = 0.5 + 0.02 * t, beta = 0.95 - 0.015 * t, eps = 1e-8;
    FasgdStats st(1, gamma, beta, eps);
    long double m1 = 0, m2 = 0;
    for (int i = 0; i < 1000; ++i) {
      const double g = dist(gen);
      m1 = gamma * m1 + (1 - gamma) * static_cast<long double>(g);
      m2 = gamma * m2 + (1 - gamma) * static_cast<long double>(g) * g;
      fasgd_update_stats(st, ParamVector(std::vector<double>{g}));
      const double mean_err = std::fabs(st.b[0] - static_cast<double>(m1));
      const double var_err = std::fabs((st.n[0] - st.b[0] * st.b[0]) - static_cast<double>(m2 - m1 * m1));
      worst = std::max({worst, mean_err / std::max(1.0, std::fabs(static_cast<double>(m1))),
                        var_err / std::max(1.0, static_cast<double>(m2))});
    }
  }
  return {worst <= kStatsTol, "worst error " + fmt(worst) + " over " +
                                  std::to_string(kStatsStreams) + " streams x 1000 steps, tol " +
                                  fmt(kStatsTol)};
}

Outcome ordering(Context& ctx) {
  const std::pair<std::int64_t, std::int64_t> configs[] = {{8, 16}, {32, 4}};
  bool all = true;
  std::string detail;
  for (auto [mu, lambda] : configs) {
    int wins = 0;
    detail += "mu=" + std::to_string(mu) + "/lambda=" + std::to_string(lambda) + ":";
    for (int s = 1; s <= kOrderingSeeds; ++s) {
      const double f = train(ctx, make_config(ctx, Policy::kFasgd, mu, lambda, s)).final_val_cost().value();
      const double g = train(ctx, make_config(ctx, Policy::kSasgd, mu, lambda, s)).final_val_cost().value();
      wins += f < g;
      detail += " s" + std::to_string(s) + " " + fmt(f, 4) + " vs " + fmt(g, 4) + ";";
    }
    detail += " wins " + std::to_string(wins) + "/" + std::to_string(kOrderingSeeds) + ". ";
    all = all && wins >= kOrderingWins;
  }
  return {all, detail + "(FASGD vs SASGD final val NLL)"};
}

Outcome lambda_scaling(Context& ctx) {
  double gap[2];
  std::string detail;
  const std::int64_t lambdas[] = {250, 1000};
  for (int i = 0; i < 2; ++i) {
    const double f = train(ctx, make_config(ctx, Policy::kFasgd, 128, lambdas[i], 1)).final_val_cost().value();
    const double s = train(ctx, make_config(ctx, Policy::kSasgd, 128, lambdas[i], 1)).final_val_cost().value();
    gap[i] = s - f;
    detail += "lambda=" + std::to_string(lambdas[i]) + ": FASGD " + fmt(f, 4) + ", SASGD " +
              fmt(s, 4) + ", SASGD-FASGD " + fmt(gap[i], 4) + "; ";
  }
  return {gap[1] >= gap[0], detail + "need outperformance at 1000 >= at 250"};
}

// c such that the average transmit probability along a recorded trajectory
// of mean stds equals `rate`.
double c_for_trajectory(double rate, const std::vector<double>& s, double eps) {
  auto avg = [&](double c) {
    double t = 0.0;
    for (double x : s) t += transmit_probability(c, x, eps);
    return t / static_cast<double>(s.size());
  };
  double lo = 0.0, hi = 1.0;
  while (avg(hi) > rate) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (avg(mid) > rate ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Outcome bandwidth(Context& ctx) {
  RunConfig base = make_config(ctx, Policy::kFasgd, 8, 16, 1);
  std::vector<double> trajectory;
  double baseline_cost = 0.0;
  {
    Simulation sim(base, ctx.data);
    sim.set_observer([&](const SimEvent&) { trajectory.push_back(sim.server().mean_std()); });
    baseline_cost = sim.run().final_val_cost().value();
    ctx.logs.push_back(sim.log());
  }
  RunConfig drop = base;
  drop.drops_enabled = true;
  drop.c_push = 0.0;
  drop.c_fetch = c_for_trajectory(kFetchTargetRate, trajectory, drop.eps_bw);
  const MetricsLog log = train(ctx, drop);
  const auto& last = log.records.back();
  const double rate = static_cast<double>(last.fetches_sent) /
                      static_cast<double>(last.fetches_sent + last.fetches_dropped);
  const double cost = log.final_val_cost().value();
  const bool ok = rate <= kFetchRateCeiling && cost <= kFetchCostRatio * baseline_cost;
  return {ok, "c_fetch " + fmt(drop.c_fetch) + ", fetch rate " + fmt(rate, 4) + " (<= " +
                  fmt(kFetchRateCeiling) + "), cost " + fmt(cost, 5) + " vs baseline " +
                  fmt(baseline_cost, 5) + " (ratio " + fmt(cost / baseline_cost, 4) + ", <= " +
                  fmt(kFetchCostRatio) + ")"};
}

Outcome push_fragility(Context& ctx) {
  RunConfig c = make_config(ctx, Policy::kFasgd, 8, 16, 1);
  c.iterations = kPushIterations;
  c.eval_every = 500;
  c.drops_enabled = true;
  c.c_push = c_for_rate(kPushForcedRate, observe_mean_std(c, ctx.data), c.eps_bw);
  try {
    Simulation sim(c, ctx.data);
    const MetricsLog& log = sim.run();
    ctx.logs.push_back(log);
    const auto& last = log.records.back();
    const double rate = static_cast<double>(last.pushes_sent) / static_cast<double>(last.iteration);
    const bool finite = sim.server().params().all_finite();
    return {finite, "completed " + std::to_string(last.iteration) + " steps, push rate " +
                        fmt(rate, 4) + ", final cost " + fmt(log.final_val_cost().value(), 5) +
                        ", parameters " + (finite ? "finite" : "NON-FINITE")};
  } catch (const SimulationError& e) {
    return {e.numeric(), std::string("guard reported divergence: ") + e.what()};
  }
}

Outcome b_staleness_check(Context& ctx) {
  double worst = 0.0;
  for (double h : {0.5, 2.0, 7.25}) {
    auto grad = [h](const ParamVector& p) {
      ParamVector g(p.size());
      for (std::size_t j = 0; j < p.size(); ++j) g[j] = h * p[j];
      return g;
    };
    for (double theta : {-1.5, 0.0, 3.0}) {
      for (double delta : {1e-3, 0.25, -4.0}) {
        const double got = b_staleness(grad, ParamVector(std::vector<double>{theta}),
                                       ParamVector(std::vector<double>{theta + delta}));
        worst = std::max(worst, std::fabs(got - std::fabs(h * delta)));
      }
    }
  }
  const Mlp model(MlpShape{ctx.data.train->dim, 200, kMnistClasses});
  RngStream rng(5, stream_label::kInit);
  const ParamVector p = model.init_params(rng);
  std::vector<std::size_t> idx(64);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const double same = measure_b_staleness(model, p, p, ctx.data.train->gather(idx));
  return {same == 0.0 && worst <= kBStaleTol,
          "identical params -> " + fmt(same) + "; quadratic max |err| " + fmt(worst) + ", tol " +
              fmt(kBStaleTol)};
}

Outcome conservation(Context& ctx) {
  std::size_t rows = 0;
  for (const auto& log : ctx.logs) {
    for (const auto& r : log.records) {
      ++rows;
      if (r.pushes_sent + r.pushes_dropped != r.iteration ||
          r.fetches_sent + r.fetches_dropped != r.iteration) {
        return {false, "violated at iteration " + std::to_string(r.iteration)};
      }
    }
  }
  return {rows > 0, std::to_string(ctx.logs.size()) + " logs, " + std::to_string(rows) + " rows"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fasgd-sim acceptance checks"};
  std::string mnist_dir = "/root/data/mnist";
  std::set<int> only;
  app.add_option("--mnist-dir", mnist_dir, "directory with images-idx3-ubyte and labels-idx1-ubyte");
  app.add_option("--only", only, "run only these criteria (11 always runs over what did)");
  CLI11_PARSE(app, argc, argv);

  Context ctx;
  ctx.base = preset_base();
  const fs::path images = fs::path(mnist_dir) / "images-idx3-ubyte";
  const fs::path labels = fs::path(mnist_dir) / "labels-idx1-ubyte";
  if (fs::exists(images) && fs::exists(labels)) {
    ctx.base.data_source = DataSource::kIdx;
    ctx.base.images_path = images.string();
    ctx.base.labels_path = labels.string();
    ctx.base.train_size = 8000;
    ctx.base.val_size = 2000;
  } else {
    ctx.base.data_source = DataSource::kSynthetic;
  }
  ctx.data = load_data(ctx.base);
  std::cout << "data: " << (ctx.data.synthetic ? "SYNTHETIC FALLBACK (no MNIST at " + mnist_dir + ")"
                                               : "MNIST subset from " + mnist_dir)
            << ", " << ctx.data.train->size() << " train / " << ctx.data.val->size() << " val\n"
            << std::flush;

  const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria = {
      {"determinism", determinism},
      {"sync equals vanilla SGD", sync_vanilla},
      {"gradient check", gradcheck},
      {"policy reduction identities", identities},
      {"statistics oracle", stats_oracle},
      {"FASGD beats SASGD", ordering},
      {"lambda scaling direction", lambda_scaling},
      {"fetch bandwidth reduction", bandwidth},
      {"push-drop fragility guard", push_fragility},
      {"B-Staleness diagnostic", b_staleness_check},
      {"bandwidth conservation", conservation},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id) && id != 11) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": "
              << o.detail << " [" << fmt(secs, 3) << " s]" << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}
