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

// The simulation engine. One step is one client turn, executed atomically:
//
//   1. the dispatcher picks a client (one draw from the "dispatch" stream);
//   2. the client computes a gradient on its replica over a fresh minibatch
//      (mu draws from the "data" stream);
//   3. push: on transmit the server applies the gradient with the replica's
//      timestamp, on drop it replays the client's cached gradient;
//   4. fetch: on transmit the client receives the current parameters and
//      timestamp, on drop it keeps its stale copy;
//   5. counters are updated and the iteration count advances.
//
// Push and fetch decisions each take one draw from the "drop" stream, and only
// when drops are enabled. Under the synchronous policy a client whose push does
// not complete the round waits (is not selectable) until the round completes;
// its fetch decision is taken during its own step and honoured at release.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fasgd/config.hpp"
#include "fasgd/dataset.hpp"
#include "fasgd/errors.hpp"
#include "fasgd/metrics.hpp"
#include "fasgd/mlp.hpp"
#include "fasgd/param_vector.hpp"
#include "fasgd/rng.hpp"
#include "fasgd/server.hpp"

namespace fasgd {

struct ClientState {
  int id = 0;
  // Replicas share storage: every client that fetched at the same server
  // timestamp points at the same snapshot.
  std::shared_ptr<const ParamVector> params;
  Timestamp param_timestamp = 0;
  double selection_weight = 1.0;
  bool waiting = false;
  bool fetch_on_release = false;
};

struct DropPolicy {
  bool enabled = false;
  double c_push = 0.0;
  double c_fetch = 0.0;
  double eps_bw = 1e-8;
};

struct SelectionRule {
  SelectionMode mode = SelectionMode::kUniform;
  double decay = 1.0;
  double recovery = 1.0;
};

// Picks a non-waiting client with probability proportional to its weight,
// using exactly one draw. In weighted-decay mode the chosen client's weight is
// multiplied by `decay`, then every weight becomes min(1, weight * recovery).
inline int select_client(std::vector<ClientState>& clients, const SelectionRule& rule,
                         RngStream& rng) {
  if (clients.empty()) throw ConfigError("select_client: no clients");
  double total = 0.0;
  int last = -1;
  for (const auto& c : clients) {
    if (c.waiting) continue;
    total += c.selection_weight;
    last = c.id;
  }
  if (last < 0) throw ProtocolError("select_client: every client is waiting");

  const double target = rng.next_uniform() * total;
  int chosen = last;
  double acc = 0.0;
  for (const auto& c : clients) {
    if (c.waiting) continue;
    acc += c.selection_weight;
    if (target < acc) {
      chosen = c.id;
      break;
    }
  }

  if (rule.mode == SelectionMode::kWeightedDecay) {
    clients[static_cast<std::size_t>(chosen)].selection_weight *= rule.decay;
    for (auto& c : clients) c.selection_weight = std::min(1.0, c.selection_weight * rule.recovery);
  }
  return chosen;
}

// Probability of transmitting: 1 / (1 + c / (s_mean + eps)). One draw always.
inline double transmit_probability(double c, double s_mean, double eps_bw) {
  return 1.0 / (1.0 + c / (s_mean + eps_bw));
}

inline bool should_transmit(double c, double s_mean, double eps_bw, RngStream& rng) {
  const double r = rng.next_uniform();
  return r < transmit_probability(c, s_mean, eps_bw);
}

// What happened in one step.
struct SimEvent {
  std::int64_t iteration = 0;
  int client = 0;
  Timestamp grad_timestamp = 0;
  Timestamp tau = 0;  // raw step-staleness of the pushed gradient
  bool push_sent = true;
  bool fetch_sent = true;
  bool wrote = false;
  bool unblock = true;
  Timestamp server_timestamp = 0;
  double batch_cost = 0.0;
  std::vector<std::size_t> batch_indices;
  std::optional<double> b_staleness;
};

struct BandwidthCounters {
  std::int64_t pushes_sent = 0;
  std::int64_t pushes_dropped = 0;
  std::int64_t fetches_sent = 0;
  std::int64_t fetches_dropped = 0;
};

struct SimData {
  std::shared_ptr<const Dataset> train;
  std::shared_ptr<const Dataset> val;
  bool synthetic = false;
};

// Loads or generates the data a config asks for. Train rows are the first
// train_size rows, validation rows the last val_size.
inline SimData load_data(const RunConfig& cfg) {
  Dataset all;
  SimData out;
  if (cfg.data_source == DataSource::kIdx) {
    all = load_idx(cfg.images_path, cfg.labels_path);
  } else {
    RngStream rng(cfg.data_seed, "synthetic");
    all = synthetic_dataset(rng, static_cast<std::size_t>(cfg.synthetic_n));
    out.synthetic = true;
  }
  const auto n_train = static_cast<std::size_t>(cfg.train_size);
  const auto n_val = static_cast<std::size_t>(cfg.val_size);
  if (n_train + n_val > all.size()) {
    throw ConfigError("train_size + val_size (" + std::to_string(n_train + n_val) +
                      ") exceeds the " + std::to_string(all.size()) + " available rows");
  }
  out.train = std::make_shared<const Dataset>(all.slice(0, n_train, DatasetSplit::kTrain));
  out.val = std::make_shared<const Dataset>(
      all.slice(all.size() - n_val, n_val, DatasetSplit::kValidation));
  return out;
}

inline ServerOptions server_options(const RunConfig& cfg) {
  ServerOptions o;
  o.policy = cfg.policy;
  o.clients = static_cast<std::size_t>(cfg.lambda);
  o.alpha = cfg.alpha;
  o.gamma = cfg.gamma;
  o.beta = cfg.beta;
  o.eps_stat = cfg.eps_stat;
  o.track_stats = cfg.drops_enabled;
  o.cache_gradients = cfg.drops_enabled;
  o.freeze_v = cfg.freeze_v;
  return o;
}

class Simulation {
 public:
  using Observer = std::function<void(const SimEvent&)>;

  Simulation(RunConfig cfg, SimData data)
      : cfg_(std::move(cfg)),
        data_(std::move(data)),
        model_(MlpShape{data_.train->dim, static_cast<std::size_t>(cfg_.hidden), kMnistClasses}),
        server_(make_server(server_options(cfg_))),
        sampler_(*data_.train, RngStream(cfg_.seed, stream_label::kData),
                 static_cast<std::size_t>(cfg_.mu)),
        dispatch_rng_(cfg_.seed, stream_label::kDispatch),
        drop_rng_(cfg_.seed, stream_label::kDrop) {
    if (auto errs = validate(cfg_); !errs.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& e : errs) msg += "\n  " + e;
      throw ConfigError(msg);
    }
    drops_ = {cfg_.drops_enabled, cfg_.c_push, cfg_.c_fetch, cfg_.eps_bw};
    rule_ = {cfg_.selection, cfg_.selection_decay, cfg_.selection_recovery};

    RngStream init_rng(cfg_.seed, stream_label::kInit);
    server_->init(model_.init_params(init_rng));
    auto initial = snapshot();
    clients_.resize(static_cast<std::size_t>(cfg_.lambda));
    for (std::size_t l = 0; l < clients_.size(); ++l) {
      clients_[l].id = static_cast<int>(l);
      clients_[l].params = initial;
      clients_[l].param_timestamp = 0;
    }
    log_.fingerprint = fingerprint(cfg_);
  }

  explicit Simulation(const RunConfig& cfg) : Simulation(cfg, load_data(cfg)) {}

  // Runs one client turn. Failures are rethrown as SimulationError carrying
  // the iteration they happened at.
  SimEvent step() {
    const std::int64_t it = iteration_ + 1;
    try {
      SimEvent ev = do_step(it);
      iteration_ = it;
      if (observer_) observer_(ev);
      return ev;
    } catch (const NumericError& e) {
      throw SimulationError(it, e.what(), true);
    } catch (const SimulationError&) {
      throw;
    } catch (const Error& e) {
      throw SimulationError(it, e.what(), false);
    }
  }

  // Executes the remaining configured iterations, recording one row per step
  // plus an initial row, and returns the log.
  const MetricsLog& run() {
    if (log_.records.empty()) {
      MetricsRecord r;
      r.iteration = 0;
      r.server_timestamp = server_->timestamp();
      r.val_cost = validation_cost();
      log_.records.push_back(r);
    }
    while (iteration_ < cfg_.iterations) {
      const SimEvent ev = step();
      MetricsRecord r;
      r.iteration = ev.iteration;
      r.server_timestamp = ev.server_timestamp;
      r.client = ev.client;
      r.tau = ev.tau;
      r.pushes_sent = counters_.pushes_sent;
      r.pushes_dropped = counters_.pushes_dropped;
      r.fetches_sent = counters_.fetches_sent;
      r.fetches_dropped = counters_.fetches_dropped;
      r.b_staleness = ev.b_staleness;
      if (ev.iteration % cfg_.eval_every == 0 || ev.iteration == cfg_.iterations) {
        r.val_cost = validation_cost();
      }
      log_.records.push_back(r);
    }
    return log_;
  }

  double validation_cost() const { return eval_validation(model_, server_->params(), *data_.val); }

  void set_observer(Observer obs) { observer_ = std::move(obs); }

  const RunConfig& config() const noexcept { return cfg_; }
  const Mlp& model() const noexcept { return model_; }
  const Server& server() const noexcept { return *server_; }
  const std::vector<ClientState>& clients() const noexcept { return clients_; }
  const BandwidthCounters& counters() const noexcept { return counters_; }
  const MetricsLog& log() const noexcept { return log_; }
  const SimData& data() const noexcept { return data_; }
  std::int64_t iteration() const noexcept { return iteration_; }
  const RngStream& dispatch_rng() const noexcept { return dispatch_rng_; }
  const RngStream& drop_rng() const noexcept { return drop_rng_; }
  const Sampler& sampler() const noexcept { return sampler_; }

 private:
  SimEvent do_step(std::int64_t it) {
    SimEvent ev;
    ev.iteration = it;
    ev.client = select_client(clients_, rule_, dispatch_rng_);
    ClientState& cl = clients_[static_cast<std::size_t>(ev.client)];

    ev.batch_indices = sampler_.next_indices();
    const Minibatch batch = data_.train->gather(ev.batch_indices);
    const ParamVector grad = model_.gradient(*cl.params, batch, &ev.batch_cost);
    ev.grad_timestamp = cl.param_timestamp;
    ev.tau = server_->timestamp() - cl.param_timestamp;

    if (cfg_.bstale_every > 0 && it % cfg_.bstale_every == 0) {
      ev.b_staleness =
          measure_b_staleness(model_, *cl.params, server_->params(), batch, cfg_.bstale_norm);
    }

    // A client's first push always goes through: with nothing cached a drop
    // would be a no-op, and with s starting at 0 the gate would never open.
    ev.push_sent = !drops_.enabled ||
                   should_transmit(drops_.c_push, server_->mean_std(), drops_.eps_bw, drop_rng_) ||
                   !server_->has_cached(ev.client);
    const ApplyResult res = ev.push_sent ? server_->apply_update(grad, cl.param_timestamp, ev.client)
                                         : server_->reapply_cached(ev.client);
    ++(ev.push_sent ? counters_.pushes_sent : counters_.pushes_dropped);
    ev.wrote = res.wrote;
    ev.unblock = res.unblock;

    ev.fetch_sent = !drops_.enabled ||
                    should_transmit(drops_.c_fetch, server_->mean_std(), drops_.eps_bw, drop_rng_);
    ++(ev.fetch_sent ? counters_.fetches_sent : counters_.fetches_dropped);

    if (!res.unblock) {
      cl.waiting = true;
      cl.fetch_on_release = ev.fetch_sent;
    } else {
      if (ev.fetch_sent) deliver(cl);
      if (res.wrote) {
        for (auto& other : clients_) {
          if (!other.waiting) continue;
          other.waiting = false;
          if (other.fetch_on_release) deliver(other);
        }
      }
    }
    ev.server_timestamp = server_->timestamp();
    return ev;
  }

  void deliver(ClientState& cl) {
    cl.params = snapshot();
    cl.param_timestamp = server_->timestamp();
  }

  std::shared_ptr<const ParamVector> snapshot() {
    if (!snapshot_ || snapshot_timestamp_ != server_->timestamp()) {
      snapshot_ = std::make_shared<const ParamVector>(server_->params());
      snapshot_timestamp_ = server_->timestamp();
    }
    return snapshot_;
  }

  RunConfig cfg_;
  SimData data_;
  Mlp model_;
  std::unique_ptr<Server> server_;
  Sampler sampler_;
  RngStream dispatch_rng_;
  RngStream drop_rng_;
  DropPolicy drops_;
  SelectionRule rule_;
  std::vector<ClientState> clients_;
  std::shared_ptr<const ParamVector> snapshot_;
  Timestamp snapshot_timestamp_ = -1;
  BandwidthCounters counters_;
  std::int64_t iteration_ = 0;
  MetricsLog log_;
  Observer observer_;
};

inline MetricsLog run(const RunConfig& cfg) {
  Simulation sim(cfg);
  return sim.run();
}

inline MetricsLog run(const RunConfig& cfg, SimData data) {
  Simulation sim(cfg, std::move(data));
  return sim.run();
}

}  // namespace fasgd
