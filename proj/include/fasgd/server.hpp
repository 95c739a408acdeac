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

// Parameter-server update policies.
//
// A server owns the canonical parameters and a timestamp T that counts
// parameter writes. Clients hand it a gradient together with the timestamp of
// the parameters they computed it on; the policy decides how (and whether) the
// gradient is applied. Step-staleness is tau = T - grad_timestamp, and every
// staleness-aware divisor uses max(1, tau) so fresh gradients keep the full
// learning rate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>

#include "fasgd/errors.hpp"
#include "fasgd/param_vector.hpp"

namespace fasgd {

using Timestamp = std::int64_t;

enum class Policy { kSync, kAsgd, kSasgd, kFasgd };

inline std::string to_string(Policy p) {
  switch (p) {
    case Policy::kSync: return "sync";
    case Policy::kAsgd: return "asgd";
    case Policy::kSasgd: return "sasgd";
    case Policy::kFasgd: return "fasgd";
  }
  return "?";
}

inline std::optional<Policy> parse_policy(const std::string& s) {
  if (s == "sync") return Policy::kSync;
  if (s == "asgd") return Policy::kAsgd;
  if (s == "sasgd") return Policy::kSasgd;
  if (s == "fasgd") return Policy::kFasgd;
  return std::nullopt;
}

// Per-coordinate moving averages of gradient statistics:
//
//   n <- gamma n + (1 - gamma) g^2               second moment
//   b <- gamma b + (1 - gamma) g                 first moment
//   v <- beta v + (1 - beta) / sqrt(n - b^2 + eps)   inverse std
//   s <- beta s + (1 - beta) * sqrt(n - b^2 + eps)   std
//
// v modulates the FASGD step; s drives the bandwidth-aware transmit rule.
struct FasgdStats {
  double gamma = 0.9;
  double beta = 0.9;
  double eps = 1e-8;
  ParamVector n, b, v, s;

  FasgdStats() = default;
  FasgdStats(std::size_t length, double gamma_, double beta_, double eps_)
      : gamma(gamma_), beta(beta_), eps(eps_), n(length, 0.0), b(length, 0.0), v(length, 1.0),
        s(length, 0.0) {}

  std::size_t size() const noexcept { return n.size(); }
};

// Tolerance for round-off in n - b^2, which is non-negative in exact
// arithmetic. Values within it are treated as zero variance.
inline double variance_roundoff_tolerance(double second_moment) {
  return 1e-12 * std::max(1.0, std::fabs(second_moment));
}

// One statistics update with gradient g, in place. If freeze_v is set the
// inverse-std average stays at its current value (n, b and s still move).
inline void fasgd_update_stats(FasgdStats& st, const ParamVector& g, bool freeze_v = false) {
  require_same_length(st.size(), g.size(), "fasgd_update_stats");
  const double gm = st.gamma, one_gm = 1.0 - st.gamma;
  const double bt = st.beta, one_bt = 1.0 - st.beta;
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double gj = g[j];
    const double n = gm * st.n[j] + one_gm * (gj * gj);
    const double b = gm * st.b[j] + one_gm * gj;
    double var = n - b * b;
    if (var < 0.0) {
      if (var < -variance_roundoff_tolerance(n)) {
        throw NumericError("gradient statistics corrupted at coordinate " + std::to_string(j) +
                           ": n - b^2 = " + std::to_string(var));
      }
      var = 0.0;
    }
    const double root = std::sqrt(var + st.eps);
    st.n[j] = n;
    st.b[j] = b;
    if (!freeze_v) st.v[j] = bt * st.v[j] + one_bt * (1.0 / root);
    st.s[j] = bt * st.s[j] + one_bt * root;
    if (!std::isfinite(st.v[j]) || !(st.v[j] > 0.0)) {
      throw NumericError("inverse-std average not finite and positive at coordinate " +
                         std::to_string(j));
    }
  }
}

// Result of apply_update: the canonical parameters (by reference), the new
// timestamp, whether blocked clients may resume, and whether anything was written.
struct ApplyResult {
  const ParamVector& params;
  Timestamp timestamp;
  bool unblock;
  bool wrote;
};

struct ServerOptions {
  Policy policy = Policy::kAsgd;
  std::size_t clients = 1;  // lambda
  double alpha = 0.01;
  double gamma = 0.9;
  double beta = 0.9;
  double eps_stat = 1e-8;
  // Maintain FasgdStats for policies that do not need them (the bandwidth
  // rule reads s). Always on for FASGD.
  bool track_stats = false;
  // Keep every client's last pushed gradient for replay on dropped pushes.
  bool cache_gradients = false;
  // FASGD only: hold v at its initial value of 1.
  bool freeze_v = false;
};

// Pluggable server. Subclasses implement write(), which applies one gradient
// of known staleness; this base handles validation, the gradient cache and
// statistics so every policy (and every cached replay) goes through one path.
class Server {
 public:
  explicit Server(ServerOptions opts) : opts_(opts) {
    if (opts_.clients == 0) throw ConfigError("server: lambda must be ≥ 1");
    if (!(opts_.alpha > 0.0)) throw ConfigError("server: alpha must be > 0");
  }
  virtual ~Server() = default;

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void init(ParamVector params) {
    if (params.empty()) throw ConfigError("server: empty parameter vector");
    params_ = std::move(params);
    scratch_ = ParamVector(params_.size());
    timestamp_ = 0;
    cache_.clear();
    if (tracks_stats()) {
      stats_ = FasgdStats(params_.size(), opts_.gamma, opts_.beta, opts_.eps_stat);
    }
    on_init();
  }

  ApplyResult apply_update(const ParamVector& grads, Timestamp grad_timestamp, int client) {
    check_client(client);
    require_same_length(params_.size(), grads.size(), "apply_update");
    if (grad_timestamp < 0 || grad_timestamp > timestamp_) {
      throw ProtocolError("client " + std::to_string(client) + " pushed a gradient with timestamp " +
                          std::to_string(grad_timestamp) + " but the server is at " +
                          std::to_string(timestamp_));
    }
    if (opts_.cache_gradients) {
      auto it = cache_.find(client);
      if (it == cache_.end()) {
        cache_.emplace(client, CachedGradient{grads, grad_timestamp});
      } else {
        it->second.grads = grads;
        it->second.timestamp = grad_timestamp;
      }
    }
    return dispatch(grads, grad_timestamp, client);
  }

  // Replays the client's most recent pushed gradient, keeping its original
  // timestamp. Without a cached entry this is a no-op that leaves T alone.
  ApplyResult reapply_cached(int client) {
    check_client(client);
    auto it = cache_.find(client);
    if (it == cache_.end()) return {params_, timestamp_, true, false};
    return dispatch(it->second.grads, it->second.timestamp, client);
  }

  bool has_cached(int client) const { return cache_.count(client) != 0; }

  const ParamVector& params() const noexcept { return params_; }
  Timestamp timestamp() const noexcept { return timestamp_; }
  const ServerOptions& options() const noexcept { return opts_; }
  Policy policy() const noexcept { return opts_.policy; }
  bool tracks_stats() const noexcept { return opts_.track_stats || opts_.policy == Policy::kFasgd; }
  const FasgdStats& stats() const { return stats_; }

  // Arithmetic mean of the std moving average, or 0 when stats are off.
  double mean_std() const { return tracks_stats() ? mean(stats_.s) : 0.0; }

  static Timestamp clamped_staleness(Timestamp server_t, Timestamp grad_t) {
    return std::max<Timestamp>(1, server_t - grad_t);
  }

 protected:
  virtual void on_init() {}
  // Applies one gradient. Returns (unblock, wrote).
  virtual std::pair<bool, bool> write(const ParamVector& grads, Timestamp grad_timestamp,
                                      int client) = 0;

  // Commits scratch_ as the new parameters after the finiteness guard.
  void commit_scratch(const char* what) {
    for (std::size_t j = 0; j < scratch_.size(); ++j) {
      if (!std::isfinite(scratch_[j])) {
        throw NumericError(std::string(what) + " produced a non-finite parameter at coordinate " +
                           std::to_string(j) + " (timestamp " + std::to_string(timestamp_) + ")");
      }
    }
    std::swap(params_, scratch_);
    ++timestamp_;
  }

  ServerOptions opts_;
  ParamVector params_;
  ParamVector scratch_;
  Timestamp timestamp_ = 0;
  FasgdStats stats_;

 private:
  struct CachedGradient {
    ParamVector grads;
    Timestamp timestamp;
  };

  void check_client(int client) const {
    if (client < 0 || static_cast<std::size_t>(client) >= opts_.clients) {
      throw ProtocolError("unknown client id " + std::to_string(client));
    }
    if (params_.empty()) throw ProtocolError("server used before init()");
  }

  ApplyResult dispatch(const ParamVector& grads, Timestamp grad_timestamp, int client) {
    if (tracks_stats()) {
      fasgd_update_stats(stats_, grads, opts_.policy == Policy::kFasgd && opts_.freeze_v);
    }
    const auto [unblock, wrote] = write(grads, grad_timestamp, client);
    return {params_, timestamp_, unblock, wrote};
  }

  std::unordered_map<int, CachedGradient> cache_;
};

// Waits for one gradient from every client, then applies them in ascending
// client order as theta <- theta - alpha * (g / lambda) and bumps T once.
class SyncServer final : public Server {
 public:
  explicit SyncServer(ServerOptions opts) : Server(with_policy(opts, Policy::kSync)) {}

  std::size_t pending() const noexcept { return pending_.size(); }

 protected:
  void on_init() override { pending_.clear(); }

  std::pair<bool, bool> write(const ParamVector& grads, Timestamp, int client) override {
    if (!pending_.emplace(client, grads).second) {
      throw ProtocolError("sync: client " + std::to_string(client) +
                          " contributed twice in one round");
    }
    if (pending_.size() < opts_.clients) return {false, false};

    const double lambda = static_cast<double>(opts_.clients);
    const double lr = opts_.alpha;
    scratch_ = params_;
    for (const auto& [id, g] : pending_) {
      for (std::size_t j = 0; j < scratch_.size(); ++j) scratch_[j] = scratch_[j] - lr * (g[j] / lambda);
    }
    pending_.clear();
    commit_scratch("sync update");
    return {true, true};
  }

 private:
  static ServerOptions with_policy(ServerOptions o, Policy p) {
    o.policy = p;
    return o;
  }
  std::map<int, ParamVector> pending_;
};

// theta <- theta - alpha * g on every push.
class AsgdServer final : public Server {
 public:
  explicit AsgdServer(ServerOptions opts) : Server(with_policy(opts)) {}

 protected:
  std::pair<bool, bool> write(const ParamVector& grads, Timestamp, int) override {
    const double lr = opts_.alpha;
    for (std::size_t j = 0; j < params_.size(); ++j) scratch_[j] = params_[j] - lr * grads[j];
    commit_scratch("asgd update");
    return {true, true};
  }

 private:
  static ServerOptions with_policy(ServerOptions o) {
    o.policy = Policy::kAsgd;
    return o;
  }
};

// theta <- theta - (alpha / max(1, tau)) * g.
class SasgdServer final : public Server {
 public:
  explicit SasgdServer(ServerOptions opts) : Server(with_policy(opts)) {}

 protected:
  std::pair<bool, bool> write(const ParamVector& grads, Timestamp grad_timestamp, int) override {
    const double tau = static_cast<double>(clamped_staleness(timestamp_, grad_timestamp));
    const double lr = opts_.alpha / tau;
    for (std::size_t j = 0; j < params_.size(); ++j) scratch_[j] = params_[j] - lr * grads[j];
    commit_scratch("sasgd update");
    return {true, true};
  }

 private:
  static ServerOptions with_policy(ServerOptions o) {
    o.policy = Policy::kSasgd;
    return o;
  }
};

// theta_j <- theta_j - (alpha / (v_j * max(1, tau))) * g_j, with the
// statistics already advanced by this gradient.
class FasgdServer final : public Server {
 public:
  explicit FasgdServer(ServerOptions opts) : Server(with_policy(opts)) {}

 protected:
  std::pair<bool, bool> write(const ParamVector& grads, Timestamp grad_timestamp, int) override {
    const double tau = static_cast<double>(clamped_staleness(timestamp_, grad_timestamp));
    const double alpha = opts_.alpha;
    const ParamVector& v = stats_.v;
    for (std::size_t j = 0; j < params_.size(); ++j) {
      scratch_[j] = params_[j] - (alpha / (v[j] * tau)) * grads[j];
    }
    commit_scratch("fasgd update");
    return {true, true};
  }

 private:
  static ServerOptions with_policy(ServerOptions o) {
    o.policy = Policy::kFasgd;
    return o;
  }
};

inline std::unique_ptr<Server> make_server(const ServerOptions& opts) {
  switch (opts.policy) {
    case Policy::kSync: return std::make_unique<SyncServer>(opts);
    case Policy::kAsgd: return std::make_unique<AsgdServer>(opts);
    case Policy::kSasgd: return std::make_unique<SasgdServer>(opts);
    case Policy::kFasgd: return std::make_unique<FasgdServer>(opts);
  }
  throw ConfigError("unknown policy");
}

}  // namespace fasgd
