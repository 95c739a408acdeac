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

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fasgd/config.hpp"
#include "fasgd/dataset.hpp"
#include "fasgd/errors.hpp"
#include "fasgd/mlp.hpp"
#include "fasgd/param_vector.hpp"

namespace fasgd {

struct MetricsRecord {
  std::int64_t iteration = 0;
  std::int64_t server_timestamp = 0;
  std::optional<std::int64_t> client;  // empty on the initial row
  std::optional<std::int64_t> tau;     // raw step-staleness at push time
  std::optional<double> val_cost;
  std::int64_t pushes_sent = 0;
  std::int64_t pushes_dropped = 0;
  std::int64_t fetches_sent = 0;
  std::int64_t fetches_dropped = 0;
  std::optional<double> b_staleness;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

struct MetricsLog {
  std::vector<MetricsRecord> records;
  std::string fingerprint;

  const MetricsRecord& back() const { return records.back(); }

  // Last recorded validation cost, if any.
  std::optional<double> final_val_cost() const {
    for (auto it = records.rbegin(); it != records.rend(); ++it) {
      if (it->val_cost) return it->val_cost;
    }
    return std::nullopt;
  }
};

inline constexpr std::size_t kEvalChunk = 256;

// Mean NLL over the whole dataset, evaluated in chunks of 256 rows whose
// summed costs are accumulated left to right.
inline double eval_validation(const Mlp& model, const ParamVector& params, const Dataset& val,
                              std::size_t chunk = kEvalChunk) {
  if (val.size() == 0) throw ConfigError("eval_validation: empty dataset");
  std::vector<std::size_t> idx;
  double total = 0.0;
  for (std::size_t first = 0; first < val.size(); first += chunk) {
    const std::size_t count = std::min(chunk, val.size() - first);
    idx.resize(count);
    for (std::size_t k = 0; k < count; ++k) idx[k] = first + k;
    const Minibatch b = val.gather(idx);
    total += model.cost(params, b) * static_cast<double>(count);
  }
  return total / static_cast<double>(val.size());
}

inline double vector_norm(std::span<const double> x, StalenessNorm norm) {
  return norm == StalenessNorm::kL2 ? norm2(x) : norm_inf(x);
}

// Norm of the difference of two gradients of the same objective, one taken
// at the client's parameters and one at the server's.
template <typename GradFn>
double b_staleness(GradFn&& grad, const ParamVector& client_params,
                   const ParamVector& server_params, StalenessNorm norm = StalenessNorm::kL2) {
  require_same_length(client_params.size(), server_params.size(), "b_staleness");
  const ParamVector gc = grad(client_params);
  const ParamVector gs = grad(server_params);
  std::vector<double> diff(gc.size());
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = gc[j] - gs[j];
  return vector_norm(diff, norm);
}

inline double measure_b_staleness(const Mlp& model, const ParamVector& client_params,
                                  const ParamVector& server_params, const Minibatch& batch,
                                  StalenessNorm norm = StalenessNorm::kL2) {
  return b_staleness([&](const ParamVector& p) { return model.gradient(p, batch); },
                     client_params, server_params, norm);
}

inline const char* kCsvHeader =
    "iteration,server_timestamp,client,tau,val_cost,pushes_sent,pushes_dropped,"
    "fetches_sent,fetches_dropped,b_staleness";

inline std::string to_csv(const MetricsLog& log) {
  std::string out = kCsvHeader;
  out += '\n';
  auto opt_int = [](const std::optional<std::int64_t>& v) {
    return v ? std::to_string(*v) : std::string();
  };
  auto opt_real = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  for (const auto& r : log.records) {
    out += std::to_string(r.iteration) + ',' + std::to_string(r.server_timestamp) + ',' +
           opt_int(r.client) + ',' + opt_int(r.tau) + ',' + opt_real(r.val_cost) + ',' +
           std::to_string(r.pushes_sent) + ',' + std::to_string(r.pushes_dropped) + ',' +
           std::to_string(r.fetches_sent) + ',' + std::to_string(r.fetches_dropped) + ',' +
           opt_real(r.b_staleness) + '\n';
  }
  return out;
}

inline void write_csv(const MetricsLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << to_csv(log);
  out.flush();
  if (!out) throw IoError(path + ": write failed");
}

inline MetricsLog parse_csv(const std::string& text, const std::string& origin = "<csv>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw IngestionError(origin + ": missing or unexpected CSV header");
  }
  MetricsLog log;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    if (!line.empty() && line.back() == ',') cols.emplace_back();
    if (cols.size() != 10) {
      throw IngestionError(origin + ":" + std::to_string(lineno) + ": expected 10 columns, got " +
                           std::to_string(cols.size()));
    }
    auto to_int = [&](const std::string& s) -> std::int64_t {
      try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        throw IngestionError(origin + ":" + std::to_string(lineno) + ": bad integer '" + s + "'");
      }
    };
    auto to_real = [&](const std::string& s) -> double {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) {
        throw IngestionError(origin + ":" + std::to_string(lineno) + ": bad real '" + s + "'");
      }
      return v;
    };
    MetricsRecord r;
    r.iteration = to_int(cols[0]);
    r.server_timestamp = to_int(cols[1]);
    if (!cols[2].empty()) r.client = to_int(cols[2]);
    if (!cols[3].empty()) r.tau = to_int(cols[3]);
    if (!cols[4].empty()) r.val_cost = to_real(cols[4]);
    r.pushes_sent = to_int(cols[5]);
    r.pushes_dropped = to_int(cols[6]);
    r.fetches_sent = to_int(cols[7]);
    r.fetches_dropped = to_int(cols[8]);
    if (!cols[9].empty()) r.b_staleness = to_real(cols[9]);
    log.records.push_back(r);
  }
  return log;
}

inline MetricsLog read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path);
}

}  // namespace fasgd
