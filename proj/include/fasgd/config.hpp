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

// Run configuration: a flat `key = value` text format with `#` comments,
// command-line overrides, validation and a canonical echo.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fasgd/errors.hpp"
#include "fasgd/rng.hpp"
#include "fasgd/server.hpp"

namespace fasgd {

enum class DataSource { kIdx, kSynthetic };
enum class SelectionMode { kUniform, kWeightedDecay };
enum class StalenessNorm { kL2, kLinf };

struct RunConfig {
  Policy policy = Policy::kAsgd;
  std::int64_t lambda = 1;
  std::int64_t mu = 1;
  double alpha = 0.01;
  double gamma = 0.9;
  double beta = 0.9;
  double eps_stat = 1e-8;
  double eps_bw = 1e-8;
  double c_push = 0.0;
  double c_fetch = 0.0;
  bool drops_enabled = false;
  bool freeze_v = false;
  std::int64_t iterations = 0;
  std::int64_t eval_every = 500;
  std::int64_t bstale_every = 0;  // 0 = off
  StalenessNorm bstale_norm = StalenessNorm::kL2;
  std::uint64_t seed = 0;
  DataSource data_source = DataSource::kSynthetic;
  std::string images_path;
  std::string labels_path;
  std::int64_t synthetic_n = 12000;
  std::uint64_t data_seed = 1234;  // synthetic data only
  std::int64_t train_size = 10000;
  std::int64_t val_size = 2000;
  std::int64_t hidden = 200;
  SelectionMode selection = SelectionMode::kUniform;
  double selection_decay = 1.0;
  double selection_recovery = 1.0;
  std::string output = "metrics.csv";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Keys that must be given explicitly (file or override).
inline const std::vector<std::string>& required_keys() {
  static const std::vector<std::string> keys = {"policy", "lambda", "mu",
                                                "alpha",  "iterations", "seed"};
  return keys;
}

// Reals are written with 17 significant digits so they parse back exactly.
inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  // strtod rather than from_chars: libstdc++ 11 lacks floating from_chars on
  // some targets. Both round correctly.
  if (v.empty()) throw ConfigError(key + ": expected a real number, got ''");
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite real number, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

// One entry per key: how to read it and how to print it canonically.
struct Field {
  std::string key;
  void (*set)(RunConfig&, const std::string& key, const std::string& value);
  std::string (*get)(const RunConfig&);
};

#define FASGD_INT_FIELD(name)                                                             \
  Field {                                                                                 \
    #name, [](RunConfig& c, const std::string& k, const std::string& v) {                 \
      c.name = parse_int(k, v);                                                           \
    },                                                                                    \
        [](const RunConfig& c) { return std::to_string(c.name); }                         \
  }
#define FASGD_REAL_FIELD(name)                                                            \
  Field {                                                                                 \
    #name, [](RunConfig& c, const std::string& k, const std::string& v) {                 \
      c.name = parse_real(k, v);                                                          \
    },                                                                                    \
        [](const RunConfig& c) { return format_real(c.name); }                            \
  }
#define FASGD_BOOL_FIELD(name)                                                            \
  Field {                                                                                 \
    #name, [](RunConfig& c, const std::string& k, const std::string& v) {                 \
      c.name = parse_bool(k, v);                                                          \
    },                                                                                    \
        [](const RunConfig& c) { return std::string(c.name ? "true" : "false"); }         \
  }
#define FASGD_STRING_FIELD(name)                                                          \
  Field {                                                                                 \
    #name, [](RunConfig& c, const std::string&, const std::string& v) { c.name = v; },    \
        [](const RunConfig& c) { return c.name; }                                         \
  }

inline const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"policy",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              auto p = parse_policy(v);
              if (!p) throw ConfigError(k + ": expected one of sync|asgd|sasgd|fasgd, got '" + v + "'");
              c.policy = *p;
            },
            [](const RunConfig& c) { return to_string(c.policy); }},
      FASGD_INT_FIELD(lambda),
      FASGD_INT_FIELD(mu),
      FASGD_REAL_FIELD(alpha),
      FASGD_REAL_FIELD(gamma),
      FASGD_REAL_FIELD(beta),
      FASGD_REAL_FIELD(eps_stat),
      FASGD_REAL_FIELD(eps_bw),
      FASGD_REAL_FIELD(c_push),
      FASGD_REAL_FIELD(c_fetch),
      FASGD_BOOL_FIELD(drops_enabled),
      FASGD_BOOL_FIELD(freeze_v),
      FASGD_INT_FIELD(iterations),
      FASGD_INT_FIELD(eval_every),
      FASGD_INT_FIELD(bstale_every),
      Field{"bstale_norm",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "l2") c.bstale_norm = StalenessNorm::kL2;
              else if (v == "linf") c.bstale_norm = StalenessNorm::kLinf;
              else throw ConfigError(k + ": expected l2|linf, got '" + v + "'");
            },
            [](const RunConfig& c) {
              return std::string(c.bstale_norm == StalenessNorm::kL2 ? "l2" : "linf");
            }},
      Field{"seed",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_uint(k, v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      Field{"data_source",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "idx") c.data_source = DataSource::kIdx;
              else if (v == "synthetic") c.data_source = DataSource::kSynthetic;
              else throw ConfigError(k + ": expected idx|synthetic, got '" + v + "'");
            },
            [](const RunConfig& c) {
              return std::string(c.data_source == DataSource::kIdx ? "idx" : "synthetic");
            }},
      FASGD_STRING_FIELD(images_path),
      FASGD_STRING_FIELD(labels_path),
      FASGD_INT_FIELD(synthetic_n),
      Field{"data_seed",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.data_seed = parse_uint(k, v); },
            [](const RunConfig& c) { return std::to_string(c.data_seed); }},
      FASGD_INT_FIELD(train_size),
      FASGD_INT_FIELD(val_size),
      FASGD_INT_FIELD(hidden),
      Field{"selection",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "uniform") c.selection = SelectionMode::kUniform;
              else if (v == "weighted_decay") c.selection = SelectionMode::kWeightedDecay;
              else throw ConfigError(k + ": expected uniform|weighted_decay, got '" + v + "'");
            },
            [](const RunConfig& c) {
              return std::string(c.selection == SelectionMode::kUniform ? "uniform"
                                                                        : "weighted_decay");
            }},
      FASGD_REAL_FIELD(selection_decay),
      FASGD_REAL_FIELD(selection_recovery),
      FASGD_STRING_FIELD(output),
  };
  return table;
}

#undef FASGD_INT_FIELD
#undef FASGD_REAL_FIELD
#undef FASGD_BOOL_FIELD
#undef FASGD_STRING_FIELD

inline const Field* find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

}  // namespace config_detail

// Every constraint violation in the config, one message per violation.
inline std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> errs;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };
  need(c.lambda >= 1, "lambda must be ≥ 1");
  need(c.mu >= 1, "mu must be ≥ 1");
  need(c.alpha > 0.0, "alpha must be > 0");
  need(c.gamma > 0.0 && c.gamma < 1.0, "gamma must be in (0, 1)");
  need(c.beta > 0.0 && c.beta < 1.0, "beta must be in (0, 1)");
  need(c.eps_stat > 0.0, "eps_stat must be > 0");
  need(c.eps_bw > 0.0, "eps_bw must be > 0");
  need(c.c_push >= 0.0, "c_push must be ≥ 0");
  need(c.c_fetch >= 0.0, "c_fetch must be ≥ 0");
  need(c.iterations >= 0, "iterations must be ≥ 0");
  need(c.eval_every >= 1, "eval_every must be ≥ 1");
  need(c.bstale_every >= 0, "bstale_every must be ≥ 0");
  need(c.hidden >= 1, "hidden must be ≥ 1");
  need(c.val_size >= 1, "val_size must be ≥ 1");
  need(c.train_size >= 1, "train_size must be ≥ 1");
  need(c.mu <= c.train_size, "mu must be ≤ train_size");
  need(c.selection_decay > 0.0 && c.selection_decay <= 1.0, "selection_decay must be in (0, 1]");
  need(c.selection_recovery >= 1.0, "selection_recovery must be ≥ 1");
  if (c.data_source == DataSource::kSynthetic) {
    need(c.synthetic_n >= 10, "synthetic_n must be ≥ 10");
    need(c.train_size + c.val_size <= c.synthetic_n,
         "train_size + val_size must be ≤ synthetic_n");
  } else {
    need(!c.images_path.empty(), "images_path must be set when data_source = idx");
    need(!c.labels_path.empty(), "labels_path must be set when data_source = idx");
  }
  return errs;
}

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Parses the key = value text, applies overrides on top, checks required keys
// and constraints. Every problem found is reported in one ConfigError.
inline RunConfig parse_config(const std::string& file_text, const Overrides& overrides = {}) {
  using namespace config_detail;
  std::map<std::string, std::string> values;
  std::vector<std::string> errs;

  std::istringstream in(file_text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errs.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (find_field(key) == nullptr) {
      errs.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    if (!values.emplace(key, value).second) {
      errs.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
  }
  for (const auto& [key, value] : overrides) {
    if (find_field(key) == nullptr) {
      errs.push_back("override: unknown key '" + key + "'");
      continue;
    }
    values[key] = value;
  }

  std::vector<std::string> missing;
  for (const auto& k : required_keys()) {
    if (values.count(k) == 0) missing.push_back(k);
  }
  if (!missing.empty()) {
    std::string msg = "missing required keys:";
    for (const auto& k : missing) msg += " " + k;
    errs.push_back(msg);
  }

  RunConfig cfg;
  for (const auto& [key, value] : values) {
    try {
      find_field(key)->set(cfg, key, value);
    } catch (const ConfigError& e) {
      errs.push_back(e.what());
    }
  }
  if (errs.empty()) {
    for (auto& e : validate(cfg)) errs.push_back(std::move(e));
  }
  if (!errs.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

// All keys in a fixed order, one `key = value` per line. Parsing the echo
// gives back the same config.
inline std::string canonical_text(const RunConfig& c, bool include_output = true) {
  std::string out;
  for (const auto& f : config_detail::fields()) {
    if (!include_output && f.key == "output") continue;
    out += f.key + " = " + f.get(c) + "\n";
  }
  return out;
}

// 64-bit FNV-1a of the canonical text (which includes the seed), as hex. The
// output path does not affect a run and is left out.
inline std::string fingerprint(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(RngStream::fnv1a64(canonical_text(c, false))));
  return buf;
}

}  // namespace fasgd
