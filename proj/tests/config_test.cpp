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

#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "fasgd/config.hpp"
#include "fasgd/presets.hpp"

namespace fasgd {
namespace {

const char* kMinimal =
    "# minimal run\n"
    "policy = fasgd\n"
    "lambda = 4\n"
    "mu = 8\n"
    "alpha = 0.005   # FASGD rate\n"
    "iterations = 100\n"
    "seed = 3\n";

std::string error_of(const std::string& text, const Overrides& ov = {}) {
  try {
    parse_config(text, ov);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(ParseConfig, MinimalFile) {
  const auto c = parse_config(kMinimal);
  EXPECT_EQ(c.policy, Policy::kFasgd);
  EXPECT_EQ(c.lambda, 4);
  EXPECT_EQ(c.mu, 8);
  EXPECT_EQ(c.alpha, 0.005);
  EXPECT_EQ(c.iterations, 100);
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.gamma, 0.9);
  EXPECT_EQ(c.eps_stat, 1e-8);
}

TEST(ParseConfig, EmptyFileListsAllRequiredKeys) {
  const auto msg = error_of("");
  ASSERT_FALSE(msg.empty());
  for (const auto& k : required_keys()) EXPECT_NE(msg.find(k), std::string::npos) << k;
}

TEST(ParseConfig, OverrideTakesPrecedence) {
  const auto c = parse_config(kMinimal, {{"lambda", "8"}});
  EXPECT_EQ(c.lambda, 8);
}

TEST(ParseConfig, NegativeMuNamesTheConstraint) {
  const auto msg = error_of(kMinimal, {{"mu", "-1"}});
  EXPECT_NE(msg.find("mu must be ≥ 1"), std::string::npos) << msg;
}

TEST(ParseConfig, UnknownKeyRejected) {
  EXPECT_NE(error_of(std::string(kMinimal) + "lamda = 3\n").find("unknown key 'lamda'"),
            std::string::npos);
  EXPECT_NE(error_of(kMinimal, {{"k_fetch", "3"}}).find("unknown key 'k_fetch'"),
            std::string::npos);
}

TEST(ParseConfig, TypeMismatchNamesTheKey) {
  const auto msg = error_of(kMinimal, {{"alpha", "fast"}});
  EXPECT_NE(msg.find("alpha: expected a finite real number"), std::string::npos) << msg;
  EXPECT_NE(error_of(kMinimal, {{"lambda", "2.5"}}).find("lambda: expected an integer"),
            std::string::npos);
  EXPECT_NE(error_of(kMinimal, {{"drops_enabled", "maybe"}}).find("drops_enabled"),
            std::string::npos);
  EXPECT_NE(error_of(kMinimal, {{"policy", "adam"}}).find("policy"), std::string::npos);
}

TEST(ParseConfig, ReportsEveryViolation) {
  const auto msg = error_of(kMinimal, {{"mu", "0"}, {"alpha", "-1"}, {"c_fetch", "-2"},
                                       {"eps_bw", "0"}});
  EXPECT_NE(msg.find("mu must be ≥ 1"), std::string::npos);
  EXPECT_NE(msg.find("alpha must be > 0"), std::string::npos);
  EXPECT_NE(msg.find("c_fetch must be ≥ 0"), std::string::npos);
  EXPECT_NE(msg.find("eps_bw must be > 0"), std::string::npos);
}

TEST(ParseConfig, MalformedLinesAndDuplicates) {
  EXPECT_NE(error_of(std::string(kMinimal) + "just words\n").find("line 8"), std::string::npos);
  EXPECT_NE(error_of(std::string(kMinimal) + "mu = 2\n").find("duplicate key 'mu'"),
            std::string::npos);
}

TEST(ParseConfig, IdxSourceNeedsPaths) {
  EXPECT_NE(error_of(kMinimal, {{"data_source", "idx"}}).find("images_path"), std::string::npos);
}

// Canonical echo is a fixed point of parse -> print.
TEST(CanonicalText, ParsingTheEchoReproducesTheConfig) {
  RunConfig c = parse_config(kMinimal, {{"alpha", "0.1"},
                                        {"c_fetch", "0.0123456789012345678"},
                                        {"selection", "weighted_decay"},
                                        {"selection_decay", "0.5"},
                                        {"bstale_norm", "linf"},
                                        {"output", "out/x.csv"}});
  const std::string echo = canonical_text(c);
  const RunConfig back = parse_config(echo);
  EXPECT_EQ(back, c);
  EXPECT_EQ(canonical_text(back), echo);
  EXPECT_NE(echo.find("alpha = 0.10000000000000001\n"), std::string::npos);
}

TEST(CanonicalText, FingerprintIgnoresOutputButNotSeed) {
  const RunConfig a = parse_config(kMinimal);
  const RunConfig b = parse_config(kMinimal, {{"output", "elsewhere.csv"}});
  const RunConfig c = parse_config(kMinimal, {{"seed", "4"}});
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  EXPECT_NE(fingerprint(a), fingerprint(c));
  EXPECT_EQ(fingerprint(a).size(), 16u);
}

TEST(Presets, Grid128KeepsMuLambdaProduct) {
  const auto p = make_preset("grid128");
  ASSERT_EQ(p.members.size(), 8u);
  int sasgd = 0, fasgd = 0;
  for (const auto& m : p.members) {
    EXPECT_EQ(m.config.mu * m.config.lambda, 128) << m.name;
    if (m.config.policy == Policy::kSasgd) {
      ++sasgd;
      EXPECT_EQ(m.config.alpha, 0.04);
    } else {
      ++fasgd;
      EXPECT_EQ(m.config.policy, Policy::kFasgd);
      EXPECT_EQ(m.config.alpha, 0.005);
    }
  }
  EXPECT_EQ(sasgd, 4);
  EXPECT_EQ(fasgd, 4);
}

TEST(Presets, LambdaScaleUsesMu128) {
  const auto p = make_preset("lambda_scale");
  ASSERT_EQ(p.members.size(), 8u);
  for (const auto& m : p.members) EXPECT_EQ(m.config.mu, 128) << m.name;
}

TEST(Presets, BandwidthSweepsAreOneSided) {
  auto p = make_preset("bandwidth");
  const double s_mean = 0.02, eps = 1e-8;
  for (auto& m : p.members) {
    if (m.fetch_rate_target) m.config.c_fetch = c_for_rate(*m.fetch_rate_target, s_mean, eps);
    if (m.push_rate_target) m.config.c_push = c_for_rate(*m.push_rate_target, s_mean, eps);
  }
  bool saw_fetch10 = false;
  for (const auto& m : p.members) {
    if (m.fetch_rate_target && *m.fetch_rate_target == 0.1) {
      saw_fetch10 = true;
      EXPECT_EQ(m.config.c_push, 0.0);
      EXPECT_TRUE(m.config.drops_enabled);
      EXPECT_NEAR(transmit_probability(m.config.c_fetch, s_mean, eps), 0.1, 1e-12);
    }
    if (m.push_rate_target) {
      EXPECT_EQ(m.config.c_fetch, 0.0);
    }
  }
  EXPECT_TRUE(saw_fetch10);
}

// Preset contents are pinned; a change here is a change to the experiments.
TEST(Presets, MatchGoldenFiles) {
  for (const auto& name : preset_names()) {
    std::ifstream in(std::string(FASGD_GOLDEN_DIR) + "/" + name + ".txt");
    ASSERT_TRUE(in) << name;
    std::stringstream golden;
    golden << in.rdbuf();
    std::string got;
    for (const auto& m : make_preset(name).members) {
      got += "[" + m.name + "]\n" + canonical_text(m.config, false) + "\n";
    }
    EXPECT_EQ(got, golden.str()) << name;
  }
}

TEST(Presets, UnknownName) { EXPECT_THROW(make_preset("grid256"), ConfigError); }

TEST(Presets, CForRate) {
  EXPECT_EQ(c_for_rate(1.0, 0.3, 1e-8), 0.0);
  EXPECT_NEAR(c_for_rate(0.5, 0.3, 0.0), 0.3, 1e-15);
  EXPECT_THROW(c_for_rate(0.0, 0.3, 1e-8), ConfigError);
}

}  // namespace
}  // namespace fasgd
