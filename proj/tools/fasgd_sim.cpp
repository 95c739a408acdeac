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

// fasgd_sim: command-line front end for the simulator.
//
//   fasgd_sim run --config <file> [--key value ...]
//   fasgd_sim preset <name> --out-dir <dir> [--iterations N] [--seed S] [--key value ...]
//   fasgd_sim gradcheck
//   fasgd_sim selftest

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fasgd/config.hpp"
#include "fasgd/dispatcher.hpp"
#include "fasgd/gradcheck.hpp"
#include "fasgd/metrics.hpp"
#include "fasgd/presets.hpp"
#include "fasgd/selfcheck.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitCheckFailed = 4;
constexpr int kExitError = 1;

// Turns leftover `--key value` / `--key=value` arguments into overrides.
fasgd::Overrides collect_overrides(const std::vector<std::string>& extras) {
  fasgd::Overrides out;
  for (std::size_t k = 0; k < extras.size(); ++k) {
    const std::string& a = extras[k];
    if (a.rfind("--", 0) != 0) throw fasgd::ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2);
    std::string value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (k + 1 >= extras.size()) throw fasgd::ConfigError("--" + key + " needs a value");
      value = extras[++k];
    }
    out.emplace_back(key, value);
  }
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw fasgd::IoError(path + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw fasgd::IoError(path + ": cannot open for writing");
  out << text;
  if (!out) throw fasgd::IoError(path + ": write failed");
}

std::string echo_path(const std::string& csv_path) {
  fs::path p(csv_path);
  return (p.parent_path() / (p.stem().string() + ".config")).string();
}

// Runs one config, writes its CSV and config echo. Returns the exit code.
int execute(const fasgd::RunConfig& cfg, const fasgd::SimData& data, const std::string& label) {
  const std::string echo = fasgd::canonical_text(cfg);
  write_text(echo_path(cfg.output), echo);
  fasgd::Simulation sim(cfg, data);
  const auto t0 = std::chrono::steady_clock::now();
  int code = kExitOk;
  try {
    sim.run();
  } catch (const fasgd::SimulationError& e) {
    std::cerr << label << ": run aborted at " << e.what() << "\n";
    code = e.numeric() ? kExitDiverged : kExitError;
  }
  fasgd::write_csv(sim.log(), cfg.output);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto final_cost = sim.log().final_val_cost();
  std::cout << label << ": fingerprint " << sim.log().fingerprint << ", "
            << sim.iteration() << " iterations"
            << (data.synthetic ? " [synthetic data]" : "") << ", final val_cost "
            << (final_cost ? fasgd::format_real(*final_cost) : std::string("n/a")) << ", "
            << secs << " s -> " << cfg.output << "\n";
  return code;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& extras) {
  const auto cfg = fasgd::parse_config(read_text(config_path), collect_overrides(extras));
  std::cout << fasgd::canonical_text(cfg);
  const auto data = fasgd::load_data(cfg);
  return execute(cfg, data, "run");
}

int cmd_preset(const std::string& name, const std::string& out_dir, std::vector<std::string> extras,
               std::optional<std::int64_t> iterations, std::optional<std::uint64_t> seed) {
  if (iterations) extras.insert(extras.end(), {"--iterations", std::to_string(*iterations)});
  if (seed) extras.insert(extras.end(), {"--seed", std::to_string(*seed)});

  // Validate the shared overrides by resolving them against the base config.
  fasgd::Overrides shared = collect_overrides(extras);
  const fasgd::RunConfig defaults = fasgd::preset_base();
  fasgd::Overrides with_required = {{"policy", "fasgd"}, {"lambda", "1"}, {"mu", "1"},
                                    {"alpha", "0.005"},
                                    {"iterations", std::to_string(defaults.iterations)},
                                    {"seed", "0"}};
  for (const auto& kv : shared) with_required.push_back(kv);
  std::string base_text;
  for (const auto& line : {"eval_every = 500", "train_size = 10000", "val_size = 2000"}) {
    base_text += std::string(line) + "\n";
  }
  const fasgd::RunConfig base = fasgd::parse_config(base_text, with_required);

  auto preset = fasgd::make_preset(name, base);
  fs::create_directories(out_dir);
  const auto data = fasgd::load_data(base);
  if (name == "bandwidth") {
    const double s_mean = fasgd::calibrate_bandwidth(preset, data);
    std::cout << "calibrated against mean std " << fasgd::format_real(s_mean) << " after "
              << fasgd::kCalibrationWarmup << " warmup steps\n";
  }
  int worst = kExitOk;
  for (auto& m : preset.members) {
    m.config.output = (fs::path(out_dir) / (m.name + ".csv")).string();
    const int code = execute(m.config, data, m.name);
    if (code != kExitOk) worst = code;
  }
  return worst;
}

int cmd_gradcheck() {
  constexpr double kTolerance = 1e-4;
  const auto r = fasgd::run_gradcheck();
  std::cout << "gradcheck: " << r.coordinates << " coordinates, max relative error "
            << fasgd::format_real(r.max_rel_error) << " (tolerance " << kTolerance << ")\n";
  return r.max_rel_error <= kTolerance ? kExitOk : kExitCheckFailed;
}

int cmd_selftest() {
  bool ok = true;
  const auto cfg = fasgd::selftest_config();
  const auto data = fasgd::load_data(cfg);

  const auto a = fasgd::to_csv(fasgd::run(cfg, data));
  const auto b = fasgd::to_csv(fasgd::run(cfg, data));
  const bool same = a == b;
  std::cout << "determinism: " << (same ? "ok" : "FAILED") << "\n";
  ok = ok && same;

  const auto diff = fasgd::sync_vanilla_divergence(cfg, data, 200);
  const bool equiv = diff.scaled <= 1e-12;
  std::cout << "sync/vanilla equivalence: max relative difference "
            << fasgd::format_real(diff.scaled) << " (unscaled "
            << fasgd::format_real(diff.strict) << ")" << (equiv ? " ok" : " FAILED") << "\n";
  ok = ok && equiv;

  const int g = cmd_gradcheck();
  ok = ok && g == kExitOk;
  std::cout << (ok ? "selftest passed" : "selftest FAILED") << "\n";
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator of asynchronous distributed SGD"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one configuration");
  run->add_option("--config", config_path, "key = value config file")->required();
  run->allow_extras();

  std::string preset_name, out_dir;
  std::optional<std::int64_t> iterations;
  std::optional<std::uint64_t> seed;
  auto* preset = app.add_subcommand("preset", "Run an experiment preset");
  preset->add_option("name", preset_name, "grid128 | lambda_scale | bandwidth")->required();
  preset->add_option("--out-dir", out_dir, "Directory for CSVs and config echoes")->required();
  preset->add_option("--iterations", iterations, "Iterations per run");
  preset->add_option("--seed", seed, "Master seed");
  preset->allow_extras();

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of backprop");
  auto* selftest = app.add_subcommand("selftest", "Determinism and sync-equivalence checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, run->remaining());
    if (*preset) return cmd_preset(preset_name, out_dir, preset->remaining(), iterations, seed);
    if (*gradcheck) return cmd_gradcheck();
    if (*selftest) return cmd_selftest();
  } catch (const fasgd::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fasgd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}
