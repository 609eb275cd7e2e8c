// Copyright 2026 The beamsched Authors.
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

// Command-line driver. Exit codes: 0 success, 1 validation or run failure,
// 2 configuration error.

#include "beamsched/harness.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace bh = beamsched::harness;

struct Args {
  std::string config_path;
  std::string preset;
  std::string solver;
  std::optional<std::uint64_t> seed;
  std::string out = "results";
  std::string snr_db;
  std::string intensity;
  std::optional<int> threads;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Args& a) {
  cmd->add_option("--config", a.config_path, "JSON configuration file");
  cmd->add_option("--preset", a.preset, "named configuration");
  cmd->add_option("--solver", a.solver, "run a single solver")
      ->check(CLI::IsMember({"bcu", "igs", "exhaustive", "iabs"}));
  cmd->add_option("--seed", a.seed, "base seed");
  cmd->add_option("--out", a.out, "output directory");
  cmd->add_option("--snr-db", a.snr_db, "comma-separated SNR points in dB");
  cmd->add_option("--intensity", a.intensity, "comma-separated traffic intensities");
  cmd->add_option("--threads", a.threads, "worker threads");
  cmd->add_flag("--quiet", a.quiet, "no progress output");
}

bh::SimConfig build_config(const Args& a, const std::string& default_preset, bool traffic) {
  bh::SimConfig c = bh::preset(a.preset.empty() ? default_preset : a.preset);
  if (!a.config_path.empty()) c = bh::load_config(a.config_path, c);
  if (!a.solver.empty()) c.solvers = {a.solver};
  if (a.seed) c.seed = *a.seed;
  if (a.threads) c.threads = *a.threads;
  if (!a.snr_db.empty()) {
    const auto snr = bh::parse_number_list(a.snr_db);
    if (traffic) {
      if (snr.size() != 1) throw bh::ConfigError("traffic mode takes a single --snr-db value");
      c.traffic_snr_db = snr.front();
    } else {
      c.snr_db = snr;
    }
  }
  if (!a.intensity.empty()) c.intensities = bh::parse_number_list(a.intensity);
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint user scheduling and beam selection simulator"};
  app.require_subcommand(1);
  Args a;
  CLI::App* ergodic = app.add_subcommand("ergodic", "sum-rate and sum-log-rate versus SNR");
  CLI::App* traffic = app.add_subcommand("traffic", "throughput versus traffic intensity");
  CLI::App* validate = app.add_subcommand("validate", "small-scale self-check suite");
  for (CLI::App* cmd : {ergodic, traffic, validate}) add_common(cmd, a);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  bh::Logger log;
  if (!a.quiet) log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  const std::filesystem::path out(a.out);

  bh::SimConfig c;
  try {
    if (ergodic->parsed()) c = build_config(a, "fig4", false);
    if (traffic->parsed()) c = build_config(a, "traffic-small", true);
    if (validate->parsed()) c = build_config(a, "validation", false);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (ergodic->parsed()) {
      const auto r = bh::run_ergodic_experiment(c, log);
      bh::export_results(bh::ergodic_table(c, r), bh::ergodic_json(c, r), out, "ergodic");
      std::cout << bh::ergodic_table(c, r).str();
      return 0;
    }
    if (traffic->parsed()) {
      const auto r = bh::run_traffic_experiment(c, log);
      bh::export_results(bh::traffic_table(c, r), bh::traffic_json(c, r), out, "traffic");
      std::cout << bh::traffic_table(c, r).str();
      return 0;
    }
    const auto rep = bh::validate(c, {}, log);
    bh::write_text(out / "validation.json", rep.to_json().dump(2) + "\n");
    std::cout << (rep.passed() ? "validation passed" : "validation FAILED") << '\n';
    return rep.passed() ? 0 : 1;
  } catch (const bh::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
