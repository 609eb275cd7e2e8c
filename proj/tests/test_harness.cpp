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

#include "beamsched/harness.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace beamsched::harness {
namespace {

namespace fs = std::filesystem;

// A configuration small enough for second-scale end-to-end runs.
SimConfig tiny() {
  SimConfig c = preset("fig4");
  c.name = "tiny";
  c.snr_db = {10.0};
  c.blocks = 3;
  c.block_length = 5;
  c.solvers = {"igs", "iabs"};
  c.traffic_slots = 60;
  c.intensities = {0.5};
  return c;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("beamsched_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, PresetsAreValid) {
  for (const auto& name : preset_names()) {
    SimConfig c;
    ASSERT_NO_THROW(c = preset(name)) << name;
    EXPECT_NO_THROW(c.validate()) << name;
    EXPECT_EQ(c.paths, 3) << name;
  }
  EXPECT_THROW(preset("nope"), ConfigError);
}

TEST(Config, UnknownKeyRejected) {
  const auto j = nlohmann::json::parse(R"({"antennas": 8, "antenas": 8})");
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, WrongTypeRejected) {
  const auto j = nlohmann::json::parse(R"({"antennas": "eight"})");
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, InconsistentSizesRejected) {
  const auto j = nlohmann::json::parse(R"({"preset": "fig4", "streams": 6})");
  EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, PresetKeyThenOverrides) {
  const auto j = nlohmann::json::parse(R"({"preset": "fig4", "seed": 9, "snr_db": [5]})");
  const SimConfig c = config_from_json(j);
  EXPECT_EQ(c.antennas, 8);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.snr_db, std::vector<double>{5.0});
}

TEST(Config, JsonRoundTrip) {
  const SimConfig c = preset("traffic-small");
  const SimConfig back = config_from_json(config_to_json(c));
  EXPECT_EQ(config_to_json(back), config_to_json(c));
}

TEST(Config, LoadFromFile) {
  const fs::path dir = temp_dir("config");
  std::ofstream(dir / "ok.json") << R"({"preset": "fig4", "blocks": 2})";
  std::ofstream(dir / "bad.json") << "{not json";
  EXPECT_EQ(load_config((dir / "ok.json").string()).blocks, 2);
  EXPECT_THROW(load_config((dir / "bad.json").string()), ConfigError);
  EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
}

TEST(Config, NumberLists) {
  EXPECT_EQ(parse_number_list("0,10,20.5"), (std::vector<double>{0.0, 10.0, 20.5}));
  EXPECT_THROW(parse_number_list("1,x"), ConfigError);
}

// ---------------------------------------------------------------------------
// Scenario

TEST(Scenario, IdenticalPathlossGivesEqualTraces) {
  SimConfig c = preset("fig2-small");
  const Scenario s = generate_scenario(c, 3);
  const auto t = s.traces();
  for (double x : t) EXPECT_NEAR(x, t.front(), 1e-9);
  EXPECT_NEAR(t.front(), c.antennas, 1e-9);
}

TEST(Scenario, SeedReproducible) {
  const SimConfig c = preset("fig3-small");
  const Scenario a = generate_scenario(c, 5), b = generate_scenario(c, 5),
                 other = generate_scenario(c, 6);
  ASSERT_EQ(a.profiles.size(), b.profiles.size());
  for (std::size_t n = 0; n < a.profiles.size(); ++n) {
    for (std::size_t l = 0; l < a.profiles[n].paths.size(); ++l) {
      EXPECT_EQ(a.profiles[n].paths[l].azimuth, b.profiles[n].paths[l].azimuth);
    }
    EXPECT_EQ(a.profiles[n].pathloss, b.profiles[n].pathloss);
  }
  EXPECT_NE(a.profiles[0].paths[0].azimuth, other.profiles[0].paths[0].azimuth);
}

TEST(Scenario, ThreePathsWithStrongLineOfSight) {
  const SimConfig c = preset("fig4");
  const Scenario s = generate_scenario(c, 7);
  for (const auto& p : s.profiles) {
    ASSERT_EQ(p.path_count(), 3);
    EXPECT_NEAR(p.paths[0].amplitude / p.paths[1].amplitude, 10.0, 1e-12);
    EXPECT_NEAR(p.paths[1].amplitude, p.paths[2].amplitude, 1e-12);
    double power = 0.0;
    for (const auto& m : p.paths) power += m.amplitude * m.amplitude;
    EXPECT_NEAR(power, 3.0, 1e-12);
  }
  for (std::size_t n = 0; n < s.profiles.size(); ++n) {
    EXPECT_GE(s.distances[n], c.distance_min);
    EXPECT_LE(s.distances[n], c.distance_max);
    EXPECT_NEAR(s.traces()[n], c.antennas * s.profiles[n].pathloss, 1e-9);
  }
}

TEST(Scenario, PlanarArrayUsesKroneckerBeams) {
  SimConfig c = preset("fig4");
  c.array_rows = 2;
  const Scenario s = generate_scenario(c, 8);
  EXPECT_EQ(s.geometry.kind, ArrayKind::kPlanar);
  EXPECT_LT((s.beam_matrix - kronecker(unitary_dft(4), unitary_dft(2))).norm(), 1e-12);
}

TEST(Scenario, BeamChannelsDependOnBlockOnly) {
  const SimConfig c = preset("fig4");
  const Scenario s = generate_scenario(c, 9);
  const auto a = beam_channels(s, 42, 3), b = beam_channels(s, 42, 3), d = beam_channels(s, 42, 4);
  EXPECT_LT((a[0] - b[0]).norm(), 1e-15);
  EXPECT_GT((a[0] - d[0]).norm(), 1e-6);
}

// ---------------------------------------------------------------------------
// Service

TEST(Service, SingleUserRzfIsMatchedFilter) {
  const SimConfig c = preset("fig4");
  const Scenario s = generate_scenario(c, 10);
  const auto h = beam_channels(s, 1, 0);
  ScheduleDecision d;
  d.users = {2};
  d.beams = {1, 4, 6};
  d.powers = {5.0};
  const auto bits = rzf_service(h, d, 5.0, 100.0, c.antennas);
  double g = 0.0;
  for (int b : d.beams) g += std::norm(h[2](b));
  EXPECT_NEAR(bits[2], 100.0 * std::log2(1.0 + 5.0 * g), 1e-8);
  for (int n = 0; n < c.users; ++n) {
    if (n != 2) {
      EXPECT_EQ(bits[n], 0.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Ergodic experiment

TEST(Ergodic, VanishingSnrGivesVanishingRates) {
  SimConfig c = tiny();
  c.snr_db = {-80.0};
  const auto r = run_ergodic_experiment(c);
  for (const auto& row : r.rows) EXPECT_LT(row.sum_rate, 1e-5) << row.solver;
}

TEST(Ergodic, SingleUserMatchesMeanRzfRate) {
  SimConfig c = tiny();
  c.users = c.streams = c.beams = 1;
  c.solvers = {"igs"};
  c.blocks = 4;
  const std::uint64_t seed = run_seed(c, 0);
  const Scenario s = generate_scenario(c, seed);
  const auto run = run_ergodic_once(c, s, "igs", 10.0, seed);
  // The only user always gets its strongest beam and the full power.
  const RVector diag = s.csi.beam[0].diagonal().real();
  Eigen::Index beam = 0;
  diag.maxCoeff(&beam);
  double expected = 0.0;
  for (long b = 0; b < c.blocks; ++b) {
    const auto h = beam_channels(s, seed, b);
    expected += std::log2(1.0 + db_to_linear(10.0) * std::norm(h[0](beam)));
  }
  expected /= c.blocks;
  EXPECT_NEAR(run.user_rates[0], expected, 1e-9 * expected);
}

TEST(Ergodic, RowsCoverEverySnrAndSolver) {
  SimConfig c = tiny();
  c.snr_db = {0.0, 20.0};
  const auto r = run_ergodic_experiment(c);
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_EQ(r.rows[0].solver, "igs");
  EXPECT_EQ(r.rows[1].solver, "iabs");
  EXPECT_EQ(r.rows[2].snr_db, 20.0);
  EXPECT_GT(r.rows[2].sum_rate, r.rows[0].sum_rate);
}

TEST(Ergodic, ExhaustiveBoundsSolversPerSlot) {
  const SimConfig c = preset("fig4");
  const auto insts = random_instances(c, 4, 77);
  for (const auto& in : insts) {
    const double ex =
        schedule_slot("exhaustive", in.queues, in.csi, in.power, c, BaselineUsers::kStrongest)
            .objective;
    for (const char* solver : {"bcu", "igs", "iabs"}) {
      const double v =
          schedule_slot(solver, in.queues, in.csi, in.power, c, BaselineUsers::kStrongest)
              .objective;
      EXPECT_LE(v, ex * (1.0 + 1e-9)) << solver;
    }
  }
}

TEST(Ergodic, ZeroQueuesStillSchedule) {
  const SimConfig c = preset("fig4");
  const Scenario s = generate_scenario(c, 11);
  const std::vector<double> q(c.users, 0.0);
  const auto d = schedule_slot("bcu", q, s.csi, 10.0, c, BaselineUsers::kStrongest);
  EXPECT_EQ(static_cast<int>(d.users.size()), c.streams);
}

// ---------------------------------------------------------------------------
// Traffic experiment

TEST(Traffic, ZeroIntensityServesNothing) {
  SimConfig c = tiny();
  c.intensities = {0.0};
  const auto r = run_traffic_experiment(c);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.throughput, 0.0);
    EXPECT_EQ(row.final_backlog, 0.0);
  }
  for (const auto& run : r.runs) {
    for (double b : run.backlog) EXPECT_EQ(b, 0.0);
  }
}

TEST(Traffic, FlowConservation) {
  SimConfig c = tiny();
  c.intensities = {0.7};
  const auto r = run_traffic_experiment(c);
  for (const auto& run : r.runs) {
    EXPECT_NEAR(run.served_bits + run.final_backlog, run.arrived_bits,
                1e-9 * std::max(1.0, run.arrived_bits));
    EXPECT_NEAR(run.running_throughput.back() * c.traffic_slots * c.channel_uses, run.served_bits,
                1e-6 * std::max(1.0, run.served_bits));
  }
}

TEST(Traffic, SolversSeeIdenticalArrivals) {
  SimConfig c = tiny();
  c.intensities = {0.4};
  const auto r = run_traffic_experiment(c);
  ASSERT_EQ(r.runs.size(), 2u);
  EXPECT_EQ(r.runs[0].arrived_bits, r.runs[1].arrived_bits);
}

TEST(Traffic, LightLoadIsFullyServed) {
  SimConfig c = tiny();
  c.intensities = {0.1};
  c.traffic_slots = 300;
  const auto r = run_traffic_experiment(c);
  for (const auto& row : r.rows) {
    EXPECT_GT(row.delivery_ratio, 0.97) << row.solver;
  }
}

TEST(Traffic, RunningThroughputSettles) {
  // Reduced traffic scenario: after 200 slots the running average moves by
  // at most 1% per 100 slots.
  SimConfig c = preset("traffic-small");
  c.intensities = {0.5};
  c.solvers = {"igs"};
  c.traffic_slots = 400;
  const auto r = run_traffic_experiment(c);
  const auto& rt = r.runs[0].running_throughput;
  for (std::size_t t = 200; t + 100 < rt.size(); t += 50) {
    EXPECT_LE(std::abs(rt[t + 100] - rt[t]) / rt[t], 0.01) << t;
  }
}

// ---------------------------------------------------------------------------
// Determinism and export

TEST(Determinism, RepeatedRunsGiveIdenticalCsv) {
  const SimConfig c = tiny();
  const std::string a = ergodic_table(c, run_ergodic_experiment(c)).str();
  const std::string b = ergodic_table(c, run_ergodic_experiment(c)).str();
  EXPECT_EQ(a, b);
  const std::string ta = traffic_table(c, run_traffic_experiment(c)).str();
  const std::string tb = traffic_table(c, run_traffic_experiment(c)).str();
  EXPECT_EQ(ta, tb);
}

TEST(Determinism, ThreadCountDoesNotChangeOutput) {
  SimConfig c = tiny();
  c.seeds = 3;
  c.snr_db = {0.0, 20.0};
  const std::string serial = ergodic_table(c, run_ergodic_experiment(c)).str();
  c.threads = 3;
  const std::string parallel = ergodic_table(c, run_ergodic_experiment(c)).str();
  EXPECT_EQ(serial, parallel);
}

TEST(Determinism, SeedChangesOutput) {
  SimConfig c = tiny();
  const std::string a = ergodic_table(c, run_ergodic_experiment(c)).str();
  c.seed = 2;
  EXPECT_NE(a, ergodic_table(c, run_ergodic_experiment(c)).str());
}

TEST(Export, NumberFormatting) {
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.3333333333");
  EXPECT_EQ(format_number(std::nan("")), "nan");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
}

TEST(Export, CsvLayout) {
  const SimConfig c = tiny();
  const auto t = ergodic_table(c, run_ergodic_experiment(c));
  const std::string s = t.str();
  EXPECT_EQ(s.rfind("# ", 0), 0u);
  EXPECT_NE(s.find("\nsnr_db,solver,seeds,slots,sum_rate,sum_log_rate,min_user_rate,"
                   "unserved_users,mean_iterations\n"),
            std::string::npos);
  for (const auto& row : t.rows) EXPECT_EQ(row.size(), t.columns.size());
}

TEST(Export, WritesFilesAndReportsBadPaths) {
  const fs::path dir = temp_dir("export");
  const SimConfig c = tiny();
  const auto r = run_traffic_experiment(c);
  export_results(traffic_table(c, r), traffic_json(c, r), dir / "nested", "traffic");
  EXPECT_EQ(read_file(dir / "nested" / "traffic.csv"), traffic_table(c, r).str());
  const auto j = nlohmann::json::parse(read_file(dir / "nested" / "traffic.json"));
  EXPECT_EQ(j["config"]["name"], "tiny");
  EXPECT_EQ(j["runs"].size(), 2u);
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(write_text(dir / "file" / "sub.csv", "x"), ExportError);
}

// ---------------------------------------------------------------------------
// Command line

#ifdef BEAMSCHED_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(BEAMSCHED_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = temp_dir("cli");
  std::ofstream(dir / "unknown.json") << R"({"preset": "fig4", "bogus": 1})";
  std::ofstream(dir / "tiny.json")
      << R"({"preset": "fig4", "blocks": 2, "block_length": 2, "snr_db": [10]})";
  EXPECT_EQ(run_cli("ergodic --config " + (dir / "unknown.json").string()), 2);
  EXPECT_EQ(run_cli("ergodic --preset nope"), 2);
  EXPECT_EQ(run_cli("traffic --snr-db 1,2"), 2);
  EXPECT_EQ(run_cli("ergodic --solver magic"), 2);
  EXPECT_EQ(run_cli("ergodic --quiet --solver igs --config " + (dir / "tiny.json").string() +
                    " --out " + (dir / "out").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "out" / "ergodic.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "ergodic.json"));
}
#endif

}  // namespace
}  // namespace beamsched::harness
