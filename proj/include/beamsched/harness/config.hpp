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

// Simulation configuration: defaults, named presets and strict JSON parsing.
// docs/config.md lists every key.

#ifndef BEAMSCHED_HARNESS_CONFIG_HPP
#define BEAMSCHED_HARNESS_CONFIG_HPP

#include "beamsched/common.hpp"
#include "beamsched/lyapunov.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace beamsched::harness {

/// Raised for malformed or inconsistent configuration.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct SimConfig {
  std::string name = "custom";

  // Array and problem size.
  int antennas = 64;    // M; columns * rows for planar arrays
  int array_rows = 1;   // > 1 selects a planar array
  int users = 25;       // N_t
  int streams = 10;     // N_s
  int beams = 10;       // K

  // Link and fading.
  std::vector<double> snr_db = {0.0, 10.0, 20.0, 30.0};
  double channel_uses = 100.0;  // T per slot
  int block_length = 10;        // slots per fading block
  int blocks = 2;               // fading blocks per run

  // Geometry.
  int paths = 3;
  double los_ratio = 10.0;   // LoS amplitude over each NLoS amplitude
  double path_power = 0.0;   // sum |beta_l|^2; 0 means the path count
  double distance_min = 30.0;
  double distance_max = 200.0;
  double reference_distance = 30.0;
  double pathloss_exponent = 2.0;
  bool identical_pathloss = false;

  // Drift-plus-penalty.
  std::string utility = "sum";  // sum | pfs
  double pfs_offset = 0.0;      // c_n
  double v_scale = 100.0;       // V = v_scale * r_max
  double a_max_scale = 100.0;   // A_max = a_max_scale * r_max

  // Traffic mode.
  std::vector<double> intensities = {0.2, 0.4, 0.6, 0.8, 1.0};
  double eta = 0.4;
  long traffic_slots = 400;
  double traffic_snr_db = 20.0;
  std::vector<double> intensity_profile;  // per-user multipliers on p; empty means 1

  // Runs.
  std::uint64_t seed = 1;
  int seeds = 1;
  std::vector<std::string> solvers = {"bcu", "igs", "iabs"};
  std::string service = "rzf";  // rzf | deterministic
  double fixed_point_tol = 1e-8;
  double iwf_averaging_denominator = 0.0;  // 0 means M
  bool record_trajectories = false;
  int threads = 1;

  int array_columns() const { return antennas / array_rows; }
  double path_power_total() const { return path_power > 0.0 ? path_power : paths; }
  UtilityFunction utility_function() const {
    UtilityFunction u;
    u.kind = utility == "sum" ? UtilityKind::kSumRate : UtilityKind::kProportionalFair;
    u.offsets.assign(users, pfs_offset);
    return u;
  }

  void validate() const {
    auto check = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError("invalid config: " + msg);
    };
    check(antennas >= 1 && users >= 1 && streams >= 1 && beams >= 1, "sizes must be positive");
    check(streams <= beams && beams <= antennas, "need N_s <= K <= M");
    check(streams <= users, "need N_s <= N_t");
    check(array_rows >= 1 && antennas % array_rows == 0, "array_rows must divide antennas");
    check(block_length >= 1 && blocks >= 0, "block_length >= 1 and blocks >= 0");
    check(channel_uses > 0.0, "channel_uses must be positive");
    check(paths >= 1 && los_ratio > 0.0 && path_power >= 0.0, "invalid path settings");
    check(distance_min > 0.0 && distance_max >= distance_min && reference_distance > 0.0,
          "invalid distance range");
    check(utility == "sum" || utility == "pfs", "utility must be sum or pfs");
    check(pfs_offset >= 0.0 && v_scale > 0.0 && a_max_scale > 0.0, "invalid drift settings");
    check(eta > 0.0 && traffic_slots >= 0, "invalid traffic settings");
    for (double p : intensities) check(p >= 0.0 && p <= 1.0, "intensities must lie in [0, 1]");
    check(intensity_profile.empty() || static_cast<int>(intensity_profile.size()) == users,
          "intensity_profile needs one entry per user");
    for (double p : intensity_profile) check(p >= 0.0, "intensity_profile must be non-negative");
    check(threads >= 1, "threads must be at least 1");
    for (double s : snr_db) check(std::isfinite(s), "SNR values must be finite");
    check(seeds >= 1, "seeds must be at least 1");
    check(!solvers.empty(), "at least one solver is required");
    for (const auto& s : solvers) {
      check(s == "bcu" || s == "igs" || s == "exhaustive" || s == "iabs",
            "unknown solver '" + s + "'");
    }
    check(service == "rzf" || service == "deterministic", "service must be rzf or deterministic");
    check(fixed_point_tol > 0.0, "fixed_point_tol must be positive");
    check(iwf_averaging_denominator == 0.0 || iwf_averaging_denominator >= 1.0,
          "iwf_averaging_denominator must be 0 or at least 1");
  }
};

/// Named configurations. Names ending in "-full" run at the original scale
/// and take hours on a single core.
inline SimConfig preset(const std::string& name) {
  SimConfig c;
  c.name = name;
  if (name == "fig2-small") {
    c.antennas = 64;
    c.users = 25;
    c.streams = c.beams = 10;
    c.identical_pathloss = true;
    c.utility = "sum";
    c.snr_db = {10.0, 20.0, 30.0};
    c.blocks = 2;
    c.seeds = 10;
    c.solvers = {"bcu", "igs", "iabs"};
  } else if (name == "fig2-full") {
    c.antennas = 256;
    c.users = 100;
    c.streams = c.beams = 40;
    c.identical_pathloss = true;
    c.utility = "sum";
    c.snr_db = {-10.0, 0.0, 10.0, 20.0, 30.0};
    c.blocks = 1000;
    c.solvers = {"bcu", "igs", "iabs"};
  } else if (name == "fig3-small") {
    c.antennas = 32;
    c.users = 12;
    c.streams = c.beams = 4;
    c.identical_pathloss = false;
    c.utility = "pfs";
    c.snr_db = {20.0};
    // The admission burst of the first slots takes several hundred slots to
    // drain; rates are read after it.
    c.blocks = 100;
    c.solvers = {"bcu", "igs", "iabs"};
  } else if (name == "fig4") {
    c.antennas = 8;
    c.users = 8;
    c.streams = c.beams = 4;
    c.utility = "pfs";
    c.pfs_offset = 1.0;
    c.snr_db = {0.0, 10.0, 20.0, 30.0};
    c.blocks = 50;
    c.solvers = {"bcu", "igs", "exhaustive", "iabs"};
  } else if (name == "traffic-small") {
    c.antennas = 32;
    c.users = 20;
    c.streams = c.beams = 10;
    c.utility = "sum";
    // At 20 dB this system never saturates for p <= 1; at 30 dB the
    // largest-queue baseline saturates between p = 0.5 and p = 0.8.
    c.traffic_snr_db = 30.0;
    c.intensities = {0.1, 0.3, 0.5, 0.6, 0.7, 0.8, 1.0};
    c.traffic_slots = 400;
    c.solvers = {"bcu", "igs", "iabs"};
  } else if (name == "traffic-full") {
    c.antennas = 256;
    c.users = 100;
    c.streams = c.beams = 40;
    c.utility = "sum";
    c.intensities = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    c.traffic_slots = 1000;
    c.solvers = {"bcu", "igs", "iabs"};
  } else if (name == "validation") {
    c.antennas = 8;
    c.users = 8;
    c.streams = c.beams = 4;
    c.utility = "pfs";
    c.pfs_offset = 1.0;
    c.snr_db = {20.0};
    // The queue-stability check needs a long horizon to drain the initial
    // admission burst.
    c.blocks = 500;
    c.solvers = {"bcu", "igs", "exhaustive", "iabs"};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return c;
}

inline std::vector<std::string> preset_names() {
  return {"fig2-small", "fig2-full", "fig3-small", "fig4",
          "traffic-small", "traffic-full", "validation"};
}

namespace detail {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace detail

/// Applies the keys of `j` on top of `base`. A "preset" key selects the
/// base configuration first. Unknown keys are rejected.
inline SimConfig config_from_json(const nlohmann::json& j, SimConfig base = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "preset", "name", "antennas", "array_rows", "users", "streams", "beams", "snr_db",
      "channel_uses", "block_length", "blocks", "paths", "los_ratio", "path_power",
      "distance_min", "distance_max", "reference_distance", "pathloss_exponent",
      "identical_pathloss", "utility", "pfs_offset", "v_scale", "a_max_scale",
      "intensities", "intensity_profile", "eta", "traffic_slots", "traffic_snr_db", "seed",
      "seeds", "solvers", "service", "fixed_point_tol", "iwf_averaging_denominator",
      "record_trajectories", "threads"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  SimConfig c = base;
  if (j.contains("preset")) {
    std::string name;
    detail::read_key(j, "preset", name);
    c = preset(name);
  }
  using detail::read_key;
  read_key(j, "name", c.name);
  read_key(j, "antennas", c.antennas);
  read_key(j, "array_rows", c.array_rows);
  read_key(j, "users", c.users);
  read_key(j, "streams", c.streams);
  read_key(j, "beams", c.beams);
  read_key(j, "snr_db", c.snr_db);
  read_key(j, "channel_uses", c.channel_uses);
  read_key(j, "block_length", c.block_length);
  read_key(j, "blocks", c.blocks);
  read_key(j, "paths", c.paths);
  read_key(j, "los_ratio", c.los_ratio);
  read_key(j, "path_power", c.path_power);
  read_key(j, "distance_min", c.distance_min);
  read_key(j, "distance_max", c.distance_max);
  read_key(j, "reference_distance", c.reference_distance);
  read_key(j, "pathloss_exponent", c.pathloss_exponent);
  read_key(j, "identical_pathloss", c.identical_pathloss);
  read_key(j, "utility", c.utility);
  read_key(j, "pfs_offset", c.pfs_offset);
  read_key(j, "v_scale", c.v_scale);
  read_key(j, "a_max_scale", c.a_max_scale);
  read_key(j, "intensities", c.intensities);
  read_key(j, "intensity_profile", c.intensity_profile);
  read_key(j, "eta", c.eta);
  read_key(j, "traffic_slots", c.traffic_slots);
  read_key(j, "traffic_snr_db", c.traffic_snr_db);
  read_key(j, "seed", c.seed);
  read_key(j, "seeds", c.seeds);
  read_key(j, "solvers", c.solvers);
  read_key(j, "service", c.service);
  read_key(j, "fixed_point_tol", c.fixed_point_tol);
  read_key(j, "iwf_averaging_denominator", c.iwf_averaging_denominator);
  read_key(j, "record_trajectories", c.record_trajectories);
  read_key(j, "threads", c.threads);
  c.validate();
  return c;
}

inline SimConfig load_config(const std::string& path, SimConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::move(base));
}

inline nlohmann::json config_to_json(const SimConfig& c) {
  return {{"name", c.name},
          {"antennas", c.antennas},
          {"array_rows", c.array_rows},
          {"users", c.users},
          {"streams", c.streams},
          {"beams", c.beams},
          {"snr_db", c.snr_db},
          {"channel_uses", c.channel_uses},
          {"block_length", c.block_length},
          {"blocks", c.blocks},
          {"paths", c.paths},
          {"los_ratio", c.los_ratio},
          {"path_power", c.path_power},
          {"distance_min", c.distance_min},
          {"distance_max", c.distance_max},
          {"reference_distance", c.reference_distance},
          {"pathloss_exponent", c.pathloss_exponent},
          {"identical_pathloss", c.identical_pathloss},
          {"utility", c.utility},
          {"pfs_offset", c.pfs_offset},
          {"v_scale", c.v_scale},
          {"a_max_scale", c.a_max_scale},
          {"intensities", c.intensities},
          {"intensity_profile", c.intensity_profile},
          {"eta", c.eta},
          {"traffic_slots", c.traffic_slots},
          {"traffic_snr_db", c.traffic_snr_db},
          {"seed", c.seed},
          {"seeds", c.seeds},
          {"solvers", c.solvers},
          {"service", c.service},
          {"fixed_point_tol", c.fixed_point_tol},
          {"iwf_averaging_denominator", c.iwf_averaging_denominator},
          {"record_trajectories", c.record_trajectories},
          {"threads", c.threads}};
}

/// Parses "a,b,c" into numbers.
inline std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty number list");
  return out;
}

}  // namespace beamsched::harness

#endif  // BEAMSCHED_HARNESS_CONFIG_HPP
