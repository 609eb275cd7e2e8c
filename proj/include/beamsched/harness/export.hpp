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

// CSV tables and JSON reports. Numbers are printed with a fixed format so
// that identical runs give byte-identical files.

#ifndef BEAMSCHED_HARNESS_EXPORT_HPP
#define BEAMSCHED_HARNESS_EXPORT_HPP

#include "beamsched/harness/config.hpp"
#include "beamsched/harness/experiments.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamsched::harness {

/// Raised when an output file cannot be written.
class ExportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

struct CsvTable {
  std::vector<std::string> comments;  // written as "# ..." lines
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::ostringstream out;
    for (const auto& c : comments) out << "# " << c << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << r[i];
      out << '\n';
    }
    return out.str();
  }
};

inline CsvTable ergodic_table(const SimConfig& c, const ErgodicResult& r) {
  CsvTable t;
  t.comments = {
      "ergodic experiment '" + c.name + "': M=" + std::to_string(c.antennas) +
          " N_t=" + std::to_string(c.users) + " N_s=" + std::to_string(c.streams) +
          " K=" + std::to_string(c.beams) + " utility=" + c.utility + " service=" + c.service,
      "snr_db: transmit SNR; solver: scheduler; seeds: scenarios averaged; slots: per run",
      "sum_rate: sum of long-run user rates [bit/channel use]",
      "sum_log_rate: sum of log2(rate + pfs_offset)",
      "min_user_rate: smallest long-run user rate [bit/channel use]",
      "unserved_users: users with zero long-run rate (mean over seeds)",
      "mean_iterations: solver iterations per slot (BCU outer loops, else solver-specific)"};
  t.columns = {"snr_db",       "solver",         "seeds",          "slots",
               "sum_rate",     "sum_log_rate",   "min_user_rate",  "unserved_users",
               "mean_iterations"};
  for (const auto& row : r.rows) {
    t.rows.push_back({format_number(row.snr_db), row.solver, std::to_string(row.seeds),
                      std::to_string(row.slots), format_number(row.sum_rate),
                      format_number(row.sum_log_rate), format_number(row.min_user_rate),
                      format_number(row.unserved_users), format_number(row.mean_iterations)});
  }
  return t;
}

inline CsvTable traffic_table(const SimConfig& c, const TrafficResult& r) {
  CsvTable t;
  t.comments = {
      "traffic experiment '" + c.name + "': M=" + std::to_string(c.antennas) +
          " N_t=" + std::to_string(c.users) + " N_s=" + std::to_string(c.streams) +
          " K=" + std::to_string(c.beams) + " snr_db=" + format_number(c.traffic_snr_db) +
          " eta=" + format_number(c.eta),
      "intensity: arrival probability per user and slot; solver: scheduler (iabs uses the "
      "largest queues)",
      "offered_rate / arrival_rate: expected / realized arrivals [bit/channel use]",
      "throughput: served bits per channel use; delivery_ratio: served / arrived",
      "final_backlog: total queued bits after the last slot"};
  t.columns = {"intensity",  "solver",         "slots",         "offered_rate",
               "arrival_rate", "throughput",   "delivery_ratio", "final_backlog"};
  for (const auto& row : r.rows) {
    t.rows.push_back({format_number(row.intensity), row.solver, std::to_string(row.slots),
                      format_number(row.offered_rate), format_number(row.arrival_rate),
                      format_number(row.throughput), format_number(row.delivery_ratio),
                      format_number(row.final_backlog)});
  }
  return t;
}

inline nlohmann::json ergodic_json(const SimConfig& c, const ErgodicResult& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    nlohmann::json j = {{"snr_db", run.snr_db},
                        {"solver", run.solver},
                        {"seed_index", run.seed_index},
                        {"user_rates", run.user_rates},
                        {"mean_iterations", run.mean_iterations}};
    if (!run.queue_sum.empty()) j["queue_sum"] = run.queue_sum;
    runs.push_back(std::move(j));
  }
  return {{"config", config_to_json(c)}, {"runs", runs}};
}

inline nlohmann::json traffic_json(const SimConfig& c, const TrafficResult& r) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    runs.push_back({{"intensity", run.intensity},
                    {"solver", run.solver},
                    {"served_bits", run.served_bits},
                    {"arrived_bits", run.arrived_bits},
                    {"final_backlog", run.final_backlog},
                    {"running_throughput", run.running_throughput},
                    {"backlog", run.backlog}});
  }
  return {{"config", config_to_json(c)}, {"runs", runs}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ExportError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw ExportError("failed writing '" + path.string() + "'");
}

inline void export_results(const CsvTable& table, const nlohmann::json& trajectories,
                           const std::filesystem::path& dir, const std::string& stem) {
  write_text(dir / (stem + ".csv"), table.str());
  write_text(dir / (stem + ".json"), trajectories.dump(2) + "\n");
}

}  // namespace beamsched::harness

#endif  // BEAMSCHED_HARNESS_EXPORT_HPP
