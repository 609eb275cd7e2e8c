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

// Ergodic (virtual-queue) and traffic (actual-queue) experiment drivers.
// Service is realized RZF on block-fading channels by default.

#ifndef BEAMSCHED_HARNESS_EXPERIMENTS_HPP
#define BEAMSCHED_HARNESS_EXPERIMENTS_HPP

#include "beamsched/harness/config.hpp"
#include "beamsched/harness/scenario.hpp"
#include "beamsched/lyapunov.hpp"
#include "beamsched/rates.hpp"
#include "beamsched/selection.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace beamsched::harness {

using Logger = std::function<void(const std::string&)>;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Runs fn(0..count-1) on up to `threads` workers. Results must be written
/// to per-index slots; the first exception is rethrown.
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  if (threads <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  const int workers = std::min(threads, count);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

enum class BaselineUsers { kStrongest, kLargestQueue };

/// One scheduling decision with the configured solver. All-zero queues are
/// replaced by unit weights, since any schedule is then optimal.
inline ScheduleDecision schedule_slot(const std::string& solver, std::span<const double> queues,
                                      const CorrelationSet& csi, double budget,
                                      const SimConfig& c, BaselineUsers baseline) {
  std::vector<double> q(queues.begin(), queues.end());
  if (std::all_of(q.begin(), q.end(), [](double x) { return x == 0.0; })) {
    std::fill(q.begin(), q.end(), 1.0);
  }
  FixedPointOptions fp;
  fp.tol = c.fixed_point_tol;
  if (solver == "bcu") {
    BcuOptions o;
    o.channel_uses = c.channel_uses;
    o.averaging_denominator = c.iwf_averaging_denominator;
    o.fixed_point = fp;
    return bcu_schedule(q, csi, budget, c.beams, c.streams, o);
  }
  if (solver == "igs") {
    require(c.beams == c.streams, "the greedy solver needs K = N_s");
    GreedyOptions o;
    o.channel_uses = c.channel_uses;
    o.fixed_point = fp;
    return igs_schedule(q, csi, budget, c.streams, o);
  }
  if (solver == "exhaustive") {
    ExhaustiveOptions o;
    o.channel_uses = c.channel_uses;
    o.fixed_point = fp;
    return exhaustive_schedule(q, csi, budget, c.streams, c.beams, o);
  }
  if (solver == "iabs") {
    std::optional<std::vector<int>> users;
    if (baseline == BaselineUsers::kLargestQueue) users = largest_queue_users(queues, c.streams);
    return iabs_baseline(q, csi, budget, c.streams, c.beams, c.channel_uses, users, fp);
  }
  throw InvalidArgument("unknown solver '" + solver + "'");
}

/// Bits per slot for each user under RZF with equal per-stream power
/// `power / N_s` and regularization N_s / power. `channels` holds B^H h_n.
inline std::vector<double> rzf_service(std::span<const CVector> channels,
                                       const ScheduleDecision& d, double power,
                                       double channel_uses, int antennas) {
  std::vector<double> bits(channels.size(), 0.0);
  const int ns = static_cast<int>(d.users.size());
  if (ns == 0) return bits;
  const int k = static_cast<int>(d.beams.size());
  CMatrix h(ns, k);
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < k; ++j) h(i, j) = std::conj(channels[d.users[i]](d.beams[j]));
  }
  const RzfPrecoder pre = rzf_precoder(h, ns / power, power, antennas);
  const std::vector<double> w(ns, power / ns);
  const RVector r = rzf_user_rates(h, pre.matrix, w);
  for (int i = 0; i < ns; ++i) bits[d.users[i]] = channel_uses * r(i);
  return bits;
}

/// Bits per slot from the deterministic equivalent of the decision.
inline std::vector<double> deterministic_service(const CorrelationSet& csi,
                                                 const ScheduleDecision& d,
                                                 const SimConfig& c) {
  std::vector<double> bits(csi.users(), 0.0);
  if (d.users.empty()) return bits;
  FixedPointOptions fp;
  fp.tol = c.fixed_point_tol;
  const BeamMask mask = BeamMask::from_indices(csi.antennas(), d.beams);
  const WeightedRateModel model(csi.beam_factors, d.users,
                                std::vector<double>(d.users.size(), 1.0), mask.b,
                                csi.antennas(), c.channel_uses, fp);
  const auto ev = model.evaluate(d.powers);
  for (std::size_t i = 0; i < d.users.size(); ++i) {
    bits[d.users[i]] = c.channel_uses * log2_1p(d.powers[i] * ev.gains[i]);
  }
  return bits;
}

/// Serves decisions slot by slot, redrawing path phases every
/// `block_length` slots.
class BlockFadingService {
 public:
  BlockFadingService(const Scenario& s, const SimConfig& c, double power, std::uint64_t seed)
      : s_(s), c_(c), power_(power), seed_(seed) {}

  std::vector<double> operator()(long slot, const ScheduleDecision& d) {
    if (c_.service == "deterministic") return deterministic_service(s_.csi, d, c_);
    const long block = slot / c_.block_length;
    if (block != block_) {
      channels_ = beam_channels(s_, seed_, block);
      block_ = block;
    }
    return rzf_service(channels_, d, power_, c_.channel_uses, s_.antennas());
  }

 private:
  const Scenario& s_;
  const SimConfig& c_;
  double power_;
  std::uint64_t seed_;
  long block_ = -1;
  std::vector<CVector> channels_;
};

inline std::uint64_t run_seed(const SimConfig& c, int index) {
  return derive_seed(c.seed, static_cast<std::uint64_t>(index));
}

// ---------------------------------------------------------------------------
// Ergodic experiment.

struct ErgodicRow {
  double snr_db = 0.0;
  std::string solver;
  int seeds = 0;
  long slots = 0;
  double sum_rate = 0.0;       // bits per channel use
  double sum_log_rate = 0.0;   // sum log2(r_n + c_n)
  double min_user_rate = 0.0;
  double unserved_users = 0.0;  // users with zero long-run rate, mean over seeds
  double mean_iterations = 0.0;
};

struct ErgodicRun {
  double snr_db = 0.0;
  std::string solver;
  int seed_index = 0;
  std::vector<double> user_rates;
  double mean_iterations = 0.0;
  std::vector<double> queue_sum;  // per slot, when recording
};

struct ErgodicResult {
  std::vector<ErgodicRow> rows;  // SNR-major, solvers in config order
  std::vector<ErgodicRun> runs;
};

/// One drift-scheduler run of one solver on one scenario.
inline ErgodicRun run_ergodic_once(const SimConfig& c, const Scenario& s, const std::string& solver,
                                   double snr_db, std::uint64_t seed) {
  const double power = db_to_linear(snr_db);
  const double r_max = max_rate_per_slot(s.traces(), power, c.channel_uses);
  DriftParams params;
  params.v = c.v_scale * r_max;
  params.a_max = c.a_max_scale * r_max;
  params.channel_uses = c.channel_uses;
  const UtilityFunction utility = c.utility_function();
  const long slots = static_cast<long>(c.blocks) * c.block_length;
  long decisions = 0, iterations = 0;
  auto policy = [&](const QueueState& st) {
    ScheduleDecision d = schedule_slot(solver, st.q, s.csi, power, c, BaselineUsers::kStrongest);
    ++decisions;
    iterations += d.iterations;
    return d;
  };
  BlockFadingService service(s, c, power, seed);
  const QueueRun run = run_drift_scheduler(c.users, slots, utility, params, policy, service,
                                           c.record_trajectories);
  ErgodicRun out;
  out.snr_db = snr_db;
  out.solver = solver;
  out.user_rates = slots > 0 ? run.mean_rates(c.channel_uses) : std::vector<double>(c.users, 0.0);
  out.mean_iterations = decisions > 0 ? static_cast<double>(iterations) / decisions : 0.0;
  for (const auto& r : run.trajectory) {
    double total = 0.0;
    for (double q : r.queues) total += q;
    out.queue_sum.push_back(total);
  }
  return out;
}

inline ErgodicResult run_ergodic_experiment(const SimConfig& c, const Logger& log = {}) {
  c.validate();
  const int nsnr = static_cast<int>(c.snr_db.size());
  const int nsolv = static_cast<int>(c.solvers.size());
  const int tasks = nsnr * c.seeds;
  std::vector<std::vector<ErgodicRun>> per_task(tasks);
  parallel_for(tasks, c.threads, [&](int task) {
    const int si = task / c.seeds;
    const int seed_index = task % c.seeds;
    const std::uint64_t seed = run_seed(c, seed_index);
    const Scenario s = generate_scenario(c, seed);
    for (const auto& solver : c.solvers) {
      try {
        ErgodicRun r = run_ergodic_once(c, s, solver, c.snr_db[si], seed);
        r.seed_index = seed_index;
        per_task[task].push_back(std::move(r));
      } catch (const std::exception& e) {
        throw std::runtime_error("solver " + solver + ", SNR " + std::to_string(c.snr_db[si]) +
                                 " dB, seed " + std::to_string(seed_index) + ": " + e.what());
      }
      if (log) {
        log("ergodic snr=" + std::to_string(c.snr_db[si]) + " seed=" +
            std::to_string(seed_index) + " solver=" + solver + " done");
      }
    }
  });

  ErgodicResult out;
  const long slots = static_cast<long>(c.blocks) * c.block_length;
  const UtilityFunction utility = c.utility_function();
  for (int si = 0; si < nsnr; ++si) {
    for (int k = 0; k < nsolv; ++k) {
      ErgodicRow row;
      row.snr_db = c.snr_db[si];
      row.solver = c.solvers[k];
      row.seeds = c.seeds;
      row.slots = slots;
      double min_rate = 0.0;
      for (int sd = 0; sd < c.seeds; ++sd) {
        const ErgodicRun& r = per_task[si * c.seeds + sd][k];
        double sum = 0.0, lo = std::numeric_limits<double>::infinity();
        int zero = 0;
        for (double x : r.user_rates) {
          sum += x;
          lo = std::min(lo, x);
          if (x <= 0.0) ++zero;
        }
        UtilityFunction pfs = utility;
        pfs.kind = UtilityKind::kProportionalFair;
        row.sum_rate += sum;
        row.sum_log_rate += pfs.value(r.user_rates);
        min_rate += lo;
        row.unserved_users += zero;
        row.mean_iterations += r.mean_iterations;
        out.runs.push_back(r);
      }
      row.sum_rate /= c.seeds;
      row.sum_log_rate /= c.seeds;
      row.min_user_rate = min_rate / c.seeds;
      row.unserved_users /= c.seeds;
      row.mean_iterations /= c.seeds;
      out.rows.push_back(row);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Traffic experiment.

/// Per-user arrival constant r_c = (N_s / N_t) log2(1 + eta rho / N_s), in
/// bits per channel use.
inline double traffic_rate_constant(const SimConfig& c, double power) {
  return static_cast<double>(c.streams) / c.users * log2_1p(c.eta * power / c.streams);
}

struct TrafficRow {
  double intensity = 0.0;
  std::string solver;
  long slots = 0;
  double offered_rate = 0.0;   // expected arrivals, bits per channel use
  double arrival_rate = 0.0;   // realized arrivals
  double throughput = 0.0;     // served bits per channel use
  double delivery_ratio = 0.0; // throughput / arrival_rate
  double final_backlog = 0.0;  // bits, summed over users
};

struct TrafficRun {
  double intensity = 0.0;
  std::string solver;
  std::vector<double> running_throughput;  // per slot, bits per channel use
  std::vector<double> backlog;             // per slot, at the start of the slot
  double served_bits = 0.0;
  double arrived_bits = 0.0;
  double final_backlog = 0.0;
};

struct TrafficResult {
  std::vector<TrafficRow> rows;  // intensity-major, solvers in config order
  std::vector<TrafficRun> runs;
};

inline TrafficRun run_traffic_once(const SimConfig& c, const Scenario& s, const std::string& solver,
                                   double intensity, std::uint64_t seed) {
  const double power = db_to_linear(c.traffic_snr_db);
  const double packet = traffic_rate_constant(c, power) * c.channel_uses;
  std::vector<double> p(c.users, intensity);
  for (std::size_t n = 0; n < c.intensity_profile.size(); ++n) {
    p[n] = std::min(1.0, intensity * c.intensity_profile[n]);
  }
  // The arrival stream draws one variate per user per slot in a fixed
  // order, so every solver sees the same arrivals.
  std::mt19937_64 rng(derive_seed(seed, kArrivalStream,
                                  static_cast<std::uint64_t>(std::llround(intensity * 1e6))));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto arrivals = [&](const QueueState&) {
    std::vector<double> a(c.users, 0.0);
    for (int n = 0; n < c.users; ++n) a[n] = unit(rng) < p[n] ? packet : 0.0;
    return a;
  };
  auto policy = [&](const QueueState& st) {
    return schedule_slot(solver, st.q, s.csi, power, c, BaselineUsers::kLargestQueue);
  };
  BlockFadingService service(s, c, power, seed);
  const QueueRun run = run_queue_loop(c.users, c.traffic_slots, arrivals, policy, service, true);
  TrafficRun out;
  out.intensity = intensity;
  out.solver = solver;
  double cumulative = 0.0;
  for (const auto& r : run.trajectory) {
    double backlog = 0.0;
    for (double q : r.queues) backlog += q;
    for (double x : r.served) cumulative += x;
    out.backlog.push_back(backlog);
    out.running_throughput.push_back(cumulative / ((r.slot + 1) * c.channel_uses));
  }
  for (int n = 0; n < c.users; ++n) {
    out.served_bits += run.total_served[n];
    out.arrived_bits += run.total_arrivals[n];
    out.final_backlog += run.final_queues[n];
  }
  return out;
}

inline TrafficResult run_traffic_experiment(const SimConfig& c, const Logger& log = {}) {
  c.validate();
  const std::uint64_t seed = run_seed(c, 0);
  const Scenario s = generate_scenario(c, seed);
  const double power = db_to_linear(c.traffic_snr_db);
  const double rc = traffic_rate_constant(c, power);
  const int npts = static_cast<int>(c.intensities.size());
  const int nsolv = static_cast<int>(c.solvers.size());
  std::vector<TrafficRun> runs(npts * nsolv);
  parallel_for(npts * nsolv, c.threads, [&](int task) {
    const double p = c.intensities[task / nsolv];
    const std::string& solver = c.solvers[task % nsolv];
    try {
      runs[task] = run_traffic_once(c, s, solver, p, seed);
    } catch (const std::exception& e) {
      throw std::runtime_error("solver " + solver + ", intensity " + std::to_string(p) + ": " +
                               e.what());
    }
    if (log) log("traffic intensity=" + std::to_string(p) + " solver=" + solver + " done");
  });
  TrafficResult out;
  const double denom = static_cast<double>(c.traffic_slots) * c.channel_uses;
  for (int i = 0; i < npts * nsolv; ++i) {
    const TrafficRun& r = runs[i];
    TrafficRow row;
    row.intensity = r.intensity;
    row.solver = r.solver;
    row.slots = c.traffic_slots;
    double offered = 0.0;
    for (int n = 0; n < c.users; ++n) {
      const double scale = c.intensity_profile.empty() ? 1.0 : c.intensity_profile[n];
      offered += std::min(1.0, r.intensity * scale) * rc;
    }
    row.offered_rate = offered;
    row.arrival_rate = denom > 0.0 ? r.arrived_bits / denom : 0.0;
    row.throughput = denom > 0.0 ? r.served_bits / denom : 0.0;
    row.delivery_ratio = r.arrived_bits > 0.0 ? r.served_bits / r.arrived_bits : 1.0;
    row.final_backlog = r.final_backlog;
    out.rows.push_back(row);
  }
  out.runs = std::move(runs);
  return out;
}

}  // namespace beamsched::harness

#endif  // BEAMSCHED_HARNESS_EXPERIMENTS_HPP
