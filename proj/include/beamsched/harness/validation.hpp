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

// Small-scale self-checks: fixed point against Monte Carlo, greedy against
// exhaustive search, BCU monotonicity, water-filling KKT and queue
// stability. Each check reports its measured margin.

#ifndef BEAMSCHED_HARNESS_VALIDATION_HPP
#define BEAMSCHED_HARNESS_VALIDATION_HPP

#include "beamsched/harness/config.hpp"
#include "beamsched/harness/experiments.hpp"
#include "beamsched/harness/scenario.hpp"
#include "beamsched/rates.hpp"
#include "beamsched/selection.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace beamsched::harness {

// ---------------------------------------------------------------------------
// Random scheduling instances.

struct Instance {
  CorrelationSet csi;
  std::vector<double> queues;
  double power = 1.0;
  double snr_db = 0.0;
};

/// Scenarios drawn from `c` with queues uniform in [0.5, 1.5]; the SNR
/// cycles through `c.snr_db`.
inline std::vector<Instance> random_instances(const SimConfig& c, int count, std::uint64_t seed) {
  std::vector<Instance> out;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = derive_seed(seed, kQueueStream, static_cast<std::uint64_t>(i));
    Instance inst;
    inst.csi = generate_scenario(c, s).csi;
    std::mt19937_64 rng(derive_seed(s, kQueueStream));
    std::uniform_real_distribution<double> q(0.5, 1.5);
    for (int n = 0; n < c.users; ++n) inst.queues.push_back(q(rng));
    inst.snr_db = c.snr_db[static_cast<std::size_t>(i) % c.snr_db.size()];
    inst.power = db_to_linear(inst.snr_db);
    out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic equivalent against Monte Carlo.

struct DeAccuracyPoint {
  int antennas = 0;
  int streams = 0;
  int beams = 0;
  int scenarios = 0;
  long draws = 0;
  double relative_error = 0.0;              // mean over scenarios
  double relative_error_per_antenna = 0.0;  // same, 1/M interference scaling
  double max_relative_error = 0.0;
};

/// For each M: L = M/4 equal-power paths, N_s = M/4 users, K = M/2 beams
/// chosen by the baseline beam rule, equal power P / N_s.
inline DeAccuracyPoint de_accuracy_point(int antennas, int scenarios, long draws,
                                         std::uint64_t seed, double power = 10.0) {
  require(antennas >= 4 && antennas % 4 == 0, "accuracy study needs M divisible by 4");
  DeAccuracyPoint pt;
  pt.antennas = antennas;
  pt.streams = antennas / 4;
  pt.beams = antennas / 2;
  pt.scenarios = scenarios;
  pt.draws = draws;
  SimConfig c;
  c.antennas = antennas;
  c.users = pt.streams;
  c.streams = pt.streams;
  c.beams = pt.beams;
  c.paths = antennas / 4;
  c.los_ratio = 1.0;
  c.identical_pathloss = true;
  for (int sc = 0; sc < scenarios; ++sc) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(antennas),
                                        static_cast<std::uint64_t>(sc));
    const Scenario scen = generate_scenario(c, s);
    std::mt19937_64 rng(derive_seed(s, kFadingStream));
    std::uniform_real_distribution<double> qd(0.5, 1.5);
    std::vector<double> q(c.users);
    for (double& x : q) x = qd(rng);
    std::vector<int> users(c.users);
    for (int n = 0; n < c.users; ++n) users[n] = n;
    const std::vector<int> beams = iabs_beams(scen.csi, users, c.beams);
    const BeamMask mask = BeamMask::from_indices(antennas, beams);
    const std::vector<double> w(c.users, power / c.streams);

    FixedPointOptions weighted, per_antenna;
    per_antenna.scaling = InterferenceScaling::kPerAntenna;
    const double de = deterministic_weighted_rate(q, scen.csi, users, mask, w, 1.0, weighted);
    const double de_pa =
        deterministic_weighted_rate(q, scen.csi, users, mask, w, 1.0, per_antenna);

    // Beam-domain channels on the selected beams are F_n phi with uniform
    // path phases phi.
    const std::vector<int> order = decoding_order(q, users);
    std::vector<double> qo, wo;
    std::vector<CMatrix> rows;
    for (int u : order) {
      qo.push_back(q[u]);
      wo.push_back(w[u]);
      CMatrix f(c.beams, scen.csi.beam_factors[u].cols());
      for (int k = 0; k < c.beams; ++k) f.row(k) = scen.csi.beam_factors[u].row(beams[k]);
      rows.push_back(std::move(f));
    }
    std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
    CMatrix g(c.beams, c.users);
    double mc = 0.0;
    for (long d = 0; d < draws; ++d) {
      for (int i = 0; i < c.users; ++i) {
        CVector phi(rows[i].cols());
        for (Eigen::Index l = 0; l < phi.size(); ++l) {
          const double t = phase(rng);
          phi(l) = Complex(std::cos(t), std::sin(t));
        }
        g.col(i) = rows[i] * phi;
      }
      mc += sic_weighted_rate_logdet(qo, g, wo);
    }
    mc /= static_cast<double>(draws);
    const double err = std::abs(de - mc) / mc;
    pt.relative_error += err;
    pt.relative_error_per_antenna += std::abs(de_pa - mc) / mc;
    pt.max_relative_error = std::max(pt.max_relative_error, err);
  }
  pt.relative_error /= scenarios;
  pt.relative_error_per_antenna /= scenarios;
  return pt;
}

inline std::vector<DeAccuracyPoint> de_accuracy_study(std::span<const int> sizes, int scenarios,
                                                      long draws, std::uint64_t seed,
                                                      int threads = 1) {
  std::vector<DeAccuracyPoint> out(sizes.size());
  parallel_for(static_cast<int>(sizes.size()), threads, [&](int i) {
    out[i] = de_accuracy_point(sizes[i], scenarios, draws, seed);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Water-filling KKT.

struct KktResult {
  double max_marginal_spread = 0.0;  // among active users, relative
  double max_inactive_excess = 0.0;  // inactive marginal above the level
  double max_budget_error = 0.0;
};

/// Marginal utility q b / (1 + gamma b) must be equal on active users and
/// no larger for inactive ones.
inline void kkt_accumulate(std::span<const double> q, std::span<const double> beta,
                           const RVector& gamma, double budget, KktResult& r) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (gamma(i) > 0.0) {
      const double m = q[i] * beta[i] / (1.0 + gamma(i) * beta[i]);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
  }
  if (hi > 0.0) {
    r.max_marginal_spread = std::max(r.max_marginal_spread, (hi - lo) / hi);
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (gamma(i) == 0.0) {
        r.max_inactive_excess = std::max(r.max_inactive_excess, (q[i] * beta[i] - lo) / lo);
      }
    }
  }
  r.max_budget_error = std::max(r.max_budget_error, std::abs(gamma.sum() - budget) / budget);
}

inline KktResult water_filling_kkt_study(int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size(1, 12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  KktResult r;
  for (int t = 0; t < instances; ++t) {
    const int n = size(rng);
    std::vector<double> q(n), beta(n);
    for (int i = 0; i < n; ++i) {
      q[i] = 0.1 + 2.0 * unit(rng);
      beta[i] = std::pow(10.0, 3.0 * unit(rng) - 1.5);
    }
    const double budget = std::pow(10.0, 3.0 * unit(rng) - 1.0);
    kkt_accumulate(q, beta, weighted_water_filling(q, beta, budget), budget, r);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Solver comparison on small instances.

struct SolverComparison {
  std::vector<double> exhaustive, igs, bcu;
  std::vector<double> greedy_margin;  // igs - (1 - 1/e) exhaustive
  std::vector<int> bcu_outer;
  int bcu_monotone = 0;  // instances with a non-decreasing relaxed trace
  double worst_trace_drop = 0.0;
};

inline bool trace_monotone(const std::vector<double>& trace, double slack, double* drop = nullptr) {
  bool ok = true;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const double d = trace[i - 1] - trace[i];
    if (drop != nullptr) *drop = std::max(*drop, d);
    if (d > slack * std::max(1.0, std::abs(trace[i - 1]))) ok = false;
  }
  return ok;
}

inline SolverComparison compare_solvers(const SimConfig& c, const std::vector<Instance>& insts,
                                        int threads = 1) {
  const int count = static_cast<int>(insts.size());
  SolverComparison out;
  out.exhaustive.resize(count);
  out.igs.resize(count);
  out.bcu.resize(count);
  out.greedy_margin.resize(count);
  out.bcu_outer.resize(count);
  std::vector<std::vector<double>> traces(count);
  FixedPointOptions fp;
  fp.tol = c.fixed_point_tol;
  parallel_for(count, threads, [&](int i) {
    const Instance& in = insts[i];
    ExhaustiveOptions eo;
    eo.fixed_point = fp;
    GreedyOptions go;
    go.fixed_point = fp;
    BcuOptions bo;
    bo.fixed_point = fp;
    bo.averaging_denominator = c.iwf_averaging_denominator;
    out.exhaustive[i] =
        exhaustive_schedule(in.queues, in.csi, in.power, c.streams, c.beams, eo).objective;
    out.igs[i] = igs_schedule(in.queues, in.csi, in.power, c.streams, go).objective;
    const ScheduleDecision b = bcu_schedule(in.queues, in.csi, in.power, c.beams, c.streams, bo);
    out.bcu[i] = b.objective;
    out.bcu_outer[i] = b.iterations;
    traces[i] = b.trace;
    out.greedy_margin[i] = out.igs[i] - (1.0 - std::exp(-1.0)) * out.exhaustive[i];
  });
  for (const auto& t : traces) {
    if (trace_monotone(t, 1e-9, &out.worst_trace_drop)) ++out.bcu_monotone;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report.

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<Check> checks;
  nlohmann::json details = nlohmann::json::object();

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["passed"] = passed();
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks) {
      j["checks"].push_back({{"name", c.name},
                             {"passed", c.passed},
                             {"value", c.value},
                             {"threshold", c.threshold},
                             {"detail", c.detail}});
    }
    j["details"] = details;
    return j;
  }
};

struct ValidationOptions {
  int instances = 12;
  int de_scenarios = 20;
  long de_draws = 2000;
  int kkt_instances = 200;
};

/// Runs the self-check suite on the (small) configuration `c`.
inline ValidationReport validate(const SimConfig& c, const ValidationOptions& o = {},
                                 const Logger& log = {}) {
  c.validate();
  if (c.antennas > 16 || c.users > 12 || c.beams > 8) {
    throw ConfigError("validate needs a small configuration (M <= 16, N_t <= 12, K <= 8)");
  }
  ValidationReport rep;
  auto add = [&](Check ch) {
    if (log) log(std::string(ch.passed ? "PASS " : "FAIL ") + ch.name + ": " + ch.detail);
    rep.checks.push_back(std::move(ch));
  };
  char buf[256];

  // Water-filling.
  {
    const KktResult k = water_filling_kkt_study(o.kkt_instances, derive_seed(c.seed, 11));
    const double worst = std::max({k.max_marginal_spread, k.max_inactive_excess,
                                   k.max_budget_error});
    std::snprintf(buf, sizeof buf, "spread %.3g, inactive excess %.3g, budget error %.3g",
                  k.max_marginal_spread, k.max_inactive_excess, k.max_budget_error);
    add({"water_filling_kkt", worst <= 1e-6, worst, 1e-6, buf});
  }

  // Fixed point: residuals, uniqueness from several starts and agreement
  // between the Gram engine and the dense reference.
  {
    const std::vector<Instance> insts = random_instances(c, 3, derive_seed(c.seed, 12));
    double worst_res = 0.0, worst_spread = 0.0, worst_gap = 0.0;
    FixedPointOptions fp;
    fp.tol = c.fixed_point_tol;
    for (const auto& in : insts) {
      std::vector<int> users(c.users);
      for (int n = 0; n < c.users; ++n) users[n] = n;
      std::vector<int> beams(c.beams);
      for (int k = 0; k < c.beams; ++k) beams[k] = k;
      const BeamMask mask = BeamMask::from_indices(c.antennas, beams);
      std::vector<MaskedCorrelation> terms;
      for (int n = 0; n < c.users; ++n) {
        terms.push_back({mask.b.asDiagonal() * in.csi.beam[n] * mask.b.asDiagonal(),
                         in.power / c.users});
      }
      const auto ref = solve_fixed_point(terms, c.antennas, fp);
      worst_res = std::max(worst_res, ref.residual);
      for (double start : {0.1, 1.0, 10.0 * c.antennas}) {
        const RVector init = RVector::Constant(c.users, start);
        const auto alt = solve_fixed_point(terms, c.antennas, fp, &init);
        worst_res = std::max(worst_res, alt.residual);
        worst_spread = std::max(worst_spread, ((alt.e - ref.e).cwiseAbs().maxCoeff()) /
                                                  std::max(1.0, ref.e.cwiseAbs().maxCoeff()));
      }
      const MaskedGram gram(in.csi.beam_factors, users, mask.b);
      std::vector<int> idx(c.users);
      for (int n = 0; n < c.users; ++n) idx[n] = n;
      const std::vector<double> w(c.users, in.power / c.users);
      const PositionState st = solve_position(gram, idx, w, c.antennas, fp, nullptr);
      worst_res = std::max(worst_res, st.residual);
      worst_gap = std::max(worst_gap, (st.e - ref.e).cwiseAbs().maxCoeff() /
                                          std::max(1.0, ref.e.cwiseAbs().maxCoeff()));
    }
    std::snprintf(buf, sizeof buf, "max residual %.3g, start spread %.3g, engine gap %.3g",
                  worst_res, worst_spread, worst_gap);
    const double worst = std::max({worst_spread, worst_gap});
    add({"fixed_point", worst_res <= c.fixed_point_tol && worst <= 1e-6, worst, 1e-6, buf});
  }

  // Deterministic equivalent against Monte Carlo.
  {
    // The full 8 / 32 / 128 study runs in the acceptance suite; the quick
    // check stops at 32 antennas. At this draw count the Monte-Carlo noise is
    // comparable to the differences between sizes, so the trend is reported
    // but only the accuracy bound is checked.
    const std::vector<int> sizes = {8, 16, 32};
    const auto pts = de_accuracy_study(sizes, o.de_scenarios, o.de_draws,
                                       derive_seed(c.seed, 13), c.threads);
    nlohmann::json arr = nlohmann::json::array();
    bool trend = true;
    double worst = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      worst = std::max(worst, pts[i].relative_error);
      arr.push_back({{"antennas", pts[i].antennas},
                     {"relative_error", pts[i].relative_error},
                     {"relative_error_per_antenna_scaling", pts[i].relative_error_per_antenna},
                     {"max_relative_error", pts[i].max_relative_error},
                     {"scenarios", pts[i].scenarios},
                     {"draws", pts[i].draws}});
      if (i > 0 && pts[i].relative_error > pts[i - 1].relative_error) trend = false;
    }
    rep.details["de_relative_error"] = arr;
    rep.details["de_error_non_increasing"] = trend;
    std::snprintf(buf, sizeof buf, "relative error %.4f / %.4f / %.4f at M = 8 / 16 / 32%s",
                  pts[0].relative_error, pts[1].relative_error, pts[2].relative_error,
                  trend ? "" : " (not monotone at this draw count)");
    add({"deterministic_equivalent", worst <= 0.10, worst, 0.10, buf});
  }

  // Solvers.
  {
    const std::vector<Instance> insts = random_instances(c, o.instances, derive_seed(c.seed, 14));
    const SolverComparison cmp = compare_solvers(c, insts, c.threads);
    nlohmann::json arr = nlohmann::json::array();
    double worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < insts.size(); ++i) {
      arr.push_back({{"snr_db", insts[i].snr_db},
                     {"exhaustive", cmp.exhaustive[i]},
                     {"igs", cmp.igs[i]},
                     {"bcu", cmp.bcu[i]},
                     {"greedy_margin", cmp.greedy_margin[i]},
                     {"bcu_outer_iterations", cmp.bcu_outer[i]}});
      worst_margin = std::min(worst_margin, cmp.greedy_margin[i]);
    }
    rep.details["instances"] = arr;
    std::snprintf(buf, sizeof buf, "smallest igs - (1-1/e) exhaustive margin %.4g",
                  worst_margin);
    add({"greedy_bound", worst_margin >= 0.0, worst_margin, 0.0, buf});
    std::snprintf(buf, sizeof buf, "%d of %zu relaxed traces non-decreasing, worst drop %.3g",
                  cmp.bcu_monotone, insts.size(), cmp.worst_trace_drop);
    add({"bcu_monotone", cmp.bcu_monotone == static_cast<int>(insts.size()),
         static_cast<double>(cmp.bcu_monotone), static_cast<double>(insts.size()), buf});
  }

  // SIC rate: determinant and SINR forms.
  {
    std::mt19937_64 rng(derive_seed(c.seed, 15));
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
      CMatrix g(c.beams, c.streams);
      for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = Complex(nd(rng), nd(rng));
      std::vector<double> q(c.streams), w(c.streams);
      for (int i = 0; i < c.streams; ++i) {
        q[i] = 1.0 + std::abs(nd(rng));
        w[i] = std::abs(nd(rng)) * 5.0;
      }
      const double a = sic_weighted_rate_logdet(q, g, w);
      const double b = sic_weighted_rate_sinr(q, g, w);
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(a)));
    }
    std::snprintf(buf, sizeof buf, "largest relative gap %.3g", worst);
    add({"sic_forms", worst <= 1e-9, worst, 1e-9, buf});
  }

  // Queue stability under the drift scheduler with the greedy solver.
  if (c.beams == c.streams) {
    SimConfig q = c;
    q.utility = "pfs";
    q.service = "rzf";
    const double snr = c.snr_db.back();
    const std::uint64_t seed = run_seed(q, 0);
    const Scenario s = generate_scenario(q, seed);
    const double power = db_to_linear(snr);
    const double r_max = max_rate_per_slot(s.traces(), power, q.channel_uses);
    DriftParams params{q.v_scale * r_max, q.a_max_scale * r_max, q.channel_uses};
    const long slots = static_cast<long>(q.blocks) * q.block_length;
    auto policy = [&](const QueueState& st) {
      return schedule_slot("igs", st.q, s.csi, power, q, BaselineUsers::kStrongest);
    };
    BlockFadingService service(s, q, power, seed);
    const QueueRun run =
        run_drift_scheduler(q.users, slots, q.utility_function(), params, policy, service);
    double worst = 0.0;
    for (double x : run.final_queues) worst = std::max(worst, x / static_cast<double>(slots));
    std::snprintf(buf, sizeof buf, "max Q_n / t = %.4g bits per slot after %ld slots (r_max %.4g)",
                  worst, slots, r_max);
    add({"queue_stability", worst <= 0.01 * r_max, worst / r_max, 0.01, buf});
  }
  return rep;
}

}  // namespace beamsched::harness

#endif  // BEAMSCHED_HARNESS_VALIDATION_HPP
