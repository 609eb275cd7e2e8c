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

// Solvers for the per-slot queue-weighted rate problem: joint choice of N_s
// users, K beams and powers.

#ifndef BEAMSCHED_SELECTION_HPP
#define BEAMSCHED_SELECTION_HPP

#include "beamsched/channel.hpp"
#include "beamsched/common.hpp"
#include "beamsched/deterministic_equivalent.hpp"
#include "beamsched/rates.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace beamsched {

struct ScheduleDecision {
  std::vector<int> users;      // decoding order (q non-increasing)
  std::vector<int> beams;      // ascending
  std::vector<double> powers;  // aligned with `users`
  double objective = 0.0;      // deterministic-equivalent weighted bits per slot

  // Diagnostics.
  int iterations = 0;
  bool converged = true;
  std::vector<double> trace;  // relaxed objective per outer iteration (BCU)
                              // or per greedy step (IGS)
  RVector relaxed_beams;      // BCU only
  RVector relaxed_powers;     // BCU only, indexed by user id
};

/// Euclidean projection onto {b : 0 <= b_i <= 1, sum b = K} by bisection on
/// the shift tau of clamp(v - tau, 0, 1).
inline RVector project_capped_simplex(const RVector& v, double k) {
  const Eigen::Index m = v.size();
  require(k > 0.0 && k <= static_cast<double>(m), "capped simplex needs 0 < K <= M");
  auto mass = [&](double tau) { return (v.array() - tau).cwiseMax(0.0).cwiseMin(1.0).sum(); };
  double lo = v.minCoeff() - 1.0;  // mass(lo) = M >= K
  double hi = v.maxCoeff();        // mass(hi) = 0 <= K
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) > k ? lo : hi) = mid;
  }
  RVector b = (v.array() - 0.5 * (lo + hi)).cwiseMax(0.0).cwiseMin(1.0);
  // Spread the last bit of bisection error over the free coordinates.
  const double gap = k - b.sum();
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (b(i) > 0.0 && b(i) < 1.0) free.push_back(i);
  }
  if (!free.empty() && std::abs(gap) > 0.0) {
    const double share = gap / static_cast<double>(free.size());
    for (Eigen::Index i : free) b(i) = std::clamp(b(i) + share, 0.0, 1.0);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Power updates for a fixed mask and decoding order.

struct IwfOptions {
  double averaging_denominator = 0.0;  // 0 means the antenna count
  double tol = 1e-6;                   // on ||omega_t - omega_{t-1}||
  int max_iter = 200;
  // When set, each step tries the full water-filling move first and halves
  // it until the objective improves (down to the averaging step).
  bool line_search = false;
};

struct IwfResult {
  std::vector<double> powers;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  WeightedRateModel::Evaluation evaluation;
};

inline IwfResult iterative_water_filling(const WeightedRateModel& model,
                                         std::span<const double> queue_weights,
                                         double budget, std::vector<double> start,
                                         const IwfOptions& opts, int antennas) {
  const double denom = opts.averaging_denominator > 0.0 ? opts.averaging_denominator
                                                        : static_cast<double>(antennas);
  require(denom >= 1.0, "averaging denominator must be at least 1");
  IwfResult out;
  std::vector<double> omega = std::move(start);
  WeightedRateModel::Evaluation ev = model.evaluate(omega);
  const std::size_t n = omega.size();
  std::vector<double> next(n);
  for (int it = 1; it <= opts.max_iter; ++it) {
    out.iterations = it;
    const RVector gamma = weighted_water_filling(queue_weights, ev.gains, budget);
    double step = opts.line_search ? 1.0 : 1.0 / denom;
    WeightedRateModel::Evaluation trial;
    for (;;) {
      for (std::size_t i = 0; i < n; ++i) {
        next[i] = (1.0 - step) * omega[i] + step * gamma(static_cast<Eigen::Index>(i));
      }
      trial = model.evaluate(next, &ev);
      if (!opts.line_search || trial.value >= ev.value || step <= 1.0 / denom) break;
      step = std::max(step * 0.5, 1.0 / denom);
    }
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta += (next[i] - omega[i]) * (next[i] - omega[i]);
    delta = std::sqrt(delta);
    if (opts.line_search && trial.value < ev.value) {
      // No improving move left along the water-filling direction.
      out.converged = true;
      break;
    }
    omega = next;
    ev = std::move(trial);
    if (delta < opts.tol) {
      out.converged = true;
      break;
    }
  }
  out.powers = std::move(omega);
  out.value = ev.value;
  out.evaluation = std::move(ev);
  return out;
}

// ---------------------------------------------------------------------------
// Beam subproblem.

struct BeamStepOptions {
  double tol = 1e-6;  // stop when the gain is at most tol * max(1, |f|)
  int max_iter = 100;
  int max_backtracks = 40;
  bool numerical_gradient = false;  // central differences instead of adjoint
  double fd_step = 1e-5;
};

struct BeamStepResult {
  RVector b;
  double value = 0.0;
  int iterations = 0;
  std::vector<double> trace;
};

/// Shared data of one relaxed problem instance: users with positive queue
/// weight in decoding order.
struct RelaxedProblem {
  std::span<const CMatrix> factors;
  std::vector<int> order;
  std::vector<double> weights;
  int antennas = 0;
  double channel_uses = 1.0;
  FixedPointOptions fixed_point;

  WeightedRateModel model(const RVector& mask) const {
    return WeightedRateModel(factors, order, weights, mask, antennas, channel_uses, fixed_point);
  }
};

namespace detail {

inline RVector numerical_mask_gradient(const RelaxedProblem& prob, const RVector& b,
                                       std::span<const double> powers, double h) {
  RVector grad = RVector::Zero(b.size());
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    // One-sided at the box edges so the mask stays in [0, 1].
    const double up = std::min(1.0, b(k) + h);
    const double dn = std::max(0.0, b(k) - h);
    if (up <= dn) continue;
    RVector bp = b, bm = b;
    bp(k) = up;
    bm(k) = dn;
    grad(k) = (prob.model(bp).value(powers) - prob.model(bm).value(powers)) / (up - dn);
  }
  return grad;
}

}  // namespace detail

/// Projected-gradient ascent on the relaxed mask with backtracking. The
/// objective never decreases across accepted steps.
inline BeamStepResult beam_subproblem(const RelaxedProblem& prob,
                                      std::span<const double> powers, const RVector& start,
                                      double beams, const BeamStepOptions& opts = {}) {
  BeamStepResult out;
  out.b = project_capped_simplex(start, beams);
  auto ev = prob.model(out.b).evaluate(powers);
  out.value = ev.value;
  out.trace.push_back(out.value);
  double step = 0.0;
  for (int it = 0; it < opts.max_iter; ++it) {
    const WeightedRateModel current = prob.model(out.b);
    const RVector grad = opts.numerical_gradient
                             ? detail::numerical_mask_gradient(prob, out.b, powers, opts.fd_step)
                             : current.mask_gradient(powers, ev, out.b.size());
    const double gmax = grad.cwiseAbs().maxCoeff();
    if (!(gmax > 0.0)) break;
    if (step == 0.0) step = 1.0 / gmax;
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      const RVector cand = project_capped_simplex(out.b + step * grad, beams);
      const double slope = grad.dot(cand - out.b);
      if (slope <= 0.0) {
        step *= 0.5;
        continue;
      }
      auto cev = prob.model(cand).evaluate(powers, &ev);
      if (cev.value >= out.value + 1e-4 * slope) {
        const double gain = cev.value - out.value;
        const double prev_norm = (cand - out.b).norm();
        out.b = cand;
        out.value = cev.value;
        ev = std::move(cev);
        out.trace.push_back(out.value);
        accepted = true;
        out.iterations = it + 1;
        if (gain <= opts.tol * std::max(1.0, std::abs(out.value)) || prev_norm < 1e-12) {
          return out;
        }
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared helpers.

namespace detail {

/// Users with the largest values, ties by larger queue weight then lower id.
inline std::vector<int> top_users(const RVector& value, std::span<const double> queues,
                                  int count) {
  std::vector<int> ids(static_cast<std::size_t>(value.size()));
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    if (value(a) != value(b)) return value(a) > value(b);
    if (queues[a] != queues[b]) return queues[a] > queues[b];
    return a < b;
  });
  ids.resize(static_cast<std::size_t>(count));
  return ids;
}

inline std::vector<int> top_beams(const RVector& b, int count) {
  std::vector<int> ids(static_cast<std::size_t>(b.size()));
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](int x, int y) {
    return b(x) != b(y) ? b(x) > b(y) : x < y;
  });
  ids.resize(static_cast<std::size_t>(count));
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct IntegralEvaluation {
  std::vector<int> order;
  std::vector<double> powers;  // aligned with order
  double value = 0.0;
};

/// Best of equal power P / N_s and converged water-filling on fixed sets.
inline IntegralEvaluation optimize_integral(const CorrelationSet& csi,
                                            std::span<const double> queues,
                                            std::span<const int> users,
                                            std::span<const int> beams, double budget,
                                            double channel_uses,
                                            const FixedPointOptions& fp,
                                            const IwfOptions& iwf, bool water_fill) {
  IntegralEvaluation out;
  out.order = decoding_order(queues, users);
  std::vector<double> q;
  for (int u : out.order) q.push_back(queues[u]);
  const BeamMask mask = BeamMask::from_indices(csi.antennas(), beams);
  const WeightedRateModel model(csi.beam_factors, out.order, q, mask.b, csi.antennas(),
                                channel_uses, fp);
  const std::vector<double> equal(out.order.size(),
                                  budget / static_cast<double>(out.order.size()));
  out.powers = equal;
  out.value = model.value(equal);
  if (water_fill) {
    const IwfResult wf = iterative_water_filling(model, q, budget, equal, iwf, csi.antennas());
    if (wf.value > out.value) {
      out.value = wf.value;
      out.powers = wf.powers;
    }
  }
  return out;
}

inline IwfOptions converged_iwf() {
  IwfOptions o;
  o.line_search = true;
  o.tol = 1e-9;
  o.max_iter = 500;
  return o;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// BCU.

struct BcuOptions {
  double eps = 0.0;   // inner water-filling tolerance; 0 means 1e-2 P / K
  double eps1 = 0.0;  // outer power tolerance; 0 means 1e-2 P / K
  double eps2 = 0.0;  // outer mask tolerance; 0 means 1e-2 P / K
  int max_outer = 50;
  int max_inner = 200;
  double averaging_denominator = 0.0;  // 0 means the antenna count
  // Inner water-filling tries the full step first and halves it down to the
  // 1 / denominator averaging step until the objective improves.
  bool inner_line_search = true;
  double channel_uses = 1.0;
  FixedPointOptions fixed_point;
  BeamStepOptions beam_step;
};

/// Block-coordinate update on the relaxed problem, then rounding to the N_s
/// largest powers and K largest mask entries and power re-optimization.
inline ScheduleDecision bcu_schedule(std::span<const double> queues, const CorrelationSet& csi,
                                     double budget, int beams, int streams,
                                     const BcuOptions& opts = {}) {
  const int m = csi.antennas();
  const int nt = csi.users();
  require(static_cast<int>(queues.size()) == nt, "one queue per user");
  require(streams >= 1 && streams <= beams && beams <= m && streams <= nt,
          "need 1 <= N_s <= K <= M and N_s <= N_t");
  require(budget > 0.0, "power budget must be positive");
  const double eps_default = 1e-2 * budget / beams;
  const double eps = opts.eps > 0.0 ? opts.eps : eps_default;
  const double eps1 = opts.eps1 > 0.0 ? opts.eps1 : eps_default;
  const double eps2 = opts.eps2 > 0.0 ? opts.eps2 : eps_default;

  // Users without queue weight contribute nothing and are left out.
  std::vector<int> active;
  for (int n = 0; n < nt; ++n) {
    if (queues[n] > 0.0) active.push_back(n);
  }
  ScheduleDecision dec;
  dec.relaxed_powers = RVector::Zero(nt);
  dec.relaxed_beams = RVector::Ones(m);

  if (!active.empty()) {
    RelaxedProblem prob;
    prob.factors = csi.beam_factors;
    prob.order = decoding_order(queues, active);
    for (int u : prob.order) prob.weights.push_back(queues[u]);
    prob.antennas = m;
    prob.channel_uses = opts.channel_uses;
    prob.fixed_point = opts.fixed_point;
    const std::size_t na = prob.order.size();

    IwfOptions inner;
    inner.averaging_denominator = opts.averaging_denominator;
    inner.tol = eps;
    inner.max_iter = opts.max_inner;
    inner.line_search = opts.inner_line_search;

    RVector b = RVector::Ones(m);  // all beams on before the first mask step
    std::vector<double> w_prev;
    bool done = false;
    for (int t = 1; t <= opts.max_outer && !done; ++t) {
      dec.iterations = t;
      const WeightedRateModel at_b = prob.model(b);
      IwfResult wf = iterative_water_filling(
          at_b, prob.weights, budget, std::vector<double>(na, budget / na), inner, m);
      if (!w_prev.empty() && wf.value < at_b.value(w_prev)) {
        // Keep the previous powers so the relaxed objective stays monotone.
        wf.powers = w_prev;
      }
      const BeamStepResult bs = beam_subproblem(prob, wf.powers, b, beams, opts.beam_step);
      double dw = 0.0;
      for (std::size_t i = 0; i < na; ++i) {
        const double prev = w_prev.empty() ? budget / na : w_prev[i];
        dw += (wf.powers[i] - prev) * (wf.powers[i] - prev);
      }
      const double db = (bs.b - b).norm();
      b = bs.b;
      w_prev = wf.powers;
      dec.trace.push_back(bs.value);
      done = std::sqrt(dw) < eps1 && db < eps2;
    }
    dec.converged = done;
    dec.relaxed_beams = b;
    for (std::size_t i = 0; i < na; ++i) dec.relaxed_powers(prob.order[i]) = w_prev[i];
  }

  // Rounding.
  dec.beams = detail::top_beams(dec.relaxed_beams, beams);
  const std::vector<int> users = detail::top_users(dec.relaxed_powers, queues, streams);
  const auto best = detail::optimize_integral(csi, queues, users, dec.beams, budget,
                                        opts.channel_uses, opts.fixed_point,
                                        detail::converged_iwf(), true);
  dec.users = best.order;
  dec.powers = best.powers;
  dec.objective = best.value;
  return dec;
}

// ---------------------------------------------------------------------------
// Incremental greedy scheduling (K = N_s).

struct GreedyOptions {
  double channel_uses = 1.0;
  FixedPointOptions fixed_point;
};

inline ScheduleDecision igs_schedule(std::span<const double> queues, const CorrelationSet& csi,
                                     double budget, int streams,
                                     const GreedyOptions& opts = {}) {
  const int m = csi.antennas();
  const int nt = csi.users();
  require(static_cast<int>(queues.size()) == nt, "one queue per user");
  require(streams >= 1 && streams <= std::min(nt, m), "need 1 <= N_s <= min(N_t, M)");
  const double p = budget / streams;
  std::vector<int> users, beams;
  std::vector<char> user_taken(nt, 0), beam_taken(m, 0);
  ScheduleDecision dec;
  for (int step = 0; step < streams; ++step) {
    const std::vector<int> order = decoding_order(queues, users);
    double best = -1.0;
    int best_user = -1, best_beam = -1;
    for (int b = 0; b < m; ++b) {
      if (beam_taken[b]) continue;
      std::vector<int> trial_beams = beams;
      trial_beams.push_back(b);
      const BeamMask mask = BeamMask::from_indices(m, trial_beams);
      // Model the selected users first, then every candidate; candidates
      // never interfere with each other.
      std::vector<int> model_users = order;
      for (int n = 0; n < nt; ++n) {
        if (!user_taken[n]) model_users.push_back(n);
      }
      const MaskedGram gram(csi.beam_factors, model_users, mask.b);
      std::vector<int> interferers(order.size());
      std::iota(interferers.begin(), interferers.end(), 0);
      const std::vector<double> powers(order.size(), p);
      const PositionState st =
          solve_position(gram, interferers, powers, m, opts.fixed_point);
      for (std::size_t c = order.size(); c < model_users.size(); ++c) {
        const int n = model_users[c];
        const double g = position_gain(gram, st, static_cast<int>(c));
        const double score = queues[n] * log2_1p(p * g);
        // Scan order is beam-major, so prefer the lower user id on ties
        // explicitly.
        if (score > best || (score == best && (n < best_user ||
                                              (n == best_user && b < best_beam)))) {
          best = score;
          best_user = n;
          best_beam = b;
        }
      }
    }
    users.push_back(best_user);
    beams.push_back(best_beam);
    user_taken[best_user] = 1;
    beam_taken[best_beam] = 1;
    const auto eval = detail::optimize_integral(csi, queues, users, beams, budget * (step + 1) / streams,
                                                opts.channel_uses, opts.fixed_point, {}, false);
    dec.trace.push_back(eval.value);
  }
  std::sort(beams.begin(), beams.end());
  const auto eval = detail::optimize_integral(csi, queues, users, beams, budget,
                                              opts.channel_uses, opts.fixed_point,
                                              detail::converged_iwf(), true);
  dec.users = eval.order;
  dec.beams = beams;
  dec.powers = eval.powers;
  dec.objective = eval.value;
  dec.iterations = streams;
  return dec;
}

// ---------------------------------------------------------------------------
// Exhaustive search.

struct ExhaustiveOptions {
  double channel_uses = 1.0;
  double max_combinations = 1e6;
  FixedPointOptions fixed_point;
};

namespace detail {

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline std::vector<std::vector<int>> combinations(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> c(k);
  std::iota(c.begin(), c.end(), 0);
  while (true) {
    out.push_back(c);
    int i = k - 1;
    while (i >= 0 && c[i] == n - k + i) --i;
    if (i < 0) break;
    ++c[i];
    for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
  }
  return out;
}

}  // namespace detail

/// Global optimum over all user and beam subsets. Pairs are visited in order
/// of an interference-free upper bound so most of them are never solved.
inline ScheduleDecision exhaustive_schedule(std::span<const double> queues,
                                            const CorrelationSet& csi, double budget,
                                            int streams, int beams,
                                            const ExhaustiveOptions& opts = {}) {
  const int m = csi.antennas();
  const int nt = csi.users();
  require(static_cast<int>(queues.size()) == nt, "one queue per user");
  require(streams >= 1 && streams <= beams && beams <= m && streams <= nt,
          "need 1 <= N_s <= K <= M and N_s <= N_t");
  const double total = detail::binomial(nt, streams) * detail::binomial(m, beams);
  require(total <= opts.max_combinations,
          "exhaustive search exceeds the combination cap (" + std::to_string(total) + ")");
  const auto user_sets = detail::combinations(nt, streams);
  const auto beam_sets = detail::combinations(m, beams);

  struct Candidate {
    double bound;
    std::size_t u, b;
  };
  std::vector<Candidate> cands;
  cands.reserve(user_sets.size() * beam_sets.size());
  std::vector<double> q(streams), g(streams);
  for (std::size_t bi = 0; bi < beam_sets.size(); ++bi) {
    RVector mask = RVector::Zero(m);
    for (int k : beam_sets[bi]) mask(k) = 1.0;
    std::vector<double> own(nt);
    for (int n = 0; n < nt; ++n) {
      own[n] = (mask.asDiagonal() * csi.beam_factors[n]).squaredNorm();
    }
    for (std::size_t ui = 0; ui < user_sets.size(); ++ui) {
      for (int s = 0; s < streams; ++s) {
        q[s] = queues[user_sets[ui][s]];
        g[s] = own[user_sets[ui][s]];
      }
      const RVector gamma = weighted_water_filling(q, g, budget);
      double bound = 0.0;
      for (int s = 0; s < streams; ++s) bound += q[s] * log2_1p(gamma(s) * g[s]);
      cands.push_back({bound * opts.channel_uses, ui, bi});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.u != b.u ? a.u < b.u : a.b < b.b;
  });

  ScheduleDecision dec;
  double best = -1.0;
  std::size_t best_u = 0, best_b = 0;
  std::vector<double> best_powers;
  std::vector<int> best_order;
  int solved = 0;
  const IwfOptions iwf = detail::converged_iwf();
  for (const auto& c : cands) {
    if (c.bound < best) break;
    ++solved;
    const auto eval = detail::optimize_integral(csi, queues, user_sets[c.u], beam_sets[c.b],
                                                budget, opts.channel_uses, opts.fixed_point,
                                                iwf, true);
    const bool better = eval.value > best ||
                        (eval.value == best && (c.u < best_u || (c.u == best_u && c.b < best_b)));
    if (better) {
      best = eval.value;
      best_u = c.u;
      best_b = c.b;
      best_powers = eval.powers;
      best_order = eval.order;
    }
  }
  dec.users = best_order;
  dec.beams = beam_sets[best_b];
  dec.powers = best_powers;
  dec.objective = best;
  dec.iterations = solved;
  return dec;
}

// ---------------------------------------------------------------------------
// Interference-aware beam selection baseline (simplified).

/// Beam rule of the baseline for a given user set: users in the given order
/// claim their strongest free beam, remaining beams go to the largest
/// aggregate diagonal power over the set.
inline std::vector<int> iabs_beams(const CorrelationSet& csi, std::span<const int> users,
                                   int beams) {
  const int m = csi.antennas();
  std::vector<char> taken(m, 0);
  std::vector<int> out;
  for (int u : users) {
    if (static_cast<int>(out.size()) == beams) break;
    const RVector diag = csi.beam[u].diagonal().real();
    int pick = -1;
    for (int k = 0; k < m; ++k) {
      if (!taken[k] && (pick < 0 || diag(k) > diag(pick))) pick = k;
    }
    taken[pick] = 1;
    out.push_back(pick);
  }
  RVector aggregate = RVector::Zero(m);
  for (int u : users) aggregate += csi.beam[u].diagonal().real();
  while (static_cast<int>(out.size()) < beams) {
    int pick = -1;
    for (int k = 0; k < m; ++k) {
      if (!taken[k] && (pick < 0 || aggregate(k) > aggregate(pick))) pick = k;
    }
    taken[pick] = 1;
    out.push_back(pick);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Selects the N_s users with the most channel power (or the given users),
/// then applies `iabs_beams` with equal powers.
inline ScheduleDecision iabs_baseline(std::span<const double> queues, const CorrelationSet& csi,
                                      double budget, int streams, int beams,
                                      double channel_uses = 1.0,
                                      std::optional<std::vector<int>> users = std::nullopt,
                                      const FixedPointOptions& fp = {}) {
  const int nt = csi.users();
  require(streams >= 1 && streams <= beams && beams <= csi.antennas() && streams <= nt,
          "need 1 <= N_s <= K <= M and N_s <= N_t");
  std::vector<int> chosen;
  if (users) {
    chosen = *users;
    require(static_cast<int>(chosen.size()) == streams, "baseline needs exactly N_s users");
  } else {
    RVector power(nt);
    for (int n = 0; n < nt; ++n) power(n) = csi.beam[n].trace().real();
    std::vector<double> none(nt, 0.0);
    chosen = detail::top_users(power, none, streams);
  }
  ScheduleDecision dec;
  dec.beams = iabs_beams(csi, chosen, beams);
  const auto eval = detail::optimize_integral(csi, queues, chosen, dec.beams, budget,
                                              channel_uses, fp, {}, false);
  dec.users = eval.order;
  dec.powers = eval.powers;
  dec.objective = eval.value;
  return dec;
}

/// Users with the N_s largest queues, ties by lower id.
inline std::vector<int> largest_queue_users(std::span<const double> queues, int streams) {
  RVector q(static_cast<Eigen::Index>(queues.size()));
  for (std::size_t i = 0; i < queues.size(); ++i) q(static_cast<Eigen::Index>(i)) = queues[i];
  std::vector<double> none(queues.size(), 0.0);
  return detail::top_users(q, none, streams);
}

// ---------------------------------------------------------------------------
// Submodularity diagnostic.

struct SubmodularityReport {
  int samples = 0;
  int diminishing_returns = 0;  // fixed per-stream power
  int nondecreasing = 0;        // re-optimized power
  double diminishing_fraction() const {
    return samples == 0 ? 1.0 : static_cast<double>(diminishing_returns) / samples;
  }
  double nondecreasing_fraction() const {
    return samples == 0 ? 1.0 : static_cast<double>(nondecreasing) / samples;
  }
};

/// Ground set: (user, beam) pairs with user u paired to beam `pairing[u]`.
/// Samples nested U1 within U2 and an outside element e and checks
///   f(U1 + e) - f(U1) >= f(U2 + e) - f(U2)   (power P / N_s per stream)
///   g(U2 + e) >= g(U2)                        (water-filled power)
template <typename Rng>
SubmodularityReport submodularity_probe(const CorrelationSet& csi,
                                        std::span<const double> queues, double budget,
                                        int streams, int samples, Rng& rng,
                                        const FixedPointOptions& fp = {}) {
  const int nt = csi.users();
  const int m = csi.antennas();
  SubmodularityReport rep;
  if (nt < 2) {
    rep.samples = samples;
    rep.diminishing_returns = samples;
    rep.nondecreasing = samples;
    return rep;
  }
  const double p = budget / streams;
  auto fixed_value = [&](const std::vector<int>& set) {
    if (set.empty()) return 0.0;
    std::vector<int> beams;
    for (int u : set) beams.push_back(u % m);
    std::sort(beams.begin(), beams.end());
    beams.erase(std::unique(beams.begin(), beams.end()), beams.end());
    const BeamMask mask = BeamMask::from_indices(m, beams);
    std::vector<double> w(nt, 0.0);
    for (int u : set) w[u] = p;
    return deterministic_weighted_rate(queues, csi, set, mask, w, 1.0, fp);
  };
  auto optimized_value = [&](const std::vector<int>& set) {
    if (set.empty()) return 0.0;
    std::vector<int> beams;
    for (int u : set) beams.push_back(u % m);
    std::sort(beams.begin(), beams.end());
    beams.erase(std::unique(beams.begin(), beams.end()), beams.end());
    return detail::optimize_integral(csi, queues, set, beams, budget, 1.0, fp,
                                     detail::converged_iwf(), true)
        .value;
  };
  const int cap = std::min(nt - 1, streams);
  std::uniform_int_distribution<int> size2(1, std::max(1, cap));
  for (int s = 0; s < samples; ++s) {
    std::vector<int> ids(nt);
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    const int n2 = std::min(size2(rng), nt - 1);
    std::uniform_int_distribution<int> size1(0, n2);
    const int n1 = size1(rng);
    std::vector<int> u1(ids.begin(), ids.begin() + n1);
    std::vector<int> u2(ids.begin(), ids.begin() + n2);
    const int extra = ids[n2];
    auto u1e = u1, u2e = u2;
    u1e.push_back(extra);
    u2e.push_back(extra);
    const double d1 = fixed_value(u1e) - fixed_value(u1);
    const double d2 = fixed_value(u2e) - fixed_value(u2);
    const double scale = std::max(1.0, std::abs(d1) + std::abs(d2));
    ++rep.samples;
    if (d1 >= d2 - 1e-9 * scale) ++rep.diminishing_returns;
    const double g2 = optimized_value(u2);
    const double g2e = optimized_value(u2e);
    if (g2e >= g2 - 1e-9 * std::max(1.0, g2)) ++rep.nondecreasing;
  }
  return rep;
}

}  // namespace beamsched

#endif  // BEAMSCHED_SELECTION_HPP
