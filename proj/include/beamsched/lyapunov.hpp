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

// Virtual queues, admission control and the drift-plus-penalty loop. The
// per-slot weighted-rate problem is delegated to a policy callable.

#ifndef BEAMSCHED_LYAPUNOV_HPP
#define BEAMSCHED_LYAPUNOV_HPP

#include "beamsched/common.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamsched {

enum class UtilityKind { kSumRate, kProportionalFair };

struct UtilityFunction {
  UtilityKind kind = UtilityKind::kProportionalFair;
  std::vector<double> offsets;  // c_n; empty means 0 for every user

  double offset(std::size_t n) const { return offsets.empty() ? 0.0 : offsets.at(n); }

  /// Utility of long-run rates, in bits for the proportional-fair kind.
  double value(std::span<const double> rates) const {
    double u = 0.0;
    for (std::size_t n = 0; n < rates.size(); ++n) {
      u += kind == UtilityKind::kSumRate ? rates[n] : std::log2(rates[n] + offset(n));
    }
    return u;
  }
};

struct DriftParams {
  double v = 1.0;
  double a_max = 1.0;
  double channel_uses = 1.0;

  void validate() const {
    require(v > 0.0 && a_max > 0.0 && channel_uses > 0.0,
            "V, A_max and the channel uses per slot must be positive");
  }
};

struct QueueState {
  std::vector<double> q;
  long slot = 0;
};

/// Arrivals maximizing V U(a) - a^T Q over [0, A_max]^N. The
/// proportional-fair kind uses the natural log so that the optimum is
/// a_n = V / Q_n - c_n; a zero backlog admits A_max.
inline std::vector<double> admission_control(const QueueState& state,
                                             const UtilityFunction& utility,
                                             const DriftParams& params) {
  params.validate();
  std::vector<double> a(state.q.size());
  for (std::size_t n = 0; n < state.q.size(); ++n) {
    const double q = state.q[n];
    require(q >= 0.0, "queue backlogs must be non-negative");
    if (utility.kind == UtilityKind::kSumRate) {
      a[n] = params.v >= q ? params.a_max : 0.0;
    } else if (q == 0.0) {
      a[n] = params.a_max;
    } else {
      a[n] = std::clamp(params.v / q - utility.offset(n), 0.0, params.a_max);
    }
  }
  return a;
}

struct QueueUpdate {
  std::vector<double> next;
  std::vector<double> served;  // min(Q_n, mu_n)
};

inline QueueUpdate queue_update(std::span<const double> queues,
                                std::span<const double> service,
                                std::span<const double> arrivals) {
  require(queues.size() == service.size() && queues.size() == arrivals.size(),
          "queues, service and arrivals must have equal length");
  QueueUpdate out;
  out.next.resize(queues.size());
  out.served.resize(queues.size());
  for (std::size_t n = 0; n < queues.size(); ++n) {
    require(service[n] >= 0.0 && arrivals[n] >= 0.0 && queues[n] >= 0.0,
            "queue update inputs must be non-negative");
    out.served[n] = std::min(queues[n], service[n]);
    out.next[n] = queues[n] - out.served[n] + arrivals[n];
  }
  return out;
}

struct SlotRecord {
  long slot = 0;
  std::vector<double> queues;    // at the start of the slot
  std::vector<double> arrivals;
  std::vector<double> service;   // allocated bits
  std::vector<double> served;    // actual bits
  std::vector<int> users;
  std::vector<int> beams;
};

struct QueueRun {
  std::vector<SlotRecord> trajectory;  // only when recording
  std::vector<double> final_queues;
  std::vector<double> total_service;   // allocated bits per user
  std::vector<double> total_served;    // actual bits per user
  std::vector<double> total_arrivals;
  long slots = 0;

  /// Long-run allocated rate per user in bits per channel use.
  std::vector<double> mean_rates(double channel_uses) const {
    std::vector<double> r(total_service.size());
    for (std::size_t n = 0; n < r.size(); ++n) {
      r[n] = total_service[n] / (static_cast<double>(slots) * channel_uses);
    }
    return r;
  }
};

/// Generic queue loop. Per slot: arrivals from `arrivals(state)`, a decision
/// from `policy(state)`, allocated bits from `service(slot, decision)`, then
/// the clamped update. The decision type needs `users` and `beams`.
template <typename Arrivals, typename Policy, typename Service>
QueueRun run_queue_loop(int users, long slots, Arrivals&& arrivals, Policy&& policy,
                        Service&& service, bool record = false,
                        std::vector<double> initial = {}) {
  require(users >= 1 && slots >= 0, "need at least one user and a non-negative horizon");
  QueueState state;
  state.q = initial.empty() ? std::vector<double>(users, 0.0) : std::move(initial);
  require(static_cast<int>(state.q.size()) == users, "initial backlog has the wrong length");
  QueueRun run;
  run.total_service.assign(users, 0.0);
  run.total_served.assign(users, 0.0);
  run.total_arrivals.assign(users, 0.0);
  for (long t = 0; t < slots; ++t) {
    state.slot = t;
    const std::vector<double> a = arrivals(state);
    std::vector<double> mu;
    std::vector<int> sel_users, sel_beams;
    try {
      const auto decision = policy(state);
      mu = service(t, decision);
      sel_users = decision.users;
      sel_beams = decision.beams;
    } catch (const std::exception& e) {
      throw std::runtime_error("slot " + std::to_string(t) + ": " + e.what());
    }
    QueueUpdate up = queue_update(state.q, mu, a);
    for (int n = 0; n < users; ++n) {
      run.total_service[n] += mu[n];
      run.total_served[n] += up.served[n];
      run.total_arrivals[n] += a[n];
    }
    if (record) {
      run.trajectory.push_back(
          {t, state.q, a, mu, up.served, std::move(sel_users), std::move(sel_beams)});
    }
    state.q = std::move(up.next);
  }
  run.final_queues = state.q;
  run.slots = slots;
  return run;
}

/// Drift-plus-penalty scheduler: admission control on virtual queues,
/// policy on the current backlog, service, update.
template <typename Policy, typename Service>
QueueRun run_drift_scheduler(int users, long slots, const UtilityFunction& utility,
                             const DriftParams& params, Policy&& policy, Service&& service,
                             bool record = false) {
  params.validate();
  auto admit = [&](const QueueState& s) { return admission_control(s, utility, params); };
  return run_queue_loop(users, slots, admit, policy, service, record);
}

/// Largest per-slot rate of any user: T log2(1 + max_n tr(R_n) P).
inline double max_rate_per_slot(std::span<const double> traces, double power,
                                double channel_uses) {
  double top = 0.0;
  for (double t : traces) top = std::max(top, t);
  return channel_uses * log2_1p(top * power);
}

}  // namespace beamsched

#endif  // BEAMSCHED_LYAPUNOV_HPP
