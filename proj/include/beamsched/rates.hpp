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

// Rate functions: the deterministic equivalent of the queue-weighted SIC
// rate, its instantaneous counterpart, weighted water-filling and RZF link
// rates.

#ifndef BEAMSCHED_RATES_HPP
#define BEAMSCHED_RATES_HPP

#include "beamsched/channel.hpp"
#include "beamsched/common.hpp"
#include "beamsched/deterministic_equivalent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

namespace beamsched {

/// Diagonal beam-selection mask; entries in [0, 1].
struct BeamMask {
  RVector b;

  static BeamMask full(int antennas) { return {RVector::Ones(antennas)}; }
  static BeamMask from_indices(int antennas, std::span<const int> beams) {
    BeamMask m{RVector::Zero(antennas)};
    for (int k : beams) {
      require(k >= 0 && k < antennas, "beam index out of range");
      m.b(k) = 1.0;
    }
    return m;
  }

  bool integral() const {
    return (b.array() == 0.0 || b.array() == 1.0).all();
  }
  double selected() const { return b.sum(); }
  void validate() const {
    require((b.array() >= 0.0).all() && (b.array() <= 1.0).all(),
            "beam mask entries must lie in [0, 1]");
  }
};

struct PowerAllocation {
  RVector w;
  double budget = 0.0;

  void validate() const {
    require((w.array() >= 0.0).all(), "powers must be non-negative");
    require(w.sum() <= budget + 1e-9, "powers exceed the budget");
  }
};

struct FixedPointSolution {
  RVector e;
  double residual = 0.0;
  int iterations = 0;
};

/// One interferer term of a decoding position: the masked beam-domain
/// matrix diag(b) Rb_j diag(b) and its power.
struct MaskedCorrelation {
  CMatrix matrix;
  double weight = 0.0;
};

namespace detail {

inline CMatrix dense_interference(std::span<const MaskedCorrelation> terms,
                                  const RVector& e, int antennas,
                                  InterferenceScaling scaling) {
  const double s = scaling_factor(scaling, antennas);
  const Eigen::Index m = terms.empty() ? 0 : terms.front().matrix.rows();
  CMatrix t = CMatrix::Identity(m, m);
  for (std::size_t j = 0; j < terms.size(); ++j) {
    if (terms[j].weight == 0.0) continue;
    t += (terms[j].weight / (s * (1.0 + e(static_cast<Eigen::Index>(j))))) * terms[j].matrix;
  }
  return t;
}

}  // namespace detail

/// Reference solver for one decoding position working on full M x M
/// matrices. Produces the same e as `solve_position` on the Gram engine.
/// `init` overrides the starting point e_j = kappa_j tr[S_j].
inline FixedPointSolution solve_fixed_point(std::span<const MaskedCorrelation> terms,
                                            int antennas,
                                            const FixedPointOptions& opts = {},
                                            const RVector* init = nullptr) {
  require(antennas >= 1, "antenna count must be positive");
  const Eigen::Index n = static_cast<Eigen::Index>(terms.size());
  for (const auto& t : terms) {
    require(t.weight >= 0.0, "interferer weights must be non-negative");
    require(t.matrix.rows() == t.matrix.cols() && t.matrix.rows() == terms.front().matrix.rows(),
            "interferer matrices must be square and equally sized");
  }
  FixedPointSolution sol;
  if (n == 0) {
    sol.e = RVector(0);
    return sol;
  }
  const bool weighted = opts.scaling == InterferenceScaling::kPowerWeighted;
  RVector kappa(n), traces(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    kappa(j) = weighted ? terms[j].weight : 1.0;
    traces(j) = terms[j].matrix.trace().real();
  }
  RVector e = init != nullptr ? *init : RVector(kappa.cwiseProduct(traces));
  require(e.size() == n, "initial point has the wrong length");
  for (int it = 0;; ++it) {
    const CMatrix t = detail::dense_interference(terms, e, antennas, opts.scaling);
    const Eigen::LDLT<CMatrix> ldlt(t);
    RVector f(n);
    double residual = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      f(j) = kappa(j) * std::max(0.0, ldlt.solve(terms[j].matrix).trace().real());
      residual = std::max(residual, std::abs(f(j) - e(j)) / std::max(1.0, std::abs(e(j))));
    }
    if (residual <= opts.tol) {
      sol.e = e;
      sol.residual = residual;
      sol.iterations = it;
      return sol;
    }
    if (it + 1 >= opts.max_iter) {
      throw ConvergenceError("fixed point did not converge", residual, it + 1);
    }
    e = (1.0 - opts.damping) * e + opts.damping * f;
  }
}

/// tr[S T^{-1}] for a user seeing the interferers `terms` at solution `sol`.
inline double fixed_point_gain(const CMatrix& own,
                               std::span<const MaskedCorrelation> terms,
                               const FixedPointSolution& sol, int antennas,
                               InterferenceScaling scaling) {
  if (terms.empty()) return own.trace().real();
  const CMatrix t = detail::dense_interference(terms, sol.e, antennas, scaling);
  return std::max(0.0, Eigen::LDLT<CMatrix>(t).solve(own).trace().real());
}

/// Users sorted by queue weight non-increasing, ties by ascending id.
inline std::vector<int> decoding_order(std::span<const double> queues,
                                       std::span<const int> users) {
  std::vector<int> order(users.begin(), users.end());
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (queues[a] != queues[b]) return queues[a] > queues[b];
    return a < b;
  });
  return order;
}

/// Deterministic equivalent of the weighted SIC rate in bits per slot.
/// `queues` and `powers` are indexed by user id; `users` lists the
/// scheduled users in any order (the decoding order is derived from Q).
inline double deterministic_weighted_rate(std::span<const double> queues,
                                          const CorrelationSet& csi,
                                          std::span<const int> users,
                                          const BeamMask& mask,
                                          std::span<const double> powers,
                                          double channel_uses,
                                          const FixedPointOptions& opts = {}) {
  mask.validate();
  require(mask.b.size() == csi.antennas(), "mask length must equal the antenna count");
  require(static_cast<int>(queues.size()) == csi.users() &&
              static_cast<int>(powers.size()) == csi.users(),
          "queues and powers must cover every user");
  const std::vector<int> order = decoding_order(queues, users);
  std::vector<double> q, w;
  for (int u : order) {
    require(powers[u] >= 0.0, "powers must be non-negative");
    q.push_back(queues[u]);
    w.push_back(powers[u]);
  }
  const WeightedRateModel model(csi.beam_factors, order, q, mask.b, csi.antennas(),
                                channel_uses, opts);
  return model.value(w);
}

/// Same quantity from bare beam-domain matrices (factored on the fly).
inline double deterministic_weighted_rate(std::span<const double> queues,
                                          std::span<const CMatrix> beam_corrs,
                                          std::span<const int> users,
                                          const BeamMask& mask,
                                          std::span<const double> powers,
                                          double channel_uses,
                                          const FixedPointOptions& opts = {}) {
  CorrelationSet csi;
  for (const auto& r : beam_corrs) {
    csi.beam.push_back(r);
    csi.beam_factors.push_back(hermitian_factor(r));
  }
  return deterministic_weighted_rate(queues, csi, users, mask, powers, channel_uses, opts);
}

// ---------------------------------------------------------------------------
// Instantaneous SIC rate (per channel use).

/// Determinant-ratio form. `g` holds the masked beam-domain channels
/// diag(b) B^H h of the users in decoding order. log det(I + G_{<=n}
/// G_{<=n}^H) - log det(I + G_{<n} G_{<n}^H) equals 2 log L_nn for the
/// Cholesky factor of I + G^H G.
inline double sic_weighted_rate_logdet(std::span<const double> weights,
                                       const CMatrix& g,
                                       std::span<const double> powers) {
  const Eigen::Index n = g.cols();
  require(static_cast<Eigen::Index>(weights.size()) == n &&
              static_cast<Eigen::Index>(powers.size()) == n,
          "one weight and power per channel column");
  if (n == 0) return 0.0;
  RVector root(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    require(powers[j] >= 0.0, "powers must be non-negative");
    root(j) = std::sqrt(powers[j]);
  }
  const CMatrix scaled = g * root.asDiagonal();
  CMatrix gram = scaled.adjoint() * scaled;
  gram.diagonal().array() += 1.0;
  const Eigen::LLT<CMatrix> llt(gram);
  const CMatrix l = llt.matrixL();
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    total += weights[j] * 2.0 * std::log2(l(j, j).real());
  }
  return total;
}

/// SINR form: log2(1 + w_n g_n^H A_n^{-1} g_n) with A_n = I + sum_{j<n}
/// w_j g_j g_j^H, maintained by rank-one inverse updates.
inline double sic_weighted_rate_sinr(std::span<const double> weights,
                                     const CMatrix& g,
                                     std::span<const double> powers) {
  const Eigen::Index n = g.cols();
  require(static_cast<Eigen::Index>(weights.size()) == n &&
              static_cast<Eigen::Index>(powers.size()) == n,
          "one weight and power per channel column");
  CMatrix ainv = CMatrix::Identity(g.rows(), g.rows());
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    require(powers[j] >= 0.0, "powers must be non-negative");
    const CVector u = ainv * g.col(j);
    const double quad = g.col(j).dot(u).real();
    total += weights[j] * log2_1p(powers[j] * quad);
    if (powers[j] > 0.0) {
      ainv -= (powers[j] / (1.0 + powers[j] * quad)) * (u * u.adjoint());
    }
  }
  return total;
}

namespace detail {

inline CMatrix masked_beam_channels(std::span<const CVector> realizations,
                                    std::span<const int> order,
                                    const BeamMask& mask,
                                    const CMatrix& beam_matrix) {
  const Eigen::Index m = mask.b.size();
  require(beam_matrix.rows() == m && beam_matrix.cols() == m,
          "beam matrix must be M x M");
  CMatrix g(m, static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    const CVector& h = realizations[order[i]];
    require(h.size() == m, "channel length must equal the antenna count");
    g.col(static_cast<Eigen::Index>(i)) = mask.b.asDiagonal() * (beam_matrix.adjoint() * h);
  }
  return g;
}

}  // namespace detail

/// Weighted SIC rate of one channel realization in bits per channel use,
/// via the determinant-ratio form.
inline double instantaneous_sic_weighted_rate(std::span<const double> queues,
                                              std::span<const CVector> realizations,
                                              std::span<const int> users,
                                              const BeamMask& mask,
                                              std::span<const double> powers,
                                              const CMatrix& beam_matrix) {
  mask.validate();
  const std::vector<int> order = decoding_order(queues, users);
  const CMatrix g = detail::masked_beam_channels(realizations, order, mask, beam_matrix);
  std::vector<double> q, w;
  for (int u : order) {
    q.push_back(queues[u]);
    w.push_back(powers[u]);
  }
  return sic_weighted_rate_logdet(q, g, w);
}

/// Same quantity via the SINR form.
inline double instantaneous_sic_weighted_rate_sinr(std::span<const double> queues,
                                                   std::span<const CVector> realizations,
                                                   std::span<const int> users,
                                                   const BeamMask& mask,
                                                   std::span<const double> powers,
                                                   const CMatrix& beam_matrix) {
  mask.validate();
  const std::vector<int> order = decoding_order(queues, users);
  const CMatrix g = detail::masked_beam_channels(realizations, order, mask, beam_matrix);
  std::vector<double> q, w;
  for (int u : order) {
    q.push_back(queues[u]);
    w.push_back(powers[u]);
  }
  return sic_weighted_rate_sinr(q, g, w);
}

// ---------------------------------------------------------------------------
// Water-filling.

/// Maximizes sum_n q_n log(1 + gamma_n beta_n) subject to sum gamma <= P.
/// Active users satisfy gamma_n = q_n / nu - 1 / beta_n; the active set is
/// found by sorting on q_n beta_n, which gives the water level in closed
/// form instead of by bisection.
inline RVector weighted_water_filling(std::span<const double> weights,
                                      std::span<const double> gains,
                                      double budget) {
  require(weights.size() == gains.size(), "one weight per gain");
  require(budget >= 0.0, "power budget must be non-negative");
  const std::size_t n = weights.size();
  RVector gamma = RVector::Zero(static_cast<Eigen::Index>(n));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) {
    require(weights[i] >= 0.0 && gains[i] >= 0.0, "weights and gains must be non-negative");
    if (weights[i] > 0.0 && gains[i] > 0.0) idx.push_back(i);
  }
  if (idx.empty() || budget == 0.0) return gamma;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double ka = weights[a] * gains[a], kb = weights[b] * gains[b];
    return ka != kb ? ka > kb : a < b;
  });
  // Grow the active set while the next user's threshold lies above the level.
  double sum_q = 0.0, sum_inv = 0.0, inv_nu = 0.0;
  std::size_t active = 0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const std::size_t i = idx[k];
    const double next_sum_q = sum_q + weights[i];
    const double next_sum_inv = sum_inv + 1.0 / gains[i];
    const double candidate = (budget + next_sum_inv) / next_sum_q;
    // User i is active iff q_i / nu > 1 / beta_i under the enlarged set.
    if (weights[i] * candidate <= 1.0 / gains[i]) break;
    sum_q = next_sum_q;
    sum_inv = next_sum_inv;
    inv_nu = candidate;
    active = k + 1;
  }
  for (std::size_t k = 0; k < active; ++k) {
    const std::size_t i = idx[k];
    gamma(static_cast<Eigen::Index>(i)) = std::max(0.0, weights[i] * inv_nu - 1.0 / gains[i]);
  }
  // Remove rounding drift so the budget holds exactly.
  const double total = gamma.sum();
  if (total > budget) gamma *= budget / total;
  return gamma;
}

// ---------------------------------------------------------------------------
// RZF.

struct RzfPrecoder {
  CMatrix matrix;  // K x N_s
  double zeta = 0.0;
};

/// B_d = zeta (H^H H + M alpha I)^{-1} H^H with zeta fixing the total power
/// at P under equal per-stream power P / N_s.
inline RzfPrecoder rzf_precoder(const CMatrix& effective, double alpha, double power,
                                int antennas) {
  const Eigen::Index ns = effective.rows();
  const Eigen::Index k = effective.cols();
  require(ns >= 1 && ns <= k, "RZF needs 1 <= N_s <= K");
  require(alpha > 0.0 && power > 0.0, "regularization and power must be positive");
  CMatrix reg = effective.adjoint() * effective;
  reg.diagonal().array() += static_cast<double>(antennas) * alpha;
  const Eigen::LLT<CMatrix> llt(reg);
  require(llt.info() == Eigen::Success, "regularized Gram matrix is singular");
  const CMatrix unscaled = llt.solve(effective.adjoint());
  RzfPrecoder out;
  const double norm2 = unscaled.squaredNorm();
  out.zeta = norm2 > 0.0 ? std::sqrt(static_cast<double>(ns) / norm2) : 0.0;
  out.matrix = out.zeta * unscaled;
  return out;
}

/// Per-user rates in bits per channel use with unit noise.
inline RVector rzf_user_rates(const CMatrix& effective, const CMatrix& precoder,
                              std::span<const double> powers) {
  require(precoder.rows() == effective.cols() && precoder.cols() == effective.rows(),
          "precoder dimensions must match the effective channel");
  const Eigen::Index ns = effective.rows();
  require(static_cast<Eigen::Index>(powers.size()) == ns, "one power per stream");
  const Eigen::MatrixXd gain = (effective * precoder).cwiseAbs2();
  RVector rates(ns);
  for (Eigen::Index n = 0; n < ns; ++n) {
    double interference = 0.0;
    for (Eigen::Index j = 0; j < ns; ++j) {
      if (j != n) interference += powers[j] * gain(n, j);
    }
    rates(n) = log2_1p(powers[n] * gain(n, n) / (1.0 + interference));
  }
  return rates;
}

}  // namespace beamsched

#endif  // BEAMSCHED_RATES_HPP
