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

// Deterministic equivalent of the queue-weighted SIC broadcast rate, computed
// in the Gram space of the users' masked low-rank beam factors.
//
// With S_i = diag(b) Rb_i diag(b) = W_i W_i^H the interference-plus-noise
// matrix of a decoding position with interferer set J is
//
//     T = I + sum_j c_j S_j,   c_j = w_j / (s (1 + e_j))
//
// and every trace the fixed point needs reduces to Gram blocks
// G = W^H W through the Woodbury identity:
//
//     tr[S_x T^{-1}] = tr G_xx - tr[G_xJ K^{-1} G_Jx],  K = C^{-1} + G_JJ.
//
// Work per iteration therefore scales with the total path rank of the
// interferers rather than with the antenna count.

#ifndef BEAMSCHED_DETERMINISTIC_EQUIVALENT_HPP
#define BEAMSCHED_DETERMINISTIC_EQUIVALENT_HPP

#include "beamsched/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace beamsched {

/// How interferers enter the fixed-point system.
///
/// kPowerWeighted: T = I + sum_j w_j S_j / (1 + e_j), e_i = w_i tr[S_i T^-1].
///   This is the large-system limit of the SIC rate for channels whose
///   covariance is S_j; it is the default and what the solvers optimize.
/// kPerAntenna: T = I + (1/M) sum_j w_j S_j / (1 + e_j), e_i = tr[S_i T^-1].
///   Kept for comparison; it underestimates interference by roughly M.
enum class InterferenceScaling { kPowerWeighted, kPerAntenna };

struct FixedPointOptions {
  InterferenceScaling scaling = InterferenceScaling::kPowerWeighted;
  // e <- (1 - damping) e + damping F(e). F is monotone in e, so the
  // undamped iteration already converges without oscillating.
  double damping = 1.0;
  double tol = 1e-8;     // on max_j |F_j(e) - e_j| / max(1, |e_j|)
  int max_iter = 500;
  // Newton steps on F(e) - e with the exact Jacobian; falls back to the
  // damped iteration whenever a step fails to reduce the residual.
  bool newton = true;
};

/// Masked beam factors W_i = diag(b) F_i of a list of users (rows restricted
/// to the support of b) and their Gram matrix.
class MaskedGram {
 public:
  MaskedGram() = default;

  /// `factors[users[i]]` is the M x L_i beam-domain factor of the i-th model
  /// user. Internal index i refers to users[i].
  MaskedGram(std::span<const CMatrix> factors, std::span<const int> users,
             const RVector& mask) {
    const Eigen::Index antennas = mask.size();
    for (Eigen::Index k = 0; k < antennas; ++k) {
      require(mask(k) >= -1e-12 && mask(k) <= 1.0 + 1e-12,
              "beam mask entries must lie in [0, 1]");
      if (mask(k) > 0.0) support_.push_back(static_cast<int>(k));
    }
    offsets_.reserve(users.size() + 1);
    offsets_.push_back(0);
    for (int u : users) {
      require(u >= 0 && static_cast<std::size_t>(u) < factors.size(),
              "user index out of range");
      require(factors[u].rows() == antennas,
              "beam factor row count must equal the mask length");
      offsets_.push_back(offsets_.back() + factors[u].cols());
    }
    const Eigen::Index d = static_cast<Eigen::Index>(support_.size());
    rows_ = CMatrix(d, offsets_.back());
    masked_ = CMatrix(d, offsets_.back());
    for (std::size_t i = 0; i < users.size(); ++i) {
      const CMatrix& f = factors[users[i]];
      for (Eigen::Index r = 0; r < d; ++r) {
        rows_.block(r, offsets_[i], 1, f.cols()) = f.row(support_[r]);
        masked_.block(r, offsets_[i], 1, f.cols()) = mask(support_[r]) * f.row(support_[r]);
      }
    }
    traces_.resize(users.size());
    for (std::size_t i = 0; i < users.size(); ++i) {
      traces_[i] = masked_.middleCols(offsets_[i], rank(static_cast<int>(i))).squaredNorm();
    }
    mask_support_.resize(d);
    for (Eigen::Index r = 0; r < d; ++r) mask_support_(r) = mask(support_[r]);
  }

  int size() const { return static_cast<int>(offsets_.size()) - 1; }
  Eigen::Index offset(int i) const { return offsets_[i]; }
  Eigen::Index rank(int i) const { return offsets_[i + 1] - offsets_[i]; }
  Eigen::Index total_rank() const { return offsets_.back(); }
  /// W^H W, built on first use (beam-space solves never need it). Lazy
  /// members make concurrent first calls on a shared instance unsafe.
  const CMatrix& gram() const {
    if (!gram_built_) {
      gram_ = masked_.adjoint() * masked_;
      gram_built_ = true;
    }
    return gram_;
  }
  double trace(int i) const { return traces_[i]; }
  /// S_i = W_i W_i^H on the support (d x d), built on first use.
  const CMatrix& outer(int i) const {
    if (outer_.empty()) outer_.resize(traces_.size());
    CMatrix& o = outer_[i];
    if (o.size() == 0) {
      const auto w = masked_.middleCols(offsets_[i], rank(i));
      o = w * w.adjoint();
    }
    return o;
  }
  /// Support of the mask as antenna/beam indices.
  const std::vector<int>& support() const { return support_; }
  /// Unmasked factor rows on the support (d x total_rank).
  const CMatrix& rows() const { return rows_; }
  const RVector& mask_on_support() const { return mask_support_; }
  /// Masked factor rows on the support (d x total_rank).
  const CMatrix& masked() const { return masked_; }

 private:
  std::vector<int> support_;
  std::vector<Eigen::Index> offsets_;
  CMatrix rows_;
  CMatrix masked_;
  mutable CMatrix gram_;
  mutable bool gram_built_ = false;
  mutable std::vector<CMatrix> outer_;
  std::vector<double> traces_;
  RVector mask_support_;
};

/// Fixed-point state of one decoding position.
struct PositionState {
  std::vector<int> interferers;  // internal indices into the MaskedGram
  std::vector<double> powers;    // w_j of each interferer
  RVector e;                     // e_j of each interferer
  double residual = 0.0;
  int iterations = 0;
  // Lower Cholesky factor at the returned e: of K = C^{-1} + G_JJ when
  // `beam_space` is false, of T itself (d x d) otherwise.
  bool beam_space = false;
  CMatrix chol_lower;
  std::vector<Eigen::Index> block_offsets;  // offsets of each interferer in K
  RVector cinv;                             // C^{-1} entry per interferer
};

namespace detail {

inline double scaling_factor(InterferenceScaling s, int antennas) {
  return s == InterferenceScaling::kPerAntenna ? static_cast<double>(antennas) : 1.0;
}

/// Gathers G_{A,B} for internal index lists A and B.
inline CMatrix gather_gram(const MaskedGram& g, std::span<const int> a,
                           std::span<const int> b) {
  Eigen::Index ra = 0, rb = 0;
  for (int i : a) ra += g.rank(i);
  for (int j : b) rb += g.rank(j);
  CMatrix out(ra, rb);
  Eigen::Index r0 = 0;
  for (int i : a) {
    Eigen::Index c0 = 0;
    for (int j : b) {
      out.block(r0, c0, g.rank(i), g.rank(j)) =
          g.gram().block(g.offset(i), g.offset(j), g.rank(i), g.rank(j));
      c0 += g.rank(j);
    }
    r0 += g.rank(i);
  }
  return out;
}

/// tr[S_x T^{-1}] for the columns in `z = L^{-1} G_{J,x}`.
inline double gain_from_solved(double trace_xx, const CMatrix& z) {
  return std::max(0.0, trace_xx - z.squaredNorm());
}

}  // namespace detail

/// Solves the coupled fixed point of one decoding position with interferers
/// `interferers` (internal indices, powers w_j > 0). `warm` optionally seeds
/// e; otherwise e_j starts at kappa_j tr[S_j].
inline PositionState solve_position(const MaskedGram& g,
                                    std::span<const int> interferers,
                                    std::span<const double> powers,
                                    int antennas,
                                    const FixedPointOptions& opts,
                                    const RVector* warm = nullptr) {
  require(interferers.size() == powers.size(), "one power per interferer");
  PositionState st;
  st.interferers.assign(interferers.begin(), interferers.end());
  st.powers.assign(powers.begin(), powers.end());
  const int n = static_cast<int>(interferers.size());
  const double s = detail::scaling_factor(opts.scaling, antennas);
  const bool weighted = opts.scaling == InterferenceScaling::kPowerWeighted;

  st.block_offsets.resize(n + 1, 0);
  for (int j = 0; j < n; ++j) {
    require(powers[j] > 0.0, "interferers must carry positive power");
    st.block_offsets[j + 1] = st.block_offsets[j] + g.rank(interferers[j]);
  }
  if (n == 0) {
    st.e = RVector(0);
    st.cinv = RVector(0);
    st.chol_lower = CMatrix(0, 0);
    return st;
  }
  const Eigen::Index r = st.block_offsets[n];
  const Eigen::Index d = static_cast<Eigen::Index>(g.support().size());
  // Work in whichever space is smaller: Gram (r x r) or beam (d x d).
  st.beam_space = d < r;
  CMatrix gjj, wj;
  // Beam space: F_j = ||L^{-1} W_j||^2 is cheaper than forming T^{-1} while
  // the total rank stays below about twice the support size.
  const bool solve_factors = r <= 2 * d;
  if (st.beam_space) {
    wj.resize(d, r);
    for (int j = 0; j < n; ++j) {
      wj.middleCols(st.block_offsets[j], g.rank(interferers[j])) =
          g.masked().middleCols(g.offset(interferers[j]), g.rank(interferers[j]));
    }
  } else {
    gjj = detail::gather_gram(g, interferers, interferers);
  }
  RVector traces(n);
  RVector kappa(n);
  for (int j = 0; j < n; ++j) {
    traces(j) = g.trace(interferers[j]);
    kappa(j) = weighted ? powers[j] : 1.0;
  }
  RVector e = (warm != nullptr && warm->size() == n) ? *warm : RVector(kappa.cwiseProduct(traces));
  RVector cinv(n);
  RVector cexp(r);
  CMatrix kmat;
  Eigen::LLT<CMatrix> llt;
  bool use_newton = opts.newton;
  double last_residual = std::numeric_limits<double>::infinity();
  RVector newton_base = e;
  for (int it = 0;; ++it) {
    for (int j = 0; j < n; ++j) {
      cinv(j) = s * (1.0 + e(j)) / powers[j];
      cexp.segment(st.block_offsets[j], st.block_offsets[j + 1] - st.block_offsets[j])
          .setConstant(cinv(j));
    }
    RVector f(n);
    if (st.beam_space) {
      // T = I + sum_j S_j / c_j and F_j = kappa_j tr[S_j T^{-1}].
      kmat = CMatrix::Identity(d, d);
      for (int j = 0; j < n; ++j) kmat += g.outer(interferers[j]) / cinv(j);
      llt.compute(kmat);
      if (solve_factors) {
        const CMatrix z = llt.matrixL().solve(wj);
        for (int j = 0; j < n; ++j) {
          const Eigen::Index o = st.block_offsets[j];
          f(j) = kappa(j) * z.middleCols(o, st.block_offsets[j + 1] - o).squaredNorm();
        }
      } else {
        const CMatrix tinv = llt.solve(CMatrix::Identity(d, d));
        for (int j = 0; j < n; ++j) {
          const CMatrix& sj = g.outer(interferers[j]);
          f(j) = kappa(j) * std::max(0.0, (tinv.array() * sj.array().conjugate()).sum().real());
        }
      }
    } else {
      kmat = gjj;
      kmat.diagonal() += cexp;
      llt.compute(kmat);
      if (llt.info() != Eigen::Success) {
        throw ConvergenceError("fixed point: interference matrix not positive definite",
                               std::numeric_limits<double>::infinity(), it);
      }
      const CMatrix z = llt.matrixL().solve(gjj);
      for (int j = 0; j < n; ++j) {
        const Eigen::Index o = st.block_offsets[j];
        f(j) = kappa(j) *
               detail::gain_from_solved(traces(j), z.middleCols(o, st.block_offsets[j + 1] - o));
      }
    }
    double residual = 0.0;
    for (int j = 0; j < n; ++j) {
      residual = std::max(residual, std::abs(f(j) - e(j)) / std::max(1.0, std::abs(e(j))));
    }
    if (residual <= opts.tol) {
      st.e = e;
      st.residual = residual;
      st.iterations = it;
      st.cinv = cinv;
      st.chol_lower = llt.matrixL();
      return st;
    }
    if (it + 1 >= opts.max_iter) {
      throw ConvergenceError("fixed point did not converge", residual, it + 1);
    }
    if (use_newton && residual >= last_residual) {
      // The previous Newton step did not help; return to its base point and
      // continue with plain iterations.
      use_newton = false;
      e = newton_base;
      continue;
    }
    last_residual = residual;
    if (use_newton) {
      // d phi_i / d e_j = (s / w_j) ||(K^{-1} G)_{j-block, i-block}||_F^2.
      Eigen::MatrixXd jac(n, n);
      if (st.beam_space) {
        // Equivalent beam-space form (c_j / (1 + e_j)) ||Z_j^H Z_i||_F^2 with
        // Z = L^{-1} W_J. High-rank users go through P_j = Z_j Z_j^H and
        // tr(P_j P_i), low-rank ones through the r x r product Z^H Z.
        const CMatrix z = llt.matrixL().solve(wj);
        const double dd = static_cast<double>(d);
        const bool projections = static_cast<double>(r) * r * dd >
                                 static_cast<double>(r) * dd * dd + 0.5 * n * n * dd * dd;
        std::vector<CMatrix> proj;
        CMatrix y;
        if (projections) {
          proj.resize(n);
          for (int j = 0; j < n; ++j) {
            const Eigen::Index o = st.block_offsets[j];
            const auto zj = z.middleCols(o, st.block_offsets[j + 1] - o);
            proj[j] = zj * zj.adjoint();
          }
        } else {
          y = z.adjoint() * z;
        }
        for (int j = 0; j < n; ++j) {
          const Eigen::Index oj = st.block_offsets[j];
          const Eigen::Index rj = st.block_offsets[j + 1] - oj;
          const double scale_j = 1.0 / (cinv(j) * (1.0 + e(j)));
          for (int i = j; i < n; ++i) {
            const Eigen::Index oi = st.block_offsets[i];
            const double t =
                projections
                    ? (proj[j].array() * proj[i].array().conjugate()).sum().real()
                    : y.block(oj, oi, rj, st.block_offsets[i + 1] - oi).squaredNorm();
            jac(i, j) = kappa(i) * scale_j * t;
            if (i != j) jac(j, i) = kappa(j) * t / (cinv(i) * (1.0 + e(i)));
          }
        }
      } else {
        const CMatrix y = llt.matrixU().solve(llt.matrixL().solve(gjj));
        for (int j = 0; j < n; ++j) {
          const Eigen::Index oj = st.block_offsets[j];
          const Eigen::Index wjn = st.block_offsets[j + 1] - oj;
          for (int i = 0; i < n; ++i) {
            const Eigen::Index oi = st.block_offsets[i];
            jac(i, j) = kappa(i) * (s / powers[j]) *
                        y.block(oj, oi, wjn, st.block_offsets[i + 1] - oi).squaredNorm();
          }
        }
      }
      const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - jac;
      const RVector step = a.partialPivLu().solve(f - e);
      const RVector trial = e + step;
      if (trial.allFinite() && (trial.array() > 0.0).all()) {
        newton_base = f;
        e = trial;
        continue;
      }
    }
    e = (1.0 - opts.damping) * e + opts.damping * f;
  }
}

/// Lower Cholesky factor of K = C^{-1} + G_JJ at the state's e.
inline CMatrix gram_cholesky(const MaskedGram& g, const PositionState& st) {
  if (!st.beam_space) return st.chol_lower;
  CMatrix k = detail::gather_gram(g, st.interferers, st.interferers);
  for (std::size_t j = 0; j < st.interferers.size(); ++j) {
    for (Eigen::Index i = st.block_offsets[j]; i < st.block_offsets[j + 1]; ++i) {
      k(i, i) += st.cinv(static_cast<Eigen::Index>(j));
    }
  }
  return Eigen::LLT<CMatrix>(k).matrixL();
}

/// tr[S_x T^{-1}] for any model user x at the converged state.
inline double position_gain(const MaskedGram& g, const PositionState& st, int x) {
  const double tr = g.trace(x);
  if (st.interferers.empty()) return tr;
  if (st.beam_space) {
    const CMatrix z = st.chol_lower.triangularView<Eigen::Lower>().solve(
        g.masked().middleCols(g.offset(x), g.rank(x)));
    return z.squaredNorm();
  }
  const int cols[1] = {x};
  const CMatrix gjx = detail::gather_gram(g, st.interferers, cols);
  const CMatrix z = st.chol_lower.triangularView<Eigen::Lower>().solve(gjx);
  return detail::gain_from_solved(tr, z);
}

/// Deterministic-equivalent weighted SIC rate for a fixed mask and decoding
/// order. Model user i is decoded at position i; its interferers are the
/// earlier positions with positive power.
class WeightedRateModel {
 public:
  struct Evaluation {
    double value = 0.0;
    std::vector<double> gains;             // tr[S_i T_i^{-1}] per position
    std::vector<PositionState> positions;  // fixed point per position
    std::vector<int> state_of;             // index into `positions` per user
    int max_iterations = 0;
    double max_residual = 0.0;
  };

  WeightedRateModel(std::span<const CMatrix> factors, std::vector<int> order,
                    std::vector<double> weights, const RVector& mask,
                    int antennas, double channel_uses,
                    FixedPointOptions opts = {})
      : order_(std::move(order)),
        weights_(std::move(weights)),
        antennas_(antennas),
        channel_uses_(channel_uses),
        opts_(opts),
        gram_(factors, order_, mask) {
    require(weights_.size() == order_.size(), "one queue weight per ordered user");
  }

  int size() const { return static_cast<int>(order_.size()); }
  const std::vector<int>& order() const { return order_; }
  const MaskedGram& gram() const { return gram_; }
  const FixedPointOptions& options() const { return opts_; }
  void set_tolerance(double tol) { opts_.tol = tol; }

  /// `powers[i]` is the power of the user at position i.
  Evaluation evaluate(std::span<const double> powers,
                      const Evaluation* warm = nullptr) const {
    require(static_cast<int>(powers.size()) == size(), "one power per ordered user");
    Evaluation ev;
    ev.gains.assign(size(), 0.0);
    ev.state_of.assign(size(), -1);
    std::vector<int> active;
    std::vector<double> active_powers;
    RVector seed;
    bool dirty = true;
    for (int i = 0; i < size(); ++i) {
      if (dirty) {
        const RVector* start = nullptr;
        const int slot = static_cast<int>(ev.positions.size());
        if (warm != nullptr && slot < static_cast<int>(warm->positions.size()) &&
            warm->positions[slot].interferers == active) {
          start = &warm->positions[slot].e;
        } else if (!active.empty() && !ev.positions.empty()) {
          // Extend the previous solution by the newly added interferer.
          const PositionState& prev = ev.positions.back();
          seed.resize(static_cast<Eigen::Index>(active.size()));
          const Eigen::Index m = prev.e.size();
          if (m + 1 == seed.size()) {
            seed.head(m) = prev.e;
            const int added = active.back();
            const double kappa = opts_.scaling == InterferenceScaling::kPowerWeighted
                                     ? active_powers.back()
                                     : 1.0;
            seed(m) = kappa * ev.gains[added];
            start = &seed;
          }
        }
        ev.positions.push_back(
            solve_position(gram_, active, active_powers, antennas_, opts_, start));
        const auto& ps = ev.positions.back();
        ev.max_iterations = std::max(ev.max_iterations, ps.iterations);
        ev.max_residual = std::max(ev.max_residual, ps.residual);
        dirty = false;
      }
      ev.state_of[i] = static_cast<int>(ev.positions.size()) - 1;
      ev.gains[i] = position_gain(gram_, ev.positions.back(), i);
      if (powers[i] > 0.0) {
        ev.value += weights_[i] * channel_uses_ * log2_1p(powers[i] * ev.gains[i]);
        active.push_back(i);
        active_powers.push_back(powers[i]);
        dirty = true;
      }
    }
    return ev;
  }

  double value(std::span<const double> powers) const { return evaluate(powers).value; }

  /// Exact gradient of the value with respect to the full-length mask b.
  /// Entries outside the support of b have zero derivative.
  RVector mask_gradient(std::span<const double> powers, const Evaluation& ev,
                        Eigen::Index mask_length) const {
    const Eigen::Index r = gram_.total_rank();
    CMatrix gbar = CMatrix::Zero(r, r);
    const double s = detail::scaling_factor(opts_.scaling, antennas_);
    const bool weighted = opts_.scaling == InterferenceScaling::kPowerWeighted;
    for (int n = 0; n < size(); ++n) {
      if (!(powers[n] > 0.0)) continue;
      const double coef = weights_[n] * channel_uses_ / std::numbers::ln2 * powers[n] /
                          (1.0 + powers[n] * ev.gains[n]);
      const PositionState& st = ev.positions[ev.state_of[n]];
      accumulate_position_adjoint(st, n, coef, s, weighted, gbar);
    }
    // grad_k = 2 b_k Re[(V Gbar V^H)_kk] on the support.
    RVector grad = RVector::Zero(mask_length);
    const CMatrix& v = gram_.rows();
    const CMatrix vg = v * gbar;
    const auto& support = gram_.support();
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(support.size()); ++k) {
      const double quad = (vg.row(k).cwiseProduct(v.row(k).conjugate())).sum().real();
      grad(support[k]) = 2.0 * gram_.mask_on_support()(k) * quad;
    }
    return grad;
  }

 private:
  // Adds coef * d tr[S_n T_n^{-1}] / dG (total derivative through the fixed
  // point) into gbar.
  void accumulate_position_adjoint(const PositionState& st, int n, double coef,
                                   double s, bool weighted, CMatrix& gbar) const {
    const int nj = static_cast<int>(st.interferers.size());
    std::vector<int> rows_idx = st.interferers;
    rows_idx.push_back(n);
    if (nj == 0) {
      // g_n = tr G_nn.
      gbar.block(gram_.offset(n), gram_.offset(n), gram_.rank(n), gram_.rank(n)) +=
          coef * CMatrix::Identity(gram_.rank(n), gram_.rank(n));
      return;
    }
    const Eigen::Index rj = st.block_offsets[nj];
    const Eigen::Index rn = gram_.rank(n);
    // Y = K^{-1} G_{J, J+n}
    const CMatrix gjx = detail::gather_gram(gram_, st.interferers, rows_idx);
    const CMatrix chol = gram_cholesky(gram_, st);
    CMatrix y = chol.triangularView<Eigen::Lower>().solve(gjx);
    y = chol.adjoint().triangularView<Eigen::Upper>().solve(y);

    // Jacobian of F and derivative of g_n with respect to e.
    Eigen::MatrixXd jac(nj, nj);
    RVector h(nj);
    for (int j = 0; j < nj; ++j) {
      const Eigen::Index oj = st.block_offsets[j];
      const Eigen::Index wj = st.block_offsets[j + 1] - oj;
      const double dcinv = s / st.powers[j];
      for (int i = 0; i < nj; ++i) {
        const Eigen::Index oi = st.block_offsets[i];
        const Eigen::Index wi = st.block_offsets[i + 1] - oi;
        const double kappa = weighted ? st.powers[i] : 1.0;
        jac(i, j) = kappa * dcinv * y.block(oj, oi, wj, wi).squaredNorm();
      }
      h(j) = dcinv * y.block(oj, rj, wj, rn).squaredNorm();
    }
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(nj, nj) - jac;
    const RVector lambda = a.transpose().partialPivLu().solve(h);

    // P = rows (J+n) of Pi = I - G E_J K^{-1} E_J^T, restricted to the
    // columns of J and n. Gbar_n = P^H diag(mu) P.
    const Eigen::Index rall = rj + rn;
    CMatrix p = CMatrix::Zero(rall, rall);
    p.topLeftCorner(rj, rj).setIdentity();
    p.bottomRightCorner(rn, rn).setIdentity();
    p.leftCols(rj) -= y.adjoint();
    RVector mu(rall);
    for (int i = 0; i < nj; ++i) {
      const double kappa = weighted ? st.powers[i] : 1.0;
      mu.segment(st.block_offsets[i], st.block_offsets[i + 1] - st.block_offsets[i])
          .setConstant(lambda(i) * kappa);
    }
    mu.tail(rn).setConstant(1.0);
    const CMatrix local = coef * (p.adjoint() * mu.asDiagonal() * p);
    // Scatter back into the global Gram layout.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> blocks;  // (global, local)
    Eigen::Index lo = 0;
    for (int idx : rows_idx) {
      blocks.emplace_back(gram_.offset(idx), lo);
      lo += gram_.rank(idx);
    }
    for (std::size_t a1 = 0; a1 < rows_idx.size(); ++a1) {
      for (std::size_t b1 = 0; b1 < rows_idx.size(); ++b1) {
        const Eigen::Index ra = gram_.rank(rows_idx[a1]);
        const Eigen::Index rb = gram_.rank(rows_idx[b1]);
        gbar.block(blocks[a1].first, blocks[b1].first, ra, rb) +=
            local.block(blocks[a1].second, blocks[b1].second, ra, rb);
      }
    }
  }

  std::vector<int> order_;
  std::vector<double> weights_;
  int antennas_;
  double channel_uses_;
  FixedPointOptions opts_;
  MaskedGram gram_;
};

}  // namespace beamsched

#endif  // BEAMSCHED_DETERMINISTIC_EQUIVALENT_HPP
