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

// Geometry-based multipath channels, array steering vectors, DFT beamspace
// transforms and per-user spatial correlation (statistical CSI).

#ifndef BEAMSCHED_CHANNEL_HPP
#define BEAMSCHED_CHANNEL_HPP

#include "beamsched/common.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <span>
#include <vector>

namespace beamsched {

enum class ArrayKind { kLinear, kPlanar };

/// Uniform linear or planar array. Element (m, n) with m the column and n the
/// row sits at flat index m * rows + n.
struct ArrayGeometry {
  ArrayKind kind = ArrayKind::kLinear;
  int columns = 1;
  int rows = 1;
  double spacing_h = 0.5;  // in carrier wavelengths
  double spacing_v = 0.5;

  int antennas() const { return columns * rows; }

  static ArrayGeometry linear(int antennas, double spacing = 0.5) {
    return {ArrayKind::kLinear, antennas, 1, spacing, spacing};
  }
  static ArrayGeometry planar(int columns, int rows, double spacing_h = 0.5,
                              double spacing_v = 0.5) {
    return {ArrayKind::kPlanar, columns, rows, spacing_h, spacing_v};
  }

  void validate() const {
    require(columns >= 1 && rows >= 1, "array needs at least one column and row");
    require(kind == ArrayKind::kPlanar || rows == 1, "linear array must have one row");
    require(spacing_h > 0.0 && spacing_v > 0.0, "antenna spacing must be positive");
  }
};

/// One propagation ray. The amplitude is a magnitude; its phase is redrawn
/// on every channel realization.
struct Mpc {
  double amplitude = 1.0;
  double azimuth = 0.0;    // radians
  double elevation = 0.0;  // radians
};

struct MpcProfile {
  int user = 0;
  std::vector<Mpc> paths;
  double pathloss = 1.0;  // linear power gain

  int path_count() const { return static_cast<int>(paths.size()); }

  void validate() const {
    require(!paths.empty(), "invalid profile: user " + std::to_string(user) +
                                " has no multipath components");
    require(pathloss > 0.0 && std::isfinite(pathloss),
            "invalid profile: pathloss must be positive");
    for (const auto& p : paths) {
      require(std::isfinite(p.azimuth) && std::isfinite(p.elevation) &&
                  std::isfinite(p.amplitude),
              "invalid profile: non-finite path parameter");
    }
  }
};

inline CVector steering_vector(const ArrayGeometry& geom, double azimuth,
                               double elevation) {
  geom.validate();
  const double u = geom.spacing_h * std::sin(azimuth) * std::cos(elevation);
  const double v = geom.spacing_v * std::cos(azimuth) * std::sin(elevation);
  const double scale = 1.0 / std::sqrt(static_cast<double>(geom.antennas()));
  CVector a(geom.antennas());
  for (int m = 0; m < geom.columns; ++m) {
    for (int n = 0; n < geom.rows; ++n) {
      const double phase = -2.0 * kPi * (m * u + n * v);
      a(m * geom.rows + n) = scale * Complex(std::cos(phase), std::sin(phase));
    }
  }
  return a;
}

/// One fading-block realization h_n. Each path gets an independent uniform
/// phase drawn from `rng`.
template <typename Rng>
CVector generate_channel(const MpcProfile& profile, const ArrayGeometry& geom,
                         Rng& rng) {
  profile.validate();
  const int antennas = geom.antennas();
  const double scale = std::sqrt(profile.pathloss * antennas / profile.path_count());
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  CVector h = CVector::Zero(antennas);
  for (const auto& p : profile.paths) {
    const double phi = phase(rng);
    h += (scale * p.amplitude * Complex(std::cos(phi), std::sin(phi))) *
         steering_vector(geom, p.azimuth, p.elevation);
  }
  return h;
}

/// Factor F (M x L) with R = F F^H, one column per path.
inline CMatrix correlation_factor(const MpcProfile& profile,
                                  const ArrayGeometry& geom) {
  profile.validate();
  const int antennas = geom.antennas();
  const double scale = std::sqrt(profile.pathloss * antennas / profile.path_count());
  CMatrix f(antennas, profile.path_count());
  for (int l = 0; l < profile.path_count(); ++l) {
    const auto& p = profile.paths[l];
    f.col(l) = (scale * std::abs(p.amplitude)) *
               steering_vector(geom, p.azimuth, p.elevation);
  }
  return f;
}

/// E[h h^H] over the path phases.
inline CMatrix correlation_matrix(const MpcProfile& profile,
                                  const ArrayGeometry& geom) {
  const CMatrix f = correlation_factor(profile, geom);
  return f * f.adjoint();
}

inline CMatrix unitary_dft(int size) {
  require(size >= 1, "DFT size must be positive");
  CMatrix f(size, size);
  const double scale = 1.0 / std::sqrt(static_cast<double>(size));
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      // Reduce the exponent modulo the size to keep phases accurate.
      const long long k = (static_cast<long long>(r) * c) % size;
      const double phase = -2.0 * kPi * static_cast<double>(k) / size;
      f(r, c) = scale * Complex(std::cos(phase), std::sin(phase));
    }
  }
  return f;
}

inline CMatrix kronecker(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Unitary beamspace transform: the M-point DFT for linear arrays and the
/// Kronecker product of the column and row DFTs for planar arrays.
inline CMatrix dft_beam_matrix(const ArrayGeometry& geom) {
  geom.validate();
  if (geom.kind == ArrayKind::kLinear) return unitary_dft(geom.antennas());
  return kronecker(unitary_dft(geom.columns), unitary_dft(geom.rows));
}

inline CMatrix beam_domain_correlation(const CMatrix& antenna_corr,
                                       const CMatrix& beam_matrix) {
  require(antenna_corr.rows() == antenna_corr.cols(),
          "correlation matrix must be square");
  require(beam_matrix.rows() == antenna_corr.rows() &&
              beam_matrix.cols() == antenna_corr.rows(),
          "dimension mismatch between correlation and beam matrix");
  return beam_matrix.adjoint() * antenna_corr * beam_matrix;
}

/// (d / d0)^(-exponent).
inline double pathloss(double distance, double reference, double exponent) {
  require(distance > 0.0, "pathloss: distance must be positive");
  require(reference > 0.0, "pathloss: reference distance must be positive");
  return std::pow(distance / reference, -exponent);
}

/// Low-rank factor F of a Hermitian PSD matrix with R ~= F F^H. Eigenvalues
/// below `relative_floor` times the largest one are dropped.
inline CMatrix hermitian_factor(const CMatrix& r, double relative_floor = 1e-12) {
  require(r.rows() == r.cols(), "hermitian_factor: matrix must be square");
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(r);
  const RVector& values = eig.eigenvalues();
  const double top = values.size() > 0 ? values.maxCoeff() : 0.0;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
    if (values(i) > relative_floor * top && values(i) > 0.0) keep.push_back(i);
  }
  CMatrix f(r.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    f.col(static_cast<Eigen::Index>(c)) =
        std::sqrt(values(keep[c])) * eig.eigenvectors().col(keep[c]);
  }
  return f;
}

/// Statistical CSI for a user population. `beam_factors[n]` satisfies
/// beam[n] = beam_factors[n] * beam_factors[n]^H.
struct CorrelationSet {
  std::vector<CMatrix> antenna;
  std::vector<CMatrix> beam;
  std::vector<CMatrix> beam_factors;

  int users() const { return static_cast<int>(beam.size()); }
  int antennas() const { return beam.empty() ? 0 : static_cast<int>(beam.front().rows()); }

  static CorrelationSet from_profiles(std::span<const MpcProfile> profiles,
                                      const ArrayGeometry& geom,
                                      const CMatrix& beam_matrix) {
    CorrelationSet set;
    for (const auto& p : profiles) {
      const CMatrix f = correlation_factor(p, geom);
      const CMatrix fb = beam_matrix.adjoint() * f;
      set.antenna.push_back(f * f.adjoint());
      set.beam.push_back(fb * fb.adjoint());
      set.beam_factors.push_back(fb);
    }
    return set;
  }

  /// Builds a set directly from beam-domain matrices (antenna domain taken
  /// equal to the beam domain, i.e. B_DFT = I).
  static CorrelationSet from_beam_matrices(std::vector<CMatrix> beam) {
    CorrelationSet set;
    for (const auto& r : beam) set.beam_factors.push_back(hermitian_factor(r));
    set.antenna = beam;
    set.beam = std::move(beam);
    return set;
  }
};

struct CorrelationCheck {
  bool hermitian = true;
  bool psd = true;
  bool trace_preserved = true;
};

inline CorrelationCheck check_correlation_set(const CorrelationSet& set) {
  CorrelationCheck out;
  for (int n = 0; n < set.users(); ++n) {
    for (const CMatrix* m : {&set.antenna[n], &set.beam[n]}) {
      const double scale = std::max(1.0, m->norm());
      if ((*m - m->adjoint()).norm() > 1e-10 * scale) out.hermitian = false;
      const double tr = m->trace().real();
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(*m, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(tr, 1.0)) out.psd = false;
    }
    const double ta = set.antenna[n].trace().real();
    const double tb = set.beam[n].trace().real();
    if (std::abs(ta - tb) > 1e-8 * std::max(std::abs(ta), 1.0)) out.trace_preserved = false;
  }
  return out;
}

}  // namespace beamsched

#endif  // BEAMSCHED_CHANNEL_HPP
