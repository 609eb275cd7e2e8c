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

// Random user drops and block-fading channel realizations.

#ifndef BEAMSCHED_HARNESS_SCENARIO_HPP
#define BEAMSCHED_HARNESS_SCENARIO_HPP

#include "beamsched/channel.hpp"
#include "beamsched/harness/config.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace beamsched::harness {

// Stream tags for derive_seed so that independent draws never share a
// generator.
inline constexpr std::uint64_t kScenarioStream = 1;
inline constexpr std::uint64_t kFadingStream = 2;
inline constexpr std::uint64_t kArrivalStream = 3;
inline constexpr std::uint64_t kQueueStream = 4;

struct Scenario {
  ArrayGeometry geometry;
  CMatrix beam_matrix;
  std::vector<MpcProfile> profiles;
  std::vector<double> distances;
  CorrelationSet csi;

  int users() const { return static_cast<int>(profiles.size()); }
  int antennas() const { return geometry.antennas(); }
  std::vector<double> traces() const {
    std::vector<double> t;
    for (const auto& r : csi.beam) t.push_back(r.trace().real());
    return t;
  }
};

inline ArrayGeometry geometry_of(const SimConfig& c) {
  if (c.array_rows > 1) return ArrayGeometry::planar(c.array_columns(), c.array_rows);
  return ArrayGeometry::linear(c.antennas);
}

/// Path amplitudes: one LoS ray `los_ratio` times stronger than each NLoS
/// ray, scaled so the squared amplitudes sum to `total`.
inline std::vector<double> path_amplitudes(int paths, double los_ratio, double total) {
  const double x = std::sqrt(total / (los_ratio * los_ratio + paths - 1));
  std::vector<double> a(paths, x);
  a[0] = los_ratio * x;
  return a;
}

/// Drops users uniformly in distance with uniform azimuths over the front
/// half-plane. Planar arrays also draw elevations in [-pi/4, pi/4].
template <typename Rng>
Scenario generate_scenario(const SimConfig& c, Rng& rng) {
  c.validate();
  Scenario s;
  s.geometry = geometry_of(c);
  s.beam_matrix = dft_beam_matrix(s.geometry);
  std::uniform_real_distribution<double> azimuth(-kPi / 2.0, kPi / 2.0);
  std::uniform_real_distribution<double> elevation(-kPi / 4.0, kPi / 4.0);
  std::uniform_real_distribution<double> distance(c.distance_min, c.distance_max);
  const auto amp = path_amplitudes(c.paths, c.los_ratio, c.path_power_total());
  const bool planar = s.geometry.kind == ArrayKind::kPlanar;
  for (int n = 0; n < c.users; ++n) {
    MpcProfile p;
    p.user = n;
    for (int l = 0; l < c.paths; ++l) {
      const double az = azimuth(rng);
      const double el = planar ? elevation(rng) : 0.0;
      p.paths.push_back({amp[l], az, el});
    }
    const double d = distance(rng);
    s.distances.push_back(d);
    p.pathloss = c.identical_pathloss
                     ? 1.0
                     : pathloss(d, c.reference_distance, c.pathloss_exponent);
    s.profiles.push_back(std::move(p));
  }
  s.csi = CorrelationSet::from_profiles(s.profiles, s.geometry, s.beam_matrix);
  return s;
}

inline Scenario generate_scenario(const SimConfig& c, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, kScenarioStream));
  return generate_scenario(c, rng);
}

/// Beam-domain channels B^H h_n of all users for fading block `block`.
/// The generator depends only on (seed, block), so every solver sees the
/// same realizations.
inline std::vector<CVector> beam_channels(const Scenario& s, std::uint64_t seed, long block) {
  std::mt19937_64 rng(derive_seed(seed, kFadingStream, static_cast<std::uint64_t>(block)));
  std::vector<CVector> out;
  out.reserve(s.profiles.size());
  for (const auto& p : s.profiles) {
    out.push_back(s.beam_matrix.adjoint() * generate_channel(p, s.geometry, rng));
  }
  return out;
}

}  // namespace beamsched::harness

#endif  // BEAMSCHED_HARNESS_SCENARIO_HPP
