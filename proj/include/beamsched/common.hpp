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

#ifndef BEAMSCHED_COMMON_HPP
#define BEAMSCHED_COMMON_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace beamsched {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;

/// Thrown when an input violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative solver exhausts its budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what + " (residual " + std::to_string(residual) +
                           " after " + std::to_string(iterations) +
                           " iterations)"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

// The literal overload keeps hot paths free of string construction.
inline void require(bool condition, const char* message) {
  if (!condition) throw InvalidArgument(message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

/// SplitMix64 finalizer; used to derive independent stream seeds from a
/// base seed and a list of stream coordinates.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base) { return mix_seed(base); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t next,
                          Rest... rest) {
  return derive_seed(mix_seed(base) ^ (next + 0x632be59bd9b4e019ULL), rest...);
}

inline double log2_1p(double x) { return std::log1p(x) / std::numbers::ln2; }

}  // namespace beamsched

#endif  // BEAMSCHED_COMMON_HPP
