// Copyright 2026 The cvamp Authors
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

#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

/// Gaussian continuous-variable circuit simulation.
///
/// Conventions used throughout the library:
///   - a = x + i p, so [x, p] = i/2 and the vacuum variance of either
///     quadrature is 1/4 (standard deviation 0.5).
///   - Phase-space vectors are ordered (x1, p1, x2, p2, ...).
///   - dB values are power ratios, 10 log10(V / Vref).
namespace cvamp {

/// Vacuum variance of a single quadrature.
inline constexpr double kVacuumVariance = 0.25;

enum class Axis { X, P };

inline constexpr std::string_view to_string(Axis a) { return a == Axis::X ? "x" : "p"; }

inline Axis axis_from_string(std::string_view s) {
  if (s == "x" || s == "X") return Axis::X;
  if (s == "p" || s == "P") return Axis::P;
  throw std::invalid_argument("unknown quadrature axis '" + std::string(s) + "'");
}

/// Offset of an axis inside a mode's (x, p) pair.
inline constexpr int axis_offset(Axis a) { return a == Axis::X ? 0 : 1; }

/// First and second moments of a set of modes, ordered (x1, p1, x2, p2, ...).
struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int n_modes() const { return static_cast<int>(mean.size() / 2); }
};

/// Raised when a mode label or index does not refer to a live mode.
class UnknownModeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The standard block-antisymmetric form for n modes, [[0, 1], [-1, 0]] per mode.
inline Eigen::MatrixXd symplectic_form(int n_modes) {
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(2 * n_modes, 2 * n_modes);
  for (int k = 0; k < n_modes; ++k) {
    omega(2 * k, 2 * k + 1) = 1.0;
    omega(2 * k + 1, 2 * k) = -1.0;
  }
  return omega;
}

/// cos and sin with multiples of pi/2 landing on exact 0 and +-1, so that
/// quarter-turn phase shifts do not leave 1e-16 cross terms behind.
inline std::pair<double, double> exact_cos_sin(double phi) {
  double c = std::cos(phi);
  double s = std::sin(phi);
  if (std::abs(c) < 1e-15) {
    c = 0.0;
    s = s > 0.0 ? 1.0 : -1.0;
  } else if (std::abs(s) < 1e-15) {
    s = 0.0;
    c = c > 0.0 ? 1.0 : -1.0;
  }
  return {c, s};
}

/// Variance of a squeezed quadrature at `db` relative to vacuum.
inline double db_to_variance(double db) { return kVacuumVariance * std::pow(10.0, db / 10.0); }

}  // namespace cvamp
