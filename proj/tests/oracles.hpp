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

// Test-only reference implementations. Nothing here calls into the library's
// propagation code; everything is written out with dense matrices or closed
// forms so the tests compare two independent computations.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace oracle {

inline constexpr double V0 = 0.25;
inline const double kSqrt2 = std::numbers::sqrt2;

inline double db(double v, double ref) { return 10.0 * std::log10(v / ref); }
inline double sq_var(double db_level) { return V0 * std::pow(10.0, db_level / 10.0); }

// Dense single elements on n modes, (x1, p1, x2, p2, ...) ordering.
inline Eigen::MatrixXd bs(int n, int a, int b, double refl) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  const double t = std::sqrt(1.0 - refl);
  const double r = std::sqrt(refl);
  for (int q = 0; q < 2; ++q) {
    s(2 * a + q, 2 * a + q) = t;
    s(2 * a + q, 2 * b + q) = r;
    s(2 * b + q, 2 * a + q) = -r;
    s(2 * b + q, 2 * b + q) = t;
  }
  return s;
}

inline Eigen::MatrixXd rot(int n, int m, double phi) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  s(2 * m, 2 * m) = std::cos(phi);
  s(2 * m, 2 * m + 1) = -std::sin(phi);
  s(2 * m + 1, 2 * m) = std::sin(phi);
  s(2 * m + 1, 2 * m + 1) = std::cos(phi);
  return s;
}

inline Eigen::MatrixXd sqz(int n, int m, double r) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  s(2 * m, 2 * m) = std::exp(-r);
  s(2 * m + 1, 2 * m + 1) = std::exp(r);
  return s;
}

inline Eigen::MatrixXd omega(int n) {
  Eigen::MatrixXd o = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    o(2 * k, 2 * k + 1) = 1.0;
    o(2 * k + 1, 2 * k) = -1.0;
  }
  return o;
}

/// Symplectic eigenvalues as the moduli of the eigenvalues of i Omega C.
inline std::vector<double> symplectic_spectrum(const Eigen::MatrixXd& cov) {
  const int dim = static_cast<int>(cov.rows());
  const Eigen::MatrixXcd m = std::complex<double>(0.0, 1.0) * (omega(dim / 2) * cov).cast<std::complex<double>>();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m);
  std::vector<double> ev;
  for (int k = 0; k < dim; ++k) ev.push_back(std::abs(es.eigenvalues()(k)));
  std::sort(ev.begin(), ev.end());
  std::vector<double> nu;
  for (int k = 0; k < dim; k += 2) nu.push_back(0.5 * (ev[k] + ev[k + 1]));
  return nu;
}

/// Conditional Gaussian after observing x of mode `m` with value q (dense Schur complement).
inline void condition_x(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int m, double q,
                        Eigen::VectorXd& mean_out, Eigen::MatrixXd& cov_out) {
  const int dim = static_cast<int>(mean.size());
  std::vector<int> rest;
  for (int i = 0; i < dim; ++i)
    if (i / 2 != m) rest.push_back(i);
  const int r = static_cast<int>(rest.size());
  Eigen::MatrixXd a(r, r);
  Eigen::VectorXd c(r);
  Eigen::VectorXd mu(r);
  for (int i = 0; i < r; ++i) {
    mu(i) = mean(rest[i]);
    c(i) = cov(rest[i], 2 * m);
    for (int j = 0; j < r; ++j) a(i, j) = cov(rest[i], rest[j]);
  }
  const double v = cov(2 * m, 2 * m);
  mean_out = mu + c * (q - mean(2 * m)) / v;
  cov_out = a - c * c.transpose() / v;
}

/// Random physical covariance: S diag(thermal) S^T with S a product of random
/// beamsplitters, phases and squeezers.
template <class Rng>
Eigen::MatrixXd random_physical_cov(int n, Rng& rng, double max_r = 0.8) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  for (int k = 0; k < 4 * n; ++k) {
    const int a = static_cast<int>(u(rng) * n) % n;
    const int b = (a + 1 + static_cast<int>(u(rng) * (n - 1))) % n;
    s = sqz(n, a, (2.0 * u(rng) - 1.0) * max_r) * s;
    s = rot(n, a, 2.0 * std::numbers::pi * u(rng)) * s;
    if (n > 1) s = bs(n, a, b, u(rng)) * s;
  }
  Eigen::VectorXd d(2 * n);
  for (int k = 0; k < n; ++k) d(2 * k) = d(2 * k + 1) = V0 * (1.0 + 2.0 * u(rng));
  return s * d.asDiagonal() * s.transpose();
}

// ---------------------------------------------------------------------------
// Closed forms for the G = 2 amplifier and the 1 -> 2 cloner, written from the
// two-mode input-output relation with ancilla variances va (x) and vb (p).

inline const double kR2 = 3.0 - 2.0 * kSqrt2;

/// x_1' = a x_1 + b x_2 - c x_A with a = (1/sqrt(R) + sqrt(R))/2, b = (1/sqrt(R) - sqrt(R))/2,
/// c = sqrt((1 - R)/2).
struct PiaCoefficients {
  double a;
  double b;
  double c;
};

inline PiaCoefficients pia_coefficients(double refl) {
  const double s = std::sqrt(refl);
  return {0.5 * (1.0 / s + s), 0.5 * (1.0 / s - s), std::sqrt(0.5 * (1.0 - refl))};
}

inline double pia_output_var(double va) { return 3.0 * V0 + (kSqrt2 - 1.0) * va; }
inline double epr_var(double va) { return 2.0 * kR2 * V0 + 2.0 * (1.0 - kR2) * va; }
inline double reconstruction_var(double va) { return V0 + (kSqrt2 + 1.0) * va; }
inline double clone_var(double va) { return 0.5 * (pia_output_var(va) + V0); }
inline double clone_noise(double va, double vb) { return clone_var(va) + clone_var(vb) - 2.0 * V0; }
inline double clone_anticlone_var(double va) {
  return V0 + (kSqrt2 - 1.0) * std::pow(1.0 + 1.0 / kSqrt2, 2) * va;
}

}  // namespace oracle
