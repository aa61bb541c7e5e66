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

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "cvamp/common.hpp"

/// Schrödinger-picture engine: a state is its mean vector and covariance matrix.
namespace cvamp::gaussian {

struct GaussianState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int n_modes() const { return static_cast<int>(mean.size() / 2); }
  Moments moments() const { return {mean, cov}; }
};

namespace detail {

inline void check_mode(const GaussianState& s, int mode) {
  if (mode < 0 || mode >= s.n_modes()) {
    throw UnknownModeError("mode index " + std::to_string(mode) + " out of range for " +
                           std::to_string(s.n_modes()) + "-mode state");
  }
}

// Left-multiplies rows `idx` of mean and cov by `block`, and right-multiplies
// the matching columns of cov by block^T.
template <int N>
void apply_local(GaussianState& s, const std::array<int, N>& idx, const Eigen::Matrix<double, N, N>& block) {
  const int dim = static_cast<int>(s.mean.size());
  Eigen::Matrix<double, N, 1> mu;
  for (int i = 0; i < N; ++i) mu(i) = s.mean(idx[i]);
  mu = block * mu;
  for (int i = 0; i < N; ++i) s.mean(idx[i]) = mu(i);

  Eigen::Matrix<double, N, Eigen::Dynamic> rows(N, dim);
  for (int i = 0; i < N; ++i) rows.row(i) = s.cov.row(idx[i]);
  rows = block * rows;
  for (int i = 0; i < N; ++i) s.cov.row(idx[i]) = rows.row(i);

  Eigen::Matrix<double, Eigen::Dynamic, N> cols(dim, N);
  for (int i = 0; i < N; ++i) cols.col(i) = s.cov.col(idx[i]);
  cols = cols * block.transpose();
  for (int i = 0; i < N; ++i) s.cov.col(idx[i]) = cols.col(i);
}

inline std::vector<int> all_but(int n_modes, int mode) {
  std::vector<int> idx;
  idx.reserve(2 * n_modes - 2);
  for (int k = 0; k < n_modes; ++k) {
    if (k == mode) continue;
    idx.push_back(2 * k);
    idx.push_back(2 * k + 1);
  }
  return idx;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// State preparation.

inline GaussianState vacuum(int n_modes) {
  if (n_modes < 0) throw std::invalid_argument("negative mode count");
  return {Eigen::VectorXd::Zero(2 * n_modes), kVacuumVariance * Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes)};
}

inline GaussianState coherent(double x, double p) {
  GaussianState s = vacuum(1);
  s.mean << x, p;
  return s;
}

/// Squeezed vacuum with variance V0 * 10^(s_db/10) on `axis`. The conjugate
/// axis holds V0^2 / V_sq, raised by `anti_excess_db` for impure squeezers.
inline GaussianState squeezed_vacuum(double s_db, Axis axis, double anti_excess_db = 0.0) {
  if (anti_excess_db < 0.0) throw std::invalid_argument("anti_excess_db must be non-negative");
  const double v_sq = db_to_variance(s_db);
  if (!(v_sq > 0.0) || !std::isfinite(v_sq)) throw std::invalid_argument("unphysical squeezing request");
  const double v_anti = kVacuumVariance * kVacuumVariance / v_sq * std::pow(10.0, anti_excess_db / 10.0);
  GaussianState s = vacuum(1);
  s.cov(axis_offset(axis), axis_offset(axis)) = v_sq;
  s.cov(1 - axis_offset(axis), 1 - axis_offset(axis)) = v_anti;
  return s;
}

/// Uncorrelated single mode with the given diagonal moments.
inline GaussianState diagonal_mode(double mean_x, double mean_p, double var_x, double var_p) {
  GaussianState s = vacuum(1);
  s.mean << mean_x, mean_p;
  s.cov(0, 0) = var_x;
  s.cov(1, 1) = var_p;
  return s;
}

inline GaussianState tensor(const GaussianState& a, const GaussianState& b) {
  const int na = static_cast<int>(a.mean.size());
  const int nb = static_cast<int>(b.mean.size());
  GaussianState s{Eigen::VectorXd(na + nb), Eigen::MatrixXd::Zero(na + nb, na + nb)};
  s.mean << a.mean, b.mean;
  s.cov.topLeftCorner(na, na) = a.cov;
  s.cov.bottomRightCorner(nb, nb) = b.cov;
  return s;
}

/// Reduced state on `keep` (mode indices, in the order given).
inline GaussianState partial_trace(const GaussianState& s, const std::vector<int>& keep) {
  std::vector<int> idx;
  for (int m : keep) {
    detail::check_mode(s, m);
    idx.push_back(2 * m);
    idx.push_back(2 * m + 1);
  }
  return {s.mean(idx), s.cov(idx, idx)};
}

// ---------------------------------------------------------------------------
// Unitary Gaussian elements.

namespace el {
/// Same convention as quadnet::apply_beamsplitter.
struct Beamsplitter {
  int a;
  int b;
  double reflectivity;
};
struct Phase {
  int mode;
  double phi;
};
/// x -> e^{-r} x, p -> e^{r} p.
struct Squeeze {
  int mode;
  double r;
};
struct Displace {
  int mode;
  double dx;
  double dp;
};
}  // namespace el

using SymplecticEl = std::variant<el::Beamsplitter, el::Phase, el::Squeeze, el::Displace>;

inline Eigen::Matrix4d beamsplitter_block(double reflectivity) {
  const double t = std::sqrt(1.0 - reflectivity);
  const double r = std::sqrt(reflectivity);
  Eigen::Matrix4d b;
  b << t, 0, r, 0,
       0, t, 0, r,
       -r, 0, t, 0,
       0, -r, 0, t;
  return b;
}

inline Eigen::Matrix2d phase_block(double phi) {
  const auto [c, s] = exact_cos_sin(phi);
  Eigen::Matrix2d b;
  b << c, -s, s, c;
  return b;
}

inline Eigen::Matrix2d squeeze_block(double r) {
  return Eigen::Vector2d(std::exp(-r), std::exp(r)).asDiagonal();
}

/// Full 2N x 2N matrix of an element (displacements give the identity).
inline Eigen::MatrixXd symplectic_matrix(const SymplecticEl& e, int n_modes) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n_modes, 2 * n_modes);
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, el::Beamsplitter>) {
          const std::array<int, 4> idx{2 * v.a, 2 * v.a + 1, 2 * v.b, 2 * v.b + 1};
          const Eigen::Matrix4d b = beamsplitter_block(v.reflectivity);
          for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) s(idx[i], idx[j]) = b(i, j);
        } else if constexpr (std::is_same_v<T, el::Phase>) {
          s.block<2, 2>(2 * v.mode, 2 * v.mode) = phase_block(v.phi);
        } else if constexpr (std::is_same_v<T, el::Squeeze>) {
          s.block<2, 2>(2 * v.mode, 2 * v.mode) = squeeze_block(v.r);
        }
      },
      e);
  return s;
}

inline void apply_inplace(GaussianState& s, const SymplecticEl& e) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, el::Beamsplitter>) {
          detail::check_mode(s, v.a);
          detail::check_mode(s, v.b);
          if (v.a == v.b) throw std::invalid_argument("beamsplitter needs two distinct modes");
          if (!(v.reflectivity >= 0.0 && v.reflectivity <= 1.0)) {
            throw std::invalid_argument("beamsplitter reflectivity must lie in [0, 1]");
          }
          detail::apply_local<4>(s, {2 * v.a, 2 * v.a + 1, 2 * v.b, 2 * v.b + 1}, beamsplitter_block(v.reflectivity));
        } else if constexpr (std::is_same_v<T, el::Phase>) {
          detail::check_mode(s, v.mode);
          detail::apply_local<2>(s, {2 * v.mode, 2 * v.mode + 1}, phase_block(v.phi));
        } else if constexpr (std::is_same_v<T, el::Squeeze>) {
          detail::check_mode(s, v.mode);
          detail::apply_local<2>(s, {2 * v.mode, 2 * v.mode + 1}, squeeze_block(v.r));
        } else {
          detail::check_mode(s, v.mode);
          s.mean(2 * v.mode) += v.dx;
          s.mean(2 * v.mode + 1) += v.dp;
        }
      },
      e);
}

inline GaussianState apply(GaussianState s, const SymplecticEl& e) {
  apply_inplace(s, e);
  return s;
}

// ---------------------------------------------------------------------------
// Channels and measurement.

/// Pure loss with transmission eta: q -> sqrt(eta) q + sqrt(1-eta) q_vac.
inline void loss_inplace(GaussianState& s, int mode, double eta) {
  detail::check_mode(s, mode);
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("loss transmission must lie in [0, 1]");
  const double a = std::sqrt(eta);
  const int i = 2 * mode;
  s.mean.segment<2>(i) *= a;
  s.cov.middleRows<2>(i) *= a;
  s.cov.middleCols<2>(i) *= a;
  s.cov(i, i) += (1.0 - eta) * kVacuumVariance;
  s.cov(i + 1, i + 1) += (1.0 - eta) * kVacuumVariance;
}

inline GaussianState loss_channel(GaussianState s, int mode, double eta) {
  loss_inplace(s, mode, eta);
  return s;
}

/// Below this marginal variance the conditional update uses the pseudo-inverse (0).
inline constexpr double kPseudoInverseThreshold = 1e-14;

struct ScalarGaussian {
  double mean;
  double variance;
};

/// Distribution of x cos(phi) + p sin(phi) on `mode`.
inline ScalarGaussian quadrature_marginal(const GaussianState& s, int mode, double phi) {
  detail::check_mode(s, mode);
  const auto [c, sn] = exact_cos_sin(phi);
  const int i = 2 * mode;
  return {c * s.mean(i) + sn * s.mean(i + 1),
          c * c * s.cov(i, i) + sn * sn * s.cov(i + 1, i + 1) + 2.0 * sn * c * s.cov(i, i + 1)};
}

/// State of the remaining modes given outcome `q` of x cos(phi) + p sin(phi)
/// on `mode`; the measured mode is removed.
inline GaussianState condition_on(const GaussianState& s, int mode, double phi, double q) {
  detail::check_mode(s, mode);
  GaussianState r = s;
  // Rotating by -phi turns the measured quadrature into x.
  detail::apply_local<2>(r, {2 * mode, 2 * mode + 1}, phase_block(-phi));
  const int i = 2 * mode;
  const std::vector<int> rest = detail::all_but(s.n_modes(), mode);
  const double var = r.cov(i, i);
  const double inv = var < kPseudoInverseThreshold ? 0.0 : 1.0 / var;
  const Eigen::VectorXd cross = r.cov(rest, std::vector<int>{i}).col(0);
  GaussianState out{r.mean(rest), r.cov(rest, rest)};
  out.mean += cross * ((q - r.mean(i)) * inv);
  out.cov -= inv * cross * cross.transpose();
  return out;
}

struct HomodyneResult {
  double outcome;
  GaussianState conditioned;
};

/// Samples a homodyne outcome at LO phase `phi` and returns the conditioned
/// remainder. `rng` is any uniform random bit generator.
template <class Rng>
HomodyneResult homodyne(const GaussianState& s, int mode, double phi, Rng& rng) {
  const ScalarGaussian m = quadrature_marginal(s, mode, phi);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double q = m.mean + std::sqrt(std::max(m.variance, 0.0)) * normal(rng);
  return {q, condition_on(s, mode, phi, q)};
}

inline void displace_by_inplace(GaussianState& s, int mode, double gx, double gp, double outcome) {
  detail::check_mode(s, mode);
  s.mean(2 * mode) += gx * outcome;
  s.mean(2 * mode + 1) += gp * outcome;
}

inline GaussianState displace_by(GaussianState s, int mode, double gx, double gp, double outcome) {
  displace_by_inplace(s, mode, gx, gp, outcome);
  return s;
}

struct FeedTarget {
  int mode;
  Axis axis;
  double gain;
};

/// Outcome-averaged measure-and-feedforward: the unconditional state after
/// measuring `axis` of `measured` and displacing the targets by gain * outcome.
/// Target indices refer to the state before the measured mode is removed.
inline GaussianState feedforward_average(const GaussianState& s, int measured, Axis axis,
                                         const std::vector<FeedTarget>& targets) {
  detail::check_mode(s, measured);
  const int dim = static_cast<int>(s.mean.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(dim, dim);
  const int src = 2 * measured + axis_offset(axis);
  for (const auto& f : targets) {
    detail::check_mode(s, f.mode);
    if (f.mode == measured) throw std::invalid_argument("feedforward target equals the measured mode");
    t(2 * f.mode + axis_offset(f.axis), src) += f.gain;
  }
  const std::vector<int> rest = detail::all_but(s.n_modes(), measured);
  const Eigen::VectorXd mean = t * s.mean;
  const Eigen::MatrixXd cov = t * s.cov * t.transpose();
  return {mean(rest), cov(rest, rest)};
}

// ---------------------------------------------------------------------------
// Diagnostics.

/// Symplectic eigenvalues in ascending order, via the spectrum of
/// -(C^{1/2} Omega C^{1/2})^2, whose eigenvalues are nu_k^2 in pairs.
inline std::vector<double> symplectic_eigenvalues(const Eigen::MatrixXd& cov) {
  const int dim = static_cast<int>(cov.rows());
  if (dim % 2 != 0 || cov.cols() != dim) throw std::invalid_argument("covariance must be 2N x 2N");
  if (dim == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw std::domain_error("covariance matrix is not positive definite");
  }
  const Eigen::MatrixXd root = es.operatorSqrt();
  const Eigen::MatrixXd a = root * symplectic_form(dim / 2) * root;
  const Eigen::MatrixXd m = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ms(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  std::vector<double> nu;
  for (int k = 0; k < dim; k += 2) {
    nu.push_back(std::sqrt(std::max(0.0, 0.5 * (ms.eigenvalues()(k) + ms.eigenvalues()(k + 1)))));
  }
  return nu;
}

inline double min_symplectic_eigenvalue(const Eigen::MatrixXd& cov) {
  const auto nu = symplectic_eigenvalues(cov);
  if (nu.empty()) throw std::invalid_argument("empty covariance matrix");
  return nu.front();
}

inline bool is_physical(const GaussianState& s, double tol = 1e-10) {
  if (s.n_modes() == 0) return true;
  if ((s.cov - s.cov.transpose()).cwiseAbs().maxCoeff() > 1e-12) return false;
  try {
    return min_symplectic_eigenvalue(s.cov) >= kVacuumVariance - tol;
  } catch (const std::domain_error&) {
    return false;
  }
}

}  // namespace cvamp::gaussian
