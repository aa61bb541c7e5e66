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

#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvamp/circuits.hpp"
#include "cvamp/common.hpp"
#include "cvamp/gaussian.hpp"

/// Figures of merit computed from output moments.
namespace cvamp::analysis {

inline double variance_db(double v, double vref) {
  if (!(v > 0.0) || !(vref > 0.0)) throw std::domain_error("variance_db needs positive arguments");
  return 10.0 * std::log10(v / vref);
}

// ---------------------------------------------------------------------------
// Linear combinations of output quadratures.

/// One term w * q of a quadrature combination; `mode` indexes the moments.
struct Term {
  int mode;
  Axis axis;
  double weight;
};

struct ScalarStats {
  double mean;
  double variance;
};

inline void check_index(const Moments& m, int mode) {
  if (mode < 0 || mode >= m.n_modes()) throw UnknownModeError("mode index " + std::to_string(mode) + " out of range");
}

inline ScalarStats combination(const Moments& m, const std::vector<Term>& terms) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m.mean.size());
  for (const auto& t : terms) {
    check_index(m, t.mode);
    w(2 * t.mode + axis_offset(t.axis)) += t.weight;
  }
  return {w.dot(m.mean), w.dot(m.cov * w)};
}

// ---------------------------------------------------------------------------
// Entanglement.

struct WitnessResult {
  double value;
  double bound;
  double margin_db;
  bool entangled;
};

/// Var(x_i + x_sign x_j) + Var(p_i + p_sign p_j) against the separable bound
/// 4 V0, i.e. the shot noise of the two joint quadratures.
inline WitnessResult duan_witness(const Eigen::MatrixXd& cov, int i, int j, double x_sign = -1.0, double p_sign = 1.0) {
  const Moments m{Eigen::VectorXd::Zero(cov.rows()), cov};
  check_index(m, i);
  check_index(m, j);
  if (i == j) throw std::invalid_argument("witness needs two distinct modes");
  const double value = combination(m, {{i, Axis::X, 1.0}, {j, Axis::X, x_sign}}).variance +
                       combination(m, {{i, Axis::P, 1.0}, {j, Axis::P, p_sign}}).variance;
  const double bound = 4.0 * kVacuumVariance;
  const double margin = variance_db(value, bound);
  return {value, bound, margin, margin < 0.0};
}

/// Partial transpose: p -> -p on every mode in `side`.
inline Eigen::MatrixXd partial_transpose(const Eigen::MatrixXd& cov, const std::vector<int>& side) {
  const int n = static_cast<int>(cov.rows() / 2);
  Eigen::VectorXd d = Eigen::VectorXd::Ones(2 * n);
  for (int k : side) {
    if (k < 0 || k >= n) throw UnknownModeError("mode index " + std::to_string(k) + " out of range");
    d(2 * k + 1) = -1.0;
  }
  return d.asDiagonal() * cov * d.asDiagonal();
}

/// Minimum symplectic eigenvalue of the partial transpose over the cut
/// `side` | rest. Below V0 certifies entanglement across the cut.
///
/// Estimated covariances of states on the physical boundary can dip below it by
/// sampling noise; pass `check_physical = false` for those.
inline double simon_ppt_min_eig(const Eigen::MatrixXd& cov, const std::vector<int>& side, bool check_physical = true) {
  const int n = static_cast<int>(cov.rows() / 2);
  if (side.empty() || static_cast<int>(side.size()) >= n) throw std::invalid_argument("need a proper bipartition");
  for (std::size_t a = 0; a < side.size(); ++a)
    for (std::size_t b = a + 1; b < side.size(); ++b)
      if (side[a] == side[b]) throw std::invalid_argument("bipartition lists a mode twice");
  if (check_physical && !gaussian::is_physical({Eigen::VectorXd::Zero(2 * n), cov})) {
    throw std::domain_error("covariance matrix is not physical");
  }
  return gaussian::min_symplectic_eigenvalue(partial_transpose(cov, side));
}

/// Minimum eigenvalues over the three single-mode cuts of a three-mode state.
/// All three below V0 rules out every biseparable split.
inline std::array<double, 3> tripartite_npt(const Eigen::MatrixXd& cov) {
  if (cov.rows() != 6) throw std::invalid_argument("expected a three-mode covariance");
  return {simon_ppt_min_eig(cov, {0}), simon_ppt_min_eig(cov, {1}), simon_ppt_min_eig(cov, {2})};
}

struct EprVariances {
  double x_minus;  // Var(x1 - x2)
  double p_plus;   // Var(p1 + p2)
  double x_plus;   // Var(x1 + x2)
  double p_minus;  // Var(p1 - p2)
  double x_minus_db;
  double p_plus_db;
  double x_plus_db;
  double p_minus_db;
};

/// The four joint combinations of modes i and j, in dB against 2 V0.
inline EprVariances epr_variances(const Eigen::MatrixXd& cov, int i = 0, int j = 1) {
  const Moments m{Eigen::VectorXd::Zero(cov.rows()), cov};
  check_index(m, i);
  check_index(m, j);
  if (i == j) throw std::invalid_argument("need two distinct modes");
  auto var = [&](Axis a, double sign) { return combination(m, {{i, a, 1.0}, {j, a, sign}}).variance; };
  EprVariances e{var(Axis::X, -1.0), var(Axis::P, 1.0), var(Axis::X, 1.0), var(Axis::P, -1.0), 0, 0, 0, 0};
  const double shot = 2.0 * kVacuumVariance;
  e.x_minus_db = variance_db(e.x_minus, shot);
  e.p_plus_db = variance_db(e.p_plus, shot);
  e.x_plus_db = variance_db(e.x_plus, shot);
  e.p_minus_db = variance_db(e.p_minus, shot);
  return e;
}

// ---------------------------------------------------------------------------
// Reconstruction.

struct Reconstruction {
  double mean_x;
  double mean_p;
  double var_x;
  double var_p;
  /// One third of the weighted shot noise of the summed homodyne signals.
  double reference;
  double var_x_db;
  double var_p_db;
  /// Added noise and fidelity of the reconstructed original.
  double noise;
  double fidelity;
};

inline double fidelity(double n) {
  if (!(n >= -1e-12) || !std::isfinite(n)) throw std::domain_error("added noise must be finite and >= 0");
  return 1.0 / (1.0 + std::max(n, 0.0));
}

inline Reconstruction reconstruct(const Moments& m, const std::vector<Term>& x_terms, const std::vector<Term>& p_terms) {
  const ScalarStats x = combination(m, x_terms);
  const ScalarStats p = combination(m, p_terms);
  double w2 = 0.0;
  for (const auto& t : x_terms) w2 += t.weight * t.weight;
  Reconstruction r{};
  r.mean_x = x.mean;
  r.mean_p = p.mean;
  r.var_x = x.variance;
  r.var_p = p.variance;
  r.reference = w2 * kVacuumVariance / 3.0;
  r.var_x_db = variance_db(r.var_x, r.reference);
  r.var_p_db = variance_db(r.var_p, r.reference);
  r.noise = (r.var_x + r.var_p) * (kVacuumVariance / r.reference) - 2.0 * kVacuumVariance;
  r.fidelity = 1.0 / (1.0 + std::max(r.noise, 0.0));
  return r;
}

/// Undoes a G = 2 amplifier electrically: x = sqrt(2) x_k - x_l,
/// p = sqrt(2) p_k + p_l, where k = `mode` and l is the other output.
inline Reconstruction reconstruct_pia(const Moments& m, int mode = 0) {
  if (m.n_modes() != 2) throw std::invalid_argument("amplifier reconstruction expects two output modes");
  check_index(m, mode);
  const int other = 1 - mode;
  const double w = std::numbers::sqrt2;
  return reconstruct(m, {{mode, Axis::X, w}, {other, Axis::X, -1.0}}, {{mode, Axis::P, w}, {other, Axis::P, 1.0}});
}

/// Reconstructs the original from (clone 1, clone 2, anticlone):
/// x = x_1 + x_2 - x_a, p = p_1 + p_2 + p_a.
inline Reconstruction reconstruct_clone(const Moments& m) {
  if (m.n_modes() != 3) throw std::invalid_argument("cloner reconstruction expects three output modes");
  return reconstruct(m, {{0, Axis::X, 1.0}, {1, Axis::X, 1.0}, {2, Axis::X, -1.0}},
                     {{0, Axis::P, 1.0}, {1, Axis::P, 1.0}, {2, Axis::P, 1.0}});
}

// ---------------------------------------------------------------------------
// Added noise and fidelity.

/// Mean transfer from the original amplitude to one output, per quadrature.
/// An anticlone has gain_p = -1.
struct MeanGain {
  double x;
  double p;
};

struct NoiseBudget {
  std::vector<double> n;
  std::vector<MeanGain> gains;

  double product() const {
    return std::accumulate(n.begin(), n.end(), 1.0, [](double a, double b) { return a * b; });
  }
};

inline constexpr double kUnitGainTolerance = 1e-9;

/// Excess quadrature noise n = Var_x + Var_p - 2 V0 of an output whose mean
/// follows the original with unit magnitude gain. The ideal symmetric 1 -> 2
/// clone has n = 1/2. Outputs with any other gain are refused.
inline double added_noise(double var_x, double var_p, const MeanGain& gain) {
  if (std::abs(std::abs(gain.x) - 1.0) > kUnitGainTolerance || std::abs(std::abs(gain.p) - 1.0) > kUnitGainTolerance) {
    throw std::domain_error("mean transfer gain (" + std::to_string(gain.x) + ", " + std::to_string(gain.p) +
                            ") is not unity; added noise is undefined without rescaling");
  }
  return var_x + var_p - 2.0 * kVacuumVariance;
}

/// Noise of an output for a vacuum original, from variances alone.
inline double vacuum_original_noise(double var_x, double var_p) { return var_x + var_p - 2.0 * kVacuumVariance; }

inline NoiseBudget added_noise(const Moments& m, const std::vector<int>& outputs, const std::vector<MeanGain>& gains) {
  if (outputs.size() != gains.size()) throw std::invalid_argument("need one mean gain per output");
  NoiseBudget b;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    check_index(m, outputs[k]);
    const int i = 2 * outputs[k];
    b.n.push_back(added_noise(m.cov(i, i), m.cov(i + 1, i + 1), gains[k]));
    b.gains.push_back(gains[k]);
  }
  return b;
}

/// Measures the mean transfer from the inputs `originals` (all driven with the
/// same amplitude) to every program output, using the Heisenberg engine.
inline std::vector<MeanGain> mean_transfer_gains(circuits::Program prog, const std::vector<circuits::ModeId>& originals) {
  auto drive = [&](double x, double p) {
    for (const auto& o : originals) prog.set_input_mean(o, x, p);
    return circuits::analytic_moments(prog).mean;
  };
  const Eigen::VectorXd base = drive(0.0, 0.0);
  const Eigen::VectorXd dx = drive(1.0, 0.0) - base;
  const Eigen::VectorXd dp = drive(0.0, 1.0) - base;
  std::vector<MeanGain> g;
  for (int k = 0; k < static_cast<int>(base.size() / 2); ++k) {
    // A gain must map x to x and p to p; cross terms mean a rotated output.
    if (std::abs(dx(2 * k + 1)) > kUnitGainTolerance || std::abs(dp(2 * k)) > kUnitGainTolerance) {
      g.push_back({std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()});
    } else {
      g.push_back({dx(2 * k), dp(2 * k + 1)});
    }
  }
  return g;
}

struct FidelityReport {
  std::vector<double> fidelity;
  double classical_limit;
  double cloning_limit;
};

inline double kl_limit_fidelity(int k, int l);
inline double kl_classical_fidelity(int k);

inline FidelityReport fidelity_report(const NoiseBudget& b, int k = 1, int l = 2) {
  FidelityReport r{{}, kl_classical_fidelity(k), kl_limit_fidelity(k, l)};
  for (double n : b.n) r.fidelity.push_back(fidelity(n));
  return r;
}

// ---------------------------------------------------------------------------
// K -> L cloning limits.

inline void check_kl(int k, int l) {
  if (k < 1 || l <= k) throw std::domain_error("need 1 <= K < L");
}

inline double cloning_cost(const std::vector<double>& n, const std::vector<double>& c) {
  if (n.size() != c.size()) throw std::invalid_argument("need one weight per clone");
  double cost = 0.0;
  for (std::size_t k = 0; k < n.size(); ++k) {
    if (!(n[k] >= 0.0)) throw std::domain_error("noise must be >= 0");
    if (!(c[k] > 0.0)) throw std::domain_error("cost weights must be > 0");
    cost += c[k] * n[k];
  }
  return cost;
}

/// (sum sqrt n_k)^2 - (L - K)(sum n_k + 1); zero on the optimal boundary.
inline double kl_noise_relation(const std::vector<double>& n, int k, int l) {
  check_kl(k, l);
  if (static_cast<int>(n.size()) != l) throw std::invalid_argument("need one noise value per clone");
  for (double v : n)
    if (!(v >= 0.0)) throw std::domain_error("noise must be >= 0");
  return circuits::kl_relation_residual(n, k, l);
}

inline double kl_symmetric_noise(int k, int l) {
  check_kl(k, l);
  return 1.0 / k - 1.0 / l;
}

inline double kl_limit_fidelity(int k, int l) {
  check_kl(k, l);
  const double kl = static_cast<double>(k) * l;
  return kl / (kl - k + l);
}

inline double kl_classical_fidelity(int k) {
  if (k < 1) throw std::domain_error("need K >= 1");
  return static_cast<double>(k) / (k + 1);
}

inline double asymmetric_gain(const std::vector<double>& n) {
  double s = 0.0;
  for (double v : n) {
    if (!(v >= 0.0)) throw std::domain_error("noise must be >= 0");
    s += v;
  }
  return 1.0 + s;
}

/// Second noise value of an asymmetric 1 -> 2 cloner on the optimal boundary.
inline double asymmetric_partner_noise(double n1) {
  if (!(n1 > 0.0)) throw std::domain_error("noise must be > 0");
  return 0.25 / n1;
}

}  // namespace cvamp::analysis
