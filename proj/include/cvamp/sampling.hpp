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
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvamp/circuits.hpp"
#include "cvamp/common.hpp"
#include "cvamp/gaussian.hpp"

/// Monte Carlo homodyne records, likelihood fits and shot-by-shot circuit runs.
namespace cvamp::sampling {

using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Phase-scanned homodyne records.

struct ScanDataset {
  std::string mode;
  std::vector<double> phases;
  std::vector<double> outcomes;

  std::size_t size() const { return phases.size(); }
};

inline double wrap_phase(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(phi, two_pi);
  if (w < 0.0) w += two_pi;
  if (w >= two_pi) w = 0.0;
  return w;
}

/// One independent draw of x cos(phi) + p sin(phi) per entry of `phases`.
inline ScanDataset sample_scan(const gaussian::GaussianState& s, int mode, const std::vector<double>& phases, Rng& rng,
                               std::string label = {}) {
  if (phases.empty()) throw std::invalid_argument("phase list is empty");
  if (mode < 0 || mode >= s.n_modes()) throw UnknownModeError("mode index " + std::to_string(mode) + " out of range");
  ScanDataset d{label.empty() ? "mode-" + std::to_string(mode) : std::move(label), {}, {}};
  d.phases.reserve(phases.size());
  d.outcomes.reserve(phases.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double phi : phases) {
    const gaussian::ScalarGaussian m = gaussian::quadrature_marginal(s, mode, phi);
    d.phases.push_back(wrap_phase(phi));
    d.outcomes.push_back(m.mean + std::sqrt(std::max(m.variance, 0.0)) * normal(rng));
  }
  return d;
}

/// `n` phases evenly spread over [0, 2 pi), as a slow linear scan would give.
inline std::vector<double> linear_scan(std::size_t n) {
  std::vector<double> phases(n);
  for (std::size_t k = 0; k < n; ++k) phases[k] = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
  return phases;
}

inline void write_csv(std::ostream& os, const ScanDataset& d) {
  os << "phase_rad,outcome\n";
  os.precision(17);
  for (std::size_t k = 0; k < d.size(); ++k) os << d.phases[k] << ',' << d.outcomes[k] << '\n';
}

inline ScanDataset read_csv(std::istream& is, std::string mode = {}) {
  std::string line;
  if (!std::getline(is, line) || line != "phase_rad,outcome") throw std::runtime_error("expected header 'phase_rad,outcome'");
  ScanDataset d{std::move(mode), {}, {}};
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("missing comma");
      d.phases.push_back(std::stod(line.substr(0, comma)));
      d.outcomes.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw std::runtime_error("malformed record on line " + std::to_string(lineno));
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Maximum-likelihood fit of single-mode Gaussian moments.

struct EstimatedMoments {
  double mean_x = 0.0;
  double mean_p = 0.0;
  double vxx = 0.0;
  double vpp = 0.0;
  double vxp = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
  /// Standard errors of (mean_x, mean_p, vxx, vpp, vxp) from the Fisher information.
  std::array<double, 5> stderr_{};
  bool physical = true;

  std::array<double, 5> params() const { return {mean_x, mean_p, vxx, vpp, vxp}; }
};

inline nlohmann::json to_json(const EstimatedMoments& e) {
  return {{"mean_x", e.mean_x}, {"mean_p", e.mean_p},   {"vxx", e.vxx},
          {"vpp", e.vpp},       {"vxp", e.vxp},         {"log_likelihood", e.log_likelihood},
          {"iterations", e.iterations},
          {"stderr", {{"mean_x", e.stderr_[0]}, {"mean_p", e.stderr_[1]}, {"vxx", e.stderr_[2]}, {"vpp", e.stderr_[3]}, {"vxp", e.stderr_[4]}}},
          {"physical", e.physical}};
}

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxFitIterations = 500;
inline constexpr double kFitTolerance = 1e-10;

namespace detail {

struct Design {
  std::vector<double> c;
  std::vector<double> s;
  const std::vector<double>* q;
};

inline double log_likelihood(const Design& d, const std::array<double, 5>& th) {
  constexpr double log_2pi = 1.8378770664093453;
  double ll = 0.0;
  for (std::size_t j = 0; j < d.c.size(); ++j) {
    const double c = d.c[j];
    const double s = d.s[j];
    const double v = th[2] * c * c + th[3] * s * s + 2.0 * th[4] * s * c;
    if (!(v > 0.0)) return -std::numeric_limits<double>::infinity();
    const double r = (*d.q)[j] - th[0] * c - th[1] * s;
    ll -= 0.5 * (log_2pi + std::log(v) + r * r / v);
  }
  return ll;
}

// Derivative weight of parameter k for record j: dm/dtheta for the means,
// dV/dtheta for the covariance entries.
inline double weight(const Design& d, int k, std::size_t j) {
  const double c = d.c[j];
  const double s = d.s[j];
  switch (k) {
    case 0: return c;
    case 1: return s;
    case 2: return c * c;
    case 3: return s * s;
    default: return 2.0 * s * c;
  }
}

inline int distinct_phases_mod_pi(const std::vector<double>& phases) {
  std::set<long long> bins;
  for (double phi : phases) {
    double w = std::fmod(phi, std::numbers::pi);
    if (w < 0.0) w += std::numbers::pi;
    long long b = std::llround(w * 1e9);
    if (b == std::llround(std::numbers::pi * 1e9)) b = 0;
    bins.insert(b);
    if (bins.size() >= 3) break;
  }
  return static_cast<int>(bins.size());
}

}  // namespace detail

/// Maximizes sum_j log N(q_j; m(phi_j), V(phi_j)) with
///   m(phi) = x cos(phi) + p sin(phi),
///   V(phi) = Vxx cos^2 + Vpp sin^2 + 2 Vxp sin cos,
/// starting from a least-squares fit and iterating Fisher scoring steps.
inline EstimatedMoments fit_moments(const ScanDataset& data) {
  const std::size_t n = data.size();
  if (data.outcomes.size() != n) throw std::invalid_argument("phase and outcome columns differ in length");
  if (n < 50) throw std::invalid_argument("fit needs at least 50 records");
  if (detail::distinct_phases_mod_pi(data.phases) < 3) throw FitError("insufficient phase coverage");

  detail::Design d{{}, {}, &data.outcomes};
  d.c.reserve(n);
  d.s.reserve(n);
  for (double phi : data.phases) {
    d.c.push_back(std::cos(phi));
    d.s.push_back(std::sin(phi));
  }

  // Least squares for the means, then for the variances on squared residuals.
  Eigen::Matrix2d a2 = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b2 = Eigen::Vector2d::Zero();
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::Vector2d u(d.c[j], d.s[j]);
    a2 += u * u.transpose();
    b2 += u * data.outcomes[j];
  }
  const Eigen::Vector2d mu = a2.ldlt().solve(b2);
  Eigen::Matrix3d a3 = Eigen::Matrix3d::Zero();
  Eigen::Vector3d b3 = Eigen::Vector3d::Zero();
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::Vector3d w(d.c[j] * d.c[j], d.s[j] * d.s[j], 2.0 * d.s[j] * d.c[j]);
    const double r = data.outcomes[j] - mu(0) * d.c[j] - mu(1) * d.s[j];
    a3 += w * w.transpose();
    b3 += w * (r * r);
  }
  const Eigen::Vector3d v0 = a3.colPivHouseholderQr().solve(b3);
  std::array<double, 5> th{mu(0), mu(1), v0(0), v0(1), v0(2)};
  // Keep the starting point inside the feasible region.
  double floor_var = 1e-6 * std::max({std::abs(v0(0)), std::abs(v0(1)), 1e-12});
  th[2] = std::max(th[2], floor_var);
  th[3] = std::max(th[3], floor_var);
  const double lim = 0.99 * std::sqrt(th[2] * th[3]);
  th[4] = std::clamp(th[4], -lim, lim);

  double ll = detail::log_likelihood(d, th);
  if (!std::isfinite(ll)) throw FitError("could not find a feasible starting point");
  auto fisher_info = [&](const std::array<double, 5>& t) {
    Eigen::Matrix<double, 5, 5> info = Eigen::Matrix<double, 5, 5>::Zero();
    for (std::size_t j = 0; j < n; ++j) {
      const double c = d.c[j];
      const double s = d.s[j];
      const double v = t[2] * c * c + t[3] * s * s + 2.0 * t[4] * s * c;
      Eigen::Matrix<double, 5, 1> w;
      for (int k = 0; k < 5; ++k) w(k) = detail::weight(d, k, j);
      info.topLeftCorner<2, 2>() += w.head<2>() * w.head<2>().transpose() / v;
      info.bottomRightCorner<3, 3>() += w.tail<3>() * w.tail<3>().transpose() / (2.0 * v * v);
    }
    return info;
  };

  // Fisher scoring on all five parameters with step halving.
  int it = 0;
  bool converged = false;
  while (it < kMaxFitIterations) {
    ++it;
    const double ll_prev = ll;
    Eigen::Matrix<double, 5, 1> g = Eigen::Matrix<double, 5, 1>::Zero();
    for (std::size_t j = 0; j < n; ++j) {
      const double c = d.c[j];
      const double s = d.s[j];
      const double v = th[2] * c * c + th[3] * s * s + 2.0 * th[4] * s * c;
      const double r = data.outcomes[j] - th[0] * c - th[1] * s;
      for (int k = 0; k < 5; ++k) {
        const double w = detail::weight(d, k, j);
        g(k) += k < 2 ? r * w / v : 0.5 * w * (r * r - v) / (v * v);
      }
    }
    const Eigen::Matrix<double, 5, 1> step = fisher_info(th).ldlt().solve(g);
    double scale = 1.0;
    bool moved = false;
    for (int halve = 0; halve < 60; ++halve) {
      std::array<double, 5> trial = th;
      for (int k = 0; k < 5; ++k) trial[k] += scale * step(k);
      const double ll_trial = detail::log_likelihood(d, trial);
      if (ll_trial >= ll) {
        th = trial;
        ll = ll_trial;
        moved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!moved || (it > 1 && std::abs(ll - ll_prev) <= kFitTolerance * std::abs(ll))) {
      converged = true;
      break;
    }
  }
  if (!converged) throw FitError("likelihood maximization did not converge in " + std::to_string(kMaxFitIterations) + " iterations");

  const Eigen::Matrix<double, 5, 5> cov = fisher_info(th).inverse();

  EstimatedMoments e;
  e.mean_x = th[0];
  e.mean_p = th[1];
  e.vxx = th[2];
  e.vpp = th[3];
  e.vxp = th[4];
  e.log_likelihood = ll;
  e.iterations = it;
  for (int k = 0; k < 5; ++k) e.stderr_[k] = std::sqrt(std::max(cov(k, k), 0.0));
  // Reported, not clamped: the uncertainty relation with a 5-sigma allowance.
  const double det = e.vxx * e.vpp - e.vxp * e.vxp;
  const double det_se = std::sqrt(std::pow(e.vpp * e.stderr_[2], 2) + std::pow(e.vxx * e.stderr_[3], 2) +
                                  std::pow(2.0 * e.vxp * e.stderr_[4], 2));
  e.physical = det > 0.0 && det + 5.0 * det_se >= kVacuumVariance * kVacuumVariance;
  return e;
}

// ---------------------------------------------------------------------------
// Averaged power in dB.

inline constexpr int kBootstrapSegments = 20;

struct PowerEstimate {
  double db;
  double ci_low;
  double ci_high;
  double stderr_db;
};

namespace detail {

inline double sample_variance(const double* x, std::size_t n) {
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double delta = x[k] - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (x[k] - mean);
  }
  return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
}

inline std::vector<double> segment_variances(const std::vector<double>& x) {
  if (x.size() < static_cast<std::size_t>(2 * kBootstrapSegments)) {
    throw std::invalid_argument("power estimate needs at least 40 samples per stream");
  }
  std::vector<double> out;
  const std::size_t n = x.size();
  for (int s = 0; s < kBootstrapSegments; ++s) {
    const std::size_t lo = n * s / kBootstrapSegments;
    const std::size_t hi = n * (s + 1) / kBootstrapSegments;
    out.push_back(sample_variance(x.data() + lo, hi - lo));
  }
  return out;
}

}  // namespace detail

/// 10 log10(Var(samples) / Var(shot)) with a 95% interval from resampling the
/// 20 contiguous segments of each stream.
inline PowerEstimate power_db(const std::vector<double>& samples, const std::vector<double>& shot,
                              std::uint64_t seed = 20260101, int resamples = 2000) {
  if (samples.empty() || shot.empty()) throw std::invalid_argument("power estimate needs nonempty streams");
  const double v_ref = detail::sample_variance(shot.data(), shot.size());
  if (!(v_ref > 0.0)) throw std::domain_error("reference stream has zero variance");
  const double v = detail::sample_variance(samples.data(), samples.size());
  if (!(v > 0.0)) throw std::domain_error("signal stream has zero variance");
  PowerEstimate est{10.0 * std::log10(v / v_ref), 0.0, 0.0, 0.0};

  const auto seg_s = detail::segment_variances(samples);
  const auto seg_r = detail::segment_variances(shot);
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, kBootstrapSegments - 1);
  std::vector<double> boot;
  boot.reserve(resamples);
  for (int b = 0; b < resamples; ++b) {
    double ss = 0.0;
    double sr = 0.0;
    for (int k = 0; k < kBootstrapSegments; ++k) {
      ss += seg_s[pick(rng)];
      sr += seg_r[pick(rng)];
    }
    boot.push_back(10.0 * std::log10(ss / sr));
  }
  std::sort(boot.begin(), boot.end());
  const auto quantile = [&](double q) { return boot[static_cast<std::size_t>(q * (resamples - 1))]; };
  est.ci_low = quantile(0.025);
  est.ci_high = quantile(0.975);
  double mean = 0.0;
  for (double x : boot) mean += x;
  mean /= resamples;
  double var = 0.0;
  for (double x : boot) var += (x - mean) * (x - mean);
  est.stderr_db = std::sqrt(var / (resamples - 1));
  return est;
}

// ---------------------------------------------------------------------------
// Shot-by-shot execution of a circuit program.

enum class Estimator {
  /// Each shot draws one full set of output quadratures.
  Sampled,
  /// Each shot contributes its conditional mean and covariance.
  ConditionalMixture,
};

struct MonteCarloResult {
  Moments moments;
  Eigen::VectorXd mean_se;
  Eigen::MatrixXd cov_se;
  std::size_t shots = 0;
};

/// Runs one shot: homodyne outcomes are sampled, the remaining modes are
/// conditioned and displaced by the fed-forward outcomes. Returns the final
/// conditional state of the program outputs.
inline gaussian::GaussianState run_shot(const circuits::CompiledProgram& c, Rng& rng) {
  gaussian::GaussianState s = c.initial;
  for (const auto& instr : c.instrs) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, gaussian::SymplecticEl>) {
            gaussian::apply_inplace(s, v);
          } else if constexpr (std::is_same_v<T, circuits::CompiledProgram::Loss>) {
            gaussian::loss_inplace(s, v.mode, v.eta);
          } else if constexpr (std::is_same_v<T, circuits::CompiledProgram::Measure>) {
            const double phi = v.axis == Axis::X ? 0.0 : 0.5 * std::numbers::pi;
            gaussian::HomodyneResult h = gaussian::homodyne(s, v.mode, phi, rng);
            s = std::move(h.conditioned);
            for (const auto& t : v.targets) {
              const int idx = t.mode > v.mode ? t.mode - 1 : t.mode;
              s.mean(2 * idx + axis_offset(t.axis)) += t.gain * h.outcome;
            }
          } else {
            std::vector<int> keep;
            for (int k = 0; k < s.n_modes(); ++k)
              if (k != v.mode) keep.push_back(k);
            s = gaussian::partial_trace(s, keep);
          }
        },
        instr);
  }
  return gaussian::partial_trace(s, c.outputs);
}

/// Empirical output moments over `n_shots` independent runs, with standard
/// errors sqrt(S_ii / N) for means and sqrt((S_ii S_jj + S_ij^2) / N) for
/// covariance entries.
inline MonteCarloResult monte_carlo_circuit(const circuits::Program& prog, std::size_t n_shots, Rng& rng,
                                            Estimator estimator = Estimator::Sampled) {
  if (n_shots < 2) throw std::invalid_argument("need at least two shots");
  const circuits::CompiledProgram c = circuits::compile(prog);
  const int dim = 2 * static_cast<int>(c.outputs.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd cond_cov = Eigen::MatrixXd::Zero(dim, dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(dim);
  Eigen::VectorXd sample(dim);
  for (std::size_t k = 0; k < n_shots; ++k) {
    const gaussian::GaussianState out = run_shot(c, rng);
    if (estimator == Estimator::Sampled) {
      // The conditional covariance may be singular (pure feedforward
      // cancellation), so factor it with a pivoted LDL^T.
      Eigen::LDLT<Eigen::MatrixXd> ldlt(out.cov);
      for (int i = 0; i < dim; ++i) z(i) = normal(rng);
      const Eigen::VectorXd dsq = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
      Eigen::VectorXd y = ldlt.matrixL() * dsq.cwiseProduct(z);
      sample = out.mean + (ldlt.transpositionsP().transpose() * y);
    } else {
      sample = out.mean;
      cond_cov += out.cov;
    }
    const Eigen::VectorXd delta = sample - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (sample - mean).transpose();
  }
  const double nn = static_cast<double>(n_shots);
  Eigen::MatrixXd cov = m2 / (nn - 1.0);
  if (estimator == Estimator::ConditionalMixture) cov += cond_cov / nn;
  cov = 0.5 * (cov + cov.transpose());

  MonteCarloResult r;
  r.moments = {mean, cov};
  r.shots = n_shots;
  r.mean_se = (cov.diagonal() / nn).cwiseSqrt();
  r.cov_se.resize(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) r.cov_se(i, j) = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / nn);
  return r;
}

/// Output quadrature stream of one program output (x at phase 0, p at pi/2)
/// over `n_shots` runs, for power estimates.
inline std::vector<double> quadrature_stream(const circuits::Program& prog, int output, Axis axis, std::size_t n_shots,
                                             Rng& rng) {
  const circuits::CompiledProgram c = circuits::compile(prog);
  if (output < 0 || output >= static_cast<int>(c.outputs.size())) throw UnknownModeError("output index out of range");
  std::vector<double> out;
  out.reserve(n_shots);
  const double phi = axis == Axis::X ? 0.0 : 0.5 * std::numbers::pi;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < n_shots; ++k) {
    const gaussian::GaussianState s = run_shot(c, rng);
    const gaussian::ScalarGaussian m = gaussian::quadrature_marginal(s, output, phi);
    out.push_back(m.mean + std::sqrt(std::max(m.variance, 0.0)) * normal(rng));
  }
  return out;
}

/// Stream of vacuum quadrature samples, the shot-noise reference.
inline std::vector<double> shot_noise_stream(std::size_t n_shots, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(kVacuumVariance));
  std::vector<double> out(n_shots);
  for (auto& v : out) v = normal(rng);
  return out;
}

}  // namespace cvamp::sampling
