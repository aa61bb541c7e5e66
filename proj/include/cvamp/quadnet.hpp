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
#include <cmath>
#include <compare>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cvamp/common.hpp"

/// Heisenberg-picture engine.
///
/// Every live quadrature is kept as an exact linear form over the primordial
/// input quadratures plus a constant offset. Coefficients are stored sparsely
/// and a coefficient is dropped only when it is exactly zero, so cancellations
/// that a circuit performs by construction show up as absent terms.
namespace cvamp::quadnet {

using ModeId = std::string;

struct QuadKey {
  ModeId mode;
  Axis axis;

  auto operator<=>(const QuadKey&) const = default;
};

class QuadExpr {
 public:
  QuadExpr() = default;

  static QuadExpr variable(const ModeId& mode, Axis axis) {
    QuadExpr e;
    e.terms_.emplace(QuadKey{mode, axis}, 1.0);
    return e;
  }

  double coeff(const ModeId& mode, Axis axis) const {
    auto it = terms_.find(QuadKey{mode, axis});
    return it == terms_.end() ? 0.0 : it->second;
  }

  bool has_term(const ModeId& mode, Axis axis) const {
    return terms_.count(QuadKey{mode, axis}) != 0;
  }

  double constant() const { return constant_; }
  const std::map<QuadKey, double>& terms() const { return terms_; }

  void add_term(const QuadKey& key, double c) {
    if (c == 0.0) return;
    auto [it, inserted] = terms_.emplace(key, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  void add_constant(double c) { constant_ += c; }

  QuadExpr& operator+=(const QuadExpr& other) {
    for (const auto& [k, c] : other.terms_) add_term(k, c);
    constant_ += other.constant_;
    return *this;
  }

  QuadExpr& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      constant_ = 0.0;
      return *this;
    }
    for (auto& [k, c] : terms_) c *= s;
    constant_ *= s;
    return *this;
  }

  friend QuadExpr operator*(double s, QuadExpr e) { return e *= s; }
  friend QuadExpr operator+(QuadExpr a, const QuadExpr& b) { return a += b; }
  friend QuadExpr operator-(QuadExpr a, const QuadExpr& b) { return a += (-1.0 * b); }

  bool operator==(const QuadExpr&) const = default;

 private:
  std::map<QuadKey, double> terms_;
  double constant_ = 0.0;
};

struct ModeExprs {
  QuadExpr x;
  QuadExpr p;

  const QuadExpr& operator[](Axis a) const { return a == Axis::X ? x : p; }
  QuadExpr& operator[](Axis a) { return a == Axis::X ? x : p; }
};

class NetworkState {
 public:
  NetworkState() = default;

  const std::vector<ModeId>& live_modes() const { return live_; }
  const std::vector<ModeId>& inputs() const { return inputs_; }

  bool is_live(const ModeId& m) const { return exprs_.count(m) != 0; }
  bool is_input(const ModeId& m) const { return input_set_.count(m) != 0; }

  const ModeExprs& exprs(const ModeId& m) const {
    auto it = exprs_.find(m);
    if (it == exprs_.end()) throw UnknownModeError("mode '" + m + "' is not live");
    return it->second;
  }
  const QuadExpr& expr(const ModeId& m, Axis a) const { return exprs(m)[a]; }

  ModeExprs& mutable_exprs(const ModeId& m) {
    auto it = exprs_.find(m);
    if (it == exprs_.end()) throw UnknownModeError("mode '" + m + "' is not live");
    return it->second;
  }

  /// Registers a fresh primordial mode and makes it live with identity forms.
  void add_input(const ModeId& m) {
    if (input_set_.count(m) || exprs_.count(m)) {
      throw std::invalid_argument("duplicate mode label '" + m + "'");
    }
    inputs_.push_back(m);
    input_set_.insert(m);
    live_.push_back(m);
    exprs_.emplace(m, ModeExprs{QuadExpr::variable(m, Axis::X), QuadExpr::variable(m, Axis::P)});
  }

  void remove_live(const ModeId& m) {
    if (exprs_.erase(m) == 0) throw UnknownModeError("mode '" + m + "' is not live");
    live_.erase(std::find(live_.begin(), live_.end(), m));
  }

 private:
  std::vector<ModeId> live_;
  std::vector<ModeId> inputs_;
  std::set<ModeId> input_set_;
  std::map<ModeId, ModeExprs> exprs_;
};

/// First and second moments of one primordial input. Inputs are mutually
/// uncorrelated and have no x-p correlation.
///
/// A variance of 0 paired with +inf on the conjugate axis stands for the
/// infinite-squeezing limit; it is only meaningful for networks that cancel the
/// infinite quadrature exactly.
struct InputMoments {
  double mean_x = 0.0;
  double mean_p = 0.0;
  double var_x = kVacuumVariance;
  double var_p = kVacuumVariance;

  static InputMoments vacuum() { return {}; }
  static InputMoments coherent(double x, double p) { return {x, p, kVacuumVariance, kVacuumVariance}; }
  static InputMoments squeezed(Axis axis, double squeezed_var, double anti_var) {
    InputMoments m;
    (axis == Axis::X ? m.var_x : m.var_p) = squeezed_var;
    (axis == Axis::X ? m.var_p : m.var_x) = anti_var;
    return m;
  }

  double variance(Axis a) const { return a == Axis::X ? var_x : var_p; }
  double mean(Axis a) const { return a == Axis::X ? mean_x : mean_p; }
};

class InputEnsemble {
 public:
  void set(const ModeId& m, const InputMoments& moments) {
    validate(m, moments);
    entries_[m] = moments;
  }

  const InputMoments& at(const ModeId& m) const {
    auto it = entries_.find(m);
    if (it == entries_.end()) {
      throw std::invalid_argument("input ensemble has no entry for mode '" + m + "'");
    }
    return it->second;
  }

  bool contains(const ModeId& m) const { return entries_.count(m) != 0; }

 private:
  static void validate(const ModeId& m, const InputMoments& e) {
    const bool limit = (e.var_x == 0.0 && std::isinf(e.var_p)) || (e.var_p == 0.0 && std::isinf(e.var_x));
    if (limit) return;
    if (!(e.var_x > 0.0) || !(e.var_p > 0.0) || !std::isfinite(e.var_x) || !std::isfinite(e.var_p)) {
      throw std::invalid_argument("input '" + m + "' needs positive finite variances");
    }
    // Relative slack so that V0 * 10^(s/10) * V0 / (V0 * 10^(s/10)) passes.
    if (e.var_x * e.var_p < kVacuumVariance * kVacuumVariance * (1.0 - 1e-12)) {
      throw std::invalid_argument("input '" + m + "' violates the uncertainty relation");
    }
  }

  std::map<ModeId, InputMoments> entries_;
};

// ---------------------------------------------------------------------------
// Operations. Each takes the network by value and returns the updated copy.

inline NetworkState new_network(const std::vector<ModeId>& inputs) {
  NetworkState net;
  for (const auto& m : inputs) net.add_input(m);
  return net;
}

inline NetworkState add_input(NetworkState net, const ModeId& m) {
  net.add_input(m);
  return net;
}

/// x_a' = sqrt(1-R) x_a + sqrt(R) x_b,  x_b' = -sqrt(R) x_a + sqrt(1-R) x_b, same for p.
inline NetworkState apply_beamsplitter(NetworkState net, const ModeId& a, const ModeId& b, double reflectivity) {
  if (!(reflectivity >= 0.0 && reflectivity <= 1.0)) {
    throw std::invalid_argument("beamsplitter reflectivity must lie in [0, 1]");
  }
  if (a == b) throw std::invalid_argument("beamsplitter needs two distinct modes");
  const double t = std::sqrt(1.0 - reflectivity);
  const double r = std::sqrt(reflectivity);
  ModeExprs& ea = net.mutable_exprs(a);
  ModeExprs& eb = net.mutable_exprs(b);
  for (Axis ax : {Axis::X, Axis::P}) {
    const QuadExpr qa = ea[ax];
    const QuadExpr qb = eb[ax];
    ea[ax] = t * qa + r * qb;
    eb[ax] = (-r) * qa + t * qb;
  }
  return net;
}

/// x' = x cos(phi) - p sin(phi),  p' = x sin(phi) + p cos(phi).
inline NetworkState apply_phase(NetworkState net, const ModeId& m, double phi) {
  ModeExprs& e = net.mutable_exprs(m);
  const auto [c, s] = exact_cos_sin(phi);
  const QuadExpr x = e.x;
  const QuadExpr p = e.p;
  e.x = c * x + (-s) * p;
  e.p = s * x + c * p;
  return net;
}

/// x' = e^{-r} x,  p' = e^{r} p.
inline NetworkState apply_squeeze(NetworkState net, const ModeId& m, double r) {
  ModeExprs& e = net.mutable_exprs(m);
  e.x *= std::exp(-r);
  e.p *= std::exp(r);
  return net;
}

inline NetworkState apply_displacement(NetworkState net, const ModeId& m, double dx, double dp) {
  ModeExprs& e = net.mutable_exprs(m);
  e.x.add_constant(dx);
  e.p.add_constant(dp);
  return net;
}

struct FeedTarget {
  ModeId mode;
  Axis axis;
  double gain;
};

/// Homodyne measurement of `axis` on `measured`, followed by displacing every
/// target quadrature by gain times the outcome. The measured mode is consumed.
inline NetworkState measure_feedforward(NetworkState net, const ModeId& measured, Axis axis,
                                        const std::vector<FeedTarget>& targets) {
  const QuadExpr outcome = net.expr(measured, axis);
  for (const auto& t : targets) {
    if (t.mode == measured) throw std::invalid_argument("feedforward target equals the measured mode");
    if (!net.is_live(t.mode)) throw UnknownModeError("mode '" + t.mode + "' is not live");
  }
  for (const auto& t : targets) net.mutable_exprs(t.mode)[t.axis] += t.gain * outcome;
  net.remove_live(measured);
  return net;
}

/// Drops a live mode without measuring it.
inline NetworkState discard(NetworkState net, const ModeId& m) {
  net.remove_live(m);
  return net;
}

/// Transmission `eta` onto `m`, mixing in the fresh vacuum input `vacuum`.
inline NetworkState apply_loss(NetworkState net, const ModeId& m, double eta, const ModeId& vacuum) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("loss transmission must lie in [0, 1]");
  net.add_input(vacuum);
  net = apply_beamsplitter(std::move(net), m, vacuum, 1.0 - eta);
  return discard(std::move(net), vacuum);
}

// ---------------------------------------------------------------------------
// Moments.

namespace detail {

inline int index_of(const std::vector<ModeId>& v, const ModeId& m) {
  auto it = std::find(v.begin(), v.end(), m);
  return it == v.end() ? -1 : static_cast<int>(it - v.begin());
}

// Product coeff_a * coeff_b * var that keeps 0 * inf at 0 for absent terms.
inline double weighted(double ca, double cb, double var) {
  if (ca == 0.0 || cb == 0.0) return 0.0;
  return ca * cb * var;
}

}  // namespace detail

/// Stacked coefficient matrix: rows follow live modes (x, p), columns the inputs (x, p).
inline Eigen::MatrixXd coefficient_matrix(const NetworkState& net) {
  const auto& live = net.live_modes();
  const auto& in = net.inputs();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * static_cast<int>(live.size()), 2 * static_cast<int>(in.size()));
  for (int i = 0; i < static_cast<int>(live.size()); ++i) {
    for (Axis ax : {Axis::X, Axis::P}) {
      for (const auto& [key, c] : net.expr(live[i], ax).terms()) {
        const int col = detail::index_of(in, key.mode);
        s(2 * i + axis_offset(ax), 2 * col + axis_offset(key.axis)) = c;
      }
    }
  }
  return s;
}

/// Largest entry of |S Omega_in S^T - Omega_out|; zero when the live quadratures
/// keep canonical commutators.
inline double commutator_defect(const NetworkState& net) {
  const Eigen::MatrixXd s = coefficient_matrix(net);
  const int n_in = static_cast<int>(net.inputs().size());
  const int n_out = static_cast<int>(net.live_modes().size());
  if (n_out == 0) return 0.0;
  const Eigen::MatrixXd d = s * symplectic_form(n_in) * s.transpose() - symplectic_form(n_out);
  return d.cwiseAbs().maxCoeff();
}

inline Moments output_moments(const NetworkState& net, const InputEnsemble& ens) {
  const auto& live = net.live_modes();
  const int n = static_cast<int>(live.size());
  Moments out{Eigen::VectorXd::Zero(2 * n), Eigen::MatrixXd::Zero(2 * n, 2 * n)};

  std::vector<const QuadExpr*> rows;
  rows.reserve(2 * n);
  for (const auto& m : live) {
    rows.push_back(&net.expr(m, Axis::X));
    rows.push_back(&net.expr(m, Axis::P));
  }
  for (int i = 0; i < 2 * n; ++i) {
    double mu = rows[i]->constant();
    for (const auto& [key, c] : rows[i]->terms()) mu += c * ens.at(key.mode).mean(key.axis);
    out.mean(i) = mu;
  }
  for (int i = 0; i < 2 * n; ++i) {
    for (int j = i; j < 2 * n; ++j) {
      double v = 0.0;
      for (const auto& [key, ci] : rows[i]->terms()) {
        v += detail::weighted(ci, rows[j]->coeff(key.mode, key.axis), ens.at(key.mode).variance(key.axis));
      }
      out.cov(i, j) = v;
      out.cov(j, i) = v;
    }
  }
  return out;
}

struct Observable {
  ModeId mode;
  Axis axis;
  double weight;
};

struct ScalarMoments {
  double mean;
  double variance;
};

/// Mean and variance of sum_k weight_k * quadrature_k over live output modes.
inline ScalarMoments expr_covariance(const NetworkState& net, const InputEnsemble& ens,
                                     const std::vector<Observable>& obs) {
  QuadExpr combined;
  for (const auto& o : obs) combined += o.weight * net.expr(o.mode, o.axis);
  ScalarMoments r{combined.constant(), 0.0};
  for (const auto& [key, c] : combined.terms()) {
    const auto& e = ens.at(key.mode);
    r.mean += c * e.mean(key.axis);
    r.variance += detail::weighted(c, c, e.variance(key.axis));
  }
  return r;
}

}  // namespace cvamp::quadnet
