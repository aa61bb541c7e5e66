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
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "cvamp/common.hpp"
#include "cvamp/gaussian.hpp"
#include "cvamp/quadnet.hpp"

/// Circuit programs and builders for the feedforward amplifier and cloners.
///
/// A Program is an engine-neutral list of operations over labelled modes. It
/// runs through the Heisenberg engine (analytic_moments), through the
/// Schrödinger engine with outcome-averaged feedforward (gaussian_moments), and
/// shot by shot in cvamp::sampling.
namespace cvamp::circuits {

using ModeId = quadnet::ModeId;

struct InputSpec {
  ModeId label;
  double mean_x = 0.0;
  double mean_p = 0.0;
  double var_x = kVacuumVariance;
  double var_p = kVacuumVariance;
};

namespace op {
struct Beamsplitter {
  ModeId a;
  ModeId b;
  double reflectivity;
};
struct Phase {
  ModeId mode;
  double phi;
};
struct Squeeze {
  ModeId mode;
  double r;
};
struct Displace {
  ModeId mode;
  double dx;
  double dp;
};
/// Transmission `eta`; `vacuum` names the environment mode mixed in.
struct Loss {
  ModeId mode;
  double eta;
  ModeId vacuum;
};
struct MeasureFeedforward {
  ModeId measured;
  Axis axis;
  std::vector<quadnet::FeedTarget> targets;
};
struct Discard {
  ModeId mode;
};
}  // namespace op

using Operation =
    std::variant<op::Beamsplitter, op::Phase, op::Squeeze, op::Displace, op::Loss, op::MeasureFeedforward, op::Discard>;

struct Program {
  std::vector<InputSpec> inputs;
  std::vector<Operation> ops;
  /// Live labels reported at the end, in order.
  std::vector<ModeId> outputs;
  /// Display names for `outputs`, same length.
  std::vector<std::string> output_names;

  InputSpec& input(const ModeId& label) {
    for (auto& in : inputs)
      if (in.label == label) return in;
    throw UnknownModeError("program has no input '" + label + "'");
  }
  const InputSpec& input(const ModeId& label) const { return const_cast<Program*>(this)->input(label); }

  void set_input_mean(const ModeId& label, double x, double p) {
    InputSpec& in = input(label);
    in.mean_x = x;
    in.mean_p = p;
  }

  int output_index(const std::string& name) const {
    for (std::size_t i = 0; i < output_names.size(); ++i)
      if (output_names[i] == name) return static_cast<int>(i);
    for (std::size_t i = 0; i < outputs.size(); ++i)
      if (outputs[i] == name) return static_cast<int>(i);
    throw UnknownModeError("program has no output '" + name + "'");
  }
};

// ---------------------------------------------------------------------------
// Heisenberg execution.

inline quadnet::NetworkState apply_ops(quadnet::NetworkState net, const std::vector<Operation>& ops) {
  for (const auto& o : ops) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, op::Beamsplitter>) {
            net = quadnet::apply_beamsplitter(std::move(net), v.a, v.b, v.reflectivity);
          } else if constexpr (std::is_same_v<T, op::Phase>) {
            net = quadnet::apply_phase(std::move(net), v.mode, v.phi);
          } else if constexpr (std::is_same_v<T, op::Squeeze>) {
            net = quadnet::apply_squeeze(std::move(net), v.mode, v.r);
          } else if constexpr (std::is_same_v<T, op::Displace>) {
            net = quadnet::apply_displacement(std::move(net), v.mode, v.dx, v.dp);
          } else if constexpr (std::is_same_v<T, op::Loss>) {
            net = quadnet::apply_loss(std::move(net), v.mode, v.eta, v.vacuum);
          } else if constexpr (std::is_same_v<T, op::MeasureFeedforward>) {
            net = quadnet::measure_feedforward(std::move(net), v.measured, v.axis, v.targets);
          } else {
            net = quadnet::discard(std::move(net), v.mode);
          }
        },
        o);
  }
  return net;
}

inline quadnet::NetworkState to_network(const Program& prog) {
  std::vector<ModeId> labels;
  for (const auto& in : prog.inputs) labels.push_back(in.label);
  return apply_ops(quadnet::new_network(labels), prog.ops);
}

inline quadnet::InputEnsemble ensemble(const Program& prog) {
  quadnet::InputEnsemble ens;
  for (const auto& in : prog.inputs) ens.set(in.label, {in.mean_x, in.mean_p, in.var_x, in.var_p});
  for (const auto& o : prog.ops) {
    if (const auto* l = std::get_if<op::Loss>(&o)) ens.set(l->vacuum, quadnet::InputMoments::vacuum());
  }
  return ens;
}

/// Reorders moments given over `order` into the program's output order.
inline Moments select_modes(const Moments& m, const std::vector<ModeId>& order, const std::vector<ModeId>& wanted) {
  std::vector<int> idx;
  for (const auto& w : wanted) {
    auto it = std::find(order.begin(), order.end(), w);
    if (it == order.end()) throw UnknownModeError("output '" + w + "' is not live at the end of the program");
    const int k = static_cast<int>(it - order.begin());
    idx.push_back(2 * k);
    idx.push_back(2 * k + 1);
  }
  return {m.mean(idx), m.cov(idx, idx)};
}

/// Output moments from the Heisenberg engine.
inline Moments analytic_moments(const Program& prog) {
  const quadnet::NetworkState net = to_network(prog);
  return select_modes(quadnet::output_moments(net, ensemble(prog)), net.live_modes(), prog.outputs);
}

// ---------------------------------------------------------------------------
// Schrödinger execution.

/// Index-based form of a Program for the Schrödinger engine.
struct CompiledProgram {
  struct Loss {
    int mode;
    double eta;
  };
  struct Measure {
    int mode;
    Axis axis;
    std::vector<gaussian::FeedTarget> targets;
  };
  struct Discard {
    int mode;
  };
  using Instr = std::variant<gaussian::SymplecticEl, Loss, Measure, Discard>;

  gaussian::GaussianState initial;
  std::vector<Instr> instrs;
  std::vector<int> outputs;
};

inline CompiledProgram compile(const Program& prog) {
  CompiledProgram c;
  std::vector<ModeId> live;
  c.initial = gaussian::vacuum(0);
  for (const auto& in : prog.inputs) {
    if (!std::isfinite(in.var_x) || !std::isfinite(in.var_p)) {
      throw std::invalid_argument("input '" + in.label + "' has infinite variance; the Schrödinger engine needs finite squeezing");
    }
    if (std::find(live.begin(), live.end(), in.label) != live.end()) {
      throw std::invalid_argument("duplicate mode label '" + in.label + "'");
    }
    live.push_back(in.label);
    c.initial = gaussian::tensor(c.initial, gaussian::diagonal_mode(in.mean_x, in.mean_p, in.var_x, in.var_p));
  }
  auto index = [&](const ModeId& m) {
    auto it = std::find(live.begin(), live.end(), m);
    if (it == live.end()) throw UnknownModeError("mode '" + m + "' is not live");
    return static_cast<int>(it - live.begin());
  };
  for (const auto& o : prog.ops) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, op::Beamsplitter>) {
            c.instrs.emplace_back(gaussian::SymplecticEl{gaussian::el::Beamsplitter{index(v.a), index(v.b), v.reflectivity}});
          } else if constexpr (std::is_same_v<T, op::Phase>) {
            c.instrs.emplace_back(gaussian::SymplecticEl{gaussian::el::Phase{index(v.mode), v.phi}});
          } else if constexpr (std::is_same_v<T, op::Squeeze>) {
            c.instrs.emplace_back(gaussian::SymplecticEl{gaussian::el::Squeeze{index(v.mode), v.r}});
          } else if constexpr (std::is_same_v<T, op::Displace>) {
            c.instrs.emplace_back(gaussian::SymplecticEl{gaussian::el::Displace{index(v.mode), v.dx, v.dp}});
          } else if constexpr (std::is_same_v<T, op::Loss>) {
            c.instrs.emplace_back(CompiledProgram::Loss{index(v.mode), v.eta});
          } else if constexpr (std::is_same_v<T, op::MeasureFeedforward>) {
            CompiledProgram::Measure m{index(v.measured), v.axis, {}};
            for (const auto& t : v.targets) m.targets.push_back({index(t.mode), t.axis, t.gain});
            c.instrs.emplace_back(std::move(m));
            live.erase(live.begin() + index(v.measured));
          } else {
            c.instrs.emplace_back(CompiledProgram::Discard{index(v.mode)});
            live.erase(live.begin() + index(v.mode));
          }
        },
        o);
  }
  for (const auto& out : prog.outputs) c.outputs.push_back(index(out));
  return c;
}

/// Output moments from the Schrödinger engine, feedforward averaged over outcomes.
inline Moments gaussian_moments(const Program& prog) {
  const CompiledProgram c = compile(prog);
  gaussian::GaussianState s = c.initial;
  for (const auto& instr : c.instrs) {
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, gaussian::SymplecticEl>) {
            gaussian::apply_inplace(s, v);
          } else if constexpr (std::is_same_v<T, CompiledProgram::Loss>) {
            gaussian::loss_inplace(s, v.mode, v.eta);
          } else if constexpr (std::is_same_v<T, CompiledProgram::Measure>) {
            s = gaussian::feedforward_average(s, v.mode, v.axis, v.targets);
          } else {
            std::vector<int> keep;
            for (int k = 0; k < s.n_modes(); ++k)
              if (k != v.mode) keep.push_back(k);
            s = gaussian::partial_trace(s, keep);
          }
        },
        instr);
  }
  return gaussian::partial_trace(s, c.outputs).moments();
}

// ---------------------------------------------------------------------------
// Parameters.

/// G = (1/sqrt(R) + sqrt(R))^2 / 4, inverted on the branch R in (0, 1].
inline double gain_to_reflectivity(double gain) {
  if (!(gain >= 1.0) || !std::isfinite(gain)) throw std::domain_error("amplifier gain must be >= 1");
  const double root = std::sqrt(gain) - std::sqrt(gain - 1.0);
  return root * root;
}

inline double reflectivity_to_gain(double reflectivity) {
  if (!(reflectivity > 0.0 && reflectivity <= 1.0)) throw std::domain_error("reflectivity must lie in (0, 1]");
  const double s = 1.0 / std::sqrt(reflectivity) + std::sqrt(reflectivity);
  return 0.25 * s * s;
}

/// Two-mode quadrature map (x_s, p_s, x_i, p_i) of the optimal amplifier
///   a_s' = sqrt(G) a_s + e^{i theta} sqrt(G-1) a_i^dagger, and 1 <-> 2.
inline Eigen::Matrix4d ideal_pia(double gain, double theta) {
  if (!(gain >= 1.0)) throw std::domain_error("amplifier gain must be >= 1");
  const double g = std::sqrt(gain);
  const double h = std::sqrt(gain - 1.0);
  const auto [c, s] = exact_cos_sin(theta);
  Eigen::Matrix4d m;
  m << g, 0, h * c, h * s,
       0, g, h * s, -h * c,
       h * c, h * s, g, 0,
       h * s, -h * c, 0, g;
  return m;
}

/// Where the loss figures are applied is a modelling choice: feedforward
/// detectors see visibility^2, every output beam sees the main path loss and
/// then the verification detector efficiency.
struct ImperfectionModel {
  double main_path_loss = 0.07;
  double homodyne_efficiency = 0.99;
  double visibility = 0.98;

  static ImperfectionModel none() { return {0.0, 1.0, 1.0}; }

  void validate() const {
    for (double v : {main_path_loss, homodyne_efficiency, visibility}) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("imperfection parameters must lie in [0, 1]");
    }
  }
};

enum class PiaRealization {
  /// Ideal single-mode squeezers in the interferometer arms.
  Optimal,
  /// Measurement-and-feedforward squeezers fed by squeezed ancillas.
  Feedforward,
};

struct PiaParams {
  std::optional<double> gain;
  std::optional<double> reflectivity;
  double theta = 0.0;
  /// Squeezing of the ancillas in dB (<= 0); -infinity is the infinite-squeezing
  /// limit, which only the Heisenberg engine can evaluate.
  double ancilla_a_db = -5.0;
  double ancilla_b_db = -5.0;
  double anti_excess_db = 0.0;
  PiaRealization realization = PiaRealization::Feedforward;
  std::optional<ImperfectionModel> imperfections;

  void validate() const {
    if (gain.has_value() == reflectivity.has_value()) {
      throw std::invalid_argument("exactly one of gain and reflectivity must be set");
    }
    if (gain && !(*gain >= 1.0)) throw std::invalid_argument("gain must be >= 1");
    if (reflectivity && !(*reflectivity > 0.0 && *reflectivity <= 1.0)) {
      throw std::invalid_argument("reflectivity must lie in (0, 1]");
    }
    if (!(ancilla_a_db <= 0.0) || !(ancilla_b_db <= 0.0)) throw std::invalid_argument("ancilla squeezing must be <= 0 dB");
    if (!(anti_excess_db >= 0.0)) throw std::invalid_argument("anti_excess_db must be >= 0");
    if (imperfections) imperfections->validate();
  }

  double resolved_reflectivity() const {
    validate();
    return reflectivity ? *reflectivity : gain_to_reflectivity(*gain);
  }
  double resolved_gain() const {
    validate();
    return gain ? *gain : reflectivity_to_gain(*reflectivity);
  }
};

struct ClonerParams {
  PiaParams pia = [] {
    PiaParams p;
    p.gain = 2.0;
    return p;
  }();
  double final_bs_reflectivity = 0.5;
};

struct KlClonerParams {
  int originals = 1;  // K
  int clones = 2;     // L
  std::vector<double> noise_targets;

  static KlClonerParams symmetric(int k, int l) {
    if (k < 1 || l <= k) throw std::invalid_argument("need 1 <= K < L");
    const double n = 1.0 / k - 1.0 / l;
    return {k, l, std::vector<double>(static_cast<std::size_t>(l), n)};
  }
};

// ---------------------------------------------------------------------------
// Builders.

/// Smallest nudge (a few ulps) of the beamsplitter reflectivity for which the
/// feedforward gain -sqrt(R)/sqrt(1-R) cancels the ancilla term to an exact 0
/// in binary floating point.
inline double exact_cancellation_reflectivity(double r_bs) {
  auto cancels = [](double r) {
    const double refl = std::sqrt(r);
    const double trans = std::sqrt(1.0 - r);
    const double g = -(refl / trans);
    return refl + g * trans == 0.0;
  };
  double up = r_bs;
  double down = r_bs;
  for (int i = 0; i < 256; ++i) {
    if (cancels(up)) return up;
    if (cancels(down)) return down;
    up = std::nextafter(up, 1.0);
    down = std::nextafter(down, 0.0);
  }
  return r_bs;
}

/// Feedforward squeezer on `main`: beamsplitter with `ancilla`, homodyne of the
/// `amplified` quadrature on the ancilla port, and feedforward that cancels the
/// ancilla's `amplified` quadrature. Net effect on `main`:
///   amplified axis  -> q / sqrt(1 - R_bs)
///   conjugate axis  -> sqrt(1 - R_bs) q + sqrt(R_bs) q_ancilla
/// so the ancilla should be squeezed on the conjugate axis.
inline std::vector<Operation> ffw_squeezer_ops(const ModeId& main, const ModeId& ancilla, double r_bs, Axis amplified) {
  if (!(r_bs >= 0.0 && r_bs < 1.0)) throw std::invalid_argument("squeezer beamsplitter reflectivity must lie in [0, 1)");
  const double r = exact_cancellation_reflectivity(r_bs);
  const double gain = -(std::sqrt(r) / std::sqrt(1.0 - r));
  return {op::Beamsplitter{main, ancilla, r}, op::MeasureFeedforward{ancilla, amplified, {{main, amplified, gain}}}};
}

inline quadnet::NetworkState build_ffw_squeezer(quadnet::NetworkState net, const ModeId& main, const ModeId& ancilla,
                                                double r_bs, Axis amplified) {
  return apply_ops(std::move(net), ffw_squeezer_ops(main, ancilla, r_bs, amplified));
}

/// Feedforward gain used by the squeezer for a given reflectivity.
inline double ffw_gain(double r_bs) {
  const double r = exact_cancellation_reflectivity(r_bs);
  return -(std::sqrt(r) / std::sqrt(1.0 - r));
}

inline InputSpec squeezed_input(const ModeId& label, double db, Axis axis, double anti_excess_db) {
  InputSpec in{label};
  double v_sq;
  double v_anti;
  if (std::isinf(db) && db < 0.0) {
    v_sq = 0.0;
    v_anti = std::numeric_limits<double>::infinity();
  } else {
    v_sq = db_to_variance(db);
    v_anti = kVacuumVariance * kVacuumVariance / v_sq * std::pow(10.0, anti_excess_db / 10.0);
  }
  (axis == Axis::X ? in.var_x : in.var_p) = v_sq;
  (axis == Axis::X ? in.var_p : in.var_x) = v_anti;
  return in;
}

namespace detail {

// Interferometer with a squeezer in each arm. Mode `m1` ends up amplified in x
// inside the interferometer, `m2` in p; with the closing beamsplitter oriented
// as below the net map matches ideal_pia for theta = 0. A nonzero theta
// is realized by rotating the idler (`m2`) by -theta before and +theta after.
inline void append_pia(Program& prog, const ModeId& m1, const ModeId& m2, const ModeId& anc_a, const ModeId& anc_b,
                       const PiaParams& params) {
  const double r = params.resolved_reflectivity();
  if (params.theta != 0.0) prog.ops.emplace_back(op::Phase{m2, -params.theta});
  prog.ops.emplace_back(op::Beamsplitter{m1, m2, 0.5});
  if (params.realization == PiaRealization::Optimal) {
    const double log_s = -0.5 * std::log(r);  // s = 1/sqrt(R)
    prog.ops.emplace_back(op::Squeeze{m1, -log_s});
    prog.ops.emplace_back(op::Squeeze{m2, log_s});
  } else {
    prog.inputs.push_back(squeezed_input(anc_b, params.ancilla_b_db, Axis::P, params.anti_excess_db));
    prog.inputs.push_back(squeezed_input(anc_a, params.ancilla_a_db, Axis::X, params.anti_excess_db));
    for (auto& o : ffw_squeezer_ops(m1, anc_b, 1.0 - r, Axis::X)) prog.ops.push_back(std::move(o));
    for (auto& o : ffw_squeezer_ops(m2, anc_a, 1.0 - r, Axis::P)) prog.ops.push_back(std::move(o));
  }
  prog.ops.emplace_back(op::Beamsplitter{m2, m1, 0.5});
  if (params.theta != 0.0) prog.ops.emplace_back(op::Phase{m2, params.theta});
}

// Real orthogonal transform out_k = sum_j u(k, j) in_j on `modes`, decomposed
// into beamsplitters and pi phase shifts via Givens rotations.
inline void append_orthogonal(Program& prog, const std::vector<ModeId>& modes, Eigen::MatrixXd u) {
  const int n = static_cast<int>(modes.size());
  struct Rot {
    int i;
    int j;
    double c;
    double s;
  };
  std::vector<Rot> rots;
  for (int col = 0; col + 1 < n; ++col) {
    for (int row = n - 1; row > col; --row) {
      const double a = u(row - 1, col);
      const double b = u(row, col);
      if (b == 0.0) continue;
      double rho = std::hypot(a, b);
      if (a < 0.0) rho = -rho;
      const double c = a / rho;
      const double s = b / rho;
      const Eigen::RowVectorXd ri = u.row(row - 1);
      const Eigen::RowVectorXd rj = u.row(row);
      u.row(row - 1) = c * ri + s * rj;
      u.row(row) = -s * ri + c * rj;
      rots.push_back({row - 1, row, c, s});
    }
  }
  // u is now diag(+-1) and the original transform is G_1^T ... G_m^T D.
  for (int k = 0; k < n; ++k) {
    if (u(k, k) < 0.0) prog.ops.emplace_back(op::Phase{modes[k], std::numbers::pi});
  }
  for (auto it = rots.rbegin(); it != rots.rend(); ++it) {
    // G^T on (i, j) is the beamsplitter (j, i) with sqrt(R) = s.
    const ModeId& mi = modes[it->i];
    const ModeId& mj = modes[it->j];
    const bool flip = it->s < 0.0;
    if (flip) prog.ops.emplace_back(op::Phase{mj, std::numbers::pi});
    prog.ops.emplace_back(op::Beamsplitter{mj, mi, it->s * it->s});
    if (flip) prog.ops.emplace_back(op::Phase{mj, std::numbers::pi});
  }
}

}  // namespace detail

/// Inserts the loss channels of `model` into a program. Feedforward gains are
/// rescaled by 1/sqrt(visibility^2) so the antisqueezed ancilla noise still
/// cancels behind the lossy detector.
inline Program apply_imperfections(const Program& prog, const ImperfectionModel& model) {
  model.validate();
  Program out = prog;
  out.ops.clear();
  const double eta_ff = model.visibility * model.visibility;
  for (const auto& o : prog.ops) {
    if (const auto* m = std::get_if<op::MeasureFeedforward>(&o); m && eta_ff < 1.0) {
      out.ops.emplace_back(op::Loss{m->measured, eta_ff, "loss-ff-" + m->measured});
      op::MeasureFeedforward scaled = *m;
      for (auto& t : scaled.targets) t.gain = eta_ff > 0.0 ? t.gain / std::sqrt(eta_ff) : 0.0;
      out.ops.emplace_back(std::move(scaled));
    } else {
      out.ops.push_back(o);
    }
  }
  for (const auto& m : prog.outputs) {
    if (model.main_path_loss > 0.0) out.ops.emplace_back(op::Loss{m, 1.0 - model.main_path_loss, "loss-main-" + m});
    if (model.homodyne_efficiency < 1.0) out.ops.emplace_back(op::Loss{m, model.homodyne_efficiency, "loss-hd-" + m});
  }
  return out;
}

/// Two-mode amplifier on inputs "in-1" (signal) and "in-2" (idler) with
/// ancillas "anc-A" (x-squeezed, on the in-2 arm) and "anc-B" (p-squeezed, on
/// the in-1 arm). Outputs are named "out-1" and "out-2".
inline Program build_pia_network(const PiaParams& params) {
  params.validate();
  Program prog;
  prog.inputs = {InputSpec{"in-1"}, InputSpec{"in-2"}};
  detail::append_pia(prog, "in-1", "in-2", "anc-A", "anc-B", params);
  prog.outputs = {"in-1", "in-2"};
  prog.output_names = {"out-1", "out-2"};
  if (params.imperfections) prog = apply_imperfections(prog, *params.imperfections);
  return prog;
}

inline quadnet::NetworkState pia_network(const PiaParams& params) { return to_network(build_pia_network(params)); }

/// Optimal amplifier as a program (ideal squeezers, no ancillas).
inline Program build_ideal_pia(double gain, double theta = 0.0) {
  PiaParams p;
  p.gain = gain;
  p.theta = theta;
  p.realization = PiaRealization::Optimal;
  return build_pia_network(p);
}

/// 1 -> 2 cloner: G = 2 amplifier on ("org", "idl") followed by a half
/// beamsplitter with the vacuum "vac". Outputs "cln-1", "cln-2", "a-cln".
inline Program build_cloner_network(const ClonerParams& params) {
  params.pia.validate();
  if (std::abs(params.pia.resolved_gain() - 2.0) > 1e-12) throw std::invalid_argument("the 1 -> 2 cloner needs G = 2");
  if (!(params.final_bs_reflectivity >= 0.0 && params.final_bs_reflectivity <= 1.0)) {
    throw std::invalid_argument("final beamsplitter reflectivity must lie in [0, 1]");
  }
  Program prog;
  prog.inputs = {InputSpec{"org"}, InputSpec{"idl"}};
  PiaParams pia = params.pia;
  pia.imperfections.reset();
  detail::append_pia(prog, "org", "idl", "anc-A", "anc-B", pia);
  prog.inputs.push_back(InputSpec{"vac"});
  prog.ops.emplace_back(op::Beamsplitter{"org", "vac", params.final_bs_reflectivity});
  prog.ops.emplace_back(op::Phase{"vac", std::numbers::pi});
  prog.outputs = {"org", "vac", "idl"};
  prog.output_names = {"cln-1", "cln-2", "a-cln"};
  if (params.pia.imperfections) prog = apply_imperfections(prog, *params.pia.imperfections);
  return prog;
}

/// Residual (sum sqrt n_k)^2 - (L - K)(sum n_k + 1) of the optimal-cloner relation.
inline double kl_relation_residual(const std::vector<double>& n, int k, int l) {
  double s = 0.0;
  double t = 0.0;
  for (double v : n) {
    s += std::sqrt(v);
    t += v;
  }
  return s * s - static_cast<double>(l - k) * (t + 1.0);
}

/// K -> L cloner with optimal amplification. Originals "org-1".."org-K" are
/// combined into org-1, a fraction is amplified with G = 1 + sum n_k against
/// the idler "idl", and an orthogonal network distributes the result over L
/// clones; the idler output is split evenly into L - K anticlones.
inline Program build_kl_cloner(const KlClonerParams& params) {
  const int k = params.originals;
  const int l = params.clones;
  if (k < 1 || l <= k) throw std::invalid_argument("need 1 <= K < L");
  const auto& n = params.noise_targets;
  if (static_cast<int>(n.size()) != l) throw std::invalid_argument("need one noise target per clone");
  for (double v : n)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("noise targets must be finite and >= 0");
  const double sum_n = std::accumulate(n.begin(), n.end(), 0.0);
  if (std::abs(kl_relation_residual(n, k, l)) > 1e-9 * (1.0 + (l - k) * (sum_n + 1.0))) {
    throw std::invalid_argument("noise targets violate the optimal-cloner relation");
  }

  Program prog;
  for (int i = 1; i <= k; ++i) prog.inputs.push_back(InputSpec{"org-" + std::to_string(i)});
  for (int j = 2; j <= k; ++j) {
    prog.ops.emplace_back(op::Beamsplitter{"org-1", "org-" + std::to_string(j), 1.0 / j});
    prog.ops.emplace_back(op::Discard{"org-" + std::to_string(j)});
  }

  const double gain = 1.0 + sum_n;
  const double t = std::min(1.0, static_cast<double>(l - k) / (k * sum_n));
  const bool split = t < 1.0 - 1e-15;
  if (split) {
    prog.inputs.push_back(InputSpec{"split-vac"});
    prog.ops.emplace_back(op::Beamsplitter{"org-1", "split-vac", 1.0 - t});
  }

  prog.inputs.push_back(InputSpec{"idl"});
  PiaParams pia;
  pia.gain = gain;
  pia.realization = PiaRealization::Optimal;
  detail::append_pia(prog, "org-1", "idl", "", "", pia);

  // Distribution network: column 0 carries the amplified mode, column 1 the
  // unamplified part (when split), the rest vacuum ancillas.
  std::vector<ModeId> dist{"org-1"};
  if (split) dist.push_back("split-vac");
  const int n_known = static_cast<int>(dist.size());
  for (int a = 1; static_cast<int>(dist.size()) < l; ++a) {
    const ModeId lbl = "anc-" + std::to_string(a);
    prog.inputs.push_back(InputSpec{lbl});
    dist.push_back(lbl);
  }
  Eigen::MatrixXd known(l, n_known);
  for (int i = 0; i < l; ++i) known(i, 0) = std::sqrt(n[i] / sum_n);
  if (split) {
    const double amp = std::sqrt(gain * t);
    for (int i = 0; i < l; ++i) known(i, 1) = (known(i, 0) * amp - 1.0 / std::sqrt(k)) / std::sqrt(1.0 - t);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(known);
  Eigen::MatrixXd u = qr.householderQ() * Eigen::MatrixXd::Identity(l, l);
  u.leftCols(n_known) = known;
  detail::append_orthogonal(prog, dist, u);

  const int m = l - k;
  std::vector<ModeId> anti{"idl"};
  for (int j = 1; j < m; ++j) {
    const ModeId lbl = "acl-vac-" + std::to_string(j);
    prog.inputs.push_back(InputSpec{lbl});
    prog.ops.emplace_back(op::Beamsplitter{"idl", lbl, 1.0 / (m - j + 1)});
    prog.ops.emplace_back(op::Phase{lbl, std::numbers::pi});
    anti.push_back(lbl);
  }

  for (int i = 0; i < l; ++i) {
    prog.outputs.push_back(dist[i]);
    prog.output_names.push_back("cln-" + std::to_string(i + 1));
  }
  for (int j = 0; j < m; ++j) {
    prog.outputs.push_back(anti[j]);
    prog.output_names.push_back("a-cln-" + std::to_string(j + 1));
  }
  return prog;
}

/// Sets every original of a K -> L cloner to the coherent amplitude (x, p).
inline void set_originals(Program& prog, int k, double x, double p) {
  for (int i = 1; i <= k; ++i) prog.set_input_mean("org-" + std::to_string(i), x, p);
}

}  // namespace cvamp::circuits
