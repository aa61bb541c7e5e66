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
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cvamp/analysis.hpp"
#include "cvamp/circuits.hpp"
#include "cvamp/program_io.hpp"
#include "cvamp/sampling.hpp"

/// Scenario configuration, execution and reporting behind the command line tool.
namespace cvamp::labcli {

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Catalog.

struct ScenarioInfo {
  std::string name;
  std::string description;
};

inline const std::vector<ScenarioInfo>& catalog() {
  static const std::vector<ScenarioInfo> c{
      {"pia-output-vacuum", "amplifier output quadrature powers for vacuum inputs"},
      {"pia-output-coherent", "signal and idler excitation powers for single-quadrature input excitations"},
      {"pia-epr", "two-mode squeezing of the amplifier outputs and the Duan-Simon witness"},
      {"pia-reconstruct-vacuum", "electrical inverse of the amplifier, vacuum inputs"},
      {"pia-reconstruct-coherent", "electrical inverse of the amplifier, mean transfer of excitations"},
      {"pia-phase-scan", "phase-scanned homodyne records of both outputs and likelihood fits"},
      {"clone-output", "clone and anticlone powers, added noise and fidelity"},
      {"clone-epr", "clone-anticlone correlations and tripartite partial-transpose tests"},
      {"clone-reconstruct", "reconstruction of the original from both clones and the anticlone"},
      {"clone-phase-scan", "phase-scanned homodyne records of clones and anticlone"},
      {"kl-limits", "K -> L cloning limits and built cloners for several (K, L)"},
  };
  return c;
}

inline bool is_scenario(const std::string& name) {
  return std::any_of(catalog().begin(), catalog().end(), [&](const ScenarioInfo& s) { return s.name == name; });
}

// ---------------------------------------------------------------------------
// Configuration.

enum class Engine { Analytic, MonteCarlo, Both };

inline std::string to_string(Engine e) {
  switch (e) {
    case Engine::Analytic: return "analytic";
    case Engine::MonteCarlo: return "montecarlo";
    default: return "both";
  }
}

inline Engine engine_from_string(const std::string& s) {
  if (s == "analytic") return Engine::Analytic;
  if (s == "montecarlo") return Engine::MonteCarlo;
  if (s == "both") return Engine::Both;
  throw std::invalid_argument("engine must be one of analytic, montecarlo, both; got '" + s + "'");
}

struct Displacement {
  std::string mode;
  double x = 0.0;
  double p = 0.0;
};

/// Every key is optional except `scenario`; see configs/README.md for the schema.
struct ScenarioConfig {
  std::string scenario;
  Engine engine = Engine::Both;
  std::optional<double> gain;
  std::optional<double> reflectivity;
  double theta = 0.0;
  circuits::PiaRealization realization = circuits::PiaRealization::Feedforward;
  double ancilla_a_db = -5.0;
  double ancilla_b_db = -5.0;
  double anti_excess_db = 0.0;
  double final_bs_reflectivity = 0.5;
  std::vector<std::pair<int, int>> kl_pairs{{1, 2}, {2, 3}, {1, 3}, {3, 5}};
  std::vector<double> noise_targets;
  std::vector<Displacement> displacements;
  bool imperfections = false;
  circuits::ImperfectionModel imperfection_model{};
  std::uint64_t shots = 100000;
  std::uint64_t seed = 1;
  std::uint64_t scan_points = 20000;
  std::string out = "out";
  int sweep_seeds = 10;

  double resolved_gain() const {
    if (reflectivity) return circuits::reflectivity_to_gain(*reflectivity);
    return gain.value_or(2.0);
  }
  double resolved_reflectivity() const {
    if (reflectivity) return *reflectivity;
    return circuits::gain_to_reflectivity(gain.value_or(2.0));
  }
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline std::string where(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return "";
  return " (line " + std::to_string(line_of_offset(text, pos)) + ")";
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> k{
      "scenario",        "engine",          "gain",          "reflectivity",         "theta",
      "realization",     "ancilla_db",      "ancilla_a_db",  "ancilla_b_db",         "anti_excess_db",
      "final_bs_reflectivity", "kl_pairs",  "noise_targets", "displacements",        "imperfections",
      "main_path_loss",  "homodyne_efficiency", "visibility", "shots",               "seed",
      "scan_points",     "out",             "sweep_seeds"};
  return k;
}

}  // namespace detail

/// Parses the JSON configuration text. Unknown keys and type mismatches are
/// errors that name the key and its line.
inline ScenarioConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error at line " + std::to_string(detail::line_of_offset(text, e.byte)) + ": " +
                      e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    const auto& keys = detail::known_keys();
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ConfigError("unknown config key '" + k + "'" + detail::where(text, k));
    }
  }
  ScenarioConfig c;
  auto get = [&](const char* key, auto& target) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(target);
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' has the wrong type" + detail::where(text, key));
    }
  };
  auto get_number = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key)) return std::nullopt;
    if (!j.at(key).is_number()) {
      throw ConfigError(std::string("config key '") + key + "' must be a number" + detail::where(text, key));
    }
    return j.at(key).get<double>();
  };
  auto get_uint = [&](const char* key, std::uint64_t& target) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number_unsigned()) {
      throw ConfigError(std::string("config key '") + key + "' must be a nonnegative integer" +
                        detail::where(text, key));
    }
    target = j.at(key).get<std::uint64_t>();
  };

  if (!j.contains("scenario")) throw ConfigError("config is missing the 'scenario' key");
  get("scenario", c.scenario);
  if (j.contains("engine")) {
    std::string e;
    get("engine", e);
    try {
      c.engine = engine_from_string(e);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(std::string(ex.what()) + detail::where(text, "engine"));
    }
  }
  c.gain = get_number("gain");
  c.reflectivity = get_number("reflectivity");
  if (auto v = get_number("theta")) c.theta = *v;
  if (j.contains("realization")) {
    std::string r;
    get("realization", r);
    if (r == "feedforward") {
      c.realization = circuits::PiaRealization::Feedforward;
    } else if (r == "optimal") {
      c.realization = circuits::PiaRealization::Optimal;
    } else {
      throw ConfigError("realization must be 'feedforward' or 'optimal'" + detail::where(text, "realization"));
    }
  }
  if (auto v = get_number("ancilla_db")) c.ancilla_a_db = c.ancilla_b_db = *v;
  if (auto v = get_number("ancilla_a_db")) c.ancilla_a_db = *v;
  if (auto v = get_number("ancilla_b_db")) c.ancilla_b_db = *v;
  if (auto v = get_number("anti_excess_db")) c.anti_excess_db = *v;
  if (auto v = get_number("final_bs_reflectivity")) c.final_bs_reflectivity = *v;
  if (j.contains("kl_pairs")) {
    std::vector<std::vector<int>> pairs;
    get("kl_pairs", pairs);
    c.kl_pairs.clear();
    for (const auto& p : pairs) {
      if (p.size() != 2) throw ConfigError("each kl_pairs entry must be [K, L]" + detail::where(text, "kl_pairs"));
      c.kl_pairs.emplace_back(p[0], p[1]);
    }
  }
  get("noise_targets", c.noise_targets);
  if (j.contains("displacements")) {
    const auto& d = j.at("displacements");
    if (!d.is_array()) throw ConfigError("displacements must be a list" + detail::where(text, "displacements"));
    for (const auto& e : d) {
      if (!e.is_object() || !e.contains("mode")) {
        throw ConfigError("each displacement needs a 'mode'" + detail::where(text, "displacements"));
      }
      for (const auto& [k, v] : e.items()) {
        if (k != "mode" && k != "x" && k != "p") {
          throw ConfigError("unknown displacement key '" + k + "'" + detail::where(text, "displacements"));
        }
      }
      try {
        c.displacements.push_back({e.at("mode").get<std::string>(), e.value("x", 0.0), e.value("p", 0.0)});
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("malformed displacement entry" + detail::where(text, "displacements"));
      }
    }
  }
  get("imperfections", c.imperfections);
  if (auto v = get_number("main_path_loss")) c.imperfection_model.main_path_loss = *v;
  if (auto v = get_number("homodyne_efficiency")) c.imperfection_model.homodyne_efficiency = *v;
  if (auto v = get_number("visibility")) c.imperfection_model.visibility = *v;
  get_uint("shots", c.shots);
  get_uint("seed", c.seed);
  get_uint("scan_points", c.scan_points);
  get("out", c.out);
  if (j.contains("sweep_seeds")) {
    std::uint64_t s = 0;
    get_uint("sweep_seeds", s);
    c.sweep_seeds = static_cast<int>(s);
  }
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json j{{"scenario", c.scenario},
                   {"engine", to_string(c.engine)},
                   {"theta", c.theta},
                   {"realization", c.realization == circuits::PiaRealization::Optimal ? "optimal" : "feedforward"},
                   {"ancilla_a_db", c.ancilla_a_db},
                   {"ancilla_b_db", c.ancilla_b_db},
                   {"anti_excess_db", c.anti_excess_db},
                   {"final_bs_reflectivity", c.final_bs_reflectivity},
                   {"imperfections", c.imperfections},
                   {"main_path_loss", c.imperfection_model.main_path_loss},
                   {"homodyne_efficiency", c.imperfection_model.homodyne_efficiency},
                   {"visibility", c.imperfection_model.visibility},
                   {"shots", c.shots},
                   {"seed", c.seed},
                   {"scan_points", c.scan_points},
                   {"out", c.out},
                   {"sweep_seeds", c.sweep_seeds}};
  if (c.gain) j["gain"] = *c.gain;
  if (c.reflectivity) j["reflectivity"] = *c.reflectivity;
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& [k, l] : c.kl_pairs) pairs.push_back({k, l});
  j["kl_pairs"] = pairs;
  if (!c.noise_targets.empty()) j["noise_targets"] = c.noise_targets;
  nlohmann::json d = nlohmann::json::array();
  for (const auto& e : c.displacements) d.push_back({{"mode", e.mode}, {"x", e.x}, {"p", e.p}});
  j["displacements"] = d;
  return j;
}

namespace detail {

inline bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

inline bool is_pia_scenario(const std::string& s) { return starts_with(s, "pia-"); }
inline bool is_clone_scenario(const std::string& s) { return starts_with(s, "clone-"); }

}  // namespace detail

/// Semantic checks; an empty result means the configuration can run.
inline std::vector<std::string> validate(const ScenarioConfig& c) {
  std::vector<std::string> d;
  if (!is_scenario(c.scenario)) d.push_back("unknown scenario '" + c.scenario + "'");
  if (c.gain && c.reflectivity) d.push_back("set either gain or reflectivity, not both");
  if (c.gain && !(*c.gain >= 1.0)) d.push_back("gain must be >= 1");
  if (c.reflectivity && !(*c.reflectivity > 0.0 && *c.reflectivity <= 1.0)) d.push_back("reflectivity must lie in (0, 1]");
  for (double v : {c.ancilla_a_db, c.ancilla_b_db}) {
    if (!(v <= 0.0) || !std::isfinite(v)) {
      d.push_back("ancilla squeezing must be finite and <= 0 dB (use realization 'optimal' for the ideal limit)");
      break;
    }
  }
  if (!(c.anti_excess_db >= 0.0)) d.push_back("anti_excess_db must be >= 0");
  if (!(c.final_bs_reflectivity >= 0.0 && c.final_bs_reflectivity <= 1.0)) {
    d.push_back("final_bs_reflectivity must lie in [0, 1]");
  }
  try {
    c.imperfection_model.validate();
  } catch (const std::exception& e) {
    d.push_back(e.what());
  }
  if (c.engine != Engine::Analytic && c.shots < 2) d.push_back("Monte Carlo needs at least 2 shots");
  if (c.scan_points < 50) d.push_back("scan_points must be at least 50");
  if (c.sweep_seeds < 1) d.push_back("sweep_seeds must be at least 1");

  const bool gain_ok = !(c.gain && c.reflectivity) && (!c.gain || *c.gain >= 1.0) &&
                       (!c.reflectivity || (*c.reflectivity > 0.0 && *c.reflectivity <= 1.0));
  const bool needs_g2 = detail::is_clone_scenario(c.scenario) || detail::starts_with(c.scenario, "pia-reconstruct");
  if (gain_ok && needs_g2 && std::abs(c.resolved_gain() - 2.0) > 1e-12) {
    d.push_back("scenario '" + c.scenario + "' needs G = 2");
  }
  if (c.scenario == "kl-limits") {
    if (c.kl_pairs.empty()) d.push_back("kl_pairs is empty");
    for (const auto& [k, l] : c.kl_pairs) {
      if (k < 1 || l <= k) d.push_back("kl pair [" + std::to_string(k) + ", " + std::to_string(l) + "] needs 1 <= K < L");
    }
    if (!c.noise_targets.empty()) {
      if (c.kl_pairs.size() != 1) {
        d.push_back("noise_targets needs exactly one kl pair");
      } else if (static_cast<int>(c.noise_targets.size()) != c.kl_pairs[0].second) {
        d.push_back("noise_targets needs one value per clone");
      } else {
        const auto [k, l] = c.kl_pairs[0];
        double scale = 1.0 + (l - k);
        for (double v : c.noise_targets) scale += (l - k) * std::abs(v);
        if (std::abs(circuits::kl_relation_residual(c.noise_targets, k, l)) > 1e-9 * scale) {
          d.push_back("noise_targets violate the optimal-cloner relation");
        }
      }
    }
  } else if (!c.noise_targets.empty()) {
    d.push_back("noise_targets only applies to kl-limits");
  }
  std::vector<std::string> modes;
  if (detail::is_pia_scenario(c.scenario)) modes = {"in-1", "in-2"};
  if (detail::is_clone_scenario(c.scenario)) modes = {"org", "idl"};
  for (const auto& e : c.displacements) {
    if (std::find(modes.begin(), modes.end(), e.mode) == modes.end()) {
      d.push_back("displacement mode '" + e.mode + "' is not an input of scenario '" + c.scenario + "'");
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// Report.

enum class RefKind { None, Target, Formula, Experimental, UpperBound };

inline std::string to_string(RefKind k) {
  switch (k) {
    case RefKind::Target: return "target";
    case RefKind::Formula: return "formula";
    case RefKind::Experimental: return "experimental";
    case RefKind::UpperBound: return "upper_bound";
    default: return "";
  }
}

struct Reference {
  double value;
  double tol;
  RefKind kind;
};

struct ReportRow {
  std::string quantity;
  std::string unit;
  std::optional<double> analytic;
  std::optional<double> gaussian;
  std::optional<double> montecarlo;
  std::optional<double> mc_ci;
  std::optional<Reference> reference;
  bool pass = true;
};

inline constexpr double kCrossEngineTolerance = 1e-10;
inline constexpr double kCiSigmas = 5.0;

/// Applies the pass policy: engines agree, Monte Carlo covers the analytic value
/// within its interval, and enforced references hold.
inline void judge(ReportRow& r) {
  bool ok = true;
  if (r.analytic && r.gaussian) {
    ok = ok && std::abs(*r.analytic - *r.gaussian) <= kCrossEngineTolerance * std::max(1.0, std::abs(*r.analytic));
  }
  if (r.montecarlo && r.mc_ci) {
    if (r.analytic) {
      ok = ok && std::abs(*r.montecarlo - *r.analytic) <= *r.mc_ci;
    } else if (r.reference && (r.reference->kind == RefKind::Target || r.reference->kind == RefKind::Formula)) {
      ok = ok && std::abs(*r.montecarlo - r.reference->value) <= *r.mc_ci + r.reference->tol;
    }
  }
  if (r.reference) {
    const std::optional<double> v = r.analytic ? r.analytic : r.montecarlo;
    if (v) {
      switch (r.reference->kind) {
        case RefKind::Target:
        case RefKind::Formula:
          if (r.analytic) ok = ok && std::abs(*v - r.reference->value) <= r.reference->tol;
          break;
        case RefKind::UpperBound:
          ok = ok && *v < r.reference->value;
          break;
        default:
          break;
      }
    }
  }
  r.pass = ok;
}

struct Report {
  std::string scenario;
  std::vector<ReportRow> rows;
  nlohmann::json extra = nlohmann::json::object();
  std::map<std::string, sampling::ScanDataset> scans;
  nlohmann::json program;

  bool pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.pass; });
  }
  int failures() const {
    return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const ReportRow& r) { return !r.pass; }));
  }
  const ReportRow& row(const std::string& quantity) const {
    for (const auto& r : rows)
      if (r.quantity == quantity) return r;
    throw std::out_of_range("report has no quantity '" + quantity + "'");
  }
};

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

inline const char* kReportHeader =
    "scenario,quantity,unit,analytic,gaussian,montecarlo,mc_ci,reference,reference_tol,reference_kind,pass";

inline void write_csv(std::ostream& os, const std::vector<Report>& reports) {
  os << "# schema_version=" << kSchemaVersion << '\n' << kReportHeader << '\n';
  for (const auto& rep : reports) {
    for (const auto& r : rep.rows) {
      os << rep.scenario << ',' << r.quantity << ',' << r.unit << ',' << format_optional(r.analytic) << ','
         << format_optional(r.gaussian) << ',' << format_optional(r.montecarlo) << ',' << format_optional(r.mc_ci)
         << ',' << (r.reference ? format_number(r.reference->value) : "") << ','
         << (r.reference ? format_number(r.reference->tol) : "") << ','
         << (r.reference ? to_string(r.reference->kind) : "") << ',' << (r.pass ? "pass" : "fail") << '\n';
    }
  }
}

inline nlohmann::json to_json(const ReportRow& r) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json { return v ? nlohmann::json(*v) : nlohmann::json(); };
  nlohmann::json j{{"quantity", r.quantity}, {"unit", r.unit},          {"analytic", opt(r.analytic)},
                   {"gaussian", opt(r.gaussian)}, {"montecarlo", opt(r.montecarlo)}, {"mc_ci", opt(r.mc_ci)},
                   {"pass", r.pass}};
  if (r.reference) {
    j["reference"] = {{"value", r.reference->value}, {"tol", r.reference->tol}, {"kind", to_string(r.reference->kind)}};
  }
  return j;
}

// ---------------------------------------------------------------------------
// Evaluation of quantities on every engine.

using QuantityFn = std::function<double(const Moments&)>;

struct Quantity {
  std::string name;
  std::string unit;
  QuantityFn f;
  std::optional<Reference> reference;
};

/// Standard error of f(sample moments) for N Gaussian samples, by the delta
/// method: Var = (g_m' S g_m + 2 tr(D S D S)) / N with D the symmetric
/// gradient with respect to the covariance.
inline double delta_method_se(const QuantityFn& f, const Moments& m, std::size_t n) {
  const int dim = static_cast<int>(m.mean.size());
  Eigen::VectorXd gm(dim);
  for (int i = 0; i < dim; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(m.mean(i)));
    Moments a = m;
    Moments b = m;
    a.mean(i) += h;
    b.mean(i) -= h;
    gm(i) = (f(a) - f(b)) / (2.0 * h);
  }
  Eigen::MatrixXd dm = Eigen::MatrixXd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      const double h = 1e-6 * std::max(1e-3, std::abs(m.cov(i, j)));
      Moments a = m;
      Moments b = m;
      a.cov(i, j) += h;
      b.cov(i, j) -= h;
      if (i != j) {
        a.cov(j, i) += h;
        b.cov(j, i) -= h;
      }
      const double g = (f(a) - f(b)) / (2.0 * h);
      if (i == j) {
        dm(i, i) = g;
      } else {
        dm(i, j) = dm(j, i) = 0.5 * g;
      }
    }
  }
  const Eigen::MatrixXd ds = dm * m.cov;
  const double var = (gm.dot(m.cov * gm) + 2.0 * (ds * ds).trace()) / static_cast<double>(n);
  return std::sqrt(std::max(var, 0.0));
}

struct Evaluation {
  std::optional<Moments> analytic;
  std::optional<Moments> gaussian;
  std::optional<sampling::MonteCarloResult> mc;
};

namespace detail {

inline std::uint32_t scenario_index(const std::string& name) {
  const auto& c = catalog();
  for (std::size_t k = 0; k < c.size(); ++k)
    if (c[k].name == name) return static_cast<std::uint32_t>(k);
  return 0;
}

// Independent generator per (seed, scenario, run) triple.
inline sampling::Rng run_rng(std::uint64_t seed, const std::string& scenario, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), scenario_index(scenario),
                    static_cast<std::uint32_t>(stream)};
  return sampling::Rng(seq);
}

}  // namespace detail

/// Runs `prog` on the engines selected in `c` and appends the engine-agreement
/// rows under `prefix`.
inline Evaluation evaluate(const circuits::Program& prog, const ScenarioConfig& c, std::uint64_t stream, Report& rep,
                           const std::string& prefix) {
  Evaluation ev;
  if (c.engine != Engine::MonteCarlo) {
    ev.analytic = circuits::analytic_moments(prog);
    ev.gaussian = circuits::gaussian_moments(prog);
    double diff = std::max((ev.analytic->mean - ev.gaussian->mean).cwiseAbs().maxCoeff(),
                           (ev.analytic->cov - ev.gaussian->cov).cwiseAbs().maxCoeff());
    ReportRow r{prefix + "engines.max_abs_diff", "abs", diff, std::nullopt, std::nullopt, std::nullopt,
                Reference{kCrossEngineTolerance, 0.0, RefKind::UpperBound}};
    r.pass = diff <= kCrossEngineTolerance;
    rep.rows.push_back(r);
  }
  if (c.engine != Engine::Analytic) {
    sampling::Rng rng = detail::run_rng(c.seed, c.scenario, stream);
    ev.mc = sampling::monte_carlo_circuit(prog, c.shots, rng);
    if (ev.analytic) {
      double zmax = 0.0;
      const auto& a = *ev.analytic;
      const auto& m = *ev.mc;
      for (int i = 0; i < a.mean.size(); ++i) {
        const double d = std::abs(m.moments.mean(i) - a.mean(i));
        if (m.mean_se(i) > 0.0) zmax = std::max(zmax, d / m.mean_se(i));
        for (int j = i; j < a.mean.size(); ++j) {
          const double dc = std::abs(m.moments.cov(i, j) - a.cov(i, j));
          if (m.cov_se(i, j) > 0.0) zmax = std::max(zmax, dc / m.cov_se(i, j));
        }
      }
      ReportRow r{prefix + "montecarlo.max_z", "se", zmax, std::nullopt, std::nullopt, std::nullopt,
                  Reference{kCiSigmas, 0.0, RefKind::UpperBound}};
      r.pass = zmax <= kCiSigmas;
      rep.rows.push_back(r);
    }
  }
  return ev;
}

inline void add_rows(Report& rep, const Evaluation& ev, const std::vector<Quantity>& qs) {
  for (const auto& q : qs) {
    ReportRow r{q.name, q.unit, std::nullopt, std::nullopt, std::nullopt, std::nullopt, q.reference};
    if (ev.analytic) r.analytic = q.f(*ev.analytic);
    if (ev.gaussian) r.gaussian = q.f(*ev.gaussian);
    if (ev.mc) {
      r.montecarlo = q.f(ev.mc->moments);
      r.mc_ci = kCiSigmas * delta_method_se(q.f, ev.mc->moments, ev.mc->shots);
    }
    judge(r);
    rep.rows.push_back(r);
  }
}

// ---------------------------------------------------------------------------
// Scenario builders.

namespace detail {

inline double var_of(const Moments& m, int mode, Axis a) {
  const int i = 2 * mode + axis_offset(a);
  return m.cov(i, i);
}
inline double mean_of(const Moments& m, int mode, Axis a) { return m.mean(2 * mode + axis_offset(a)); }

inline double db(double v, double ref) { return 10.0 * std::log10(v / ref); }

inline circuits::PiaParams pia_params(const ScenarioConfig& c) {
  circuits::PiaParams p;
  if (c.reflectivity) {
    p.reflectivity = c.reflectivity;
  } else {
    p.gain = c.gain.value_or(2.0);
  }
  p.theta = c.theta;
  p.ancilla_a_db = c.ancilla_a_db;
  p.ancilla_b_db = c.ancilla_b_db;
  p.anti_excess_db = c.anti_excess_db;
  p.realization = c.realization;
  if (c.imperfections) p.imperfections = c.imperfection_model;
  return p;
}

inline circuits::Program pia_program(const ScenarioConfig& c) { return circuits::build_pia_network(pia_params(c)); }

inline circuits::Program cloner_program(const ScenarioConfig& c) {
  circuits::ClonerParams p;
  p.pia = pia_params(c);
  p.final_bs_reflectivity = c.final_bs_reflectivity;
  return circuits::build_cloner_network(p);
}

// Squeezed-quadrature variances of the two ancillas; zero for ideal squeezers.
inline std::pair<double, double> ancilla_variances(const ScenarioConfig& c) {
  if (c.realization == circuits::PiaRealization::Optimal) return {0.0, 0.0};
  return {db_to_variance(c.ancilla_a_db), db_to_variance(c.ancilla_b_db)};
}

// Closed-form references hold only without loss channels.
inline bool has_formula(const ScenarioConfig& c) { return !c.imperfections; }

inline bool is_exact_g2(const ScenarioConfig& c) { return std::abs(c.resolved_gain() - 2.0) < 1e-12; }

inline std::optional<Reference> formula(const ScenarioConfig& c, double value, double tol = 1e-9) {
  if (!has_formula(c)) return std::nullopt;
  return Reference{value, tol, RefKind::Formula};
}

inline Reference target(double value, double tol) { return {value, tol, RefKind::Target}; }

inline std::vector<Displacement> default_excitations(const std::string& a, const std::string& b) {
  return {{a, 1.0, 0.0}, {a, 0.0, 1.0}, {b, 1.0, 0.0}, {b, 0.0, 1.0}};
}

inline std::string excitation_label(const Displacement& d) {
  std::string l = d.mode + "(" + format_number(d.x) + ";" + format_number(d.p) + ")";
  return l;
}

}  // namespace detail

inline const std::vector<std::string> kPiaOutputs{"out-1", "out-2"};
inline const std::vector<std::string> kCloneOutputs{"cln-1", "cln-2", "a-cln"};

inline void add_output_power_rows(Report& rep, const ScenarioConfig& c, const circuits::Program& prog,
                                  const Evaluation& ev, const std::vector<std::string>& names,
                                  const std::function<std::optional<Reference>(int, Axis)>& ref) {
  std::vector<Quantity> qs;
  for (int k = 0; k < static_cast<int>(names.size()); ++k) {
    for (Axis a : {Axis::X, Axis::P}) {
      qs.push_back({names[k] + "." + std::string(to_string(a)) + ".power", "dB",
                    [k, a](const Moments& m) { return detail::db(detail::var_of(m, k, a), kVacuumVariance); }, ref(k, a)});
    }
  }
  add_rows(rep, ev, qs);
  // Averaged power of the x quadrature streams with the segment bootstrap.
  if (c.engine != Engine::Analytic) {
    for (int k = 0; k < static_cast<int>(names.size()); ++k) {
      sampling::Rng rng = detail::run_rng(c.seed, c.scenario, 1000 + k);
      const auto stream = sampling::quadrature_stream(prog, k, Axis::X, c.shots, rng);
      const auto shot = sampling::shot_noise_stream(c.shots, rng);
      const sampling::PowerEstimate pe = sampling::power_db(stream, shot, c.seed);
      ReportRow r{names[k] + ".x.power_averaged", "dB", std::nullopt, std::nullopt, pe.db,
                  kCiSigmas * pe.stderr_db, ref(k, Axis::X)};
      if (ev.analytic) r.analytic = detail::db(detail::var_of(*ev.analytic, k, Axis::X), kVacuumVariance);
      judge(r);
      rep.rows.push_back(r);
    }
  }
}

inline Report run_pia_output_vacuum(const ScenarioConfig& c) {
  Report rep{c.scenario, {}, {}, {}, {}};
  const circuits::Program prog = detail::pia_program(c);
  rep.program = circuits::to_json(prog);
  const Evaluation ev = evaluate(prog, c, 0, rep, "");
  const double g = c.resolved_gain();
  const double r = c.resolved_reflectivity();
  const auto [va, vb] = detail::ancilla_variances(c);
  const double base = (2.0 * g - 1.0) * kVacuumVariance;
  const double k = 0.5 * (1.0 - r);
  const auto [cs, sn] = exact_cos_sin(c.theta);
  auto ref = [&](int mode, Axis a) -> std::optional<Reference> {
    if (c.realization == circuits::PiaRealization::Optimal && !c.imperfections && detail::is_exact_g2(c)) {
      return detail::target(10.0 * std::log10(3.0), 1e-9);
    }
    double vx = base + k * va;
    double vp = base + k * vb;
    if (mode == 1) {
      const double rx = cs * cs * vx + sn * sn * vp;
      const double rp = sn * sn * vx + cs * cs * vp;
      vx = rx;
      vp = rp;
    }
    return detail::formula(c, detail::db(a == Axis::X ? vx : vp, kVacuumVariance));
  };
  add_output_power_rows(rep, c, prog, ev, kPiaOutputs, ref);
  return rep;
}

inline Report run_pia_output_coherent(const ScenarioConfig& c) {
  Report rep{c.scenario, {}, {}, {}, {}};
  const auto excitations = c.displacements.empty() ? detail::default_excitations("in-1", "in-2") : c.displacements;
  const double g = c.resolved_gain();
  std::uint64_t stream = 0;
  for (const auto& e : excitations) {
    circuits::Program prog = detail::pia_program(c);
    prog.set_input_mean(e.mode, e.x, e.p);
    if (stream == 0) rep.program = circuits::to_json(prog);
    const std::string lbl = detail::excitation_label(e);
    const Evaluation ev = evaluate(prog, c, stream++, rep, lbl + ".");
    const int sig = e.mode == "in-1" ? 0 : 1;
    const int idl = 1 - sig;
    const double amp2 = e.x * e.x + e.p * e.p;
    auto power = [](const Moments& m, int k) {
      const double x = detail::mean_of(m, k, Axis::X);
      const double p = detail::mean_of(m, k, Axis::P);
      return x * x + p * p;
    };
    std::vector<Quantity> qs;
    const bool refs = detail::has_formula(c) && c.theta == 0.0 && amp2 > 0.0;
    auto ref_of = [&](double v) -> std::optional<Reference> {
      if (!refs) return std::nullopt;
      return Reference{v, 1e-9, RefKind::Formula};
    };
    if (amp2 > 0.0) {
      qs.push_back({lbl + ".signal.excitation", "dB",
                    [=](const Moments& m) { return detail::db(power(m, sig), amp2); }, ref_of(10.0 * std::log10(g))});
      if (g > 1.0) {
        qs.push_back({lbl + ".idler.excitation", "dB",
                      [=](const Moments& m) { return detail::db(power(m, idl), amp2); },
                      ref_of(10.0 * std::log10(g - 1.0))});
        std::optional<Reference> diff_ref = ref_of(10.0 * std::log10(g / (g - 1.0)));
        if (diff_ref && detail::is_exact_g2(c)) diff_ref = detail::target(10.0 * std::log10(2.0), 1e-9);
        qs.push_back({lbl + ".signal_minus_idler", "dB",
                      [=](const Moments& m) { return detail::db(power(m, sig), power(m, idl)); }, diff_ref});
      }
    }
    const double sg = std::sqrt(g);
    const double ig = std::sqrt(g - 1.0);
    auto mean_ref = [&](double v) -> std::optional<Reference> {
      if (!(detail::has_formula(c) && c.theta == 0.0)) return std::nullopt;
      return Reference{v, 1e-12, RefKind::Formula};
    };
    qs.push_back({lbl + ".signal.mean_x", "amplitude", [=](const Moments& m) { return detail::mean_of(m, sig, Axis::X); },
                  mean_ref(sg * e.x)});
    qs.push_back({lbl + ".signal.mean_p", "amplitude", [=](const Moments& m) { return detail::mean_of(m, sig, Axis::P); },
                  mean_ref(sg * e.p)});
    qs.push_back({lbl + ".idler.mean_x", "amplitude", [=](const Moments& m) { return detail::mean_of(m, idl, Axis::X); },
                  mean_ref(ig * e.x)});
    qs.push_back({lbl + ".idler.mean_p", "amplitude", [=](const Moments& m) { return detail::mean_of(m, idl, Axis::P); },
                  mean_ref(-ig * e.p)});
    add_rows(rep, ev, qs);
  }
  return rep;
}

inline Report run_pia_epr(const ScenarioConfig& c) {
  Report rep{c.scenario, {}, {}, {}, {}};
  const circuits::Program prog = detail::pia_program(c);
  rep.program = circuits::to_json(prog);
  const Evaluation ev = evaluate(prog, c, 0, rep, "");
  const double r = c.resolved_reflectivity();
  const auto [va, vb] = detail::ancilla_variances(c);
  const double shot = 2.0 * kVacuumVariance;
  const bool refs = detail::has_formula(c) && c.theta == 0.0;
  auto ref = [&](double v, double tol = 1e-9) -> std::optional<Reference> {
    if (!refs) return std::nullopt;
    return Reference{v, tol, RefKind::Formula};
  };
  const double sq_x = 2.0 * r * kVacuumVariance + 2.0 * (1.0 - r) * va;
  const double sq_p = 2.0 * r * kVacuumVariance + 2.0 * (1.0 - r) * vb;
  const double anti = 2.0 * kVacuumVariance / r;
  const bool vacuum_anc = c.realization == circuits::PiaRealization::Feedforward && c.ancilla_a_db == 0.0 &&
                          c.ancilla_b_db == 0.0;
  auto sq_ref = [&](double v) {
    auto rr = ref(detail::db(v, shot));
    if (rr && vacuum_anc) rr = detail::target(0.0, 1e-9);
    return rr;
  };
  auto combo = [](Axis a, double sign) {
    return [a, sign](const Moments& m) {
      return analysis::combination(m, {{0, a, 1.0}, {1, a, sign}}).variance;
    };
  };
  std::vector<Quantity> qs{
      {"x1-x2", "dB", [f = combo(Axis::X, -1.0), shot](const Moments& m) { return detail::db(f(m), shot); }, sq_ref(sq_x)},
      {"p1+p2", "dB", [f = combo(Axis::P, 1.0), shot](const Moments& m) { return detail::db(f(m), shot); }, sq_ref(sq_p)},
      {"x1+x2", "dB", [f = combo(Axis::X, 1.0), shot](const Moments& m) { return detail::db(f(m), shot); },
       ref(detail::db(anti, shot))},
      {"p1-p2", "dB", [f = combo(Axis::P, -1.0), shot](const Moments& m) { return detail::db(f(m), shot); },
       ref(detail::db(anti, shot))},
  };
  std::optional<Reference> duan_ref = ref(detail::db(sq_x + sq_p, 4.0 * kVacuumVariance));
  if (duan_ref && vacuum_anc) duan_ref = detail::target(0.0, 1e-9);
  qs.push_back({"duan.margin", "dB",
                [](const Moments& m) { return analysis::duan_witness(m.cov, 0, 1).margin_db; }, duan_ref});
  std::optional<Reference> ppt_ref;
  if (!c.imperfections && c.realization == circuits::PiaRealization::Feedforward && c.ancilla_a_db < 0.0 &&
      c.ancilla_b_db < 0.0 && c.resolved_gain() > 1.0) {
    ppt_ref = Reference{kVacuumVariance, 0.0, RefKind::UpperBound};
  } else if (c.realization == circuits::PiaRealization::Optimal && c.resolved_gain() > 1.0) {
    ppt_ref = Reference{kVacuumVariance, 0.0, RefKind::UpperBound};
  }
  qs.push_back({"ppt.min_symplectic_eigenvalue", "variance",
                [](const Moments& m) { return analysis::simon_ppt_min_eig(m.cov, {0}, false); }, ppt_ref});
  add_rows(rep, ev, qs);
  return rep;
}

inline Report run_pia_reconstruct(const ScenarioConfig& c, bool coherent) {
  Report rep{c.scenario, {}, {}, {}, {}};
  const auto [va, vb] = detail::ancilla_variances(c);
  const double excess = std::numbers::sqrt2 + 1.0;
  const bool refs = detail::has_formula(c) && c.theta == 0.0;
  const bool ideal = c.realization == circuits::PiaRealization::Optimal;
  auto var_ref = [&](double v) -> std::optional<Reference> {
    if (!refs) return std::nullopt;
    if (ideal) return detail::target(0.0, 1e-9);
    return Reference{detail::db(v, kVacuumVariance), 1e-9, RefKind::Formula};
  };
  std::vector<Displacement> excitations;
  if (coherent) {
    excitations = c.displacements.empty() ? detail::default_excitations("in-1", "in-2") : c.displacements;
  } else {
    excitations = {{"in-1", 0.0, 0.0}};
  }
  std::uint64_t stream = 0;
  for (const auto& e : excitations) {
    circuits::Program prog = detail::pia_program(c);
    prog.set_input_mean(e.mode, e.x, e.p);
    if (stream == 0) rep.program = circuits::to_json(prog);
    const std::string lbl = coherent ? detail::excitation_label(e) + "." : "";
    const Evaluation ev = evaluate(prog, c, stream++, rep, lbl);
    std::vector<Quantity> qs;
    for (int k = 0; k < 2; ++k) {
      const std::string name = lbl + "rec-" + std::to_string(k + 1);
      const bool excited = (e.mode == "in-1") == (k == 0);
      const double in_x = excited ? e.x : 0.0;
      const double in_p = excited ? e.p : 0.0;
      if (!coherent) {
        qs.push_back({name + ".x.power", "dB",
                      [k](const Moments& m) { const auto r = analysis::reconstruct_pia(m, k); return r.var_x_db; },
                      var_ref(kVacuumVariance + excess * va)});
        qs.push_back({name + ".p.power", "dB",
                      [k](const Moments& m) { const auto r = analysis::reconstruct_pia(m, k); return r.var_p_db; },
                      var_ref(kVacuumVariance + excess * vb)});
      }
      auto mref = [&](double v) -> std::optional<Reference> {
        if (!refs) return std::nullopt;
        return detail::target(v, 1e-12);
      };
      qs.push_back({name + ".mean_x", "amplitude",
                    [k](const Moments& m) { return analysis::reconstruct_pia(m, k).mean_x; }, mref(in_x)});
      qs.push_back({name + ".mean_p", "amplitude",
                    [k](const Moments& m) { return analysis::reconstruct_pia(m, k).mean_p; }, mref(in_p)});
    }
    add_rows(rep, ev, qs);
  }
  return rep;
}

inline Report run_clone_output(const ScenarioConfig& c) {
  Report rep{c.scenario, {}, {}, {}, {}};
  circuits::Program prog = detail::cloner_program(c);
  rep.program = circuits::to_json(prog);
  const Evaluation ev = evaluate(prog, c, 0, rep, "");
  const auto [va, vb] = detail::ancilla_variances(c);
  const double k = std::numbers::sqrt2 - 1.0;
  const double pia_x = 3.0 * kVacuumVariance + k * va;
  const double pia_p = 3.0 * kVacuumVariance + k * vb;
  const bool refs = detail::has_formula(c) && c.theta == 0.0 && c.final_bs_reflectivity == 0.5;
  const bool ideal = c.realization == circuits::PiaRealization::Optimal;
  auto power_ref = [&](int mode, Axis a) -> std::optional<Reference> {
    if (!refs) return std::nullopt;
    const double pia = a == Axis::X ? pia_x : pia_p;
    if (mode == 2) return Reference{detail::db(pia, kVacuumVariance), 1e-9, RefKind::Formula};
    if (ideal) return detail::target(10.0 * std::log10(2.0), 1e-9);
    return Reference{detail::db(0.5 * (pia + kVacuumVariance), kVacuumVariance), 1e-9, RefKind::Formula};
  };
  add_output_power_rows(rep, c, prog, ev, kCloneOutputs, power_ref);

  // Mean transfer, measured on the Heisenberg network.
  const auto gains = analysis::mean_transfer_gains(prog, {"org"});
  for (int m = 0; m < 3; ++m) {
    ReportRow rx{kCloneOutputs[m] + ".mean_gain_x", "ratio", gains[m].x, std::nullopt, std::nullopt, std::nullopt,
                 std::nullopt};
    ReportRow rp{kCloneOutputs[m] + ".mean_gain_p", "ratio", gains[m].p, std::nullopt, std::nullopt, std::nullopt,
                 std::nullopt};
    if (!c.imperfections) {
      rx.reference = detail::target(1.0, 1e-9);
      rp.reference = detail::target(m == 2 ? -1.0 : 1.0, 1e-9);
    }
    judge(rx);
    judge(rp);
    rep.rows.push_back(rx);
    rep.rows.push_back(rp);
  }

  // Added noise and fidelity. With loss the mean gain is below one; the
  // fidelity is then the vacuum-original value from the variances alone.
  std::vector<Quantity> qs;
  const double n_clone = 0.5 * (pia_x + pia_p) + kVacuumVariance - 2.0 * kVacuumVariance;
  for (int m = 0; m < 2; ++m) {
    auto noise = [m, imp = c.imperfections, g = gains[m]](const Moments& mm) {
      const double vx = detail::var_of(mm, m, Axis::X);
      const double vp = detail::var_of(mm, m, Axis::P);
      return imp ? analysis::vacuum_original_noise(vx, vp) : analysis::added_noise(vx, vp, g);
    };
    std::optional<Reference> nref;
    std::optional<Reference> fref;
    if (refs) {
      nref = ideal ? detail::target(0.5, 1e-12) : Reference{n_clone, 1e-9, RefKind::Formula};
      fref = ideal ? detail::target(2.0 / 3.0, 1e-12) : Reference{1.0 / (1.0 + n_clone), 1e-9, RefKind::Formula};
    } else if (c.imperfections) {
      fref = Reference{0.63, 0.01, RefKind::Experimental};
    }
    const std::string nm = kCloneOutputs[m];
    qs.push_back({nm + ".added_noise", "n", noise, nref});
    qs.push_back({nm + ".fidelity", "F", [noise](const Moments& mm) { return 1.0 / (1.0 + noise(mm)); }, fref});
  }
  {
    auto prod = [imp = c.imperfections, g0 = gains[0], g1 = gains[1]](const Moments& mm) {
      auto n = [&](int m, const analysis::MeanGain& g) {
        const double vx = detail::var_of(mm, m, Axis::X);
        const double vp = detail::var_of(mm, m, Axis::P);
        return imp ? analysis::vacuum_original_noise(vx, vp) : analysis::added_noise(vx, vp, g);
      };
      return n(0, g0) * n(1, g1);
    };
    std::optional<Reference> pref;
    if (refs && ideal) pref = detail::target(0.25, 1e-10);
    qs.push_back({"noise_product", "n^2", prod, pref});
  }
  add_rows(rep, ev, qs);
  return rep;
}

inline Report run_clone_epr(const ScenarioConfig& c) {
  Report rep{c.scenario, {}, {}, {}, {}};
  const circuits::Program prog = detail::cloner_program(c);
  rep.program = circuits::to_json(prog);
  const Evaluation ev = evaluate(prog, c, 0, rep, "");
  const auto [va, vb] = detail::ancilla_variances(c);
  const double shot = 2.0 * kVacuumVariance;
  const double w = (std::numbers::sqrt2 - 1.0) * std::pow(1.0 + 1.0 / std::numbers::sqrt2, 2);
  const bool refs = detail::has_formula(c) && c.theta == 0.0 && c.final_bs_reflectivity == 0.5;
  auto ref = [&](double v) -> std::optional<Reference> {
    if (!refs) return std::nullopt;
    return Reference{v, 1e-9, RefKind::Formula};
  };
  std::vector<Quantity> qs;
  for (int k = 0; k < 2; ++k) {
    const std::string cl = kCloneOutputs[k];
    qs.push_back({cl + ".x-acln.x", "dB",
                  [k, shot](const Moments& m) {
                    return detail::db(analysis::combination(m, {{k, Axis::X, 1.0}, {2, Axis::X, -1.0}}).variance, shot);
                  },
                  ref(detail::db(kVacuumVariance + w * va, shot))});
    qs.push_back({cl + ".p+acln.p", "dB",
                  [k, shot](const Moments& m) {
                    return detail::db(analysis::combination(m, {{k, Axis::P, 1.0}, {2, Axis::P, 1.0}}).variance, shot);
                  },
                  ref(detail::db(kVacuumVariance + w * vb, shot))});
    qs.push_back({cl + "|acln.duan_margin", "dB",
                  [k](const Moments& m) { return analysis::duan_witness(m.cov, k, 2).margin_db; },
                  ref(detail::db(2.0 * kVacuumVariance + w * (va + vb), 4.0 * kVacuumVariance))});
  }
  const bool squeezed = c.realization == circuits::PiaRealization::Optimal || (c.ancilla_a_db < 0.0 && c.ancilla_b_db < 0.0);
  for (int k = 0; k < 3; ++k) {
    std::optional<Reference> bound;
    if (squeezed && !c.imperfections) bound = Reference{kVacuumVariance, 0.0, RefKind::UpperBound};
    qs.push_back({"ppt." + kCloneOutputs[k] + "|rest", "variance",
                  [k](const Moments& m) { return analysis::simon_ppt_min_eig(m.cov, {k}, false); }, bound});
  }
  add_rows(rep, ev, qs);
  return rep;
}

inline Report run_clone_reconstruct(const ScenarioConfig& c) {
  Report rep{c.scenario, {}, {}, {}, {}};
  circuits::Program prog = detail::cloner_program(c);
  for (const auto& d : c.displacements) prog.set_input_mean(d.mode, d.x, d.p);
  rep.program = circuits::to_json(prog);
  const Evaluation ev = evaluate(prog, c, 0, rep, "");
  const auto [va, vb] = detail::ancilla_variances(c);
  const double excess = std::numbers::sqrt2 + 1.0;
  const bool refs = detail::has_formula(c) && c.theta == 0.0 && c.final_bs_reflectivity == 0.5;
  const bool ideal = c.realization == circuits::PiaRealization::Optimal;
  auto ref = [&](double v, double exact) -> std::optional<Reference> {
    if (!refs) return std::nullopt;
    if (ideal) return detail::target(exact, 1e-9);
    return Reference{v, 1e-9, RefKind::Formula};
  };
  const double vx = kVacuumVariance + excess * va;
  const double vp = kVacuumVariance + excess * vb;
  const double n = vx + vp - 2.0 * kVacuumVariance;
  std::optional<Reference> fref = ref(1.0 / (1.0 + n), 1.0);
  if (c.imperfections) fref = Reference{0.74, 0.01, RefKind::Experimental};
  std::vector<Quantity> qs{
      {"rec.x.power", "dB", [](const Moments& m) { return analysis::reconstruct_clone(m).var_x_db; },
       ref(detail::db(vx, kVacuumVariance), 0.0)},
      {"rec.p.power", "dB", [](const Moments& m) { return analysis::reconstruct_clone(m).var_p_db; },
       ref(detail::db(vp, kVacuumVariance), 0.0)},
      {"rec.added_noise", "n", [](const Moments& m) { return analysis::reconstruct_clone(m).noise; }, ref(n, 0.0)},
      {"rec.fidelity", "F", [](const Moments& m) { return analysis::reconstruct_clone(m).fidelity; }, fref},
  };
  if (!c.imperfections) {
    double mx = 0.0;
    double mp = 0.0;
    for (const auto& d : c.displacements)
      if (d.mode == "org") {
        mx = d.x;
        mp = d.p;
      }
    qs.push_back({"rec.mean_x", "amplitude", [](const Moments& m) { return analysis::reconstruct_clone(m).mean_x; },
                  detail::target(mx, 1e-12)});
    qs.push_back({"rec.mean_p", "amplitude", [](const Moments& m) { return analysis::reconstruct_clone(m).mean_p; },
                  detail::target(mp, 1e-12)});
  }
  add_rows(rep, ev, qs);
  return rep;
}

/// Phase-scanned records of every output, fitted by maximum likelihood.
inline Report run_phase_scan(const ScenarioConfig& c, bool cloner) {
  Report rep{c.scenario, {}, {}, {}, {}};
  circuits::Program prog = cloner ? detail::cloner_program(c) : detail::pia_program(c);
  std::vector<Displacement> disp = c.displacements;
  if (disp.empty()) disp = {{cloner ? "org" : "in-1", 1.0, 0.5}};
  for (const auto& d : disp) prog.set_input_mean(d.mode, d.x, d.p);
  rep.program = circuits::to_json(prog);
  const Evaluation ev = evaluate(prog, c, 0, rep, "");
  const auto& names = cloner ? kCloneOutputs : kPiaOutputs;

  // The scan draws from the outcome-averaged output state.
  const Moments state = circuits::gaussian_moments(prog);
  const Moments exact = circuits::analytic_moments(prog);
  const std::vector<double> phases = sampling::linear_scan(c.scan_points);
  for (int k = 0; k < static_cast<int>(names.size()); ++k) {
    std::array<double, 5> truth{exact.mean(2 * k), exact.mean(2 * k + 1), exact.cov(2 * k, 2 * k),
                                exact.cov(2 * k + 1, 2 * k + 1), exact.cov(2 * k, 2 * k + 1)};
    std::optional<sampling::EstimatedMoments> fit;
    if (c.engine != Engine::Analytic) {
      sampling::Rng rng = detail::run_rng(c.seed, c.scenario, 2000 + k);
      const gaussian::GaussianState s{state.mean, state.cov};
      sampling::ScanDataset data = sampling::sample_scan(s, k, phases, rng, names[k]);
      fit = sampling::fit_moments(data);
      rep.extra["fits"][names[k]] = sampling::to_json(*fit);
      rep.scans.emplace(names[k], std::move(data));
    }
    static const char* pname[5] = {"mean_x", "mean_p", "vxx", "vpp", "vxp"};
    for (int i = 0; i < 5; ++i) {
      ReportRow r{names[k] + ".fit." + pname[i], i < 2 ? "amplitude" : "variance", truth[i], std::nullopt,
                  std::nullopt, std::nullopt, std::nullopt};
      if (fit) {
        r.montecarlo = fit->params()[i];
        r.mc_ci = kCiSigmas * fit->stderr_[i];
      }
      judge(r);
      rep.rows.push_back(r);
    }
    if (fit) {
      ReportRow r{names[k] + ".fit.physical", "bool", std::nullopt, std::nullopt, fit->physical ? 1.0 : 0.0,
                  std::nullopt, detail::target(1.0, 0.0)};
      r.pass = fit->physical;
      rep.rows.push_back(r);
    }
  }
  return rep;
}

inline Report run_kl_limits(const ScenarioConfig& c) {
  Report rep{c.scenario, {}, {}, {}, {}};
  std::uint64_t stream = 0;
  for (const auto& [k, l] : c.kl_pairs) {
    const std::string tag = "K" + std::to_string(k) + "L" + std::to_string(l) + ".";
    const double n_sym = analysis::kl_symmetric_noise(k, l);
    auto formula_row = [&](const std::string& name, const std::string& unit, double v, std::optional<Reference> ref) {
      ReportRow r{tag + name, unit, v, std::nullopt, std::nullopt, std::nullopt, ref};
      judge(r);
      rep.rows.push_back(r);
    };
    // Closed forms, checked against the values they must reduce to.
    std::optional<Reference> nref;
    std::optional<Reference> fref;
    std::optional<Reference> cref;
    if (k == 1 && l == 2) {
      nref = detail::target(0.5, 1e-15);
      fref = detail::target(2.0 / 3.0, 1e-15);
      cref = detail::target(0.5, 1e-15);
    }
    formula_row("symmetric_noise", "n", n_sym, nref);
    formula_row("limit_fidelity", "F", analysis::kl_limit_fidelity(k, l), fref);
    formula_row("classical_fidelity", "F", analysis::kl_classical_fidelity(k), cref);

    circuits::KlClonerParams params = c.noise_targets.empty() ? circuits::KlClonerParams::symmetric(k, l)
                                                              : circuits::KlClonerParams{k, l, c.noise_targets};
    circuits::Program prog = circuits::build_kl_cloner(params);
    if (stream == 0) rep.program = circuits::to_json(prog);
    formula_row("gain", "G", analysis::asymmetric_gain(params.noise_targets),
                c.noise_targets.empty() ? std::optional<Reference>(detail::target(static_cast<double>(l) / k, 1e-12))
                                        : std::nullopt);
    const Evaluation ev = evaluate(prog, c, stream++, rep, tag);
    std::vector<std::string> originals;
    for (int i = 1; i <= k; ++i) originals.push_back("org-" + std::to_string(i));
    const auto gains = analysis::mean_transfer_gains(prog, originals);
    std::vector<Quantity> qs;
    for (int m = 0; m < l + (l - k); ++m) {
      const bool clone = m < l;
      const std::string nm = prog.output_names[m];
      ReportRow rx{tag + nm + ".mean_gain_x", "ratio", gains[m].x, std::nullopt, std::nullopt, std::nullopt,
                   detail::target(1.0, 1e-9)};
      ReportRow rp{tag + nm + ".mean_gain_p", "ratio", gains[m].p, std::nullopt, std::nullopt, std::nullopt,
                   detail::target(clone ? 1.0 : -1.0, 1e-9)};
      judge(rx);
      judge(rp);
      rep.rows.push_back(rx);
      rep.rows.push_back(rp);
      if (clone) {
        const analysis::MeanGain g = gains[m];
        qs.push_back({tag + nm + ".added_noise", "n",
                      [m, g](const Moments& mm) {
                        return analysis::added_noise(detail::var_of(mm, m, Axis::X), detail::var_of(mm, m, Axis::P), g);
                      },
                      detail::target(params.noise_targets[m], 1e-9)});
      }
    }
    qs.push_back({tag + "noise_relation_residual", "n^2",
                  [l = l, k = k, gains](const Moments& mm) {
                    std::vector<double> n;
                    for (int m = 0; m < l; ++m) {
                      n.push_back(analysis::added_noise(detail::var_of(mm, m, Axis::X), detail::var_of(mm, m, Axis::P),
                                                        gains[m]));
                    }
                    return std::abs(analysis::kl_noise_relation(n, k, l));
                  },
                  Reference{1e-10, 0.0, RefKind::UpperBound}});
    add_rows(rep, ev, qs);
    // The residual is nonnegative by construction, so its Monte Carlo value
    // only states that sampled noise lies near the boundary.
    rep.rows.back().montecarlo.reset();
    rep.rows.back().mc_ci.reset();
    judge(rep.rows.back());
  }
  return rep;
}

inline Report run(const ScenarioConfig& c) {
  const auto diag = validate(c);
  if (!diag.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& d : diag) msg += "\n  " + d;
    throw ConfigError(msg);
  }
  const std::string& s = c.scenario;
  if (s == "pia-output-vacuum") return run_pia_output_vacuum(c);
  if (s == "pia-output-coherent") return run_pia_output_coherent(c);
  if (s == "pia-epr") return run_pia_epr(c);
  if (s == "pia-reconstruct-vacuum") return run_pia_reconstruct(c, false);
  if (s == "pia-reconstruct-coherent") return run_pia_reconstruct(c, true);
  if (s == "pia-phase-scan") return run_phase_scan(c, false);
  if (s == "clone-output") return run_clone_output(c);
  if (s == "clone-epr") return run_clone_epr(c);
  if (s == "clone-reconstruct") return run_clone_reconstruct(c);
  if (s == "clone-phase-scan") return run_phase_scan(c, true);
  return run_kl_limits(c);
}

// ---------------------------------------------------------------------------
// Output files.

inline nlohmann::json summary_json(const ScenarioConfig& c, const Report& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : rep.rows) rows.push_back(to_json(r));
  return {{"schema_version", kSchemaVersion}, {"scenario", rep.scenario}, {"config", to_json(c)},
          {"rows", rows},                     {"failures", rep.failures()}, {"pass", rep.pass()},
          {"extra", rep.extra}};
}

inline void write_outputs(const ScenarioConfig& c, const Report& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "report.csv");
    write_csv(os, {rep});
  }
  {
    std::ofstream os(dir / "summary.json");
    os << summary_json(c, rep).dump(2) << '\n';
  }
  {
    std::ofstream os(dir / "program.json");
    os << rep.program.dump(2) << '\n';
  }
  for (const auto& [name, data] : rep.scans) {
    std::ofstream os(dir / ("scan_" + name + ".csv"));
    sampling::write_csv(os, data);
  }
  // scan.csv holds the first output of the circuit (signal or first clone).
  if (!rep.scans.empty()) {
    const std::string first_name = rep.scenario == "clone-phase-scan" ? "cln-1" : "out-1";
    auto it = rep.scans.find(first_name);
    if (it == rep.scans.end()) it = rep.scans.begin();
    std::ofstream os(dir / "scan.csv");
    sampling::write_csv(os, it->second);
  }
}

// ---------------------------------------------------------------------------
// Seed sweep.

struct SweepRow {
  std::string quantity;
  std::string unit;
  std::optional<double> analytic;
  double mc_median = 0.0;
  double mc_spread = 0.0;  // half the range between the 10th and 90th percentiles
  int covered = 0;
  int seeds = 0;
  bool pass = true;
};

/// Repeats the scenario for `seeds` consecutive seeds starting at c.seed and
/// aggregates the Monte Carlo values of every row that has one.
inline std::vector<SweepRow> seed_sweep(ScenarioConfig c, int seeds) {
  if (seeds < 1) throw std::invalid_argument("need at least one seed");
  if (c.engine == Engine::Analytic) c.engine = Engine::Both;
  const std::uint64_t first = c.seed;
  std::map<std::string, SweepRow> agg;
  std::map<std::string, std::vector<double>> values;
  std::vector<std::string> order;
  for (int s = 0; s < seeds; ++s) {
    c.seed = first + static_cast<std::uint64_t>(s);
    const Report rep = run(c);
    for (const auto& r : rep.rows) {
      if (!r.montecarlo) continue;
      if (!agg.count(r.quantity)) {
        order.push_back(r.quantity);
        agg[r.quantity] = SweepRow{r.quantity, r.unit, r.analytic, 0.0, 0.0, 0, 0, true};
      }
      SweepRow& row = agg[r.quantity];
      ++row.seeds;
      values[r.quantity].push_back(*r.montecarlo);
      const std::optional<double> truth = r.analytic ? r.analytic
                                                     : (r.reference && r.reference->kind != RefKind::Experimental &&
                                                        r.reference->kind != RefKind::UpperBound)
                                                           ? std::optional<double>(r.reference->value)
                                                           : std::nullopt;
      if (truth && r.mc_ci && std::abs(*r.montecarlo - *truth) <= *r.mc_ci) ++row.covered;
      if (!truth) ++row.covered;
    }
  }
  std::vector<SweepRow> out;
  for (const auto& q : order) {
    SweepRow row = agg[q];
    auto v = values[q];
    std::sort(v.begin(), v.end());
    const auto pct = [&](double p) { return v[static_cast<std::size_t>(std::lround(p * (v.size() - 1)))]; };
    row.mc_median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    row.mc_spread = 0.5 * (pct(0.9) - pct(0.1));
    row.pass = 10 * row.covered >= 9 * row.seeds;
    out.push_back(row);
  }
  return out;
}

inline void write_sweep_csv(std::ostream& os, const std::string& scenario, const std::vector<SweepRow>& rows) {
  os << "# schema_version=" << kSchemaVersion << '\n'
     << "scenario,quantity,unit,analytic,mc_median,mc_spread,covered,seeds,pass\n";
  for (const auto& r : rows) {
    os << scenario << ',' << r.quantity << ',' << r.unit << ',' << format_optional(r.analytic) << ','
       << format_number(r.mc_median) << ',' << format_number(r.mc_spread) << ',' << r.covered << ',' << r.seeds << ','
       << (r.pass ? "pass" : "fail") << '\n';
  }
}

}  // namespace cvamp::labcli
