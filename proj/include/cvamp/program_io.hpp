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
#include <limits>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "cvamp/circuits.hpp"

/// JSON form of circuit programs.
///
///   {"inputs":  [{"label": "in-1", "mean": [x, p], "var": [vx, vp]}, ...],
///    "ops":     [{"op": "beamsplitter", "a": "...", "b": "...", "reflectivity": R}, ...],
///    "outputs": [{"mode": "in-1", "name": "out-1"}, ...]}
///
/// Infinite variances are written as the string "inf".
namespace cvamp::circuits {

namespace io_detail {

inline nlohmann::json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double number(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

inline void require_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& what) {
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw std::invalid_argument("unknown key '" + k + "' in " + what);
  }
}

}  // namespace io_detail

inline nlohmann::json to_json(const Operation& o) {
  using nlohmann::json;
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, op::Beamsplitter>) {
          return {{"op", "beamsplitter"}, {"a", v.a}, {"b", v.b}, {"reflectivity", v.reflectivity}};
        } else if constexpr (std::is_same_v<T, op::Phase>) {
          return {{"op", "phase"}, {"mode", v.mode}, {"phi", v.phi}};
        } else if constexpr (std::is_same_v<T, op::Squeeze>) {
          return {{"op", "squeeze"}, {"mode", v.mode}, {"r", v.r}};
        } else if constexpr (std::is_same_v<T, op::Displace>) {
          return {{"op", "displace"}, {"mode", v.mode}, {"dx", v.dx}, {"dp", v.dp}};
        } else if constexpr (std::is_same_v<T, op::Loss>) {
          return {{"op", "loss"}, {"mode", v.mode}, {"eta", v.eta}, {"vacuum", v.vacuum}};
        } else if constexpr (std::is_same_v<T, op::MeasureFeedforward>) {
          json targets = json::array();
          for (const auto& t : v.targets) {
            targets.push_back({{"mode", t.mode}, {"axis", std::string(to_string(t.axis))}, {"gain", t.gain}});
          }
          return {{"op", "measure_feedforward"}, {"measured", v.measured}, {"axis", std::string(to_string(v.axis))},
                  {"targets", targets}};
        } else {
          return {{"op", "discard"}, {"mode", v.mode}};
        }
      },
      o);
}

inline Operation operation_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("op").get<std::string>();
  using io_detail::require_keys;
  if (kind == "beamsplitter") {
    require_keys(j, {"op", "a", "b", "reflectivity"}, kind);
    return op::Beamsplitter{j.at("a"), j.at("b"), j.at("reflectivity")};
  }
  if (kind == "phase") {
    require_keys(j, {"op", "mode", "phi"}, kind);
    return op::Phase{j.at("mode"), j.at("phi")};
  }
  if (kind == "squeeze") {
    require_keys(j, {"op", "mode", "r"}, kind);
    return op::Squeeze{j.at("mode"), j.at("r")};
  }
  if (kind == "displace") {
    require_keys(j, {"op", "mode", "dx", "dp"}, kind);
    return op::Displace{j.at("mode"), j.at("dx"), j.at("dp")};
  }
  if (kind == "loss") {
    require_keys(j, {"op", "mode", "eta", "vacuum"}, kind);
    return op::Loss{j.at("mode"), j.at("eta"), j.at("vacuum")};
  }
  if (kind == "measure_feedforward") {
    require_keys(j, {"op", "measured", "axis", "targets"}, kind);
    op::MeasureFeedforward m{j.at("measured"), axis_from_string(j.at("axis").get<std::string>()), {}};
    for (const auto& t : j.at("targets")) {
      require_keys(t, {"mode", "axis", "gain"}, "feedforward target");
      m.targets.push_back({t.at("mode"), axis_from_string(t.at("axis").get<std::string>()), t.at("gain")});
    }
    return m;
  }
  if (kind == "discard") {
    require_keys(j, {"op", "mode"}, kind);
    return op::Discard{j.at("mode")};
  }
  throw std::invalid_argument("unknown operation '" + kind + "'");
}

inline nlohmann::json to_json(const Program& prog) {
  using nlohmann::json;
  using io_detail::number;
  json inputs = json::array();
  for (const auto& in : prog.inputs) {
    inputs.push_back({{"label", in.label},
                      {"mean", {in.mean_x, in.mean_p}},
                      {"var", {number(in.var_x), number(in.var_p)}}});
  }
  json ops = json::array();
  for (const auto& o : prog.ops) ops.push_back(to_json(o));
  json outputs = json::array();
  for (std::size_t k = 0; k < prog.outputs.size(); ++k) {
    outputs.push_back({{"mode", prog.outputs[k]}, {"name", k < prog.output_names.size() ? prog.output_names[k] : prog.outputs[k]}});
  }
  return {{"inputs", inputs}, {"ops", ops}, {"outputs", outputs}};
}

inline Program program_from_json(const nlohmann::json& j) {
  using io_detail::number;
  io_detail::require_keys(j, {"inputs", "ops", "outputs"}, "program");
  Program prog;
  for (const auto& in : j.at("inputs")) {
    io_detail::require_keys(in, {"label", "mean", "var"}, "program input");
    InputSpec s{in.at("label")};
    if (in.contains("mean")) {
      s.mean_x = in.at("mean").at(0);
      s.mean_p = in.at("mean").at(1);
    }
    if (in.contains("var")) {
      s.var_x = number(in.at("var").at(0));
      s.var_p = number(in.at("var").at(1));
    }
    prog.inputs.push_back(s);
  }
  for (const auto& o : j.at("ops")) prog.ops.push_back(operation_from_json(o));
  for (const auto& o : j.at("outputs")) {
    io_detail::require_keys(o, {"mode", "name"}, "program output");
    prog.outputs.push_back(o.at("mode"));
    prog.output_names.push_back(o.value("name", o.at("mode").get<std::string>()));
  }
  return prog;
}

}  // namespace cvamp::circuits
