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

// cvamp_cli: runs the scenario catalog and writes report.csv / summary.json.
//
//   cvamp_cli list-scenarios
//   cvamp_cli validate --config cfg.json
//   cvamp_cli run --config cfg.json [--seed N] [--engine both] [--out DIR] [--shots N]
//   cvamp_cli run --scenario pia-epr
//   cvamp_cli run --all --out DIR
//   cvamp_cli seed-sweep --config cfg.json [--seeds 10]

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cvamp/labcli.hpp"

namespace {

using namespace cvamp;

struct Overrides {
  std::string config;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> engine;
  std::optional<std::string> out;
  std::optional<std::uint64_t> shots;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "scenario configuration (JSON)");
  cmd->add_option("--scenario", o.scenario, "scenario name, used when no config is given or to override it");
  cmd->add_option("--seed", o.seed, "Monte Carlo seed");
  cmd->add_option("--engine", o.engine, "analytic | montecarlo | both");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--shots", o.shots, "Monte Carlo shots");
}

labcli::ScenarioConfig resolve(const Overrides& o) {
  labcli::ScenarioConfig c;
  if (!o.config.empty()) {
    c = labcli::load_config(o.config);
  } else if (o.scenario.empty()) {
    throw labcli::ConfigError("give --config or --scenario");
  }
  if (!o.scenario.empty()) c.scenario = o.scenario;
  if (o.seed) c.seed = *o.seed;
  if (o.engine) c.engine = labcli::engine_from_string(*o.engine);
  if (o.out) c.out = *o.out;
  if (o.shots) c.shots = *o.shots;
  return c;
}

void print_rows(const labcli::Report& rep) {
  for (const auto& r : rep.rows) {
    if (r.pass) continue;
    std::cerr << "  FAIL " << rep.scenario << ' ' << r.quantity << " analytic=" << labcli::format_optional(r.analytic)
              << " gaussian=" << labcli::format_optional(r.gaussian)
              << " montecarlo=" << labcli::format_optional(r.montecarlo) << " ci=" << labcli::format_optional(r.mc_ci)
              << '\n';
  }
}

int run_one(const labcli::ScenarioConfig& c, const std::filesystem::path& dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const labcli::Report rep = labcli::run(c);
  labcli::write_outputs(c, rep, dir);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (rep.pass() ? "PASS " : "FAIL ") << c.scenario << "  rows=" << rep.rows.size()
            << " failures=" << rep.failures() << "  " << secs << " s  -> " << dir.string() << '\n';
  print_rows(rep);
  return rep.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian amplifier and cloner scenarios"};
  app.require_subcommand(1);

  Overrides run_o;
  bool run_all = false;
  CLI::App* run = app.add_subcommand("run", "run a scenario and write report.csv and summary.json");
  add_common(run, run_o);
  run->add_flag("--all", run_all, "run every catalog scenario with defaults, one directory each");

  CLI::App* list = app.add_subcommand("list-scenarios", "print the scenario catalog");

  Overrides val_o;
  CLI::App* val = app.add_subcommand("validate", "check a configuration without running it");
  add_common(val, val_o);

  Overrides sweep_o;
  std::optional<int> seeds;
  CLI::App* sweep = app.add_subcommand("seed-sweep", "repeat a scenario over consecutive seeds");
  add_common(sweep, sweep_o);
  sweep->add_option("--seeds", seeds, "number of seeds (default from config, 10)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& s : labcli::catalog()) std::cout << s.name << "\t" << s.description << '\n';
      return 0;
    }
    if (*val) {
      const labcli::ScenarioConfig c = resolve(val_o);
      const auto diag = labcli::validate(c);
      if (diag.empty()) {
        std::cout << "ok: " << c.scenario << '\n';
        return 0;
      }
      for (const auto& d : diag) std::cerr << "error: " << d << '\n';
      return 2;
    }
    if (*run) {
      if (run_all) {
        int status = 0;
        const std::filesystem::path root = run_o.out.value_or("out");
        for (const auto& s : labcli::catalog()) {
          labcli::ScenarioConfig c;
          c.scenario = s.name;
          if (run_o.seed) c.seed = *run_o.seed;
          if (run_o.engine) c.engine = labcli::engine_from_string(*run_o.engine);
          if (run_o.shots) c.shots = *run_o.shots;
          status |= run_one(c, root / s.name);
        }
        return status;
      }
      const labcli::ScenarioConfig c = resolve(run_o);
      return run_one(c, c.out);
    }
    if (*sweep) {
      const labcli::ScenarioConfig c = resolve(sweep_o);
      const int n = seeds.value_or(c.sweep_seeds);
      const auto rows = labcli::seed_sweep(c, n);
      std::filesystem::create_directories(c.out);
      std::ofstream os(std::filesystem::path(c.out) / "sweep.csv");
      labcli::write_sweep_csv(os, c.scenario, rows);
      bool ok = true;
      for (const auto& r : rows) {
        ok = ok && r.pass;
        if (!r.pass) std::cerr << "  FAIL " << r.quantity << " covered " << r.covered << "/" << r.seeds << '\n';
      }
      std::cout << (ok ? "PASS " : "FAIL ") << c.scenario << " seeds=" << n << " quantities=" << rows.size() << '\n';
      return ok ? 0 : 1;
    }
  } catch (const labcli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
