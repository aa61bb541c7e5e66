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

#include <cmath>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>

#include "cvamp/analysis.hpp"
#include "cvamp/circuits.hpp"
#include "oracles.hpp"

using namespace cvamp;
using namespace cvamp::analysis;
using circuits::ClonerParams;
using circuits::PiaParams;
using circuits::PiaRealization;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Mean gains come back for every output mode; the noise budget wants the clones only.
std::vector<cvamp::analysis::MeanGain> first_two(const std::vector<cvamp::analysis::MeanGain>& g) {
  return {g.begin(), g.begin() + 2};
}

PiaParams ffw_pia(double db) {
  PiaParams p;
  p.gain = 2.0;
  p.ancilla_a_db = db;
  p.ancilla_b_db = db;
  return p;
}

Moments pia_moments(double db) { return circuits::analytic_moments(circuits::build_pia_network(ffw_pia(db))); }

Moments cloner_moments(double db) {
  ClonerParams cp;
  cp.pia = ffw_pia(db);
  return circuits::analytic_moments(circuits::build_cloner_network(cp));
}

}  // namespace

TEST_CASE("dB conversion", "[analysis]") {
  CHECK_THAT(variance_db(0.5, 0.25), WithinAbs(10.0 * std::log10(2.0), 1e-14));
  CHECK(variance_db(0.25, 0.25) == 0.0);
  CHECK_THROWS_AS(variance_db(0.0, 0.25), std::domain_error);
  CHECK_THROWS_AS(variance_db(1.0, -1.0), std::domain_error);
}

TEST_CASE("Duan witness", "[analysis]") {
  gaussian::GaussianState s = gaussian::tensor(gaussian::squeezed_vacuum(-6, Axis::X), gaussian::squeezed_vacuum(-6, Axis::P));
  s = gaussian::apply(s, gaussian::el::Beamsplitter{0, 1, 0.5});
  const auto w = duan_witness(s.cov, 0, 1);
  CHECK(w.entangled);
  CHECK_THAT(w.bound, WithinAbs(1.0, 1e-15));
  CHECK_THAT(w.value, WithinAbs(4.0 * oracle::sq_var(-6), 1e-12));
  CHECK_THAT(w.margin_db, WithinAbs(-6.0, 1e-10));

  SECTION("product states never violate") {
    std::mt19937_64 rng(21);
    for (int k = 0; k < 50; ++k) {
      const Eigen::MatrixXd a = oracle::random_physical_cov(1, rng, 1.5);
      const Eigen::MatrixXd b = oracle::random_physical_cov(1, rng, 1.5);
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(4, 4);
      c.topLeftCorner(2, 2) = a;
      c.bottomRightCorner(2, 2) = b;
      CHECK(duan_witness(c, 0, 1).value >= 1.0 - 1e-12);
      CHECK(simon_ppt_min_eig(c, {0}) >= 0.25 - 1e-10);
    }
  }
  CHECK_THROWS_AS(duan_witness(s.cov, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(duan_witness(s.cov, 0, 2), UnknownModeError);
}

TEST_CASE("PPT criterion", "[analysis]") {
  SECTION("agrees with the dense oracle on random states") {
    std::mt19937_64 rng(23);
    for (int k = 0; k < 30; ++k) {
      const int n = 2 + k % 2;
      const Eigen::MatrixXd c = oracle::random_physical_cov(n, rng);
      Eigen::MatrixXd pt = c;
      for (int i = 0; i < 2 * n; ++i) {
        pt(1, i) *= -1.0;
        pt(i, 1) *= -1.0;
      }
      CHECK_THAT(simon_ppt_min_eig(c, {0}), WithinRel(oracle::symplectic_spectrum(pt).front(), 1e-9));
    }
  }
  SECTION("two-mode squeezing deepens monotonically") {
    double last = 0.25;
    for (int db = 1; db <= 10; ++db) {
      gaussian::GaussianState s =
          gaussian::tensor(gaussian::squeezed_vacuum(-db, Axis::X), gaussian::squeezed_vacuum(-db, Axis::P));
      s = gaussian::apply(s, gaussian::el::Beamsplitter{0, 1, 0.5});
      const double e = simon_ppt_min_eig(s.cov, {0});
      CHECK(e < last);
      CHECK_THAT(e, WithinRel(oracle::sq_var(-db), 1e-9));
      last = e;
    }
  }
  SECTION("cloner outputs are NPT across every cut") {
    const auto cuts = tripartite_npt(cloner_moments(-5.0).cov);
    for (double v : cuts) CHECK(v < 0.25);
  }
  SECTION("argument checks") {
    const Eigen::MatrixXd c = 0.25 * Eigen::MatrixXd::Identity(4, 4);
    CHECK_THROWS_AS(simon_ppt_min_eig(c, {}), std::invalid_argument);
    CHECK_THROWS_AS(simon_ppt_min_eig(c, {0, 1}), std::invalid_argument);
    CHECK_THROWS_AS(simon_ppt_min_eig(0.1 * Eigen::MatrixXd::Identity(4, 4), {0}), std::domain_error);
    CHECK_NOTHROW(simon_ppt_min_eig(0.249 * Eigen::MatrixXd::Identity(4, 4), {0}, false));
  }
}

TEST_CASE("EPR variances of the amplifier outputs", "[analysis]") {
  for (double db : {0.0, -3.0, -5.0, -10.0}) {
    const double va = oracle::sq_var(db);
    const auto e = epr_variances(pia_moments(db).cov);
    CHECK_THAT(e.x_minus, WithinAbs(oracle::epr_var(va), 1e-12));
    CHECK_THAT(e.p_plus, WithinAbs(oracle::epr_var(va), 1e-12));
    CHECK_THAT(e.x_minus_db, WithinAbs(oracle::db(oracle::epr_var(va), 0.5), 1e-10));
  }
  const auto ideal = epr_variances(circuits::analytic_moments(circuits::build_ideal_pia(2.0)).cov);
  CHECK_THAT(ideal.x_minus, WithinAbs(2.0 * oracle::kR2 * 0.25, 1e-12));
  CHECK(ideal.x_plus > 0.5);
}

TEST_CASE("reconstruction", "[analysis]") {
  SECTION("amplifier") {
    for (double db : {0.0, -2.0, -5.0, -12.0}) {
      const double va = oracle::sq_var(db);
      const auto r = reconstruct_pia(pia_moments(db));
      CHECK_THAT(r.var_x, WithinAbs(oracle::reconstruction_var(va), 1e-12));
      CHECK_THAT(r.reference, WithinAbs(0.25, 1e-15));
      CHECK_THAT(r.var_p, WithinAbs(r.var_x, 1e-12));
    }
  }
  SECTION("amplifier means are restored") {
    auto prog = circuits::build_pia_network(ffw_pia(-5.0));
    prog.set_input_mean("in-1", 1.3, -0.7);
    const auto r = reconstruct_pia(circuits::analytic_moments(prog));
    CHECK_THAT(r.mean_x, WithinAbs(1.3, 1e-12));
    CHECK_THAT(r.mean_p, WithinAbs(-0.7, 1e-12));
  }
  SECTION("cloner") {
    ClonerParams cp;
    cp.pia = ffw_pia(-5.0);
    auto prog = circuits::build_cloner_network(cp);
    prog.set_input_mean("org", 0.5, 0.25);
    const auto r = reconstruct_clone(circuits::analytic_moments(prog));
    CHECK_THAT(r.mean_x, WithinAbs(0.5, 1e-12));
    CHECK_THAT(r.mean_p, WithinAbs(0.25, 1e-12));
  }
  CHECK_THROWS_AS(reconstruct_pia(cloner_moments(-5.0)), std::invalid_argument);
  CHECK_THROWS_AS(reconstruct_clone(pia_moments(-5.0)), std::invalid_argument);
}

TEST_CASE("added noise and fidelity", "[analysis]") {
  CHECK(fidelity(0.0) == 1.0);
  CHECK_THAT(fidelity(0.5), WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THROWS_AS(fidelity(-0.1), std::domain_error);

  SECTION("optimal clones have n = 1/2") {
    ClonerParams cp;
    cp.pia.realization = PiaRealization::Optimal;
    const auto prog = circuits::build_cloner_network(cp);
    const auto gains = mean_transfer_gains(prog, {"org"});
    const auto b = added_noise(circuits::analytic_moments(prog), {0, 1, 2}, gains);
    CHECK_THAT(b.n[0], WithinAbs(0.5, 1e-12));
    CHECK_THAT(b.n[1], WithinAbs(0.5, 1e-12));
    const auto rep = fidelity_report(b);
    CHECK_THAT(rep.fidelity[0], WithinAbs(2.0 / 3.0, 1e-12));
    CHECK_THAT(rep.cloning_limit, WithinAbs(2.0 / 3.0, 1e-15));
    CHECK_THAT(rep.classical_limit, WithinAbs(0.5, 1e-15));
  }
  SECTION("feedforward clones at -5 dB") {
    const Moments m = cloner_moments(-5.0);
    const double va = oracle::sq_var(-5.0);
    const double n = added_noise(m.cov(0, 0), m.cov(1, 1), {1.0, 1.0});
    CHECK_THAT(n, WithinAbs(oracle::clone_noise(va, va), 1e-12));
    CHECK(fidelity(n) < 2.0 / 3.0);
  }
  SECTION("non-unit gains are refused") {
    CHECK_THROWS_AS(added_noise(0.5, 0.5, {std::sqrt(2.0), 1.0}), std::domain_error);
    CHECK_THROWS_AS(added_noise(0.5, 0.5, {1.0, 1.0 + 1e-6}), std::domain_error);
    CHECK_NOTHROW(added_noise(0.5, 0.5, {1.0, -1.0}));
    const auto g = mean_transfer_gains(circuits::build_ideal_pia(2.0), {"in-1"});
    CHECK_THAT(g[0].x, WithinAbs(std::sqrt(2.0), 1e-12));
  }
  SECTION("asymmetric optimal clones sit on n1 n2 = 1/4") {
    for (double n1 : {0.1, 0.25, 0.5, 1.0, 2.0}) {
      const double n2 = asymmetric_partner_noise(n1);
      const auto prog = circuits::build_kl_cloner({1, 2, {n1, n2}});
      const auto b = added_noise(circuits::analytic_moments(prog), {0, 1}, first_two(mean_transfer_gains(prog, {"org-1"})));
      CHECK_THAT(b.product(), WithinAbs(0.25, 1e-10));
      CHECK_THAT(asymmetric_gain(b.n), WithinAbs(1.0 + n1 + n2, 1e-10));
    }
  }
  SECTION("finite squeezing stays above the bound") {
    for (double db : {0.0, -3.0, -5.0, -10.0}) {
      const Moments m = cloner_moments(db);
      const double n1 = vacuum_original_noise(m.cov(0, 0), m.cov(1, 1));
      const double n2 = vacuum_original_noise(m.cov(2, 2), m.cov(3, 3));
      CHECK(n1 * n2 > 0.25);
    }
  }
}

TEST_CASE("K -> L limits", "[analysis]") {
  CHECK_THAT(kl_symmetric_noise(1, 2), WithinAbs(0.5, 1e-15));
  CHECK_THAT(kl_limit_fidelity(1, 2), WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THAT(kl_limit_fidelity(2, 3), WithinAbs(6.0 / 7.0, 1e-15));
  CHECK_THAT(kl_classical_fidelity(3), WithinAbs(0.75, 1e-15));
  for (auto [k, l] : std::vector<std::pair<int, int>>{{1, 2}, {1, 3}, {2, 3}, {3, 5}, {4, 9}}) {
    const double n = kl_symmetric_noise(k, l);
    CHECK_THAT(kl_limit_fidelity(k, l), WithinAbs(1.0 / (1.0 + n), 1e-14));
    CHECK(std::abs(kl_noise_relation(std::vector<double>(l, n), k, l)) < 1e-12);
    CHECK(kl_limit_fidelity(k, l) > kl_classical_fidelity(k));
  }
  SECTION("many clones approach the classical limit") {
    CHECK_THAT(kl_limit_fidelity(1, 10000), WithinAbs(0.5, 1e-4));
    CHECK_THAT(kl_limit_fidelity(3, 10000), WithinAbs(0.75, 1e-4));
  }
  SECTION("symmetric noise minimizes the total on the boundary") {
    // On the 1 -> 2 boundary n1 n2 = 1/4, so n1 + n2 >= 1 by AM-GM.
    for (double n1 : {0.05, 0.2, 0.5, 0.9, 3.0}) {
      const double n2 = asymmetric_partner_noise(n1);
      CHECK(cloning_cost({n1, n2}, {1.0, 1.0}) >= 1.0 - 1e-15);
    }
  }
  CHECK_THROWS_AS(kl_symmetric_noise(2, 2), std::domain_error);
  CHECK_THROWS_AS(kl_noise_relation({0.5}, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(cloning_cost({0.5, 0.5}, {1.0, 0.0}), std::domain_error);
}

TEST_CASE("figures agree across engines", "[analysis][property]") {
  ClonerParams cp;
  cp.pia = ffw_pia(-5.0);
  cp.pia.imperfections = circuits::ImperfectionModel{};
  const auto prog = circuits::build_cloner_network(cp);
  const Moments a = circuits::analytic_moments(prog);
  const Moments g = circuits::gaussian_moments(prog);
  CHECK_THAT(reconstruct_clone(a).var_x, WithinAbs(reconstruct_clone(g).var_x, 1e-10));
  const auto ca = tripartite_npt(a.cov);
  const auto cg = tripartite_npt(g.cov);
  for (int k = 0; k < 3; ++k) CHECK_THAT(ca[k], WithinAbs(cg[k], 1e-10));
  CHECK_THAT(duan_witness(a.cov, 0, 2, -1.0, -1.0).value, WithinAbs(duan_witness(g.cov, 0, 2, -1.0, -1.0).value, 1e-10));
}
