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
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <catch_amalgamated.hpp>

#include "cvamp/quadnet.hpp"
#include "oracles.hpp"

using namespace cvamp;
using namespace cvamp::quadnet;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<ModeId> labels(int n) {
  std::vector<ModeId> v;
  for (int k = 0; k < n; ++k) v.push_back("m" + std::to_string(k));
  return v;
}

}  // namespace

TEST_CASE("QuadExpr drops terms that cancel", "[quadnet]") {
  QuadExpr a = QuadExpr::variable("a", Axis::X);
  QuadExpr b = a - a;
  CHECK(b.terms().empty());
  CHECK_FALSE(b.has_term("a", Axis::X));
  QuadExpr c = 0.0 * a;
  CHECK(c.terms().empty());
  QuadExpr d = a + 2.0 * QuadExpr::variable("b", Axis::P);
  d.add_constant(1.5);
  CHECK(d.coeff("a", Axis::X) == 1.0);
  CHECK(d.coeff("b", Axis::P) == 2.0);
  CHECK(d.coeff("b", Axis::X) == 0.0);
  CHECK(d.constant() == 1.5);
}

TEST_CASE("beamsplitter coefficients follow the sign convention", "[quadnet]") {
  auto net = new_network({"a", "b"});
  net = apply_beamsplitter(net, "a", "b", 0.3);
  const double t = std::sqrt(0.7);
  const double r = std::sqrt(0.3);
  for (Axis ax : {Axis::X, Axis::P}) {
    CHECK_THAT(net.expr("a", ax).coeff("a", ax), WithinAbs(t, 1e-15));
    CHECK_THAT(net.expr("a", ax).coeff("b", ax), WithinAbs(r, 1e-15));
    CHECK_THAT(net.expr("b", ax).coeff("a", ax), WithinAbs(-r, 1e-15));
    CHECK_THAT(net.expr("b", ax).coeff("b", ax), WithinAbs(t, 1e-15));
  }
  CHECK_FALSE(net.expr("a", Axis::X).has_term("a", Axis::P));
}

TEST_CASE("phase and squeeze coefficients", "[quadnet]") {
  auto net = new_network({"a"});
  net = apply_phase(net, "a", 0.4);
  CHECK_THAT(net.expr("a", Axis::X).coeff("a", Axis::P), WithinAbs(-std::sin(0.4), 1e-15));
  CHECK_THAT(net.expr("a", Axis::P).coeff("a", Axis::X), WithinAbs(std::sin(0.4), 1e-15));

  auto q = apply_phase(new_network({"a"}), "a", std::numbers::pi / 2);
  CHECK_FALSE(q.expr("a", Axis::X).has_term("a", Axis::X));
  CHECK(q.expr("a", Axis::X).coeff("a", Axis::P) == -1.0);

  auto s = apply_squeeze(new_network({"a"}), "a", 0.5);
  CHECK_THAT(s.expr("a", Axis::X).coeff("a", Axis::X), WithinAbs(std::exp(-0.5), 1e-15));
  CHECK_THAT(s.expr("a", Axis::P).coeff("a", Axis::P), WithinAbs(std::exp(0.5), 1e-15));
}

TEST_CASE("random passive and squeezing networks keep canonical commutators", "[quadnet][property]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 4;
    const auto ids = labels(n);
    auto net = new_network(ids);
    for (int k = 0; k < 12; ++k) {
      const int a = static_cast<int>(u(rng) * n) % n;
      const int b = (a + 1) % n;
      net = apply_beamsplitter(net, ids[a], ids[b], u(rng));
      net = apply_phase(net, ids[a], 6.0 * u(rng));
      net = apply_squeeze(net, ids[b], u(rng) - 0.5);
    }
    CHECK(commutator_defect(net) < 1e-12);
  }
}

TEST_CASE("output moments agree with a dense symplectic product", "[quadnet][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 3;
    const auto ids = labels(n);
    auto net = new_network(ids);
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(2 * n, 2 * n);
    for (int k = 0; k < 8; ++k) {
      const int a = static_cast<int>(u(rng) * n) % n;
      const int b = (a + 1) % n;
      const double refl = u(rng);
      const double phi = 6.0 * u(rng);
      const double r = u(rng) - 0.5;
      net = apply_beamsplitter(net, ids[a], ids[b], refl);
      net = apply_phase(net, ids[a], phi);
      net = apply_squeeze(net, ids[b], r);
      s = oracle::sqz(n, b, r) * oracle::rot(n, a, phi) * oracle::bs(n, a, b, refl) * s;
    }
    InputEnsemble ens;
    Eigen::VectorXd mean(2 * n);
    Eigen::VectorXd var(2 * n);
    for (int k = 0; k < n; ++k) {
      const double v = 0.25 * (1.0 + u(rng));
      InputMoments m{u(rng) - 0.5, u(rng) - 0.5, v * (1.0 + u(rng)), v * (1.0 + u(rng))};
      ens.set(ids[k], m);
      mean(2 * k) = m.mean_x;
      mean(2 * k + 1) = m.mean_p;
      var(2 * k) = m.var_x;
      var(2 * k + 1) = m.var_p;
    }
    const Moments got = output_moments(net, ens);
    const Eigen::MatrixXd cov = s * var.asDiagonal() * s.transpose();
    CHECK((got.mean - s * mean).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((got.cov - cov).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("operations on unknown modes raise", "[quadnet]") {
  auto net = new_network({"a", "b"});
  CHECK_THROWS_AS(apply_phase(net, "c", 0.1), UnknownModeError);
  CHECK_THROWS_AS(apply_beamsplitter(net, "a", "c", 0.5), UnknownModeError);
  CHECK_THROWS_AS(apply_beamsplitter(net, "a", "a", 0.5), std::invalid_argument);
  CHECK_THROWS_AS(apply_beamsplitter(net, "a", "b", 1.5), std::invalid_argument);
  CHECK_THROWS_AS(add_input(net, "a"), std::invalid_argument);
  auto d = discard(net, "b");
  CHECK_THROWS_AS(d.expr("b", Axis::X), UnknownModeError);
  CHECK_THROWS_AS(measure_feedforward(net, "a", Axis::X, {{"a", Axis::X, 1.0}}), std::invalid_argument);
}

TEST_CASE("input ensemble validation", "[quadnet]") {
  InputEnsemble ens;
  CHECK_THROWS_AS(ens.set("a", InputMoments{0, 0, 0.1, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(ens.set("a", InputMoments{0, 0, -1.0, 1.0}), std::invalid_argument);
  CHECK_NOTHROW(ens.set("a", InputMoments::squeezed(Axis::X, 0.0, std::numeric_limits<double>::infinity())));
  CHECK_NOTHROW(ens.set("b", InputMoments::squeezed(Axis::P, db_to_variance(-5), db_to_variance(5))));
  CHECK_THROWS_AS(ens.at("zz"), std::invalid_argument);
}

TEST_CASE("loss mixes in vacuum", "[quadnet]") {
  auto net = apply_loss(new_network({"a"}), "a", 0.6, "v");
  InputEnsemble ens;
  ens.set("a", InputMoments{2.0, -1.0, 1.0, 0.5});
  ens.set("v", InputMoments::vacuum());
  const Moments m = output_moments(net, ens);
  CHECK_THAT(m.mean(0), WithinAbs(2.0 * std::sqrt(0.6), 1e-14));
  CHECK_THAT(m.cov(0, 0), WithinAbs(0.6 * 1.0 + 0.4 * 0.25, 1e-14));
  CHECK_THAT(m.cov(1, 1), WithinAbs(0.6 * 0.5 + 0.4 * 0.25, 1e-14));
  CHECK(net.live_modes().size() == 1);
}

TEST_CASE("cancelled infinite quadratures contribute nothing", "[quadnet]") {
  // x of "s" is infinitely squeezed, p infinitely noisy. Measuring p after
  // mixing and feeding it back with the exact inverse gain removes it.
  auto net = new_network({"a", "s"});
  net = apply_beamsplitter(net, "a", "s", 0.5);
  net = measure_feedforward(net, "s", Axis::P, {{"a", Axis::P, -1.0}});
  CHECK_FALSE(net.expr("a", Axis::P).has_term("s", Axis::P));
  InputEnsemble ens;
  ens.set("a", InputMoments::vacuum());
  ens.set("s", InputMoments::squeezed(Axis::X, 0.0, std::numeric_limits<double>::infinity()));
  const Moments m = output_moments(net, ens);
  CHECK(std::isfinite(m.cov(0, 0)));
  CHECK(std::isfinite(m.cov(1, 1)));
  CHECK_THAT(m.cov(0, 0), WithinAbs(0.5 * 0.25, 1e-15));
}

TEST_CASE("expr_covariance of a weighted sum", "[quadnet]") {
  auto net = apply_beamsplitter(new_network({"a", "b"}), "a", "b", 0.5);
  InputEnsemble ens;
  ens.set("a", InputMoments{1.0, 0.0, 0.25, 0.25});
  ens.set("b", InputMoments{0.0, 0.0, 0.5, 0.5});
  // x_a' + x_b' = (sqrt(.5) - sqrt(.5)) x_a + (sqrt(.5) + sqrt(.5)) x_b
  const auto r = expr_covariance(net, ens, {{"a", Axis::X, 1.0}, {"b", Axis::X, 1.0}});
  CHECK_THAT(r.mean, WithinAbs(0.0, 1e-15));
  CHECK_THAT(r.variance, WithinAbs(2.0 * 0.5, 1e-14));
}
