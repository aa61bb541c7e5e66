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
#include <numbers>
#include <random>
#include <vector>

#include <catch_amalgamated.hpp>

#include "cvamp/gaussian.hpp"
#include "oracles.hpp"

using namespace cvamp;
using namespace cvamp::gaussian;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

GaussianState random_state(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  GaussianState s{Eigen::VectorXd(2 * n), oracle::random_physical_cov(n, rng)};
  for (int i = 0; i < 2 * n; ++i) s.mean(i) = u(rng);
  return s;
}

double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("state preparation", "[gaussian]") {
  const auto v = vacuum(3);
  CHECK(v.n_modes() == 3);
  CHECK(max_abs(v.cov - 0.25 * Eigen::MatrixXd::Identity(6, 6)) == 0.0);

  const auto c = coherent(1.5, -0.5);
  CHECK(c.mean(0) == 1.5);
  CHECK(c.mean(1) == -0.5);

  const auto s = squeezed_vacuum(-5.0, Axis::X);
  CHECK_THAT(s.cov(0, 0), WithinRel(oracle::sq_var(-5.0), 1e-14));
  CHECK_THAT(s.cov(0, 0) * s.cov(1, 1), WithinRel(0.0625, 1e-14));

  const auto impure = squeezed_vacuum(-5.0, Axis::P, 2.0);
  CHECK_THAT(impure.cov(1, 1), WithinRel(oracle::sq_var(-5.0), 1e-14));
  CHECK_THAT(impure.cov(0, 0), WithinRel(oracle::sq_var(5.0) * std::pow(10.0, 0.2), 1e-14));
  CHECK_THROWS_AS(squeezed_vacuum(-5.0, Axis::X, -1.0), std::invalid_argument);

  const auto t = tensor(coherent(1, 2), squeezed_vacuum(-3, Axis::P));
  CHECK(t.n_modes() == 2);
  CHECK(t.cov(0, 2) == 0.0);
  const auto r = partial_trace(t, {1});
  CHECK(max_abs(r.cov - squeezed_vacuum(-3, Axis::P).cov) == 0.0);
}

TEST_CASE("symplectic elements agree with dense matrices", "[gaussian][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 3;
    GaussianState s = random_state(n, rng);
    Eigen::VectorXd mean = s.mean;
    Eigen::MatrixXd cov = s.cov;
    const int a = trial % n;
    const int b = (a + 1) % n;
    const double refl = u(rng);
    const double phi = 6.0 * u(rng);
    const double r = u(rng) - 0.5;
    s = apply(s, el::Beamsplitter{a, b, refl});
    s = apply(s, el::Phase{b, phi});
    s = apply(s, el::Squeeze{a, r});
    s = apply(s, el::Displace{b, 0.3, -0.2});
    const Eigen::MatrixXd m = oracle::sqz(n, a, r) * oracle::rot(n, b, phi) * oracle::bs(n, a, b, refl);
    mean = m * mean;
    mean(2 * b) += 0.3;
    mean(2 * b + 1) -= 0.2;
    cov = m * cov * m.transpose();
    CHECK(max_abs(s.mean - mean) < 1e-12);
    CHECK(max_abs(s.cov - cov) < 1e-12);
    CHECK(max_abs(symplectic_matrix(el::Beamsplitter{a, b, refl}, n) - oracle::bs(n, a, b, refl)) < 1e-15);
  }
}

TEST_CASE("loss channel", "[gaussian]") {
  auto s = loss_channel(squeezed_vacuum(-6.0, Axis::X), 0, 0.8);
  CHECK_THAT(s.cov(0, 0), WithinAbs(0.8 * oracle::sq_var(-6.0) + 0.2 * 0.25, 1e-15));
  CHECK_THROWS_AS(loss_channel(vacuum(1), 0, 1.2), std::invalid_argument);
  CHECK_THROWS_AS(loss_channel(vacuum(1), 1, 0.5), UnknownModeError);
}

TEST_CASE("conditioning matches the dense Schur complement", "[gaussian][property]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 3;
    const GaussianState s = random_state(n, rng);
    const int m = trial % n;
    const double q = 0.1 * trial - 1.0;
    const GaussianState got = condition_on(s, m, 0.0, q);
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
    oracle::condition_x(s.mean, s.cov, m, q, mean, cov);
    CHECK(max_abs(got.mean - mean) < 1e-12);
    CHECK(max_abs(got.cov - cov) < 1e-12);

    // Measuring p equals measuring x after a -pi/2 rotation of that mode.
    const GaussianState gp = condition_on(s, m, std::numbers::pi / 2, q);
    const GaussianState rotated = apply(s, el::Phase{m, -std::numbers::pi / 2});
    oracle::condition_x(rotated.mean, rotated.cov, m, q, mean, cov);
    CHECK(max_abs(gp.mean - mean) < 1e-12);
    CHECK(max_abs(gp.cov - cov) < 1e-12);
  }
}

TEST_CASE("conditioning on a zero-variance quadrature uses the pseudo-inverse", "[gaussian]") {
  GaussianState s = tensor(vacuum(1), diagonal_mode(0, 0, 0.0, 1.0));
  const GaussianState r = condition_on(s, 1, 0.0, 3.0);
  CHECK(r.n_modes() == 1);
  CHECK(r.mean(0) == 0.0);
  CHECK(max_abs(r.cov - vacuum(1).cov) == 0.0);
}

TEST_CASE("homodyne outcomes follow the marginal", "[gaussian]") {
  std::mt19937_64 rng(9);
  const GaussianState s = tensor(diagonal_mode(1.0, -2.0, 0.7, 0.3), vacuum(1));
  double sum = 0.0;
  double sq = 0.0;
  const int n = 40000;
  for (int k = 0; k < n; ++k) {
    const double q = homodyne(s, 0, std::numbers::pi / 2, rng).outcome;
    sum += q;
    sq += q * q;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean + 2.0) < 5.0 * std::sqrt(0.3 / n));
  CHECK(std::abs(var - 0.3) < 5.0 * 0.3 * std::sqrt(2.0 / n));
}

TEST_CASE("outcome-averaged feedforward equals the sampled ensemble", "[gaussian]") {
  std::mt19937_64 rng(13);
  GaussianState s = tensor(squeezed_vacuum(-3.0, Axis::X), coherent(0.5, 0.0));
  s = apply(s, el::Beamsplitter{0, 1, 0.4});
  const std::vector<FeedTarget> targets{{1, Axis::P, 0.8}, {1, Axis::X, -0.3}};
  const GaussianState avg = feedforward_average(s, 0, Axis::X, targets);

  // Sampled: mean and covariance of the displaced conditional states.
  const int n = 100000;
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d cond_cov = Eigen::Matrix2d::Zero();
  for (int k = 0; k < n; ++k) {
    auto h = homodyne(s, 0, 0.0, rng);
    const GaussianState d = displace_by(h.conditioned, 0, -0.3 * h.outcome, 0.8 * h.outcome, 1.0);
    mu += d.mean;
    second += d.mean * d.mean.transpose();
    cond_cov = d.cov;
  }
  mu /= n;
  const Eigen::Matrix2d cov = second / n - mu * mu.transpose() + cond_cov;
  CHECK(max_abs(mu - avg.mean) < 0.01);
  CHECK(max_abs(cov - avg.cov) < 0.01);
}

TEST_CASE("symplectic eigenvalues agree with the i Omega C spectrum", "[gaussian][property]") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 4;
    const Eigen::MatrixXd cov = oracle::random_physical_cov(n, rng);
    const auto got = symplectic_eigenvalues(cov);
    const auto want = oracle::symplectic_spectrum(cov);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) CHECK_THAT(got[k], WithinRel(want[k], 1e-9));
    CHECK(is_physical(GaussianState{Eigen::VectorXd::Zero(2 * n), cov}));
  }
}

TEST_CASE("unphysical covariances are flagged", "[gaussian]") {
  CHECK_FALSE(is_physical(diagonal_mode(0, 0, 0.1, 0.1)));
  CHECK(is_physical(squeezed_vacuum(-10.0, Axis::P)));
  GaussianState asym = vacuum(1);
  asym.cov(0, 1) = 0.01;
  CHECK_FALSE(is_physical(asym));
  CHECK_THROWS_AS(symplectic_eigenvalues(Eigen::MatrixXd::Zero(3, 3)), std::invalid_argument);
}
