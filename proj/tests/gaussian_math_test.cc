// Copyright 2026 The dualrcc Authors. All Rights Reserved.
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

#include "doctest.h"
#include "dualrcc/gaussian.h"
#include "dualrcc/sampler.h"

using namespace dualrcc;

namespace {

Gaussian g1(double m, double v) {
  return Gaussian::isotropic(Eigen::VectorXd::Constant(1, m), v);
}

}  // namespace

TEST_CASE("threefry known answers") {
  const Block256 zero = threefry4x64({0, 0, 0, 0}, {0, 0, 0, 0});
  CHECK(zero[0] == 0x09218ebde6c85537ULL);
  CHECK(zero[1] == 0x55941f5266d86105ULL);
  CHECK(zero[2] == 0x4bd25e16282434dcULL);
  CHECK(zero[3] == 0xee29ec846bd2e40bULL);
  const Block256 w = threefry4x64({1, 2, 3, 4}, {7, 6, 7, 8});
  CHECK(w[0] == 0xc1d1445f4aa091adULL);
  CHECK(w[1] == 0xb4596588d34004b7ULL);
  CHECK(w[2] == 0x47da99b3f7aad045ULL);
  CHECK(w[3] == 0x2a4ff6aecf9c1556ULL);
}

TEST_CASE("normal quantile against reference values") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  CHECK(normal_quantile(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-14));
  CHECK(normal_quantile(0.3) == doctest::Approx(-0.5244005127080409).epsilon(1e-14));
  CHECK(normal_quantile(0.02) == doctest::Approx(-2.053748910631823).epsilon(1e-14));
  CHECK(normal_quantile(1 - 1e-12) == doctest::Approx(7.0344869100478356).epsilon(1e-9));
  CHECK(normal_quantile(0.999) == doctest::Approx(3.090232306167813).epsilon(1e-14));
  CHECK(normal_quantile(0.5) == 0.0);
}

TEST_CASE("uniform mapping stays inside the open interval") {
  CHECK(uniform_open(0) > 0.0);
  CHECK(uniform_open(~uint64_t{0}) < 1.0);
  CHECK(std::isfinite(normal_from_word(0)));
  CHECK(std::isfinite(normal_from_word(~uint64_t{0})));
}

TEST_CASE("kl_bits examples") {
  CHECK(kl_bits(g1(0.3, 2.0), g1(0.3, 2.0)) == 0.0);
  CHECK(kl_bits(g1(1, 1), g1(0, 1)) == doctest::Approx(0.72135).epsilon(1e-5));
  CHECK(kl_bits(g1(0, 4), g1(0, 1)) == doctest::Approx(1.16404).epsilon(1e-5));
  CHECK(kl_nats(g1(1, 1), g1(0, 1)) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("kl is nonnegative and additive over partitions") {
  const DeterministicSampler s(expand_seed(11), 0);
  for (uint64_t n = 0; n < 200; ++n) {
    Eigen::VectorXd mq(6), vq(6), mp(6), vp(6);
    for (int i = 0; i < 6; ++i) {
      mq[i] = s.normal(n, i);
      mp[i] = s.normal(n, 6 + i);
      vq[i] = std::exp(s.normal(n, 12 + i));
      vp[i] = std::exp(s.normal(n, 18 + i));
    }
    const Gaussian q(mq, vq), p(mp, vp);
    const double total = kl_bits(q, p);
    CHECK(total >= -1e-12);
    const double parts = kl_bits(q.segment(0, 2), p.segment(0, 2)) +
                         kl_bits(q.segment(2, 4), p.segment(2, 4));
    CHECK(std::fabs(total - parts) <= 1e-12 * std::max(1.0, total));
  }
}

TEST_CASE("constructor and kl reject invalid input") {
  CHECK_THROWS_AS(Gaussian(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)),
                  std::invalid_argument);
  CHECK_THROWS_AS(Gaussian(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(3)),
                  std::invalid_argument);
  CHECK_THROWS_AS(Gaussian(Eigen::VectorXd(0), Eigen::VectorXd(0)), std::invalid_argument);
  const Gaussian a = Gaussian::isotropic(Eigen::VectorXd::Zero(2), 1.0);
  const Gaussian b = Gaussian::isotropic(Eigen::VectorXd::Zero(3), 1.0);
  CHECK_THROWS_AS(kl_bits(a, b), std::invalid_argument);
}

TEST_CASE("simulate is deterministic and has the right mean") {
  const DeterministicSampler s(expand_seed(5), 77);
  const Gaussian p = g1(3.0, 1.0);
  CHECK(simulate(9, p, s) == simulate(9, p, s));
  CHECK_THROWS_AS(simulate(0, p, s), std::invalid_argument);
  double sum = 0;
  const int n = 100000;
  for (int i = 1; i <= n; ++i) sum += simulate(i, p, s)[0];
  CHECK(std::fabs(sum / n - 3.0) < 0.02);
}

TEST_CASE("distinct streams differ") {
  const Block256 key = expand_seed(5);
  const Gaussian p = Gaussian::isotropic(Eigen::VectorXd::Zero(8), 1.0);
  CHECK(simulate(1, p, DeterministicSampler(key, 1)) !=
        simulate(1, p, DeterministicSampler(key, 2)));
}

TEST_CASE("log_density_ratio examples") {
  Eigen::VectorXd z(1);
  z << 0.25;
  CHECK(log_density_ratio(z, g1(0.4, 2.0), g1(0.4, 2.0)) == 0.0);
  z << 0.5;
  CHECK(log_density_ratio(z, g1(1, 1), g1(0, 1)) == doctest::Approx(0.0).epsilon(1e-15));
  z << 1.0;
  CHECK(log_density_ratio(z, g1(1, 1), g1(0, 1)) == doctest::Approx(0.5).epsilon(1e-15));
  z << -0.7;
  const Gaussian q = g1(0.2, 0.5), p = g1(-0.1, 1.7);
  const double direct = std::exp(log_density(z, q)) / std::exp(log_density(z, p));
  CHECK(std::exp(log_density_ratio(z, q, p)) == doctest::Approx(direct).epsilon(1e-10));
  CHECK_THROWS_AS(log_density_ratio(Eigen::VectorXd(Eigen::VectorXd::Zero(2)), q, p),
                  std::invalid_argument);
}

TEST_CASE("monte carlo kl agrees with the closed form") {
  Eigen::VectorXd mq(2), vq(2), mp(2), vp(2);
  mq << 0.5, -1.0;
  vq << 0.6, 1.3;
  mp << 0.0, 0.2;
  vp << 1.0, 0.9;
  const Gaussian q(mq, vq), p(mp, vp);
  const DeterministicSampler s(expand_seed(99), 3);
  const int n = 1000000;
  double sum = 0, sq = 0;
  for (int i = 1; i <= n; ++i) {
    const double r = log_density_ratio(simulate(i, q, s), q, p);
    sum += r;
    sq += r * r;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  CHECK(std::fabs(mean - kl_bits(q, p) * std::numbers::ln2) < 5 * se);
}

TEST_CASE("max density ratio") {
  const auto bounded = log_max_density_ratio(g1(1.5, 0.36), g1(0, 1));
  REQUIRE(bounded.has_value());
  // Brute-force the supremum on a fine grid.
  double best = -1e300;
  for (double z = -5; z <= 8; z += 1e-4) {
    Eigen::VectorXd v(1);
    v << z;
    best = std::max(best, log_density_ratio(v, g1(1.5, 0.36), g1(0, 1)));
  }
  CHECK(*bounded == doctest::Approx(best).epsilon(1e-8));
  CHECK_FALSE(log_max_density_ratio(g1(1, 1), g1(0, 1)).has_value());
  CHECK(*log_max_density_ratio(g1(0, 1), g1(0, 1)) == 0.0);
}
