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

#include "doctest.h"
#include "dualrcc/sampler.h"
#include "dualrcc/tradeoff.h"

using namespace dualrcc;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, uint64_t seed) {
  const DeterministicSampler s(expand_seed(seed), 0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = s.normal(1, i);
  return m;
}

double mse(const Eigen::MatrixXd& d, const Eigen::MatrixXd& e, const Eigen::MatrixXd& x) {
  return (x - d * (e * x)).squaredNorm() / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("identity decoder") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(7, 7);
  CHECK((fit_mse_encoder(id) - id).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("orthonormal decoder") {
  const Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(random_matrix(20, 6, 1)).householderQ() *
      Eigen::MatrixXd::Identity(20, 6);
  CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((fit_mse_encoder(q) - q.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("least squares encoder is optimal") {
  const Eigen::MatrixXd d = random_matrix(64, 16, 2);
  const Eigen::MatrixXd em = fit_mse_encoder(d);
  CHECK((d * em * d - d).norm() / d.norm() <= 1e-8);
  const Eigen::MatrixXd normal = d.transpose() * d * em - d.transpose();
  CHECK(normal.norm() / d.norm() <= 1e-8);

  const Eigen::MatrixXd x = random_matrix(64, 500, 3);
  const double best = mse(d, em, x);
  for (uint64_t k = 0; k < 100; ++k) {
    const Eigen::MatrixXd alt = em + 0.1 * random_matrix(16, 64, 100 + k);
    REQUIRE(best <= mse(d, alt, x));
  }
  CHECK(best <= mse(d, perceptual_encoder(d), x));
  for (uint64_t k = 0; k < 50; ++k) {
    Eigen::MatrixXd delta = random_matrix(16, 64, 1000 + k);
    delta *= 1e-3 / delta.norm();
    REQUIRE(best <= mse(d, em + delta, x));
  }
}

TEST_CASE("rank deficient decoder is rejected") {
  Eigen::MatrixXd d = random_matrix(10, 4, 4);
  d.col(3) = d.col(0) + d.col(1);
  CHECK_THROWS_AS(fit_mse_encoder(d), std::invalid_argument);
  CHECK_THROWS_AS(fit_mse_encoder(Eigen::MatrixXd::Zero(5, 2)), std::invalid_argument);
}

TEST_CASE("perceptual encoder differs from the least squares encoder") {
  const Eigen::MatrixXd d = random_matrix(30, 8, 5);
  const Eigen::MatrixXd e = perceptual_encoder(d);
  CHECK(e.rows() == 8);
  CHECK(e.cols() == 30);
  CHECK((e * d).diagonal().isOnes(1e-12));
  const Eigen::MatrixXd x = random_matrix(30, 300, 6);
  CHECK(mse(d, fit_mse_encoder(d), x) < mse(d, e, x));
}

TEST_CASE("autoencoder shapes") {
  const LinearAutoencoder ae = make_autoencoder(random_matrix(12, 3, 7));
  CHECK(ae.pixels() == 12);
  CHECK(ae.latent() == 3);
  ae.validate();
  LinearAutoencoder bad = ae;
  bad.encoder_mse.resize(2, 12);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("blend") {
  Eigen::VectorXd z(3), zt(3);
  z << 0.1, 0.7, -0.3;
  zt << 0.9, -0.2, 0.4;
  CHECK(blend(z, zt, 1.0) == z);
  CHECK(blend(z, zt, 0.0) == zt);
  CHECK(blend(Eigen::VectorXd::Constant(1, 2.0), Eigen::VectorXd::Zero(1), 0.5)[0] == 1.0);
  for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
    const Eigen::VectorXd other = zt + tau * (z - zt);
    CHECK((blend(z, zt, tau) - other).cwiseAbs().maxCoeff() <= 1e-15);
  }
  CHECK_THROWS_AS(blend(z, Eigen::VectorXd::Zero(2), 0.5), std::invalid_argument);
  CHECK_THROWS_AS(blend(z, zt, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(blend(z, zt, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(blend(z, zt, NAN), std::invalid_argument);

  const Eigen::Vector2f a(1.0f, 2.0f), b(3.0f, 4.0f);
  CHECK(blend(a, b, 0.25f).isApprox(Eigen::Vector2f(2.5f, 3.5f)));
}
