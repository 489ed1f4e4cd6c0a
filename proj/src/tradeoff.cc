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

#include "dualrcc/tradeoff.h"

namespace dualrcc {

Eigen::MatrixXd fit_mse_encoder(const Eigen::MatrixXd& decoder) {
  if (decoder.rows() < decoder.cols() || decoder.size() == 0) {
    throw std::invalid_argument("fit_mse_encoder: decoder must be tall");
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(decoder);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  if (!(smin > 0.0) || s[0] / smin > kMaxDecoderCondition) {
    throw std::invalid_argument("fit_mse_encoder: decoder is rank deficient");
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(decoder);
  return qr.solve(Eigen::MatrixXd::Identity(decoder.rows(), decoder.rows()));
}

Eigen::MatrixXd perceptual_encoder(const Eigen::MatrixXd& decoder) {
  const Eigen::VectorXd norms = decoder.colwise().squaredNorm().transpose();
  if (!(norms.array() > 0.0).all()) {
    throw std::invalid_argument("perceptual_encoder: zero decoder column");
  }
  return norms.cwiseInverse().asDiagonal() * decoder.transpose();
}

LinearAutoencoder make_autoencoder(Eigen::MatrixXd decoder) {
  LinearAutoencoder ae;
  ae.encoder_mse = fit_mse_encoder(decoder);
  ae.encoder_perceptual = perceptual_encoder(decoder);
  ae.decoder = std::move(decoder);
  return ae;
}

}  // namespace dualrcc
