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

#ifndef DUALRCC_TRADEOFF_H_
#define DUALRCC_TRADEOFF_H_

#include <stdexcept>

#include <Eigen/Dense>

namespace dualrcc {

// Linear stand-in for the VAE pair. Latents and pixels are flattened
// row-major.
template <typename Scalar>
struct LinearAutoencoderT {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Matrix decoder;             // D: pixels x latent
  Matrix encoder_perceptual;  // E: latent x pixels
  Matrix encoder_mse;         // E_M: latent x pixels

  Eigen::Index pixels() const { return decoder.rows(); }
  Eigen::Index latent() const { return decoder.cols(); }
  void validate() const {
    if (decoder.size() == 0 ||
        encoder_perceptual.rows() != latent() ||
        encoder_perceptual.cols() != pixels() ||
        encoder_mse.rows() != latent() || encoder_mse.cols() != pixels()) {
      throw std::invalid_argument("LinearAutoencoder: inconsistent shapes");
    }
  }
};
using LinearAutoencoder = LinearAutoencoderT<double>;

inline constexpr double kMaxDecoderCondition = 1e10;

// Least-squares inverse (D^T D)^-1 D^T. Throws std::invalid_argument when
// the condition number of D exceeds kMaxDecoderCondition.
Eigen::MatrixXd fit_mse_encoder(const Eigen::MatrixXd& decoder);

// diag(1 / |d_j|^2) D^T: matched filter without decorrelation.
Eigen::MatrixXd perceptual_encoder(const Eigen::MatrixXd& decoder);

LinearAutoencoder make_autoencoder(Eigen::MatrixXd decoder);

template <typename DerivedA, typename DerivedB>
auto blend(const Eigen::MatrixBase<DerivedA>& z,
           const Eigen::MatrixBase<DerivedB>& z_tilde,
           typename DerivedA::Scalar tau) {
  using Scalar = typename DerivedA::Scalar;
  if (z.rows() != z_tilde.rows() || z.cols() != z_tilde.cols()) {
    throw std::invalid_argument("blend: shape mismatch");
  }
  if (!(tau >= Scalar(0) && tau <= Scalar(1))) {
    throw std::invalid_argument("blend: tau outside [0, 1]");
  }
  using Plain = typename DerivedA::PlainObject;
  if (tau == Scalar(1)) return Plain(z);
  if (tau == Scalar(0)) return Plain(z_tilde);
  return Plain(tau * z + (Scalar(1) - tau) * z_tilde);
}

}  // namespace dualrcc

#endif  // DUALRCC_TRADEOFF_H_
