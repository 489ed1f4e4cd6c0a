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

#ifndef DUALRCC_GAUSSIAN_H_
#define DUALRCC_GAUSSIAN_H_

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "dualrcc/sampler.h"

namespace dualrcc {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Gaussian with diagonal covariance. Invariant: mean and variance have the
// same length >= 1 and every variance is strictly positive.
template <typename Scalar>
class DiagonalGaussian {
 public:
  using Vector = VectorX<Scalar>;

  DiagonalGaussian(Vector mean, Vector variance)
      : mean_(std::move(mean)), variance_(std::move(variance)) {
    if (mean_.size() < 1 || mean_.size() != variance_.size()) {
      throw std::invalid_argument(
          "DiagonalGaussian: mean/variance length mismatch or empty");
    }
    if (!(variance_.array() > Scalar(0)).all()) {
      throw std::invalid_argument(
          "DiagonalGaussian: variance must be strictly positive");
    }
  }

  // Isotropic constructor.
  static DiagonalGaussian isotropic(Vector mean, Scalar variance) {
    const Eigen::Index n = mean.size();
    return DiagonalGaussian(std::move(mean), Vector::Constant(n, variance));
  }

  Eigen::Index dim() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Vector& variance() const { return variance_; }

  DiagonalGaussian segment(Eigen::Index start, Eigen::Index length) const {
    return DiagonalGaussian(mean_.segment(start, length),
                            variance_.segment(start, length));
  }

  bool operator==(const DiagonalGaussian& other) const {
    return mean_ == other.mean_ && variance_ == other.variance_;
  }

 private:
  Vector mean_;
  Vector variance_;
};

using Gaussian = DiagonalGaussian<double>;

namespace internal {
template <typename Scalar>
void check_same_dim(const DiagonalGaussian<Scalar>& q,
                    const DiagonalGaussian<Scalar>& p, const char* what) {
  if (q.dim() != p.dim()) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                std::to_string(q.dim()) + " vs " +
                                std::to_string(p.dim()) + ")");
  }
}
}  // namespace internal

// Per-dimension KL(q_i || p_i) in nats.
template <typename Scalar>
VectorX<Scalar> kl_nats_per_dim(const DiagonalGaussian<Scalar>& q,
                                const DiagonalGaussian<Scalar>& p) {
  internal::check_same_dim(q, p, "kl");
  const auto vq = q.variance().array();
  const auto vp = p.variance().array();
  const auto diff = (q.mean() - p.mean()).array();
  return (Scalar(0.5) * (vp / vq).log() + (vq + diff.square()) / (2 * vp) -
          Scalar(0.5))
      .matrix();
}

template <typename Scalar>
Scalar kl_nats(const DiagonalGaussian<Scalar>& q,
               const DiagonalGaussian<Scalar>& p) {
  return kl_nats_per_dim(q, p).sum();
}

// KL(q || p) in bits; the unit used for all rate accounting.
template <typename Scalar>
Scalar kl_bits(const DiagonalGaussian<Scalar>& q,
               const DiagonalGaussian<Scalar>& p) {
  return kl_nats(q, p) / Scalar(std::numbers::ln2);
}

template <typename Scalar>
Scalar log_density(const VectorX<Scalar>& z, const DiagonalGaussian<Scalar>& g) {
  if (z.size() != g.dim()) {
    throw std::invalid_argument("log_density: dimension mismatch");
  }
  const auto v = g.variance().array();
  const Scalar log_two_pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  return Scalar(-0.5) *
         ((z - g.mean()).array().square() / v + v.log() + log_two_pi).sum();
}

// ln q(z) - ln p(z), evaluated in log space.
template <typename Scalar>
Scalar log_density_ratio(const VectorX<Scalar>& z,
                         const DiagonalGaussian<Scalar>& q,
                         const DiagonalGaussian<Scalar>& p) {
  internal::check_same_dim(q, p, "log_density_ratio");
  if (z.size() != q.dim()) {
    throw std::invalid_argument("log_density_ratio: dimension mismatch");
  }
  const auto vq = q.variance().array();
  const auto vp = p.variance().array();
  return (Scalar(0.5) * (vp / vq).log() -
          (z - q.mean()).array().square() / (2 * vq) +
          (z - p.mean()).array().square() / (2 * vp))
      .sum();
}

// ln sup_z q(z)/p(z), or nullopt when the ratio is unbounded (some dimension
// has var_q > var_p, or equal variances with distinct means).
template <typename Scalar>
std::optional<Scalar> log_max_density_ratio(const DiagonalGaussian<Scalar>& q,
                                            const DiagonalGaussian<Scalar>& p) {
  internal::check_same_dim(q, p, "log_max_density_ratio");
  Scalar total = 0;
  for (Eigen::Index i = 0; i < q.dim(); ++i) {
    const Scalar vq = q.variance()[i];
    const Scalar vp = p.variance()[i];
    const Scalar diff = q.mean()[i] - p.mean()[i];
    if (vq < vp) {
      total += Scalar(0.5) * std::log(vp / vq) + diff * diff / (2 * (vp - vq));
    } else if (vq == vp && diff == Scalar(0)) {
      continue;
    } else {
      return std::nullopt;
    }
  }
  return total;
}

// The n-th pseudorandom sample of p on the sampler's stream (n >= 1).
// Dimension i reads lane i of counter n.
inline void simulate_into(uint64_t n, const Gaussian& p,
                          const DeterministicSampler& sampler,
                          Eigen::Ref<Eigen::VectorXd> out) {
  const Eigen::Index dim = p.dim();
  for (Eigen::Index block = 0; block * 4 < dim; ++block) {
    const Block256 w = sampler.words(n, static_cast<uint64_t>(block));
    const Eigen::Index end = std::min<Eigen::Index>(dim, block * 4 + 4);
    for (Eigen::Index i = block * 4; i < end; ++i) {
      out[i] = p.mean()[i] +
               std::sqrt(p.variance()[i]) * normal_from_word(w[i - block * 4]);
    }
  }
}

inline Eigen::VectorXd simulate(uint64_t n, const Gaussian& p,
                                const DeterministicSampler& sampler) {
  if (n < 1) throw std::invalid_argument("simulate: n must be >= 1");
  Eigen::VectorXd out(p.dim());
  simulate_into(n, p, sampler, out);
  return out;
}

}  // namespace dualrcc

#endif  // DUALRCC_GAUSSIAN_H_
