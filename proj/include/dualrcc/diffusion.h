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

#ifndef DUALRCC_DIFFUSION_H_
#define DUALRCC_DIFFUSION_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dualrcc/gaussian.h"

namespace dualrcc {

// Noise schedule beta_1..beta_T with derived alpha_t = 1 - beta_t and
// alpha_bar_t = prod_{s<=t} alpha_s (alpha_bar_0 = 1). Timesteps are 1-based.
class NoiseSchedule {
 public:
  NoiseSchedule(std::string id, std::vector<double> betas);

  static NoiseSchedule linear(double beta_start, double beta_end, int steps);
  static NoiseSchedule cosine(int steps, double offset = 0.008);

  const std::string& id() const { return id_; }
  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_.at(t - 1); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const { return alpha_bars_.at(t); }
  // beta-tilde_t = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) * beta_t; zero
  // at t = 1.
  double posterior_variance(int t) const;
  const std::vector<double>& betas() const { return betas_; }

 private:
  std::string id_;
  std::vector<double> betas_;
  std::vector<double> alpha_bars_;  // index 0..T
};

// Built-in schedules addressable by a stable id and a u16 registry index.
struct ScheduleEntry {
  uint16_t index;
  const char* id;
};
const std::vector<ScheduleEntry>& schedule_registry();
NoiseSchedule schedule_by_id(const std::string& id);
NoiseSchedule schedule_by_index(uint16_t index);
std::optional<uint16_t> schedule_index(const std::string& id);
inline constexpr uint16_t kCustomScheduleIndex = 0xFFFF;
inline constexpr const char* kDefaultScheduleId = "linear-64";

// Inclusive-exclusive rectangle of latent cells.
struct CellRect {
  int row0 = 0, col0 = 0, row1 = 0, col1 = 0;
  bool intersects(const CellRect& o) const {
    return row0 < o.row1 && o.row0 < row1 && col0 < o.col1 && o.col0 < col1;
  }
  bool contains(const CellRect& o) const {
    return row0 <= o.row0 && o.row1 <= row1 && col0 <= o.col0 && o.col1 <= col1;
  }
  bool operator==(const CellRect&) const = default;
};

// A noisy linear observation of x0: the mean of `cells` (flat indices into
// the conditioned vector) observed as `value`.
struct BlockObservation {
  std::vector<int> cells;
  double value = 0;
};

// Quantized compact latent y-hat expressed as block-mean observations.
struct LatentHint {
  std::vector<BlockObservation> blocks;
  double noise_variance = 0;
};

// Explicit conditioning (c, y-hat). Either part may be absent. When present,
// tag_regions has one entry per tag; a missing region means "whole image".
struct Condition {
  std::vector<int> tags;
  std::vector<std::optional<CellRect>> tag_regions;
  std::optional<LatentHint> latent_hint;
};

struct X0Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
};

// epsilon_theta(x_t, t, c). Implementations must be pure and safe to call
// concurrently.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Eigen::VectorXd predict_noise(const Eigen::VectorXd& x_t, int t,
                                        const Condition& cond) const = 0;
  // Per-dimension uncertainty of x0 given (x_t, c). Used to predict per-step
  // rates on both sides of the channel. Defaults to unit variance.
  virtual Eigen::VectorXd x0_variance(const Eigen::VectorXd& x_t, int t,
                                      const Condition& cond) const;
  // Conditional prior moments of x0 before any x_t is seen.
  virtual X0Moments prior_moments(const Condition& cond, Eigen::Index dim) const;
};

// Isotropic Gaussian mixture over x0. Tag i selects components
// tag_components[i] (i mod K when the table is empty).
struct MixtureModel {
  std::vector<Eigen::VectorXd> component_means;
  Eigen::VectorXd component_weights;
  double observation_variance = 1.0;
  std::vector<std::vector<int>> tag_components;

  Eigen::Index dim() const { return component_means.front().size(); }
  int components() const { return static_cast<int>(component_means.size()); }
  // Throws std::invalid_argument when invariants fail.
  void validate() const;
  // Component prior after tag conditioning (renormalized).
  Eigen::VectorXd conditioned_weights(const std::vector<int>& tags) const;
};

struct MixturePosterior {
  Eigen::VectorXd responsibilities;
  Eigen::VectorXd mean;      // E[x0 | x_t, c]
  Eigen::VectorXd variance;  // Var[x0_i | x_t, c]
};

// Posterior over x0 given x_t = sqrt(alpha_bar) x0 + sqrt(1 - alpha_bar) eps
// and the condition. alpha_bar = 0 (or no x_t) conditions on c only.
MixturePosterior mixture_posterior(const MixtureModel& m,
                                   const Eigen::VectorXd* x_t, double alpha_bar,
                                   const Condition& cond);

// Optimal noise prediction (x_t - sqrt(abar_t) E[x0|x_t]) / sqrt(1 - abar_t).
Eigen::VectorXd mixture_predict_noise(const MixtureModel& m,
                                      const Eigen::VectorXd& x_t, int t,
                                      const Condition& cond,
                                      const NoiseSchedule& sched);

class MixtureDenoiser final : public Denoiser {
 public:
  MixtureDenoiser(MixtureModel model, NoiseSchedule schedule);

  Eigen::VectorXd predict_noise(const Eigen::VectorXd& x_t, int t,
                                const Condition& cond) const override;
  Eigen::VectorXd x0_variance(const Eigen::VectorXd& x_t, int t,
                              const Condition& cond) const override;
  X0Moments prior_moments(const Condition& cond, Eigen::Index dim) const override;

  const MixtureModel& model() const { return model_; }

 private:
  MixtureModel model_;
  NoiseSchedule schedule_;
};

// q(x_t | x0) = N(sqrt(abar_t) x0, (1 - abar_t) I), 1 <= t <= T.
Gaussian forward_marginal(const Eigen::VectorXd& x0, int t,
                          const NoiseSchedule& sched);

// q(x_t | x_{t+1}, x0), 1 <= t < T.
Gaussian posterior(const Eigen::VectorXd& x0, const Eigen::VectorXd& x_next,
                   int t, const NoiseSchedule& sched);

// p_theta(x_t | x_{t+1}, c), 1 <= t < T, with sigma_{t+1}^2 = beta-tilde_{t+1}.
Gaussian reverse_kernel(const Denoiser& den, const Eigen::VectorXd& x_next,
                        int t, const Condition& cond, const NoiseSchedule& sched);

// Mean of p_theta(x_0 | x_1, c); the kernel is deterministic because
// beta-tilde_1 = 0.
Eigen::VectorXd final_mean(const Denoiser& den, const Eigen::VectorXd& x1,
                           const Condition& cond, const NoiseSchedule& sched);

}  // namespace dualrcc

#endif  // DUALRCC_DIFFUSION_H_
