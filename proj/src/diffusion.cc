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

#include "dualrcc/diffusion.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dualrcc/errors.h"

namespace dualrcc {
namespace {

void check_step(int t, int lo, int hi, const char* what) {
  if (t < lo || t > hi) {
    throw std::out_of_range(std::string(what) + ": timestep " + std::to_string(t) +
                            " outside [" + std::to_string(lo) + ", " +
                            std::to_string(hi) + "]");
  }
}

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (d * d / var + std::log(2.0 * std::numbers::pi * var));
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::string id, std::vector<double> betas)
    : id_(std::move(id)), betas_(std::move(betas)) {
  if (betas_.empty()) throw std::invalid_argument("NoiseSchedule: no steps");
  alpha_bars_.resize(betas_.size() + 1);
  alpha_bars_[0] = 1.0;
  for (size_t i = 0; i < betas_.size(); ++i) {
    if (!(betas_[i] > 0.0 && betas_[i] < 1.0)) {
      throw std::invalid_argument("NoiseSchedule: beta outside (0, 1)");
    }
    alpha_bars_[i + 1] = alpha_bars_[i] * (1.0 - betas_[i]);
  }
}

NoiseSchedule NoiseSchedule::linear(double beta_start, double beta_end, int steps) {
  if (steps < 2) throw std::invalid_argument("linear schedule needs >= 2 steps");
  if (beta_end < beta_start) {
    throw std::invalid_argument("linear schedule must be non-decreasing");
  }
  std::vector<double> betas(steps);
  for (int i = 0; i < steps; ++i) {
    betas[i] = beta_start + (beta_end - beta_start) * i / (steps - 1);
  }
  std::ostringstream id;
  id << "linear:" << beta_start << ':' << beta_end << ':' << steps;
  return NoiseSchedule(id.str(), std::move(betas));
}

NoiseSchedule NoiseSchedule::cosine(int steps, double offset) {
  if (steps < 2) throw std::invalid_argument("cosine schedule needs >= 2 steps");
  auto f = [&](double t) {
    const double c = std::cos((t / steps + offset) / (1.0 + offset) *
                              std::numbers::pi / 2.0);
    return c * c;
  };
  std::vector<double> betas(steps);
  for (int t = 1; t <= steps; ++t) {
    betas[t - 1] = std::min(1.0 - f(t) / f(t - 1), 0.999);
  }
  std::ostringstream id;
  id << "cosine:" << offset << ':' << steps;
  return NoiseSchedule(id.str(), std::move(betas));
}

double NoiseSchedule::posterior_variance(int t) const {
  check_step(t, 1, steps(), "posterior_variance");
  return (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t)) * beta(t);
}

const std::vector<ScheduleEntry>& schedule_registry() {
  static const std::vector<ScheduleEntry> entries = {
      {0, "linear-64"}, {1, "cosine-64"}, {2, "linear-16"}, {3, "cosine-16"},
      {4, "linear-128"},
  };
  return entries;
}

NoiseSchedule schedule_by_index(uint16_t index) {
  NoiseSchedule s = [&] {
    switch (index) {
      case 0: return NoiseSchedule::linear(1e-4, 0.02, 64);
      case 1: return NoiseSchedule::cosine(64);
      case 2: return NoiseSchedule::linear(1e-4, 0.02, 16);
      case 3: return NoiseSchedule::cosine(16);
      case 4: return NoiseSchedule::linear(1e-4, 0.02, 128);
      default:
        throw CodecError(ErrorKind::kUnknownSchedule,
                         "unknown schedule index " + std::to_string(index));
    }
  }();
  for (const auto& e : schedule_registry()) {
    if (e.index == index) return NoiseSchedule(e.id, s.betas());
  }
  return s;
}

std::optional<uint16_t> schedule_index(const std::string& id) {
  for (const auto& e : schedule_registry()) {
    if (id == e.id) return e.index;
  }
  return std::nullopt;
}

NoiseSchedule schedule_by_id(const std::string& id) {
  const auto index = schedule_index(id);
  if (!index) {
    throw CodecError(ErrorKind::kUnknownSchedule, "unknown schedule id '" + id + "'");
  }
  return schedule_by_index(*index);
}

Eigen::VectorXd Denoiser::x0_variance(const Eigen::VectorXd& x_t, int,
                                      const Condition&) const {
  return Eigen::VectorXd::Ones(x_t.size());
}

X0Moments Denoiser::prior_moments(const Condition&, Eigen::Index dim) const {
  return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
}

void MixtureModel::validate() const {
  if (component_means.empty()) {
    throw std::invalid_argument("MixtureModel: no components");
  }
  const Eigen::Index d = component_means.front().size();
  for (const auto& m : component_means) {
    if (m.size() != d || d < 1) {
      throw std::invalid_argument("MixtureModel: inconsistent component dims");
    }
  }
  if (component_weights.size() != components()) {
    throw std::invalid_argument("MixtureModel: weight count mismatch");
  }
  if ((component_weights.array() < 0.0).any() ||
      std::fabs(component_weights.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("MixtureModel: weights must be a probability vector");
  }
  if (!(observation_variance > 0.0)) {
    throw std::invalid_argument("MixtureModel: observation variance must be > 0");
  }
  for (const auto& set : tag_components) {
    for (int k : set) {
      if (k < 0 || k >= components()) {
        throw std::invalid_argument("MixtureModel: tag maps to unknown component");
      }
    }
  }
}

Eigen::VectorXd MixtureModel::conditioned_weights(const std::vector<int>& tags) const {
  if (tags.empty()) return component_weights;
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(components());
  for (int tag : tags) {
    if (tag < 0) continue;
    if (tag_components.empty()) {
      mask[tag % components()] = 1.0;
    } else if (static_cast<size_t>(tag) < tag_components.size()) {
      for (int k : tag_components[tag]) mask[k] = 1.0;
    }
  }
  Eigen::VectorXd w = component_weights.cwiseProduct(mask);
  const double total = w.sum();
  if (!(total > 0.0)) return component_weights;
  return w / total;
}

MixturePosterior mixture_posterior(const MixtureModel& m,
                                   const Eigen::VectorXd* x_t, double alpha_bar,
                                   const Condition& cond) {
  const Eigen::Index dim = m.dim();
  if (x_t && x_t->size() != dim) {
    throw std::invalid_argument("mixture_posterior: dimension mismatch");
  }
  const int k_count = m.components();
  const double s2 = m.observation_variance;
  const bool observe = x_t != nullptr && alpha_bar > 0.0;

  // Per-component isotropic posterior after x_t.
  double v = s2;
  double x_gain = 0;
  if (observe) {
    const double snr = alpha_bar / (1.0 - alpha_bar);
    v = 1.0 / (1.0 / s2 + snr);
    x_gain = v * std::sqrt(alpha_bar) / (1.0 - alpha_bar);
  }

  const Eigen::VectorXd prior = m.conditioned_weights(cond.tags);
  Eigen::VectorXd log_w(k_count);
  std::vector<Eigen::VectorXd> means(k_count);
  std::vector<Eigen::VectorXd> vars(k_count);
  for (int k = 0; k < k_count; ++k) {
    const Eigen::VectorXd& mu = m.component_means[k];
    double lw = prior[k] > 0.0 ? std::log(prior[k])
                               : -std::numeric_limits<double>::infinity();
    Eigen::VectorXd mean = mu;
    if (observe) {
      const double marg_var = alpha_bar * s2 + 1.0 - alpha_bar;
      const double sab = std::sqrt(alpha_bar);
      const Eigen::ArrayXd resid = x_t->array() - sab * mu.array();
      lw += -0.5 * (resid.square().sum() / marg_var +
                    dim * std::log(2.0 * std::numbers::pi * marg_var));
      mean = (v / s2) * mu + x_gain * *x_t;
    }
    Eigen::VectorXd var = Eigen::VectorXd::Constant(dim, v);
    if (cond.latent_hint) {
      const double r = cond.latent_hint->noise_variance;
      for (const auto& block : cond.latent_hint->blocks) {
        const double n = static_cast<double>(block.cells.size());
        if (n == 0) continue;
        double block_mean = 0;
        for (int c : block.cells) block_mean += mean[c];
        block_mean /= n;
        const double innovation = v / n + r;
        lw += log_normal(block.value, block_mean, innovation);
        const double gain = (v / n) / innovation;
        const double shrink = v * v / (n * n * innovation);
        for (int c : block.cells) {
          mean[c] += gain * (block.value - block_mean);
          var[c] = v - shrink;
        }
      }
    }
    log_w[k] = lw;
    means[k] = std::move(mean);
    vars[k] = std::move(var);
  }

  MixturePosterior post;
  const double max_lw = log_w.maxCoeff();
  post.responsibilities = (log_w.array() - max_lw).exp().matrix();
  post.responsibilities /= post.responsibilities.sum();
  post.mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd second = Eigen::VectorXd::Zero(dim);
  for (int k = 0; k < k_count; ++k) {
    const double r = post.responsibilities[k];
    if (r == 0.0) continue;
    post.mean += r * means[k];
    second += r * (vars[k] + means[k].cwiseAbs2());
  }
  post.variance = (second - post.mean.cwiseAbs2()).cwiseMax(0.0);
  return post;
}

Eigen::VectorXd mixture_predict_noise(const MixtureModel& m,
                                      const Eigen::VectorXd& x_t, int t,
                                      const Condition& cond,
                                      const NoiseSchedule& sched) {
  check_step(t, 1, sched.steps(), "mixture_predict_noise");
  const double abar = sched.alpha_bar(t);
  const MixturePosterior post = mixture_posterior(m, &x_t, abar, cond);
  return (x_t - std::sqrt(abar) * post.mean) / std::sqrt(1.0 - abar);
}

MixtureDenoiser::MixtureDenoiser(MixtureModel model, NoiseSchedule schedule)
    : model_(std::move(model)), schedule_(std::move(schedule)) {
  model_.validate();
}

Eigen::VectorXd MixtureDenoiser::predict_noise(const Eigen::VectorXd& x_t, int t,
                                               const Condition& cond) const {
  return mixture_predict_noise(model_, x_t, t, cond, schedule_);
}

Eigen::VectorXd MixtureDenoiser::x0_variance(const Eigen::VectorXd& x_t, int t,
                                             const Condition& cond) const {
  check_step(t, 1, schedule_.steps(), "x0_variance");
  return mixture_posterior(model_, &x_t, schedule_.alpha_bar(t), cond).variance;
}

X0Moments MixtureDenoiser::prior_moments(const Condition& cond, Eigen::Index) const {
  const MixturePosterior post = mixture_posterior(model_, nullptr, 0.0, cond);
  return {post.mean, post.variance};
}

Gaussian forward_marginal(const Eigen::VectorXd& x0, int t,
                          const NoiseSchedule& sched) {
  check_step(t, 1, sched.steps(), "forward_marginal");
  const double abar = sched.alpha_bar(t);
  return Gaussian::isotropic(std::sqrt(abar) * x0, 1.0 - abar);
}

Gaussian posterior(const Eigen::VectorXd& x0, const Eigen::VectorXd& x_next,
                   int t, const NoiseSchedule& sched) {
  check_step(t, 1, sched.steps() - 1, "posterior");
  if (x0.size() != x_next.size()) {
    throw std::invalid_argument("posterior: dimension mismatch");
  }
  const double abar_t = sched.alpha_bar(t);
  const double abar_next = sched.alpha_bar(t + 1);
  const double beta_next = sched.beta(t + 1);
  const double denom = 1.0 - abar_next;
  Eigen::VectorXd mean = (std::sqrt(abar_t) * beta_next / denom) * x0 +
                         (std::sqrt(sched.alpha(t + 1)) * (1.0 - abar_t) / denom) *
                             x_next;
  return Gaussian::isotropic(std::move(mean), sched.posterior_variance(t + 1));
}

Gaussian reverse_kernel(const Denoiser& den, const Eigen::VectorXd& x_next,
                        int t, const Condition& cond, const NoiseSchedule& sched) {
  check_step(t, 1, sched.steps() - 1, "reverse_kernel");
  const Eigen::VectorXd eps = den.predict_noise(x_next, t + 1, cond);
  if (eps.size() != x_next.size()) {
    throw std::runtime_error("reverse_kernel: denoiser changed dimension");
  }
  const double beta_next = sched.beta(t + 1);
  Eigen::VectorXd mean =
      (x_next - (beta_next / std::sqrt(1.0 - sched.alpha_bar(t + 1))) * eps) /
      std::sqrt(sched.alpha(t + 1));
  return Gaussian::isotropic(std::move(mean), sched.posterior_variance(t + 1));
}

Eigen::VectorXd final_mean(const Denoiser& den, const Eigen::VectorXd& x1,
                           const Condition& cond, const NoiseSchedule& sched) {
  const Eigen::VectorXd eps = den.predict_noise(x1, 1, cond);
  return (x1 - (sched.beta(1) / std::sqrt(1.0 - sched.alpha_bar(1))) * eps) /
         std::sqrt(sched.alpha(1));
}

}  // namespace dualrcc
