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

#include "dualrcc/sweeps.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "dualrcc/index_code.h"
#include "dualrcc/rcc.h"

namespace dualrcc {
namespace {

struct Measured {
  std::vector<double> bits, implicit, explicit_, mse;
};

Measured measure(const std::vector<Sample>& samples, const PipelineConfig& cfg,
                 const CodecModel& model, const TagVocabulary& vocab) {
  Measured m;
  for (size_t i = 0; i < samples.size(); ++i) {
    PipelineConfig c = cfg;
    c.seed = cfg.seed + i;
    const EncodeResult r = encode(samples[i].x, samples[i].cond, c, model, vocab);
    m.bits.push_back(static_cast<double>(r.report.total_bits - r.report.trailer_bits));
    m.implicit.push_back(static_cast<double>(r.report.implicit_bits));
    m.explicit_.push_back(static_cast<double>(r.report.explicit_bits));
    m.mse.push_back(mse(samples[i].x, r.reconstruction));
  }
  return m;
}

}  // namespace

Stat summarize(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return s;
}

std::vector<RatePoint> rate_sweep(const std::vector<Sample>& samples,
                                  const std::vector<int>& te_values,
                                  const PipelineConfig& cfg,
                                  const CodecModel& model,
                                  const TagVocabulary& vocab) {
  std::vector<RatePoint> rows;
  for (int te : te_values) {
    PipelineConfig c = cfg;
    c.coded_steps = te;
    const Measured m = measure(samples, c, model, vocab);
    rows.push_back({te, summarize(m.bits), summarize(m.implicit), summarize(m.mse)});
  }
  return rows;
}

bool bits_strictly_increasing(const std::vector<RatePoint>& rows) {
  for (size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].bits.mean > rows[i - 1].bits.mean)) return false;
  }
  return true;
}

bool mse_nonincreasing(const std::vector<RatePoint>& rows) {
  for (size_t i = 1; i < rows.size(); ++i) {
    const double rise = rows[i].mse.mean - rows[i - 1].mse.mean;
    if (rise > std::max(rows[i].mse.se, rows[i - 1].mse.se)) return false;
  }
  return true;
}

std::vector<CurvePoint> distortion_curve(const std::vector<Sample>& samples,
                                         const std::vector<double>& taus,
                                         const PipelineConfig& cfg,
                                         const CodecModel& model,
                                         const TagVocabulary& vocab) {
  std::vector<CurvePoint> rows;
  for (double tau : taus) {
    if (!(tau >= 0.0 && tau <= 1.0)) {
      throw std::invalid_argument("distortion_curve: tau outside [0, 1]");
    }
    PipelineConfig c = cfg;
    c.tau = tau;
    const Measured m = measure(samples, c, model, vocab);
    rows.push_back({c.resolved().tau, summarize(m.mse), summarize(m.bits)});
  }
  return rows;
}

std::vector<AllocationPoint> rate_allocation(const std::vector<Sample>& samples,
                                             const std::vector<double>& latent_steps,
                                             const std::vector<int>& te_values,
                                             double budget_bits,
                                             const PipelineConfig& cfg,
                                             const CodecModel& model,
                                             const TagVocabulary& vocab) {
  std::vector<AllocationPoint> rows;
  for (double step : latent_steps) {
    AllocationPoint best;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int te : te_values) {
      PipelineConfig c = cfg;
      c.latent_step = step;
      c.coded_steps = te;
      const Measured m = measure(samples, c, model, vocab);
      const double total = summarize(m.bits).mean;
      const double gap = std::fabs(total - budget_bits);
      if (gap < best_gap) {
        best_gap = gap;
        best = {c.resolved().latent_step, te, summarize(m.explicit_).mean,
                summarize(m.implicit).mean, total, summarize(m.mse)};
      }
    }
    rows.push_back(best);
  }
  return rows;
}

PfrBoundPoint pfr_bound(double kl_bits, size_t trials, uint64_t seed) {
  const Block256 key = expand_seed(seed);
  const double mu = std::sqrt(2.0 * kl_bits * std::numbers::ln2);
  const Gaussian q = Gaussian::isotropic(Eigen::VectorXd::Constant(1, mu), 1.0);
  const Gaussian p = Gaussian::isotropic(Eigen::VectorXd::Zero(1), 1.0);
  std::vector<double> bits, cands;
  bits.reserve(trials);
  cands.reserve(trials);
  for (size_t i = 0; i < trials; ++i) {
    const PfrResult r = pfr_encode(q, p, DeterministicSampler(key, i));
    bits.push_back(index_code_length(r.index, kl_bits));
    cands.push_back(static_cast<double>(r.candidates_examined));
  }
  return {kl_bits, trials, summarize(bits), summarize(cands),
          kl_bits + std::log2(kl_bits + 1.0) + 5.0};
}

}  // namespace dualrcc
