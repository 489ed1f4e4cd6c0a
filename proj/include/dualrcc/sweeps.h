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

#ifndef DUALRCC_SWEEPS_H_
#define DUALRCC_SWEEPS_H_

#include <vector>

#include <Eigen/Dense>

#include "dualrcc/pipeline.h"

namespace dualrcc {

struct Sample {
  Eigen::MatrixXd x;
  Condition cond;
};

// Mean and standard error.
struct Stat {
  double mean = 0;
  double se = 0;
};
Stat summarize(const std::vector<double>& v);

// Sample i is coded with seed cfg.seed + i, so rows are paired.
struct RatePoint {
  int coded_steps = 0;
  Stat bits;
  Stat implicit_bits;
  Stat mse;
};
std::vector<RatePoint> rate_sweep(const std::vector<Sample>& samples,
                                  const std::vector<int>& te_values,
                                  const PipelineConfig& cfg,
                                  const CodecModel& model,
                                  const TagVocabulary& vocab);
bool bits_strictly_increasing(const std::vector<RatePoint>& rows);
// Violations tolerated only within one standard error.
bool mse_nonincreasing(const std::vector<RatePoint>& rows);

struct CurvePoint {
  double tau = 0;
  Stat mse;
  Stat bits;
};
std::vector<CurvePoint> distortion_curve(const std::vector<Sample>& samples,
                                         const std::vector<double>& taus,
                                         const PipelineConfig& cfg,
                                         const CodecModel& model,
                                         const TagVocabulary& vocab);

// For each latent step, the T_E whose mean total is closest to the budget.
struct AllocationPoint {
  double latent_step = 0;
  int coded_steps = 0;
  double explicit_bits = 0;
  double implicit_bits = 0;
  double total_bits = 0;
  Stat mse;
};
std::vector<AllocationPoint> rate_allocation(const std::vector<Sample>& samples,
                                             const std::vector<double>& latent_steps,
                                             const std::vector<int>& te_values,
                                             double budget_bits,
                                             const PipelineConfig& cfg,
                                             const CodecModel& model,
                                             const TagVocabulary& vocab);

// Index bits of PFR on q = N(mu, 1), p = N(0, 1) with KL(q || p) = kl_bits.
// Trial i uses stream i under expand_seed(seed).
struct PfrBoundPoint {
  double kl_bits = 0;
  size_t trials = 0;
  Stat bits;
  Stat candidates;
  double bound = 0;  // kl + log2(kl + 1) + 5
};
PfrBoundPoint pfr_bound(double kl_bits, size_t trials, uint64_t seed);

}  // namespace dualrcc

#endif  // DUALRCC_SWEEPS_H_
