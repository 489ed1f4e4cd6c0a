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

#ifndef DUALRCC_RCC_H_
#define DUALRCC_RCC_H_

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dualrcc/gaussian.h"
#include "dualrcc/sampler.h"

namespace dualrcc {

struct PfrResult {
  uint64_t index = 1;               // n*, 1-based
  uint64_t candidates_examined = 0;
  double log_score = 0;             // ln s* = ln(t* p(z*)/q(z*))
  Eigen::VectorXd sample;           // the selected candidate
};

struct PfrOptions {
  // ln w_min. When unset, default_log_w_min(q, p) is used.
  std::optional<double> log_w_min;
  // Candidate cap. When unset, 2^(kl_bits + 16) clamped to 2^62.
  std::optional<uint64_t> max_candidates;
};

// Encoder-side termination bound for PFR.
//
// When q/p is bounded and ln sup q/p <= KL + margin, the exact bound
// w_min = 1 / sup(q/p) is used and the search is exact. Otherwise
// w_min = exp(-(KL + margin)) with
//   margin = min(4 sqrt(2 KL), max(2, ln(4096) - KL))  [nats],
// i.e. a four-sigma tail margin for the Gaussian log-ratio, widened for cheap
// chunks and capped at 2 nats once the expected 2^KL candidates already exceed
// 4096. Decoding does not depend on w_min.
double default_log_w_min(const Gaussian& q, const Gaussian& p);

// Poisson functional representation encoder. Throws
// CodecError(kCapExceeded) when the candidate cap is reached.
PfrResult pfr_encode(const Gaussian& q, const Gaussian& p,
                     const DeterministicSampler& sampler,
                     const PfrOptions& options = {});

// Same, with an explicit w_min > 0.
PfrResult pfr_encode(const Gaussian& q, const Gaussian& p, double w_min,
                     const DeterministicSampler& sampler);

// The index-th sample of p on the shared stream.
Eigen::VectorXd pfr_decode(uint64_t index, const Gaussian& p,
                           const DeterministicSampler& sampler);

// A contiguous group of dimensions coded by one PFR run.
struct RccChunk {
  Eigen::Index start = 0;
  Eigen::Index end = 0;         // exclusive
  double kl_bits = 0;           // KL of the dimensions used for grouping
  bool over_budget = false;     // a single dimension above the target
  uint64_t stream_id = 0;

  Eigen::Index size() const { return end - start; }
};

// Greedy left-to-right grouping of per-dimension KLs (bits) so each chunk
// stays at or below `kl_target_bits`. A dimension that alone exceeds the
// target becomes its own flagged chunk.
std::vector<RccChunk> chunk_by_kl(const Eigen::VectorXd& per_dim_bits,
                                  double kl_target_bits);

// chunk_by_kl on the exact per-dimension KL(q_i || p_i).
std::vector<RccChunk> chunk(const Gaussian& q, const Gaussian& p,
                            double kl_target_bits);

// Chunking over additive pieces. Dimension i is replaced by pieces[i]
// independent parts whose means and variances are divided by pieces[i]; the
// parts sum to a draw from the original law, and with equal variances each
// part carries 1/pieces[i] of the dimension's KL.
struct ChunkLayout {
  std::vector<int> pieces;       // one entry per dimension, each >= 1
  std::vector<RccChunk> chunks;  // over the expanded dimensions

  Eigen::Index expanded_dim() const;
};

inline constexpr int kMaxPieces = 1 << 16;

Gaussian expand_pieces(const Gaussian& g, const std::vector<int>& pieces);
// Sums the parts of each dimension in order.
Eigen::VectorXd collapse_pieces(const Eigen::VectorXd& parts,
                                const std::vector<int>& pieces);

// Splits every dimension above the target into ceil(bits / target) pieces,
// then groups the pieces with chunk_by_kl.
ChunkLayout split_and_chunk(const Eigen::VectorXd& per_dim_bits,
                            double kl_target_bits);

// Stream id of chunk `ordinal` at `step` of tile `tile` for a stream seed.
uint64_t chunk_stream_id(const Block256& key, uint64_t tile, uint64_t step,
                         uint64_t ordinal);

}  // namespace dualrcc

#endif  // DUALRCC_RCC_H_
