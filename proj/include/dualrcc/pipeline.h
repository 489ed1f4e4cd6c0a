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

#ifndef DUALRCC_PIPELINE_H_
#define DUALRCC_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dualrcc/bitstream.h"
#include "dualrcc/diffusion.h"
#include "dualrcc/explicit_branch.h"
#include "dualrcc/sampler.h"
#include "dualrcc/tiling.h"
#include "dualrcc/tradeoff.h"

namespace dualrcc {

// Side length of the averaging blocks that produce y-hat from z-bar.
inline constexpr int kLatentBlock = 4;
// Quantizer step of the residual sent after a full chain.
inline constexpr double kTailStep = 0x1p-32;

struct TileGeometry {
  int tile_size = 16;
  int overlap = 8;
  int tag_cap = 16;
  double sigma_fraction = kDefaultSigmaFraction;
};

struct PipelineConfig {
  uint16_t schedule = 0;  // registry index
  int coded_steps = 8;    // T_E
  double kl_target_bits = 12.0;
  double skip_threshold_bits = 0.05;
  double tau = 1.0;
  uint64_t seed = 0;
  TileGeometry tiles;
  double latent_step = 0.5;
  int threads = 1;
  // Encoder-only PFR candidate cap per chunk; unset uses the rcc default.
  std::optional<uint64_t> candidate_cap;

  // Values rounded to their header precision. Throws std::invalid_argument
  // (or CodecError kUnknownSchedule) when a field is out of range.
  PipelineConfig resolved() const;
  int steps() const;                             // T
  int free_steps() const { return steps() - coded_steps; }  // T_D
};

// Everything both sides must share besides the stream: the linear
// autoencoder and the analytic prior over the full latent grid. Latent
// cells are flattened row-major.
struct CodecModel {
  int latent_rows = 0;
  int latent_cols = 0;
  int pixel_rows = 0;
  int pixel_cols = 0;
  LinearAutoencoder autoencoder;
  MixtureModel prior;

  void validate() const;
  uint64_t hash() const;
  // Marginal of the prior on the cells of `region`.
  MixtureModel region_prior(const CellRect& region) const;
};

Eigen::VectorXd flatten(const Eigen::MatrixXd& grid);
Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, Eigen::Index rows,
                          Eigen::Index cols);

// Block-mean downsampling by kLatentBlock (partial blocks at the edges).
Eigen::MatrixXd block_average(const Eigen::MatrixXd& z);
// Observation model of y-hat over a latent of the given shape.
LatentHint latent_hint(const QuantizedLatent& yhat, int rows, int cols);

// Shared stream for the uncoded draw of state z_t in tile `tile`.
DeterministicSampler free_step_sampler(const Block256& key, size_t tile, int t);

struct StepReport {
  int t = 0;                  // state index z_t
  bool skipped = false;
  bool rechunked = false;
  double kl_bits = 0;         // sum over tiles of KL(q || p)
  double predicted_kl_bits = 0;
  size_t payload_bits = 0;    // index bits only
  size_t chunks = 0;
  uint64_t candidates = 0;
  std::vector<double> chunk_kl_bits;  // exact KL per coded chunk, tile order
};

struct EncodeReport {
  size_t total_bits = 0;      // equals the stream length
  size_t header_bits = 0;
  size_t tag_bits = 0;
  size_t latent_bits = 0;
  size_t explicit_bits = 0;   // tag_bits + latent_bits
  size_t implicit_bits = 0;   // sum of step payload bits
  size_t tail_bits = 0;
  size_t framing_bits = 0;    // section headers and padding, trailer excluded
  size_t trailer_bits = 0;
  double bpp = 0;             // (total_bits - trailer_bits) / latent cell count
  std::vector<StepReport> steps;  // chain order, one per coded step
  std::vector<int> steps_skipped;
  double kl_total_bits = 0;
  uint64_t content_hash = 0;
  int tiles = 0;
};

struct EncodeResult {
  std::vector<uint8_t> stream;
  EncodeReport report;
  Eigen::MatrixXd z_bar;           // RCC target latent
  Eigen::MatrixXd latent;          // decoder-side z-hat, merged
  Eigen::MatrixXd reconstruction;  // D z-hat
  // Per tile: state after the coded steps (z_{T-T_E+1}), or z_T when
  // nothing is coded.
  std::vector<Eigen::VectorXd> chain_end;
  // Per tile, filled when requested: coded states z_T, ..., z_{T-T_E+1}.
  std::vector<std::vector<Eigen::VectorXd>> chain_log;
};

struct DecodeReport {
  StreamHeader header;
  size_t total_bits = 0;
  size_t implicit_bits = 0;
  size_t explicit_bits = 0;
  uint64_t content_hash = 0;
  bool trailer_verified = false;
  std::vector<TagPrompt> tile_tags;
};

struct DecodeResult {
  Eigen::MatrixXd latent;
  Eigen::MatrixXd reconstruction;
  std::vector<Eigen::VectorXd> chain_end;
  DecodeReport report;
};

// Tags in `cond` are vocabulary indices with optional regions; any latent
// hint in `cond` is ignored (y-hat is derived from the input).
EncodeResult encode(const Eigen::MatrixXd& x, const Condition& cond,
                    const PipelineConfig& cfg, const CodecModel& model,
                    const TagVocabulary& vocab, bool log_chain = false);

DecodeResult decode(std::span<const uint8_t> stream, const CodecModel& model,
                    const TagVocabulary& vocab, int threads = 1);

// Reconstruction MSE per pixel.
double mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace dualrcc

#endif  // DUALRCC_PIPELINE_H_
