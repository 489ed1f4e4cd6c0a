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

#include "dualrcc/pipeline.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <thread>

#include "dualrcc/errors.h"
#include "dualrcc/hash.h"
#include "dualrcc/index_code.h"
#include "dualrcc/rcc.h"
#include "dualrcc/sampler.h"

namespace dualrcc {
namespace {

constexpr uint64_t kFreeOrdinal = ~uint64_t{0};
constexpr int kMaxTailParam = 60;
constexpr double kMaxTailIndex = 0x1p62;

template <typename Fn>
void parallel_for(size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto work = [&] {
    for (size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const size_t count = std::min<size_t>(threads, n);
  for (size_t k = 1; k < count; ++k) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  // Lowest tile first so the surfaced error does not depend on timing.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct Tile {
  CellRect rect;
  int rows = 0;
  int cols = 0;
  Condition cond;
  std::optional<MixtureDenoiser> den;
  Eigen::Index dim() const { return static_cast<Eigen::Index>(rows) * cols; }
};

std::vector<Tile> make_tiles(const CodecModel& model, const TileGrid& grid,
                             const std::vector<TagPrompt>& tags,
                             const QuantizedLatent& yhat,
                             const NoiseSchedule& sched) {
  Condition full;
  full.latent_hint = latent_hint(yhat, model.latent_rows, model.latent_cols);
  const auto parts = partition_condition(full, grid, 0);
  std::vector<Tile> tiles(grid.tiles.size());
  for (size_t i = 0; i < tiles.size(); ++i) {
    Tile& tile = tiles[i];
    tile.rect = grid.tiles[i];
    tile.rows = grid.tile_rows(i);
    tile.cols = grid.tile_cols(i);
    tile.cond = parts[i];
    tile.cond.tags = tags[i].indices;
    tile.den.emplace(model.region_prior(tile.rect), sched);
  }
  return tiles;
}

// Headroom above the target before the encoder abandons a predicted layout.
constexpr double kLayoutMarginBits = 4.0;
// Candidate budget above the target for a predicted layout; past it the step falls back.
constexpr double kPredictedBudgetBits = 6.0;
constexpr int kBucketWidthBits = 3;
constexpr int kMaxBucketWidth = 6;
constexpr int kLayoutGammaBits = 40;

// One tile's coding of one step.
struct StepCode {
  ChunkLayout layout;
  std::vector<double> hints;     // index code hint per chunk
  std::vector<double> chunk_kl;  // exact KL per chunk
  std::vector<uint64_t> indices;
  uint64_t examined = 0;
  Eigen::VectorXd state;
};

std::vector<double> exact_chunk_kl(const Gaussian& q, const Gaussian& p,
                                   const ChunkLayout& layout) {
  const Gaussian qe = expand_pieces(q, layout.pieces);
  const Gaussian pe = expand_pieces(p, layout.pieces);
  std::vector<double> out;
  for (const RccChunk& ch : layout.chunks) {
    out.push_back(kl_bits(qe.segment(ch.start, ch.size()), pe.segment(ch.start, ch.size())));
  }
  return out;
}

StepCode predicted_code(const Eigen::VectorXd& pred, double target) {
  StepCode sc;
  sc.layout = split_and_chunk(pred, target);
  for (const RccChunk& ch : sc.layout.chunks) sc.hints.push_back(ch.kl_bits);
  return sc;
}

// Layout from the exact per-dimension KL; hints carry only the bucket width.
StepCode explicit_code(const Gaussian& q, const Gaussian& p, double target) {
  StepCode sc;
  sc.layout = split_and_chunk(kl_nats_per_dim(q, p) / std::numbers::ln2, target);
  sc.chunk_kl = exact_chunk_kl(q, p, sc.layout);
  for (double kl : sc.chunk_kl) {
    const int k = index_bucket_width(kl);
    sc.hints.push_back(static_cast<double>((uint64_t{1} << k) - 2));
  }
  return sc;
}

DeterministicSampler chunk_sampler(const Block256& key, size_t tile, int t,
                                   size_t ordinal, int attempt);

void run_code(StepCode& sc, const Gaussian& q, const Gaussian& p, const Block256& key,
              size_t tile, int t, int attempt, std::optional<uint64_t> cap) {
  const Gaussian qe = expand_pieces(q, sc.layout.pieces);
  const Gaussian pe = expand_pieces(p, sc.layout.pieces);
  Eigen::VectorXd parts(pe.dim());
  sc.indices.clear();
  sc.examined = 0;
  for (size_t c = 0; c < sc.layout.chunks.size(); ++c) {
    const RccChunk& ch = sc.layout.chunks[c];
    const Gaussian qs = qe.segment(ch.start, ch.size());
    const Gaussian ps = pe.segment(ch.start, ch.size());
    const DeterministicSampler s = chunk_sampler(key, tile, t, c, attempt);
    PfrOptions opts;
    opts.max_candidates = cap;
    const PfrResult r = pfr_encode(qs, ps, s, opts);
    sc.indices.push_back(r.index);
    sc.examined += r.candidates_examined;
    parts.segment(ch.start, ch.size()) = pfr_decode(r.index, ps, s);
  }
  sc.state = collapse_pieces(parts, sc.layout.pieces);
}

Eigen::VectorXd decode_code(const StepCode& sc, const Gaussian& p, const Block256& key,
                            size_t tile, int t, int attempt) {
  const Gaussian pe = expand_pieces(p, sc.layout.pieces);
  Eigen::VectorXd parts(pe.dim());
  for (size_t c = 0; c < sc.layout.chunks.size(); ++c) {
    const RccChunk& ch = sc.layout.chunks[c];
    parts.segment(ch.start, ch.size()) =
        pfr_decode(sc.indices[c], pe.segment(ch.start, ch.size()),
                   chunk_sampler(key, tile, t, c, attempt));
  }
  return collapse_pieces(parts, sc.layout.pieces);
}

// Split dimensions as (gap, pieces) pairs, then chunk sizes with the last one
// implied, then one bucket width per chunk.
void write_layout(BitWriter& w, const StepCode& sc) {
  const auto& pieces = sc.layout.pieces;
  size_t split = 0;
  for (int k : pieces) split += k > 1;
  write_gamma(w, split + 1);
  size_t prev = 0;
  for (size_t i = 0; i < pieces.size(); ++i) {
    if (pieces[i] == 1) continue;
    write_gamma(w, i - prev + 1);
    write_gamma(w, static_cast<uint64_t>(pieces[i] - 1));
    prev = i + 1;
  }
  const auto& chunks = sc.layout.chunks;
  write_gamma(w, chunks.size());
  for (size_t c = 0; c + 1 < chunks.size(); ++c) {
    write_gamma(w, static_cast<uint64_t>(chunks[c].size()));
  }
  for (double h : sc.hints) {
    w.write(static_cast<uint64_t>(index_bucket_width(h) - 1), kBucketWidthBits);
  }
}

StepCode read_layout(BitReader& r, Eigen::Index dim) {
  auto fail = [&](const char* what) {
    throw CodecError(ErrorKind::kCorrupt, what, r.position());
  };
  StepCode sc;
  auto& pieces = sc.layout.pieces;
  pieces.assign(static_cast<size_t>(dim), 1);
  const uint64_t split = read_gamma(r, kLayoutGammaBits) - 1;
  if (split > static_cast<uint64_t>(dim)) fail("layout: too many split dimensions");
  uint64_t prev = 0;
  for (uint64_t j = 0; j < split; ++j) {
    const uint64_t i = prev + read_gamma(r, kLayoutGammaBits) - 1;
    if (i >= static_cast<uint64_t>(dim)) fail("layout: split dimension out of range");
    const uint64_t k = read_gamma(r, kLayoutGammaBits) + 1;
    if (k > static_cast<uint64_t>(kMaxPieces)) fail("layout: too many pieces");
    pieces[i] = static_cast<int>(k);
    prev = i + 1;
  }
  const auto expanded = static_cast<uint64_t>(sc.layout.expanded_dim());
  const uint64_t count = read_gamma(r, kLayoutGammaBits);
  if (count > expanded) fail("layout: too many chunks");
  uint64_t start = 0;
  for (uint64_t c = 0; c < count; ++c) {
    const uint64_t size = c + 1 < count ? read_gamma(r, kLayoutGammaBits) : expanded - start;
    if (size == 0 || start + size > expanded) fail("layout: chunk sizes exceed the tile");
    RccChunk ch;
    ch.start = static_cast<Eigen::Index>(start);
    ch.end = static_cast<Eigen::Index>(start + size);
    sc.layout.chunks.push_back(ch);
    start += size;
  }
  for (uint64_t c = 0; c < count; ++c) {
    const int k = static_cast<int>(r.read(kBucketWidthBits)) + 1;
    if (k > kMaxBucketWidth) fail("layout: bucket width out of range");
    sc.hints.push_back(static_cast<double>((uint64_t{1} << k) - 2));
  }
  return sc;
}

DeterministicSampler free_sampler(const Block256& key, size_t tile, int t) {
  return free_step_sampler(key, tile, t);
}

DeterministicSampler chunk_sampler(const Block256& key, size_t tile, int t,
                                   size_t ordinal, int attempt) {
  return DeterministicSampler(
      key, chunk_stream_id(key, tile, t,
                           ordinal | (static_cast<uint64_t>(attempt) << 32)));
}

// p for state z_t given z_{t+1}; the first state uses the standard normal.
Gaussian step_prior(const Tile& tile, const Eigen::VectorXd& z_next, int t,
                    const NoiseSchedule& sched) {
  if (t == sched.steps()) {
    return Gaussian::isotropic(Eigen::VectorXd::Zero(tile.dim()), 1.0);
  }
  return reverse_kernel(*tile.den, z_next, t, tile.cond, sched);
}

Gaussian step_target(const Tile& tile, const Eigen::VectorXd& x0,
                     const Eigen::VectorXd& z_next, int t,
                     const NoiseSchedule& sched) {
  if (t == sched.steps()) return forward_marginal(x0, t, sched);
  (void)tile;
  return posterior(x0, z_next, t, sched);
}

// Rate each dimension is expected to cost, computable without x0.
Eigen::VectorXd predicted_bits(const Tile& tile, const Eigen::VectorXd& z_next,
                               int t, const NoiseSchedule& sched) {
  Eigen::VectorXd nats;
  if (t == sched.steps()) {
    const X0Moments m = tile.den->prior_moments(tile.cond, tile.dim());
    const double ab = sched.alpha_bar(t);
    const Eigen::ArrayXd second = m.mean.array().square() + m.variance.array();
    nats = (0.5 * ((1.0 - ab) + ab * second - 1.0 - std::log(1.0 - ab))).matrix();
  } else {
    const double a = std::sqrt(sched.alpha_bar(t)) * sched.beta(t + 1) /
                     (1.0 - sched.alpha_bar(t + 1));
    const double s2 = sched.posterior_variance(t + 1);
    nats = (a * a / (2.0 * s2)) * tile.den->x0_variance(z_next, t + 1, tile.cond);
  }
  return (nats / std::numbers::ln2).cwiseMax(0.0);
}

std::vector<int> tail_params(const Tile& tile, const Eigen::VectorXd& z1,
                             const NoiseSchedule&) {
  const Eigen::VectorXd var = tile.den->x0_variance(z1, 1, tile.cond);
  std::vector<int> k(var.size());
  for (Eigen::Index i = 0; i < var.size(); ++i) {
    const double sd = std::sqrt(var[i]);
    k[i] = sd > 0.0 ? std::clamp(static_cast<int>(std::floor(std::log2(sd / kTailStep))),
                                 0, kMaxTailParam)
                    : 0;
  }
  return k;
}

void write_signed_eg(BitWriter& w, int64_t v, int k) {
  const uint64_t u = v >= 0 ? 2 * static_cast<uint64_t>(v)
                            : 2 * static_cast<uint64_t>(-(v + 1)) + 1;
  const uint64_t x = u + (uint64_t{1} << k);
  const int n = std::bit_width(x);
  w.write(0, n - 1 - k);
  w.write(x, n);
}

int64_t read_signed_eg(BitReader& r, int k) {
  int zeros = 0;
  while (!r.read_bit()) {
    if (++zeros + k > 63) {
      throw CodecError(ErrorKind::kCorrupt, "tail code too long", r.position());
    }
  }
  const int rest = zeros + k;
  const uint64_t x = (uint64_t{1} << rest) | (rest > 0 ? r.read(rest) : 0);
  const uint64_t u = x - (uint64_t{1} << k);
  const uint64_t mag = u >> 1;
  if (static_cast<double>(mag) >= kMaxTailIndex) {
    throw CodecError(ErrorKind::kCorrupt, "tail residual out of range", r.position());
  }
  return (u & 1) ? -static_cast<int64_t>(mag) - 1 : static_cast<int64_t>(mag);
}

// Free denoising from state z_s down to z_1, then the deterministic mean.
Eigen::VectorXd run_free(const Tile& tile, size_t index, Eigen::VectorXd z, int s,
                         const NoiseSchedule& sched, const Block256& key) {
  for (int t = s - 1; t >= 1; --t) {
    const Gaussian p = reverse_kernel(*tile.den, z, t, tile.cond, sched);
    z = simulate(1, p, free_sampler(key, index, t));
  }
  return final_mean(*tile.den, z, tile.cond, sched);
}

StreamHeader header_for(const PipelineConfig& cfg, const CodecModel& model,
                        const TagVocabulary& vocab) {
  StreamHeader h;
  h.schedule = cfg.schedule;
  h.steps = static_cast<uint16_t>(cfg.steps());
  h.coded_steps = static_cast<uint16_t>(cfg.coded_steps);
  h.skipped.assign(h.steps, false);
  h.tau_q8 = static_cast<uint8_t>(std::lround(cfg.tau * 255.0));
  h.seed = cfg.seed;
  h.tile_size = static_cast<uint16_t>(cfg.tiles.tile_size);
  h.overlap = static_cast<uint16_t>(cfg.tiles.overlap);
  h.tag_cap = static_cast<uint16_t>(cfg.tiles.tag_cap);
  h.sigma_q16 = static_cast<uint16_t>(std::lround(cfg.tiles.sigma_fraction * 65536.0));
  h.vocab_hash = vocab.id();
  h.rows = static_cast<uint16_t>(model.latent_rows);
  h.cols = static_cast<uint16_t>(model.latent_cols);
  h.kl_target_q8 = static_cast<uint16_t>(std::lround(cfg.kl_target_bits * 256.0));
  h.skip_threshold_q12 =
      static_cast<uint16_t>(std::lround(cfg.skip_threshold_bits * 4096.0));
  h.model_hash = model.hash();
  h.vocab_size = static_cast<uint32_t>(vocab.size());
  return h;
}

PipelineConfig config_from_header(const StreamHeader& h) {
  PipelineConfig cfg;
  cfg.schedule = h.schedule;
  cfg.coded_steps = h.coded_steps;
  cfg.kl_target_bits = h.kl_target_q8 / 256.0;
  cfg.skip_threshold_bits = h.skip_threshold_q12 / 4096.0;
  cfg.tau = h.tau_q8 / 255.0;
  cfg.seed = h.seed;
  cfg.tiles = {h.tile_size, h.overlap, h.tag_cap, h.sigma_q16 / 65536.0};
  return cfg;
}

void hash_state(Fnv1a& h, const std::vector<Eigen::VectorXd>& states) {
  for (const auto& s : states) h.matrix(s);
}

size_t padded(size_t bits) { return (bits + 7) / 8 * 8; }

}  // namespace

int PipelineConfig::steps() const { return schedule_by_index(schedule).steps(); }

PipelineConfig PipelineConfig::resolved() const {
  PipelineConfig c = *this;
  const int T = steps();
  if (coded_steps < 0 || coded_steps > T) {
    throw std::invalid_argument("config: T_E must lie in [0, T]");
  }
  if (!(kl_target_bits >= 1.0 / 256 && kl_target_bits < 256.0)) {
    throw std::invalid_argument("config: kl_target must lie in [1/256, 256)");
  }
  if (!(skip_threshold_bits >= 0.0 && skip_threshold_bits < 16.0)) {
    throw std::invalid_argument("config: skip_threshold must lie in [0, 16)");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("config: tau outside [0, 1]");
  if (tiles.tile_size < 1 || tiles.tile_size > 65535 || tiles.overlap < 0 ||
      tiles.overlap >= tiles.tile_size) {
    throw std::invalid_argument("config: need 0 <= overlap < tile");
  }
  if (tiles.tag_cap < 0 || tiles.tag_cap > static_cast<int>(kMaxPromptTags)) {
    throw std::invalid_argument("config: tag_cap must lie in [0, 255]");
  }
  if (!(tiles.sigma_fraction >= 1.0 / 65536 && tiles.sigma_fraction < 1.0)) {
    throw std::invalid_argument("config: sigma must lie in (0, 1)");
  }
  if (!(latent_step > 0.0) || !std::isfinite(static_cast<float>(latent_step)) ||
      static_cast<float>(latent_step) <= 0.0f) {
    throw std::invalid_argument("config: latent_step must be a positive float");
  }
  if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  if (candidate_cap && *candidate_cap < 1) {
    throw std::invalid_argument("config: candidate cap must be >= 1");
  }
  c.kl_target_bits = std::lround(kl_target_bits * 256.0) / 256.0;
  c.skip_threshold_bits = std::lround(skip_threshold_bits * 4096.0) / 4096.0;
  c.tau = std::lround(tau * 255.0) / 255.0;
  c.tiles.sigma_fraction = std::lround(tiles.sigma_fraction * 65536.0) / 65536.0;
  c.latent_step = static_cast<float>(latent_step);
  return c;
}

void CodecModel::validate() const {
  if (latent_rows < 1 || latent_cols < 1 || latent_rows > 65535 ||
      latent_cols > 65535 || pixel_rows < 1 || pixel_cols < 1) {
    throw std::invalid_argument("CodecModel: invalid shapes");
  }
  autoencoder.validate();
  if (autoencoder.latent() != static_cast<Eigen::Index>(latent_rows) * latent_cols ||
      autoencoder.pixels() != static_cast<Eigen::Index>(pixel_rows) * pixel_cols) {
    throw std::invalid_argument("CodecModel: autoencoder does not match shapes");
  }
  prior.validate();
  if (prior.dim() != autoencoder.latent()) {
    throw std::invalid_argument("CodecModel: prior dimension mismatch");
  }
}

uint64_t CodecModel::hash() const {
  Fnv1a h;
  h.u64(latent_rows).u64(latent_cols).u64(pixel_rows).u64(pixel_cols);
  h.matrix(autoencoder.decoder)
      .matrix(autoencoder.encoder_perceptual)
      .matrix(autoencoder.encoder_mse);
  for (const auto& m : prior.component_means) h.matrix(m);
  h.matrix(prior.component_weights).f64(prior.observation_variance);
  h.u64(prior.tag_components.size());
  for (const auto& set : prior.tag_components) {
    h.u64(set.size());
    for (int k : set) h.u64(static_cast<uint64_t>(k));
  }
  return h.value();
}

MixtureModel CodecModel::region_prior(const CellRect& r) const {
  MixtureModel m = prior;
  const int h = r.row1 - r.row0, w = r.col1 - r.col0;
  for (auto& mean : m.component_means) {
    Eigen::VectorXd local(static_cast<Eigen::Index>(h) * w);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        local[i * w + j] = mean[(r.row0 + i) * latent_cols + (r.col0 + j)];
      }
    }
    mean = std::move(local);
  }
  return m;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& grid) {
  Eigen::VectorXd v(grid.size());
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    v.segment(r * grid.cols(), grid.cols()) = grid.row(r).transpose();
  }
  return v;
}

Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, Eigen::Index rows,
                          Eigen::Index cols) {
  if (v.size() != rows * cols) throw std::invalid_argument("unflatten: size mismatch");
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    g.row(r) = v.segment(r * cols, cols).transpose();
  }
  return g;
}

Eigen::MatrixXd block_average(const Eigen::MatrixXd& z) {
  const Eigen::Index br = (z.rows() + kLatentBlock - 1) / kLatentBlock;
  const Eigen::Index bc = (z.cols() + kLatentBlock - 1) / kLatentBlock;
  Eigen::MatrixXd y(br, bc);
  for (Eigen::Index i = 0; i < br; ++i) {
    for (Eigen::Index j = 0; j < bc; ++j) {
      const Eigen::Index r0 = i * kLatentBlock, c0 = j * kLatentBlock;
      const Eigen::Index h = std::min<Eigen::Index>(kLatentBlock, z.rows() - r0);
      const Eigen::Index w = std::min<Eigen::Index>(kLatentBlock, z.cols() - c0);
      y(i, j) = z.block(r0, c0, h, w).mean();
    }
  }
  return y;
}

LatentHint latent_hint(const QuantizedLatent& yhat, int rows, int cols) {
  LatentHint hint;
  hint.noise_variance = yhat.step * yhat.step / 12.0;
  const Eigen::MatrixXd y = yhat.dequantize();
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      BlockObservation b{{}, y(i, j)};
      for (int r = i * kLatentBlock; r < std::min<int>(rows, (i + 1) * kLatentBlock); ++r) {
        for (int c = j * kLatentBlock; c < std::min<int>(cols, (j + 1) * kLatentBlock); ++c) {
          b.cells.push_back(r * cols + c);
        }
      }
      hint.blocks.push_back(std::move(b));
    }
  }
  return hint;
}

DeterministicSampler free_step_sampler(const Block256& key, size_t tile, int t) {
  return DeterministicSampler(key, chunk_stream_id(key, tile, t, kFreeOrdinal));
}

double mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("mse: shape mismatch");
  }
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

EncodeResult encode(const Eigen::MatrixXd& x, const Condition& cond,
                    const PipelineConfig& config, const CodecModel& model,
                    const TagVocabulary& vocab, bool log_chain) {
  const PipelineConfig cfg = config.resolved();
  model.validate();
  if (x.rows() != model.pixel_rows || x.cols() != model.pixel_cols) {
    throw std::invalid_argument("encode: input shape does not match the model");
  }
  for (int tag : cond.tags) {
    if (tag < 0 || static_cast<size_t>(tag) >= vocab.size()) {
      throw CodecError(ErrorKind::kVocabularyMismatch,
                       "tag index " + std::to_string(tag) + " not in vocabulary");
    }
  }
  const NoiseSchedule sched = schedule_by_index(cfg.schedule);
  const int T = sched.steps();
  const Block256 key = expand_seed(cfg.seed);
  StreamHeader header = header_for(cfg, model, vocab);

  EncodeResult out;
  EncodeReport& rep = out.report;

  // Latent targets and the explicit branch.
  const auto& ae = model.autoencoder;
  const Eigen::VectorXd xv = flatten(x);
  const Eigen::VectorXd z = ae.encoder_perceptual * xv;
  const Eigen::VectorXd z_tilde = ae.encoder_mse * xv;
  out.z_bar = unflatten(blend(z, z_tilde, cfg.tau), model.latent_rows, model.latent_cols);
  const QuantizedLatent yhat = quantize(block_average(out.z_bar), cfg.latent_step);

  const TileGrid grid = make_grid(model.latent_rows, model.latent_cols,
                                  cfg.tiles.tile_size, cfg.tiles.overlap);
  Condition tag_cond{cond.tags, cond.tag_regions, std::nullopt};
  const auto tag_parts = partition_condition(tag_cond, grid, cfg.tiles.tag_cap);
  std::vector<TagPrompt> prompts;
  for (const auto& p : tag_parts) prompts.push_back({p.tags});
  const std::vector<Tile> tiles = make_tiles(model, grid, prompts, yhat, sched);
  const size_t n_tiles = tiles.size();
  rep.tiles = static_cast<int>(n_tiles);

  BitWriter tag_w;
  for (const auto& p : prompts) tag_encode(p, vocab.size(), tag_w);
  BitWriter latent_w;
  latent_encode_indices(yhat, latent_w);

  std::vector<Eigen::VectorXd> x0(n_tiles), state(n_tiles);
  for (size_t i = 0; i < n_tiles; ++i) x0[i] = flatten(crop(out.z_bar, tiles[i].rect));
  if (log_chain) out.chain_log.resize(n_tiles);

  std::vector<std::pair<SectionTag, BitWriter>> step_sections;
  std::vector<std::vector<uint64_t>> coded_indices;
  for (int k = 0; k < cfg.coded_steps; ++k) {
    const int t = T - k;
    StepReport sr;
    sr.t = t;
    std::vector<std::optional<Gaussian>> q(n_tiles), p(n_tiles);
    std::vector<Eigen::VectorXd> pred(n_tiles);
    std::vector<double> kl(n_tiles);
    parallel_for(n_tiles, cfg.threads, [&](size_t i) {
      const Eigen::VectorXd& prev = t == T ? x0[i] : state[i];
      q[i].emplace(step_target(tiles[i], x0[i], prev, t, sched));
      p[i].emplace(step_prior(tiles[i], prev, t, sched));
      pred[i] = predicted_bits(tiles[i], prev, t, sched);
      kl[i] = kl_bits(*q[i], *p[i]);
    });
    for (size_t i = 0; i < n_tiles; ++i) {
      sr.kl_bits += kl[i];
      sr.predicted_kl_bits += pred[i].sum();
    }
    if (sr.kl_bits < cfg.skip_threshold_bits) {
      sr.skipped = true;
      header.skipped[k] = true;
      rep.steps_skipped.push_back(t);
      for (size_t i = 0; i < n_tiles; ++i) {
        state[i] = simulate(1, *p[i], free_sampler(key, i, t));
      }
    } else {
      const double target = cfg.kl_target_bits;
      std::vector<StepCode> codes(n_tiles);
      std::vector<char> over(n_tiles, 0);
      parallel_for(n_tiles, cfg.threads, [&](size_t i) {
        codes[i] = predicted_code(pred[i], target);
        codes[i].chunk_kl = exact_chunk_kl(*q[i], *p[i], codes[i].layout);
        for (double kl : codes[i].chunk_kl) over[i] |= kl > target + kLayoutMarginBits;
      });
      bool fallback = std::any_of(over.begin(), over.end(), [](char c) { return c != 0; });
      if (!fallback) {
        uint64_t budget = uint64_t{1} << static_cast<int>(
            std::min(62.0, std::ceil(target + kPredictedBudgetBits)));
        if (cfg.candidate_cap) budget = std::min(budget, *cfg.candidate_cap);
        try {
          parallel_for(n_tiles, cfg.threads, [&](size_t i) {
            run_code(codes[i], *q[i], *p[i], key, i, t, 0, budget);
          });
        } catch (const CodecError& e) {
          if (e.kind() != ErrorKind::kCapExceeded) throw;
          fallback = true;
        }
      }
      if (fallback) {
        parallel_for(n_tiles, cfg.threads, [&](size_t i) {
          codes[i] = explicit_code(*q[i], *p[i], target / 2);
          run_code(codes[i], *q[i], *p[i], key, i, t, 1, cfg.candidate_cap);
        });
      }
      sr.rechunked = fallback;
      BitWriter w;
      std::vector<uint64_t> flat;
      for (size_t i = 0; i < n_tiles; ++i) {
        const StepCode& sc = codes[i];
        if (fallback) write_layout(w, sc);
        for (size_t c = 0; c < sc.indices.size(); ++c) {
          encode_index(sc.indices[c], sc.hints[c], w);
          flat.push_back(sc.indices[c]);
        }
        sr.chunks += sc.indices.size();
        sr.candidates += sc.examined;
        sr.chunk_kl_bits.insert(sr.chunk_kl_bits.end(), sc.chunk_kl.begin(),
                                sc.chunk_kl.end());
        state[i] = sc.state;
      }
      sr.payload_bits = w.bit_count();
      rep.implicit_bits += sr.payload_bits;
      step_sections.emplace_back(
          sr.rechunked ? SectionTag::kRccStepRechunked : SectionTag::kRccStep,
          std::move(w));
      coded_indices.push_back(std::move(flat));
    }
    rep.kl_total_bits += sr.kl_bits;
    rep.steps.push_back(sr);
    if (log_chain) {
      for (size_t i = 0; i < n_tiles; ++i) out.chain_log[i].push_back(state[i]);
    }
  }

  // Chain completion.
  std::vector<Eigen::MatrixXd> z_hat(n_tiles);
  BitWriter tail_w;
  std::vector<std::vector<int64_t>> tail_values(n_tiles);
  if (cfg.coded_steps == 0) {
    for (size_t i = 0; i < n_tiles; ++i) {
      const Gaussian prior =
          Gaussian::isotropic(Eigen::VectorXd::Zero(tiles[i].dim()), 1.0);
      state[i] = simulate(1, prior, free_sampler(key, i, T));
    }
  }
  out.chain_end = state;
  if (cfg.coded_steps == T) {
    for (size_t i = 0; i < n_tiles; ++i) {
      const Eigen::VectorXd m = final_mean(*tiles[i].den, state[i], tiles[i].cond, sched);
      const auto params = tail_params(tiles[i], state[i], sched);
      Eigen::VectorXd zh(m.size());
      for (Eigen::Index d = 0; d < m.size(); ++d) {
        const double steps = std::nearbyint((x0[i][d] - m[d]) / kTailStep);
        if (!(std::fabs(steps) < kMaxTailIndex)) {
          throw CodecError(ErrorKind::kOverflow, "tail residual out of range");
        }
        const auto v = static_cast<int64_t>(steps);
        write_signed_eg(tail_w, v, params[d]);
        tail_values[i].push_back(v);
        zh[d] = m[d] + static_cast<double>(v) * kTailStep;
      }
      z_hat[i] = unflatten(zh, tiles[i].rows, tiles[i].cols);
    }
    rep.tail_bits = tail_w.bit_count();
  } else {
    const int s = cfg.coded_steps == 0 ? T : T - cfg.coded_steps + 1;
    parallel_for(n_tiles, cfg.threads, [&](size_t i) {
      z_hat[i] = unflatten(run_free(tiles[i], i, state[i], s, sched, key),
                           tiles[i].rows, tiles[i].cols);
    });
  }
  out.latent = merge(z_hat, grid, grid_masks(grid, cfg.tiles.sigma_fraction));
  out.reconstruction = unflatten(ae.decoder * flatten(out.latent), model.pixel_rows,
                                 model.pixel_cols);

  // Assembly.
  BitWriter stream;
  write_header(header, stream);
  const std::vector<uint8_t> header_bytes = stream.bytes();
  write_section(static_cast<uint8_t>(SectionTag::kTags), tag_w, stream);
  write_section(static_cast<uint8_t>(SectionTag::kLatent), latent_w, stream);
  for (const auto& [tag, w] : step_sections) {
    write_section(static_cast<uint8_t>(tag), w, stream);
  }
  if (cfg.coded_steps == T) {
    write_section(static_cast<uint8_t>(SectionTag::kTail), tail_w, stream);
  }

  Fnv1a h;
  h.bytes(header_bytes);
  for (const auto& p : prompts) {
    h.u64(p.indices.size());
    for (int v : p.indices) h.u64(static_cast<uint64_t>(v));
  }
  h.matrix(yhat.values).f64(yhat.step);
  for (const auto& v : coded_indices) {
    for (uint64_t n : v) h.u64(n);
  }
  hash_state(h, out.chain_end);
  for (const auto& v : tail_values) {
    for (int64_t n : v) h.u64(static_cast<uint64_t>(n));
  }
  h.matrix(out.latent);
  rep.content_hash = h.value();
  BitWriter trailer;
  trailer.write_u64le(rep.content_hash);
  write_section(static_cast<uint8_t>(SectionTag::kTrailer), trailer, stream);

  rep.header_bits = header_bits(header.steps);
  rep.tag_bits = tag_w.bit_count();
  rep.latent_bits = latent_w.bit_count();
  rep.explicit_bits = rep.tag_bits + rep.latent_bits;
  rep.trailer_bits = kSectionFramingBits + 64;
  rep.total_bits = stream.bit_count();
  size_t payload = rep.explicit_bits + rep.implicit_bits + rep.tail_bits;
  size_t framed = padded(rep.tag_bits) + padded(rep.latent_bits) + padded(rep.tail_bits) +
                  kSectionFramingBits * (2 + step_sections.size() +
                                         (cfg.coded_steps == T ? 1 : 0));
  for (const auto& sec : step_sections) framed += padded(sec.second.bit_count());
  rep.framing_bits = framed - payload;
  rep.bpp = static_cast<double>(rep.total_bits - rep.trailer_bits) /
            static_cast<double>(model.latent_rows * model.latent_cols);
  out.stream = stream.take();
  return out;
}

DecodeResult decode(std::span<const uint8_t> stream, const CodecModel& model,
                    const TagVocabulary& vocab, int threads) {
  const ParsedStream parsed = parse_stream(stream);
  const StreamHeader& hdr = parsed.header;
  const NoiseSchedule sched = schedule_by_index(hdr.schedule);
  const int T = sched.steps();
  if (hdr.steps != T) {
    throw CodecError(ErrorKind::kCorrupt, "step count does not match schedule", 48);
  }
  if (hdr.vocab_hash != vocab.id() || hdr.vocab_size != vocab.size()) {
    throw CodecError(ErrorKind::kVocabularyMismatch, "vocabulary hash mismatch");
  }
  if (hdr.model_hash != model.hash() || hdr.rows != model.latent_rows ||
      hdr.cols != model.latent_cols) {
    throw CodecError(ErrorKind::kModelMismatch, "model hash mismatch");
  }
  PipelineConfig cfg = config_from_header(hdr);
  cfg.threads = std::max(1, threads);
  const Block256 key = expand_seed(cfg.seed);

  DecodeResult out;
  DecodeReport& rep = out.report;
  rep.header = hdr;
  rep.total_bits = stream.size() * 8;

  const TileGrid grid = make_grid(model.latent_rows, model.latent_cols,
                                  cfg.tiles.tile_size, cfg.tiles.overlap);
  const size_t n_tiles = grid.tiles.size();
  const auto& secs = parsed.sections;

  // Explicit sections.
  {
    BitReader r = secs[0].reader();
    for (size_t i = 0; i < n_tiles; ++i) {
      TagPrompt p = tag_decode(r, vocab.size());
      if (p.indices.size() > static_cast<size_t>(cfg.tiles.tag_cap)) {
        throw CodecError(ErrorKind::kCorrupt, "tile prompt exceeds tag cap",
                         secs[0].offset_bits);
      }
      rep.tile_tags.push_back(std::move(p));
    }
    if (!r.at_end()) {
      throw CodecError(ErrorKind::kCorrupt, "trailing bits in tag section",
                       secs[0].offset_bits);
    }
  }
  QuantizedLatent yhat;
  {
    BitReader r = secs[1].reader();
    yhat = latent_decode_indices(r);
    if (!r.at_end()) {
      throw CodecError(ErrorKind::kCorrupt, "trailing bits in latent section",
                       secs[1].offset_bits);
    }
    const Eigen::Index br = (model.latent_rows + kLatentBlock - 1) / kLatentBlock;
    const Eigen::Index bc = (model.latent_cols + kLatentBlock - 1) / kLatentBlock;
    if (yhat.values.rows() != br || yhat.values.cols() != bc ||
        !(yhat.step > 0.0) || !std::isfinite(yhat.step)) {
      throw CodecError(ErrorKind::kCorrupt, "latent section shape mismatch",
                       secs[1].offset_bits);
    }
  }
  rep.explicit_bits = secs[0].payload_bits + secs[1].payload_bits;
  const std::vector<Tile> tiles = make_tiles(model, grid, rep.tile_tags, yhat, sched);

  const bool has_tail = cfg.coded_steps == T;
  size_t next_sec = 2;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) {
      const size_t at = next_sec < secs.size() ? secs[next_sec].offset_bits
                                               : rep.total_bits;
      throw CodecError(ErrorKind::kCorrupt, what, at);
    }
  };

  std::vector<Eigen::VectorXd> state(n_tiles);
  std::vector<std::vector<uint64_t>> coded_indices;
  for (int k = 0; k < cfg.coded_steps; ++k) {
    const int t = T - k;
    std::vector<std::optional<Gaussian>> p(n_tiles);
    for (size_t i = 0; i < n_tiles; ++i) {
      p[i].emplace(step_prior(tiles[i], state[i], t, sched));
    }
    if (hdr.skipped[k]) {
      for (size_t i = 0; i < n_tiles; ++i) {
        state[i] = simulate(1, *p[i], free_sampler(key, i, t));
      }
      continue;
    }
    expect(next_sec < secs.size(), "missing RCC step section");
    const Section& sec = secs[next_sec];
    const auto tag = static_cast<SectionTag>(sec.tag);
    expect(tag == SectionTag::kRccStep || tag == SectionTag::kRccStepRechunked,
           "expected an RCC step section");
    const int attempt = tag == SectionTag::kRccStepRechunked ? 1 : 0;
    const double target = cfg.kl_target_bits;
    BitReader r = sec.reader();
    std::vector<StepCode> codes(n_tiles);
    std::vector<uint64_t> flat;
    for (size_t i = 0; i < n_tiles; ++i) {
      codes[i] = attempt == 0
                     ? predicted_code(predicted_bits(tiles[i], state[i], t, sched), target)
                     : read_layout(r, tiles[i].dim());
      for (double h : codes[i].hints) {
        codes[i].indices.push_back(decode_index(r, h));
        flat.push_back(codes[i].indices.back());
      }
    }
    expect(r.at_end(), "trailing bits in RCC step section");
    rep.implicit_bits += sec.payload_bits;
    parallel_for(n_tiles, cfg.threads, [&](size_t i) {
      state[i] = decode_code(codes[i], *p[i], key, i, t, attempt);
    });
    coded_indices.push_back(std::move(flat));
    ++next_sec;
  }

  std::vector<Eigen::MatrixXd> z_hat(n_tiles);
  std::vector<std::vector<int64_t>> tail_values(n_tiles);
  if (cfg.coded_steps == 0) {
    for (size_t i = 0; i < n_tiles; ++i) {
      const Gaussian prior =
          Gaussian::isotropic(Eigen::VectorXd::Zero(tiles[i].dim()), 1.0);
      state[i] = simulate(1, prior, free_sampler(key, i, T));
    }
  }
  out.chain_end = state;
  if (has_tail) {
    expect(next_sec < secs.size() && secs[next_sec].tag ==
                                         static_cast<uint8_t>(SectionTag::kTail),
           "missing tail section");
    BitReader r = secs[next_sec].reader();
    for (size_t i = 0; i < n_tiles; ++i) {
      const Eigen::VectorXd m = final_mean(*tiles[i].den, state[i], tiles[i].cond, sched);
      const auto params = tail_params(tiles[i], state[i], sched);
      Eigen::VectorXd zh(m.size());
      for (Eigen::Index d = 0; d < m.size(); ++d) {
        const int64_t v = read_signed_eg(r, params[d]);
        tail_values[i].push_back(v);
        zh[d] = m[d] + static_cast<double>(v) * kTailStep;
      }
      z_hat[i] = unflatten(zh, tiles[i].rows, tiles[i].cols);
    }
    expect(r.at_end(), "trailing bits in tail section");
    ++next_sec;
  } else {
    const int s = cfg.coded_steps == 0 ? T : T - cfg.coded_steps + 1;
    parallel_for(n_tiles, cfg.threads, [&](size_t i) {
      z_hat[i] = unflatten(run_free(tiles[i], i, state[i], s, sched, key),
                           tiles[i].rows, tiles[i].cols);
    });
  }
  out.latent = merge(z_hat, grid, grid_masks(grid, cfg.tiles.sigma_fraction));
  out.reconstruction = unflatten(model.autoencoder.decoder * flatten(out.latent),
                                 model.pixel_rows, model.pixel_cols);

  Fnv1a h;
  h.bytes(stream.first(parsed.header_bits / 8));
  for (const auto& p : rep.tile_tags) {
    h.u64(p.indices.size());
    for (int v : p.indices) h.u64(static_cast<uint64_t>(v));
  }
  h.matrix(yhat.values).f64(yhat.step);
  for (const auto& v : coded_indices) {
    for (uint64_t n : v) h.u64(n);
  }
  hash_state(h, out.chain_end);
  for (const auto& v : tail_values) {
    for (int64_t n : v) h.u64(static_cast<uint64_t>(n));
  }
  h.matrix(out.latent);
  rep.content_hash = h.value();

  if (next_sec < secs.size()) {
    const Section& sec = secs[next_sec];
    expect(sec.tag == static_cast<uint8_t>(SectionTag::kTrailer) &&
               sec.payload_bits == 64,
           "unexpected section after the chain");
    BitReader r = sec.reader();
    if (r.read_u64le() != rep.content_hash) {
      throw CodecError(ErrorKind::kCorrupt, "content hash mismatch", sec.offset_bits);
    }
    rep.trailer_verified = true;
    ++next_sec;
  }
  return out;
}

}  // namespace dualrcc
