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

#include "dualrcc/rcc.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dualrcc/errors.h"

namespace dualrcc {
namespace {

constexpr double kTailSigmas = 4.0;
constexpr double kMarginFloorNats = 2.0;
constexpr double kCheapCandidates = 4096.0;
constexpr uint64_t kHardCap = uint64_t{1} << 62;
// ln t is refreshed at least this often.
constexpr uint64_t kLogRefreshMask = 63;
constexpr double kSlack = 1e-6;

uint64_t default_cap(double kl_bits) {
  const double exponent = std::max(0.0, kl_bits) + 16.0;
  if (exponent >= 62.0) return kHardCap;
  return static_cast<uint64_t>(std::ldexp(1.0, static_cast<int>(std::ceil(exponent))));
}

// Per-dimension terms of ln q(z) - ln p(z) for z = mu_p + sigma_p * u:
//   ln q - ln p = c + sum_i [u_i^2 / 2 - (a_i u_i + b_i)^2 / 2]
// with a_i = sigma_p / sigma_q and b_i = (mu_p - mu_q) / sigma_q.
struct RatioTerms {
  Eigen::ArrayXd scale;
  Eigen::ArrayXd offset;
  double constant = 0;
};

// Bounds of normal_from_word over words sharing their top kBucketBits bits.
constexpr int kBucketBits = 10;
constexpr double kBucketPad = 1e-9;

struct NormalBuckets {
  std::array<double, size_t{1} << kBucketBits> lo;
  std::array<double, size_t{1} << kBucketBits> hi;

  NormalBuckets() {
    constexpr int shift = 64 - kBucketBits;
    for (uint64_t k = 0; k < lo.size(); ++k) {
      lo[k] = normal_from_word(k << shift) - kBucketPad;
      hi[k] = normal_from_word(((k + 1) << shift) - 1) + kBucketPad;
    }
  }
};

const NormalBuckets& normal_buckets() {
  static const NormalBuckets buckets;
  return buckets;
}

// Upper bound of u^2 - (a u + b)^2 over u in [lo, hi].
double term_upper_bound(double a, double b, double lo, double hi) {
  auto g = [&](double u) {
    const double v = a * u + b;
    return u * u - v * v;
  };
  double m = std::max(g(lo), g(hi));
  const double curvature = a * a - 1.0;
  if (curvature > 0.0) {
    const double vertex = -a * b / curvature;
    if (vertex > lo && vertex < hi) m = std::max(m, g(vertex));
  }
  return m;
}

RatioTerms ratio_terms(const Gaussian& q, const Gaussian& p) {
  RatioTerms terms;
  const Eigen::ArrayXd sq = q.variance().array().sqrt();
  const Eigen::ArrayXd sp = p.variance().array().sqrt();
  terms.scale = sp / sq;
  terms.offset = (p.mean() - q.mean()).array() / sq;
  terms.constant = 0.5 * (p.variance().array() / q.variance().array()).log().sum();
  return terms;
}

// Skips ln t on candidates that can neither win nor stop the search: a
// candidate cannot win while ln(earlier t) - slack already rules it out, and
// the search cannot stop while t is below exp(best - ln w_min - slack). The
// slack absorbs rounding, so decisions match the exact test. Between
// refreshes, a bucket bound on ln q/p rules out most candidates before any
// normal is evaluated.
PfrResult run_pfr(const Gaussian& q, const Gaussian& p, double log_w_min,
                  uint64_t max_candidates, const DeterministicSampler& sampler) {
  if (q.dim() != p.dim()) {
    throw std::invalid_argument("pfr_encode: dimension mismatch");
  }
  const RatioTerms terms = ratio_terms(q, p);
  const Eigen::Index dim = q.dim();
  const double* scale = terms.scale.data();
  const double* offset = terms.offset.data();
  const NormalBuckets& buckets = normal_buckets();

  double t = 0;
  double log_t_floor = -std::numeric_limits<double>::infinity();  // ln of an earlier t
  double best = std::numeric_limits<double>::infinity();
  double stop_guard = std::numeric_limits<double>::infinity();
  uint64_t best_index = 0;
  Block256 arrivals{};
  uint64_t n = 1;
  for (;; ++n) {
    if (n > max_candidates) {
      throw CodecError(ErrorKind::kCapExceeded,
                       "PFR candidate cap of " + std::to_string(max_candidates) +
                           " reached");
    }
    if (n % 4 == 0 || n == 1) {
      arrivals = sampler.words(n / 4, 0, Domain::kArrival);
    }
    t += -std::log(uniform_open(arrivals[n % 4]));

    const bool may_stop = !(t < stop_guard);
    const bool refresh = (n & kLogRefreshMask) == 0;
    if (!may_stop && !refresh) {
      double bound = 0;
      for (Eigen::Index block = 0; block * 4 < dim; ++block) {
        const Block256 w = sampler.words(n, static_cast<uint64_t>(block));
        const Eigen::Index end = std::min<Eigen::Index>(dim, block * 4 + 4);
        for (Eigen::Index i = block * 4; i < end; ++i) {
          const uint64_t k = w[i - block * 4] >> (64 - kBucketBits);
          bound += term_upper_bound(scale[i], offset[i], buckets.lo[k], buckets.hi[k]);
        }
      }
      if (log_t_floor - 2.0 * kSlack - (terms.constant + 0.5 * bound) > best) continue;
    }
    double sum = 0;
    for (Eigen::Index block = 0; block * 4 < dim; ++block) {
      const Block256 w = sampler.words(n, static_cast<uint64_t>(block));
      const Eigen::Index end = std::min<Eigen::Index>(dim, block * 4 + 4);
      for (Eigen::Index i = block * 4; i < end; ++i) {
        const double u = normal_from_word(w[i - block * 4]);
        const double v = scale[i] * u + offset[i];
        sum += u * u - v * v;
      }
    }
    const double log_ratio = terms.constant + 0.5 * sum;
    const bool may_win = !(log_t_floor - kSlack - log_ratio > best);
    if (!may_win && !may_stop && !refresh) continue;
    const double log_t = std::log(t);
    log_t_floor = log_t;
    const double log_score = log_t - log_ratio;
    if (log_score <= best) {
      best = log_score;
      best_index = n;
      stop_guard = std::exp(best - log_w_min - kSlack);
    }
    if (best <= log_t + log_w_min) break;
  }
  Eigen::VectorXd sample(dim);
  for (Eigen::Index block = 0; block * 4 < dim; ++block) {
    const Block256 w = sampler.words(best_index, static_cast<uint64_t>(block));
    const Eigen::Index end = std::min<Eigen::Index>(dim, block * 4 + 4);
    for (Eigen::Index i = block * 4; i < end; ++i) {
      sample[i] = p.mean()[i] + std::sqrt(p.variance()[i]) * normal_from_word(w[i - block * 4]);
    }
  }
  return {best_index, n, best, std::move(sample)};
}

}  // namespace

double default_log_w_min(const Gaussian& q, const Gaussian& p) {
  const double kl = std::max(0.0, kl_nats(q, p));
  const double margin =
      std::min(kTailSigmas * std::sqrt(2.0 * kl),
               std::max(kMarginFloorNats, std::log(kCheapCandidates) - kl));
  const double heuristic = kl + margin;
  if (const auto bound = log_max_density_ratio(q, p); bound && *bound <= heuristic) {
    return -*bound;
  }
  return -heuristic;
}

PfrResult pfr_encode(const Gaussian& q, const Gaussian& p,
                     const DeterministicSampler& sampler,
                     const PfrOptions& options) {
  const double log_w_min =
      options.log_w_min ? *options.log_w_min : default_log_w_min(q, p);
  const uint64_t cap =
      options.max_candidates ? *options.max_candidates : default_cap(kl_bits(q, p));
  return run_pfr(q, p, log_w_min, cap, sampler);
}

PfrResult pfr_encode(const Gaussian& q, const Gaussian& p, double w_min,
                     const DeterministicSampler& sampler) {
  if (!(w_min > 0.0) || !std::isfinite(w_min)) {
    throw std::invalid_argument("pfr_encode: w_min must be positive and finite");
  }
  return run_pfr(q, p, std::log(w_min), default_cap(kl_bits(q, p)), sampler);
}

Eigen::VectorXd pfr_decode(uint64_t index, const Gaussian& p,
                           const DeterministicSampler& sampler) {
  return simulate(index, p, sampler);
}

std::vector<RccChunk> chunk_by_kl(const Eigen::VectorXd& per_dim_bits,
                                  double kl_target_bits) {
  if (!(kl_target_bits > 0.0)) {
    throw std::invalid_argument("chunk: kl_target_bits must be positive");
  }
  std::vector<RccChunk> chunks;
  const Eigen::Index dim = per_dim_bits.size();
  Eigen::Index start = 0;
  double acc = 0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double kl = per_dim_bits[i];
    if (kl > kl_target_bits) {
      if (i > start) chunks.push_back({start, i, acc, false, 0});
      chunks.push_back({i, i + 1, kl, true, 0});
      start = i + 1;
      acc = 0;
      continue;
    }
    if (acc + kl > kl_target_bits && i > start) {
      chunks.push_back({start, i, acc, false, 0});
      start = i;
      acc = 0;
    }
    acc += kl;
  }
  if (start < dim) chunks.push_back({start, dim, acc, false, 0});
  return chunks;
}

std::vector<RccChunk> chunk(const Gaussian& q, const Gaussian& p,
                            double kl_target_bits) {
  const Eigen::VectorXd bits = kl_nats_per_dim(q, p) / std::numbers::ln2;
  auto chunks = chunk_by_kl(bits, kl_target_bits);
  for (auto& c : chunks) {
    c.kl_bits = kl_bits(q.segment(c.start, c.size()), p.segment(c.start, c.size()));
  }
  return chunks;
}

Eigen::Index ChunkLayout::expanded_dim() const {
  Eigen::Index n = 0;
  for (int k : pieces) n += k;
  return n;
}

Gaussian expand_pieces(const Gaussian& g, const std::vector<int>& pieces) {
  if (static_cast<Eigen::Index>(pieces.size()) != g.dim()) {
    throw std::invalid_argument("expand_pieces: one entry per dimension required");
  }
  Eigen::Index n = 0;
  for (int k : pieces) {
    if (k < 1 || k > kMaxPieces) throw std::invalid_argument("expand_pieces: bad count");
    n += k;
  }
  Eigen::VectorXd mean(n), var(n);
  Eigen::Index at = 0;
  for (Eigen::Index i = 0; i < g.dim(); ++i) {
    const int k = pieces[i];
    mean.segment(at, k).setConstant(g.mean()[i] / k);
    var.segment(at, k).setConstant(g.variance()[i] / k);
    at += k;
  }
  return Gaussian(std::move(mean), std::move(var));
}

Eigen::VectorXd collapse_pieces(const Eigen::VectorXd& parts,
                                const std::vector<int>& pieces) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(pieces.size()));
  Eigen::Index at = 0;
  for (size_t i = 0; i < pieces.size(); ++i) {
    double sum = 0;
    for (int j = 0; j < pieces[i]; ++j) sum += parts[at++];
    out[static_cast<Eigen::Index>(i)] = sum;
  }
  if (at != parts.size()) {
    throw std::invalid_argument("collapse_pieces: length mismatch");
  }
  return out;
}

ChunkLayout split_and_chunk(const Eigen::VectorXd& per_dim_bits,
                            double kl_target_bits) {
  if (!(kl_target_bits > 0.0)) {
    throw std::invalid_argument("chunk: kl_target_bits must be positive");
  }
  ChunkLayout layout;
  layout.pieces.resize(static_cast<size_t>(per_dim_bits.size()));
  std::vector<double> expanded;
  for (Eigen::Index i = 0; i < per_dim_bits.size(); ++i) {
    const double b = per_dim_bits[i];
    const double k = b > kl_target_bits ? std::ceil(b / kl_target_bits) : 1.0;
    const int pieces = static_cast<int>(std::min<double>(k, kMaxPieces));
    layout.pieces[static_cast<size_t>(i)] = pieces;
    for (int j = 0; j < pieces; ++j) expanded.push_back(b / pieces);
  }
  layout.chunks = chunk_by_kl(
      Eigen::Map<const Eigen::VectorXd>(expanded.data(),
                                        static_cast<Eigen::Index>(expanded.size())),
      kl_target_bits);
  return layout;
}

uint64_t chunk_stream_id(const Block256& key, uint64_t tile, uint64_t step,
                         uint64_t ordinal) {
  return keyed_hash(key, tile, step, ordinal, 0x43484e4bULL);
}

}  // namespace dualrcc
