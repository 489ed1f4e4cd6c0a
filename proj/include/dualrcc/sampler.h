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

#ifndef DUALRCC_SAMPLER_H_
#define DUALRCC_SAMPLER_H_

#include <array>
#include <bit>
#include <cstdint>

namespace dualrcc {

using Block256 = std::array<uint64_t, 4>;

namespace internal {

constexpr uint64_t kSkeinParity = 0x1BD11BDAA9FC1A22ULL;
constexpr int kRotations[8][2] = {{14, 16}, {52, 57}, {23, 40}, {5, 37},
                                  {25, 33}, {46, 12}, {58, 22}, {32, 32}};

template <int R0, int R1>
inline void mix_even(uint64_t& x0, uint64_t& x1, uint64_t& x2, uint64_t& x3) {
  x0 += x1; x1 = std::rotl(x1, R0); x1 ^= x0;
  x2 += x3; x3 = std::rotl(x3, R1); x3 ^= x2;
}

template <int R0, int R1>
inline void mix_odd(uint64_t& x0, uint64_t& x1, uint64_t& x2, uint64_t& x3) {
  x0 += x3; x3 = std::rotl(x3, R0); x3 ^= x0;
  x2 += x1; x1 = std::rotl(x1, R1); x1 ^= x2;
}

// Four rounds with rotation set A (rounds 0-3 mod 8) or B (4-7), then the
// key injection numbered s.
template <bool kSetA>
inline void four_rounds(uint64_t& x0, uint64_t& x1, uint64_t& x2, uint64_t& x3,
                        const uint64_t* ks, uint64_t s) {
  if constexpr (kSetA) {
    mix_even<kRotations[0][0], kRotations[0][1]>(x0, x1, x2, x3);
    mix_odd<kRotations[1][0], kRotations[1][1]>(x0, x1, x2, x3);
    mix_even<kRotations[2][0], kRotations[2][1]>(x0, x1, x2, x3);
    mix_odd<kRotations[3][0], kRotations[3][1]>(x0, x1, x2, x3);
  } else {
    mix_even<kRotations[4][0], kRotations[4][1]>(x0, x1, x2, x3);
    mix_odd<kRotations[5][0], kRotations[5][1]>(x0, x1, x2, x3);
    mix_even<kRotations[6][0], kRotations[6][1]>(x0, x1, x2, x3);
    mix_odd<kRotations[7][0], kRotations[7][1]>(x0, x1, x2, x3);
  }
  x0 += ks[s % 5];
  x1 += ks[(s + 1) % 5];
  x2 += ks[(s + 2) % 5];
  x3 += ks[(s + 3) % 5] + s;
}

}  // namespace internal

// Threefry-4x64 with 20 rounds (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3"). Pure function of (key, counter).
inline Block256 threefry4x64(const Block256& key, const Block256& counter) {
  const uint64_t ks[5] = {key[0], key[1], key[2], key[3],
                          internal::kSkeinParity ^ key[0] ^ key[1] ^ key[2] ^ key[3]};
  uint64_t x0 = counter[0] + ks[0];
  uint64_t x1 = counter[1] + ks[1];
  uint64_t x2 = counter[2] + ks[2];
  uint64_t x3 = counter[3] + ks[3];
  internal::four_rounds<true>(x0, x1, x2, x3, ks, 1);
  internal::four_rounds<false>(x0, x1, x2, x3, ks, 2);
  internal::four_rounds<true>(x0, x1, x2, x3, ks, 3);
  internal::four_rounds<false>(x0, x1, x2, x3, ks, 4);
  internal::four_rounds<true>(x0, x1, x2, x3, ks, 5);
  return {x0, x1, x2, x3};
}

// Expands a 64-bit seed into a 256-bit generator key with SplitMix64.
Block256 expand_seed(uint64_t seed);

// Maps a 64-bit word to a uniform variate in the open interval (0, 1):
// u = (floor(w / 2^12) + 1/2) * 2^-52, so both endpoints stay representable.
double uniform_open(uint64_t word);

// Standard normal quantile of the uniform carried by `word`. Uses the
// rational approximation AS241 (PPND16) on the 53-bit mantissa; the upper
// tail is evaluated from the exact complement so both tails keep full
// relative precision.
double normal_from_word(uint64_t word);

// Standard normal quantile Phi^{-1}(p) for p in (0, 1) (AS241).
double normal_quantile(double p);

// Sub-streams sharing a stream id. Candidates and arrival times of the
// Poisson process draw from disjoint counter domains.
enum class Domain : uint64_t {
  kCandidate = 0,
  kArrival = 1,
  kFree = 2,
};

// Counter-based generator addressed by (key, stream_id, counter). Value-like:
// copying is cheap and no call mutates shared state.
class DeterministicSampler {
 public:
  DeterministicSampler() = default;
  DeterministicSampler(const Block256& key, uint64_t stream_id)
      : key_(key), stream_id_(stream_id) {}

  const Block256& key() const { return key_; }
  uint64_t stream_id() const { return stream_id_; }

  // Four 64-bit words for (counter, lane block) in the given domain.
  Block256 words(uint64_t counter, uint64_t lane_block,
                 Domain domain = Domain::kCandidate) const {
    return threefry4x64(key_, {counter, lane_block, stream_id_,
                               static_cast<uint64_t>(domain)});
  }

  // Single word at (counter, lane); lanes are packed four per block.
  uint64_t word(uint64_t counter, uint64_t lane,
                Domain domain = Domain::kCandidate) const {
    return words(counter, lane / 4, domain)[lane % 4];
  }

  double uniform(uint64_t counter, uint64_t lane,
                 Domain domain = Domain::kCandidate) const {
    return uniform_open(word(counter, lane, domain));
  }

  double normal(uint64_t counter, uint64_t lane,
                Domain domain = Domain::kCandidate) const {
    return normal_from_word(word(counter, lane, domain));
  }

  // expon(n, 1) of the Poisson process: -ln U on the arrival domain.
  double exponential(uint64_t n) const;

 private:
  Block256 key_{};
  uint64_t stream_id_ = 0;
};

// 64-bit keyed hash of up to four words, used to derive stream ids.
uint64_t keyed_hash(const Block256& key, uint64_t a, uint64_t b, uint64_t c,
                    uint64_t d);

}  // namespace dualrcc

#endif  // DUALRCC_SAMPLER_H_
