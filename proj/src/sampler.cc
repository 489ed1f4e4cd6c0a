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

#include "dualrcc/sampler.h"

#include <bit>
#include <cmath>

namespace dualrcc {
namespace {

constexpr double kTwoPow52Inv = 0x1p-52;
constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

// Domain tag keeping stream-id hashing apart from sample generation.
constexpr uint64_t kHashDomain = 0x5354524541484153ULL;

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// AS241 central region, |q| <= 0.425.
double ppnd16_central(double q) {
  const double r = 0.180625 - q * q;
  return q *
         (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r +
               67265.770927008700853) * r + 45921.953931549871457) * r +
             13731.693765509461125) * r + 1971.5909503065514427) * r +
           133.14166789178437745) * r + 3.387132872796366608) /
         (((((((r * 5226.495278852545925 + 28729.085735721942674) * r +
               39307.89580009271061) * r + 21213.794301586595867) * r +
             5394.1960214247511077) * r + 687.1870074920579083) * r +
           42.313330701600911252) * r + 1.0);
}

// AS241 tail region; `tail` is min(p, 1 - p) > 0. Returns a positive value.
double ppnd16_tail(double tail) {
  double r = std::sqrt(-std::log(tail));
  if (r <= 5.0) {
    r -= 1.6;
    return (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) *
                      r + 0.24178072517745061177) * r +
                 1.27045825245236838258) * r + 3.64784832476320460504) * r +
               5.7694972214606914055) * r + 4.6303378461565452959) * r +
             1.42343711074968357734) /
           (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) *
                      r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r +
               1.6763848301838038494) * r + 2.05319162663775882187) * r +
             1.0);
  }
  r -= 5.0;
  return (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) *
                    r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r +
             1.7848265399172913358) * r + 5.4637849111641143699) * r +
           6.6579046435011037772) /
         (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) *
                    r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r +
             0.13692988092273580531) * r + 0.59983220655588793769) * r +
           1.0);
}

}  // namespace

Block256 expand_seed(uint64_t seed) {
  uint64_t state = seed;
  return {splitmix64(state), splitmix64(state), splitmix64(state),
          splitmix64(state)};
}

double uniform_open(uint64_t word) {
  return (static_cast<double>(word >> 12) + 0.5) * kTwoPow52Inv;
}

double normal_quantile(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) return ppnd16_central(q);
  const double value = ppnd16_tail(q < 0.0 ? p : 1.0 - p);
  return q < 0.0 ? -value : value;
}

double normal_from_word(uint64_t word) {
  const uint64_t mantissa = word >> 11;
  const double p = (static_cast<double>(mantissa) + 0.5) * kTwoPow53Inv;
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) return ppnd16_central(q);
  if (q < 0.0) return -ppnd16_tail(p);
  // 1 - p computed exactly from the complementary mantissa.
  const uint64_t complement = (uint64_t{1} << 53) - 1 - mantissa;
  return ppnd16_tail((static_cast<double>(complement) + 0.5) * kTwoPow53Inv);
}

double DeterministicSampler::exponential(uint64_t n) const {
  return -std::log(uniform(n / 4, n % 4, Domain::kArrival));
}

uint64_t keyed_hash(const Block256& key, uint64_t a, uint64_t b, uint64_t c,
                    uint64_t d) {
  Block256 hashed_key = key;
  hashed_key[3] ^= kHashDomain;
  return threefry4x64(hashed_key, {a, b, c, d})[0];
}

}  // namespace dualrcc
