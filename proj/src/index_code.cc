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

#include "dualrcc/index_code.h"

#include <bit>
#include <stdexcept>

#include "dualrcc/errors.h"

namespace dualrcc {
namespace {

constexpr int kMaxBucketWidth = 6;

int bucket_of(uint64_t n) { return std::bit_width(n) - 1; }

int gamma_length(uint64_t v) { return 2 * std::bit_width(v) - 1; }

}  // namespace

int index_bucket_width(double kl_bits_hint) {
  const double h = kl_bits_hint > 0.0 ? kl_bits_hint : 0.0;
  int k = 1;
  // Comparisons only, so both sides agree bit-for-bit on k.
  while (k < kMaxBucketWidth && static_cast<double>(uint64_t{1} << k) <= h + 1.0) {
    ++k;
  }
  return k;
}

int index_code_length(uint64_t n, double kl_bits_hint) {
  if (n < 1) throw std::invalid_argument("index code: n must be >= 1");
  const int k = index_bucket_width(kl_bits_hint);
  const uint64_t escape = (uint64_t{1} << k) - 1;
  const int b = bucket_of(n);
  int length = k + b;
  if (static_cast<uint64_t>(b) >= escape) {
    length += gamma_length(static_cast<uint64_t>(b) - escape + 1);
  }
  return length;
}

int encode_index(uint64_t n, double kl_bits_hint, BitWriter& writer) {
  if (n < 1) throw std::invalid_argument("encode_index: n must be >= 1");
  const size_t start = writer.bit_count();
  const int k = index_bucket_width(kl_bits_hint);
  const uint64_t escape = (uint64_t{1} << k) - 1;
  const int b = bucket_of(n);
  if (static_cast<uint64_t>(b) < escape) {
    writer.write(static_cast<uint64_t>(b), k);
  } else {
    writer.write(escape, k);
    const uint64_t v = static_cast<uint64_t>(b) - escape + 1;
    const int width = std::bit_width(v);
    writer.write(0, width - 1);
    writer.write(v, width);
  }
  writer.write(n - (uint64_t{1} << b), b);
  return static_cast<int>(writer.bit_count() - start);
}

uint64_t decode_index(BitReader& reader, double kl_bits_hint) {
  const int k = index_bucket_width(kl_bits_hint);
  const uint64_t escape = (uint64_t{1} << k) - 1;
  uint64_t b = reader.read(k);
  if (b == escape) {
    const size_t start = reader.position();
    int zeros = 0;
    while (!reader.read_bit()) {
      if (++zeros > 6) {
        throw CodecError(ErrorKind::kCorrupt, "index code: gamma too long",
                         start);
      }
    }
    const uint64_t v = (uint64_t{1} << zeros) | reader.read(zeros);
    b = v - 1 + escape;
  }
  if (b > 63) {
    throw CodecError(ErrorKind::kCorrupt, "index code: bucket out of range",
                     reader.position());
  }
  return (uint64_t{1} << b) | reader.read(static_cast<int>(b));
}

void write_gamma(BitWriter& writer, uint64_t v) {
  if (v < 1) throw std::invalid_argument("write_gamma: v must be >= 1");
  const int width = std::bit_width(v);
  writer.write(0, width - 1);
  writer.write(v, width);
}

uint64_t read_gamma(BitReader& reader, int max_bits) {
  const size_t start = reader.position();
  int zeros = 0;
  while (!reader.read_bit()) {
    if (++zeros >= max_bits) {
      throw CodecError(ErrorKind::kCorrupt, "gamma code too long", start);
    }
  }
  return (uint64_t{1} << zeros) | reader.read(zeros);
}

}  // namespace dualrcc
