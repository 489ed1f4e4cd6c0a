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

#ifndef DUALRCC_INDEX_CODE_H_
#define DUALRCC_INDEX_CODE_H_

#include <cstdint>

#include "dualrcc/bit_io.h"

namespace dualrcc {

// Self-delimiting code for PFR indices n >= 1, tuned by a KL hint (bits)
// that encoder and decoder compute identically.
//
// The index is split into a log-bucket b = floor(log2 n) and b raw offset
// bits. Buckets 0 .. 2^k - 2 are sent in k bits, where k is the smallest
// k >= 1 with 2^k > hint + 1; larger buckets send the escape value 2^k - 1
// followed by an Elias-gamma code of b - (2^k - 1) + 1. The resulting length
// log2(n) + k approximates -log2 of a Zipf(1) law truncated near 2^(2^k),
// which is the shape of the PFR index distribution at that KL.
int index_bucket_width(double kl_bits_hint);

// Returns the number of bits written.
int encode_index(uint64_t n, double kl_bits_hint, BitWriter& writer);
uint64_t decode_index(BitReader& reader, double kl_bits_hint);

// Code length without writing.
int index_code_length(uint64_t n, double kl_bits_hint);

// Elias-gamma code of v >= 1. Decoding rejects values wider than max_bits.
void write_gamma(BitWriter& writer, uint64_t v);
uint64_t read_gamma(BitReader& reader, int max_bits = 63);

}  // namespace dualrcc

#endif  // DUALRCC_INDEX_CODE_H_
