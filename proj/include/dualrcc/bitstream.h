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

#ifndef DUALRCC_BITSTREAM_H_
#define DUALRCC_BITSTREAM_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dualrcc/bit_io.h"

namespace dualrcc {

inline constexpr uint8_t kFormatVersion = 1;
inline constexpr char kMagic[4] = {'D', 'R', 'C', '1'};

enum class SectionTag : uint8_t {
  kTags = 0x01,
  kLatent = 0x02,
  kRccStep = 0x10,
  kRccStepRechunked = 0x11,  // per-tile explicit layout, half the header target
  kTail = 0x12,              // quantized residual after a full chain
  kTrailer = 0x7F,           // non-normative content hash
};
const char* section_name(uint8_t tag);

// Section framing: tag byte + u32 LE payload bit count.
inline constexpr size_t kSectionFramingBits = 40;

struct StreamHeader {
  uint8_t version = kFormatVersion;
  uint16_t schedule = 0;        // registry index
  uint16_t steps = 0;           // T
  uint16_t coded_steps = 0;     // T_E
  std::vector<bool> skipped;    // T entries; entry k refers to state z_{T-k}
  uint8_t tau_q8 = 255;         // tau = tau_q8 / 255
  uint64_t seed = 0;
  uint16_t tile_size = 16;
  uint16_t overlap = 8;
  uint16_t tag_cap = 16;
  uint16_t sigma_q16 = 19661;   // sigma_fraction * 65536
  uint64_t vocab_hash = 0;
  uint16_t rows = 0;            // latent shape
  uint16_t cols = 0;
  uint16_t kl_target_q8 = 12 * 256;
  uint16_t skip_threshold_q12 = 205;
  uint64_t model_hash = 0;
  uint32_t vocab_size = 0;

  bool operator==(const StreamHeader&) const = default;
};

// Header size in bits for a chain of `steps` timesteps (always whole bytes).
size_t header_bits(uint16_t steps);
void write_header(const StreamHeader& h, BitWriter& w);
// Throws CodecError: kCorrupt on bad magic or inconsistent fields,
// kVersionMismatch on an unknown version, kTruncated on short input.
StreamHeader read_header(BitReader& r);

struct Section {
  uint8_t tag = 0;
  size_t offset_bits = 0;   // position of the tag byte in the stream
  size_t payload_bits = 0;
  std::span<const uint8_t> payload;

  BitReader reader() const { return BitReader(payload, payload_bits); }
  size_t total_bits() const { return kSectionFramingBits + payload.size() * 8; }
};

// Appends a byte-aligned section holding the bits of `payload`.
void write_section(uint8_t tag, const BitWriter& payload, BitWriter& out);
// Reads one section at the (aligned) reader position. The payload span
// points into `data`.
Section read_section(BitReader& r, std::span<const uint8_t> data);

struct ParsedStream {
  StreamHeader header;
  size_t header_bits = 0;
  std::vector<Section> sections;
};

// Parses the full container and checks section order:
// tags, latent, RCC steps, optional tail, optional trailer.
ParsedStream parse_stream(std::span<const uint8_t> data);

}  // namespace dualrcc

#endif  // DUALRCC_BITSTREAM_H_
