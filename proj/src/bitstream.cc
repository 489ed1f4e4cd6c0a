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

#include "dualrcc/bitstream.h"

#include <limits>

#include "dualrcc/errors.h"

namespace dualrcc {

const char* section_name(uint8_t tag) {
  switch (static_cast<SectionTag>(tag)) {
    case SectionTag::kTags: return "tags";
    case SectionTag::kLatent: return "latent";
    case SectionTag::kRccStep: return "rcc-step";
    case SectionTag::kRccStepRechunked: return "rcc-step-rechunked";
    case SectionTag::kTail: return "tail";
    case SectionTag::kTrailer: return "trailer";
  }
  return "unknown";
}

size_t header_bits(uint16_t steps) {
  const size_t bitmap = (static_cast<size_t>(steps) + 7) / 8 * 8;
  return 32 + 8 + 16 * 3 + bitmap + 8 + 64 + 16 * 4 + 64 + 16 * 2 + 16 * 2 + 64 +
         32;
}

void write_header(const StreamHeader& h, BitWriter& w) {
  if (h.skipped.size() != h.steps) {
    throw std::invalid_argument("write_header: skip bitmap must have T entries");
  }
  for (char c : kMagic) w.write(static_cast<uint8_t>(c), 8);
  w.write(h.version, 8);
  w.write_u16le(h.schedule);
  w.write_u16le(h.steps);
  w.write_u16le(h.coded_steps);
  for (bool b : h.skipped) w.write_bit(b);
  w.align();
  w.write(h.tau_q8, 8);
  w.write_u64le(h.seed);
  w.write_u16le(h.tile_size);
  w.write_u16le(h.overlap);
  w.write_u16le(h.tag_cap);
  w.write_u16le(h.sigma_q16);
  w.write_u64le(h.vocab_hash);
  w.write_u16le(h.rows);
  w.write_u16le(h.cols);
  w.write_u16le(h.kl_target_q8);
  w.write_u16le(h.skip_threshold_q12);
  w.write_u64le(h.model_hash);
  w.write_u32le(h.vocab_size);
}

StreamHeader read_header(BitReader& r) {
  const size_t start = r.position();
  for (char c : kMagic) {
    if (r.read(8) != static_cast<uint8_t>(c)) {
      throw CodecError(ErrorKind::kCorrupt, "bad magic", start);
    }
  }
  StreamHeader h;
  h.version = static_cast<uint8_t>(r.read(8));
  if (h.version != kFormatVersion) {
    throw CodecError(ErrorKind::kVersionMismatch,
                     "unsupported version " + std::to_string(h.version), start + 32);
  }
  h.schedule = r.read_u16le();
  h.steps = r.read_u16le();
  h.coded_steps = r.read_u16le();
  if (h.steps == 0 || h.coded_steps > h.steps) {
    throw CodecError(ErrorKind::kCorrupt, "inconsistent T / T_E", start + 56);
  }
  const size_t bitmap_at = r.position();
  h.skipped.resize(h.steps);
  for (size_t k = 0; k < h.steps; ++k) {
    h.skipped[k] = r.read_bit();
    if (h.skipped[k] && k >= h.coded_steps) {
      throw CodecError(ErrorKind::kCorrupt, "skip flag on an uncoded step",
                       bitmap_at + k);
    }
  }
  r.align();
  h.tau_q8 = static_cast<uint8_t>(r.read(8));
  h.seed = r.read_u64le();
  h.tile_size = r.read_u16le();
  h.overlap = r.read_u16le();
  h.tag_cap = r.read_u16le();
  h.sigma_q16 = r.read_u16le();
  h.vocab_hash = r.read_u64le();
  h.rows = r.read_u16le();
  h.cols = r.read_u16le();
  h.kl_target_q8 = r.read_u16le();
  h.skip_threshold_q12 = r.read_u16le();
  h.model_hash = r.read_u64le();
  h.vocab_size = r.read_u32le();
  if (h.tile_size == 0 || h.overlap >= h.tile_size || h.sigma_q16 == 0 ||
      h.rows == 0 || h.cols == 0 || h.kl_target_q8 == 0 || h.tag_cap > 255) {
    throw CodecError(ErrorKind::kCorrupt, "invalid header field values", start);
  }
  return h;
}

void write_section(uint8_t tag, const BitWriter& payload, BitWriter& out) {
  if (payload.bit_count() > std::numeric_limits<uint32_t>::max()) {
    throw CodecError(ErrorKind::kOverflow, "section payload too long");
  }
  out.align();
  out.write(tag, 8);
  out.write_u32le(static_cast<uint32_t>(payload.bit_count()));
  out.write_bytes(payload.bytes());
}

Section read_section(BitReader& r, std::span<const uint8_t> data) {
  Section s;
  r.align();
  s.offset_bits = r.position();
  s.tag = static_cast<uint8_t>(r.read(8));
  if (std::string(section_name(s.tag)) == "unknown") {
    throw CodecError(ErrorKind::kCorrupt, "unknown section tag " + std::to_string(s.tag),
                     s.offset_bits);
  }
  s.payload_bits = r.read_u32le();
  const size_t bytes = (s.payload_bits + 7) / 8;
  if (r.remaining() < bytes * 8) {
    throw CodecError(ErrorKind::kTruncated, "section payload truncated", s.offset_bits);
  }
  const size_t first = r.position() / 8;
  s.payload = data.subspan(first, bytes);
  // Padding inside the last payload byte must be zero.
  const size_t pad = bytes * 8 - s.payload_bits;
  if (pad > 0 && (s.payload.back() & ((1u << pad) - 1)) != 0) {
    throw CodecError(ErrorKind::kCorrupt, "nonzero section padding",
                     r.position() + s.payload_bits);
  }
  for (size_t i = 0; i < bytes; ++i) r.read(8);
  return s;
}

ParsedStream parse_stream(std::span<const uint8_t> data) {
  BitReader r(data);
  ParsedStream out;
  out.header = read_header(r);
  out.header_bits = r.position();
  // Order rank: tags 0, latent 1, steps 2, tail 3, trailer 4.
  auto rank = [](uint8_t tag) {
    switch (static_cast<SectionTag>(tag)) {
      case SectionTag::kTags: return 0;
      case SectionTag::kLatent: return 1;
      case SectionTag::kRccStep:
      case SectionTag::kRccStepRechunked: return 2;
      case SectionTag::kTail: return 3;
      case SectionTag::kTrailer: return 4;
    }
    return 5;
  };
  int last = -1;
  while (!r.at_end()) {
    Section s = read_section(r, data);
    const int k = rank(s.tag);
    const bool repeatable = k == 2;
    if (k < last || (k == last && !repeatable) || (last < 1 && k != last + 1)) {
      throw CodecError(ErrorKind::kCorrupt,
                       std::string("section '") + section_name(s.tag) + "' out of order",
                       s.offset_bits);
    }
    last = k;
    out.sections.push_back(s);
  }
  if (last < 1) {
    throw CodecError(ErrorKind::kTruncated, "missing mandatory sections", r.position());
  }
  return out;
}

}  // namespace dualrcc
