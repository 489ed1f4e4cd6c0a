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

#include "dualrcc/bit_io.h"

#include <stdexcept>
#include <string>

#include "dualrcc/errors.h"

namespace dualrcc {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kCorrupt: return "corrupt";
    case ErrorKind::kVersionMismatch: return "version-mismatch";
    case ErrorKind::kVocabularyMismatch: return "vocabulary-mismatch";
    case ErrorKind::kModelMismatch: return "model-mismatch";
    case ErrorKind::kUnknownSchedule: return "unknown-schedule";
    case ErrorKind::kCapExceeded: return "cap-exceeded";
    case ErrorKind::kOverflow: return "overflow";
  }
  return "unknown";
}

void BitWriter::write(uint64_t value, int count) {
  if (count < 0 || count > 64) {
    throw std::invalid_argument("BitWriter::write: count out of range");
  }
  for (int i = count - 1; i >= 0; --i) {
    if (bits_ % 8 == 0) buffer_.push_back(0);
    if ((value >> i) & 1) buffer_.back() |= uint8_t(0x80u >> (bits_ % 8));
    ++bits_;
  }
}

void BitWriter::align() {
  bits_ = buffer_.size() * 8;
}

void BitWriter::write_bytes(std::span<const uint8_t> bytes) {
  if (bits_ % 8 == 0) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
    bits_ += bytes.size() * 8;
    return;
  }
  for (uint8_t b : bytes) write(b, 8);
}

void BitWriter::write_u16le(uint16_t v) {
  write(v & 0xFF, 8);
  write(v >> 8, 8);
}

void BitWriter::write_u32le(uint32_t v) {
  for (int i = 0; i < 4; ++i) write((v >> (8 * i)) & 0xFF, 8);
}

void BitWriter::write_u64le(uint64_t v) {
  for (int i = 0; i < 8; ++i) write((v >> (8 * i)) & 0xFF, 8);
}

uint64_t BitReader::read(int count) {
  if (count < 0 || count > 64) {
    throw std::invalid_argument("BitReader::read: count out of range");
  }
  if (static_cast<size_t>(count) > remaining()) {
    throw CodecError(ErrorKind::kTruncated,
                     "unexpected end of data reading " +
                         std::to_string(count) + " bits",
                     pos_);
  }
  uint64_t value = 0;
  for (int i = 0; i < count; ++i) {
    const uint8_t byte = data_[pos_ / 8];
    value = (value << 1) | ((byte >> (7 - pos_ % 8)) & 1);
    ++pos_;
  }
  return value;
}

void BitReader::align() {
  const size_t pad = (8 - pos_ % 8) % 8;
  if (pad > 0 && read(static_cast<int>(pad)) != 0) {
    throw CodecError(ErrorKind::kCorrupt, "nonzero padding bits", pos_ - pad);
  }
}

uint16_t BitReader::read_u16le() {
  const uint64_t lo = read(8);
  return static_cast<uint16_t>(lo | (read(8) << 8));
}

uint32_t BitReader::read_u32le() {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(read(8)) << (8 * i);
  return v;
}

uint64_t BitReader::read_u64le() {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= read(8) << (8 * i);
  return v;
}

}  // namespace dualrcc
