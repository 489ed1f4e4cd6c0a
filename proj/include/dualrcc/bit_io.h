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

#ifndef DUALRCC_BIT_IO_H_
#define DUALRCC_BIT_IO_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dualrcc {

// MSB-first bit packer.
class BitWriter {
 public:
  // Appends the low `count` bits of `value`, most significant first.
  // count in [0, 64].
  void write(uint64_t value, int count);
  void write_bit(bool bit) { write(bit ? 1 : 0, 1); }
  // Pads with zero bits to the next byte boundary.
  void align();
  void write_bytes(std::span<const uint8_t> bytes);
  void write_u16le(uint16_t v);
  void write_u32le(uint32_t v);
  void write_u64le(uint64_t v);

  size_t bit_count() const { return bits_; }
  const std::vector<uint8_t>& bytes() const { return buffer_; }
  std::vector<uint8_t> take() { bits_ = 0; return std::move(buffer_); }

 private:
  std::vector<uint8_t> buffer_;
  size_t bits_ = 0;
};

// Reads what BitWriter wrote. Running past the end raises
// CodecError(kTruncated).
class BitReader {
 public:
  BitReader() = default;
  explicit BitReader(std::span<const uint8_t> data)
      : data_(data), limit_bits_(data.size() * 8) {}
  BitReader(std::span<const uint8_t> data, size_t limit_bits)
      : data_(data), limit_bits_(limit_bits) {}

  uint64_t read(int count);
  bool read_bit() { return read(1) != 0; }
  // Skips to the next byte boundary; the skipped bits must be zero.
  void align();
  uint16_t read_u16le();
  uint32_t read_u32le();
  uint64_t read_u64le();

  size_t position() const { return pos_; }
  size_t remaining() const { return limit_bits_ - pos_; }
  bool at_end() const { return pos_ == limit_bits_; }

 private:
  std::span<const uint8_t> data_;
  size_t limit_bits_ = 0;
  size_t pos_ = 0;
};

}  // namespace dualrcc

#endif  // DUALRCC_BIT_IO_H_
