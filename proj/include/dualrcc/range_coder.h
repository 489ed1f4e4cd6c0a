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

#ifndef DUALRCC_RANGE_CODER_H_
#define DUALRCC_RANGE_CODER_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace dualrcc {

// Carry-propagating range coder with a 32-bit range (LZMA-style low/cache
// handling). Frequencies are given against a total of 2^kTotalBits.
class RangeEncoder {
 public:
  static constexpr int kTotalBits = 16;

  void encode(uint32_t start, uint32_t size);
  // Equiprobable bits, most significant first.
  void encode_bits(uint32_t value, int count);
  std::vector<uint8_t> finish();

 private:
  void shift_low();
  void normalize();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> data);

  // Cumulative frequency of the next symbol; follow with consume().
  uint32_t peek();
  void consume(uint32_t start, uint32_t size);
  uint32_t decode_bits(int count);

  size_t bytes_consumed() const { return pos_; }

 private:
  uint8_t next_byte();
  void normalize();

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
  uint32_t step_ = 0;
};

// Static two-sided geometric law P(v) ~ theta^|v| over integers, quantized to
// 16-bit frequencies. Magnitudes of kEscape and above are sent as an escape
// class followed by an Elias-gamma suffix in bypass bits; nonzero values
// carry one bypass sign bit.
class TwoSidedGeometricModel {
 public:
  static constexpr int kClasses = 32;
  static constexpr int kEscape = kClasses - 1;

  explicit TwoSidedGeometricModel(uint16_t theta_q16);

  double theta() const { return theta_; }
  uint16_t theta_q16() const { return theta_q16_; }

  void encode(int32_t value, RangeEncoder& enc) const;
  int32_t decode(RangeDecoder& dec) const;

  // Exact entropy of the continuous law in bits per symbol.
  static double entropy_bits(double theta);
  // Maximum-likelihood theta for the given values, quantized to 16 bits.
  static uint16_t estimate_theta_q16(std::span<const int32_t> values);

 private:
  double theta_;
  uint16_t theta_q16_;
  std::array<uint32_t, kClasses + 1> cumulative_{};
};

}  // namespace dualrcc

#endif  // DUALRCC_RANGE_CODER_H_
