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

#include "dualrcc/range_coder.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <string>

#include "dualrcc/errors.h"

namespace dualrcc {
namespace {

constexpr uint32_t kTop = 1u << 24;
constexpr uint32_t kTotal = 1u << RangeEncoder::kTotalBits;

}  // namespace

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t temp = cache_;
    do {
      out_.push_back(static_cast<uint8_t>(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::normalize() {
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode(uint32_t start, uint32_t size) {
  const uint32_t r = range_ >> kTotalBits;
  low_ += static_cast<uint64_t>(r) * start;
  range_ = r * size;
  normalize();
}

void RangeEncoder::encode_bits(uint32_t value, int count) {
  for (int i = count - 1; i >= 0; --i) {
    range_ >>= 1;
    if ((value >> i) & 1) low_ += range_;
    normalize();
  }
}

std::vector<uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> data) : data_(data) {
  for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (pos_ >= data_.size()) {
    throw CodecError(ErrorKind::kTruncated, "range decoder ran out of data",
                     pos_ * 8);
  }
  return data_[pos_++];
}

void RangeDecoder::normalize() {
  while (range_ < kTop) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
}

uint32_t RangeDecoder::peek() {
  step_ = range_ >> RangeEncoder::kTotalBits;
  const uint32_t value = code_ / step_;
  if (value >= kTotal) {
    throw CodecError(ErrorKind::kCorrupt, "range decoder state out of range",
                     pos_ * 8);
  }
  return value;
}

void RangeDecoder::consume(uint32_t start, uint32_t size) {
  code_ -= step_ * start;
  range_ = step_ * size;
  normalize();
}

uint32_t RangeDecoder::decode_bits(int count) {
  uint32_t value = 0;
  for (int i = 0; i < count; ++i) {
    range_ >>= 1;
    uint32_t bit = 0;
    if (code_ >= range_) {
      code_ -= range_;
      bit = 1;
    }
    value = (value << 1) | bit;
    normalize();
  }
  return value;
}

TwoSidedGeometricModel::TwoSidedGeometricModel(uint16_t theta_q16)
    : theta_(theta_q16 / 65535.0), theta_q16_(theta_q16) {
  // Class probabilities of |v|: P(0) = (1-t)/(1+t), P(m) = 2 P(0) t^m, and the
  // escape class takes the remaining tail 2 t^kEscape / (1+t).
  const double p0 = (1.0 - theta_) / (1.0 + theta_);
  std::array<uint32_t, kClasses> freq{};
  const uint32_t budget = kTotal - kClasses;
  double power = 1.0;
  uint32_t used = 0;
  for (int m = 0; m < kClasses; ++m) {
    double p;
    if (m == 0) {
      p = p0;
    } else if (m < kEscape) {
      p = 2.0 * p0 * power;
    } else {
      p = 2.0 * power / (1.0 + theta_);
    }
    freq[m] = 1 + static_cast<uint32_t>(std::floor(p * budget));
    used += freq[m];
    power *= theta_;
  }
  // Rounding slack goes to the most probable class.
  if (used > kTotal) used = kTotal;
  freq[0] += kTotal - used;
  cumulative_[0] = 0;
  for (int m = 0; m < kClasses; ++m) cumulative_[m + 1] = cumulative_[m] + freq[m];
}

void TwoSidedGeometricModel::encode(int32_t value, RangeEncoder& enc) const {
  const uint32_t mag = static_cast<uint32_t>(std::abs(value));
  const int cls = mag < static_cast<uint32_t>(kEscape) ? static_cast<int>(mag) : kEscape;
  enc.encode(cumulative_[cls], cumulative_[cls + 1] - cumulative_[cls]);
  if (cls == kEscape) {
    const uint32_t v = mag - kEscape + 1;
    const int width = std::bit_width(v);
    enc.encode_bits(0, width - 1);
    enc.encode_bits(v, width);
  }
  if (mag != 0) enc.encode_bits(value < 0 ? 1u : 0u, 1);
}

int32_t TwoSidedGeometricModel::decode(RangeDecoder& dec) const {
  const uint32_t target = dec.peek();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  const int cls = static_cast<int>(it - cumulative_.begin()) - 1;
  dec.consume(cumulative_[cls], cumulative_[cls + 1] - cumulative_[cls]);
  uint32_t mag = static_cast<uint32_t>(cls);
  if (cls == kEscape) {
    int zeros = 0;
    while (dec.decode_bits(1) == 0) {
      if (++zeros > 20) {
        throw CodecError(ErrorKind::kCorrupt, "geometric escape too long");
      }
    }
    const uint32_t v = (1u << zeros) | dec.decode_bits(zeros);
    mag = v + kEscape - 1;
  }
  if (mag == 0) return 0;
  return dec.decode_bits(1) ? -static_cast<int32_t>(mag) : static_cast<int32_t>(mag);
}

double TwoSidedGeometricModel::entropy_bits(double theta) {
  if (theta <= 0.0) return 0.0;
  // P(v) = c t^|v| with c = (1-t)/(1+t); E|v| = 2t / (1 - t^2).
  const double c = (1.0 - theta) / (1.0 + theta);
  const double mean_abs = 2.0 * theta / (1.0 - theta * theta);
  return -(std::log2(c) + mean_abs * std::log2(theta));
}

uint16_t TwoSidedGeometricModel::estimate_theta_q16(
    std::span<const int32_t> values) {
  if (values.empty()) return 0;
  double sum = 0;
  for (int32_t v : values) sum += std::abs(static_cast<double>(v));
  const double m = sum / static_cast<double>(values.size());
  if (m <= 0.0) return 0;
  const double theta = (std::sqrt(1.0 + m * m) - 1.0) / m;
  return static_cast<uint16_t>(std::clamp(std::nearbyint(theta * 65535.0), 0.0, 65535.0));
}

}  // namespace dualrcc
