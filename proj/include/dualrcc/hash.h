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

#ifndef DUALRCC_HASH_H_
#define DUALRCC_HASH_H_

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>

#include <Eigen/Dense>

namespace dualrcc {

// 64-bit FNV-1a. Doubles are hashed by bit pattern.
class Fnv1a {
 public:
  Fnv1a& bytes(std::span<const uint8_t> data) {
    for (uint8_t c : data) {
      h_ ^= c;
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& str(std::string_view s) {
    for (unsigned char c : s) {
      h_ ^= c;
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xFF;
      h_ *= 0x100000001b3ULL;
    }
    return *this;
  }
  Fnv1a& f64(double v) { return u64(std::bit_cast<uint64_t>(v)); }
  template <typename Derived>
  Fnv1a& matrix(const Eigen::DenseBase<Derived>& m) {
    u64(static_cast<uint64_t>(m.rows())).u64(static_cast<uint64_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if constexpr (std::is_floating_point_v<typename Derived::Scalar>) {
          f64(static_cast<double>(m(i, j)));
        } else {
          u64(static_cast<uint64_t>(static_cast<int64_t>(m(i, j))));
        }
      }
    }
    return *this;
  }
  uint64_t value() const { return h_; }

 private:
  uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace dualrcc

#endif  // DUALRCC_HASH_H_
