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

#ifndef DUALRCC_EXPLICIT_BRANCH_H_
#define DUALRCC_EXPLICIT_BRANCH_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "dualrcc/bit_io.h"

namespace dualrcc {

// Ordered list of N >= 2 distinct tag strings. The id is a 64-bit FNV-1a hash
// of the entries joined by '\n'.
class TagVocabulary {
 public:
  explicit TagVocabulary(std::vector<std::string> entries);

  // Newline-delimited, one entry per line; blank lines are ignored and a
  // trailing '\r' is stripped.
  static TagVocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  size_t size() const { return entries_.size(); }
  const std::string& entry(size_t i) const { return entries_.at(i); }
  const std::vector<std::string>& entries() const { return entries_; }
  uint64_t id() const { return id_; }
  // Index of `tag`, or -1.
  int index_of(const std::string& tag) const;
  // ceil(log2 N)
  int code_width() const;

 private:
  std::vector<std::string> entries_;
  std::unordered_map<std::string, int> index_;
  uint64_t id_ = 0;
};

int tag_code_width(size_t vocab_size);

struct TagPrompt {
  std::vector<int> indices;
  bool operator==(const TagPrompt&) const = default;
};

inline constexpr size_t kMaxPromptTags = 255;

// Writes an 8-bit count K followed by K fixed-length codes of
// ceil(log2 N) bits. Returns 8 + K ceil(log2 N).
size_t tag_encode(const TagPrompt& prompt, size_t vocab_size, BitWriter& writer);
size_t tag_encode(const TagPrompt& prompt, const TagVocabulary& vocab,
                  BitWriter& writer);
TagPrompt tag_decode(BitReader& reader, size_t vocab_size);
TagPrompt tag_decode(BitReader& reader, const TagVocabulary& vocab);

// True when the prompt repeats an index (reported by inspect).
bool has_duplicate_tags(const TagPrompt& prompt);

inline constexpr int32_t kLatentAlphabetBound = 1 << 15;

struct QuantizedLatent {
  Eigen::MatrixXi values;
  double step = 1.0;

  Eigen::MatrixXd dequantize() const { return values.cast<double>() * step; }
};

// Round-to-nearest (ties to even) scalar quantization of y with step `step`.
QuantizedLatent quantize(const Eigen::MatrixXd& y, double step);

struct LatentEncodeResult {
  QuantizedLatent latent;
  size_t bits = 0;
};

// Quantizes y and writes: u16 rows, u16 cols, f32 step, u16 theta, then the
// range-coded indices under a static two-sided geometric model. The writer
// must be byte aligned. Indices beyond +-2^15 raise CodecError(kOverflow).
LatentEncodeResult latent_encode(const Eigen::MatrixXd& y, double step,
                                 BitWriter& writer);
// Writes an already quantized grid.
size_t latent_encode_indices(const QuantizedLatent& latent, BitWriter& writer);

// Reads one latent section body and verifies the range-coded bytes are the
// canonical encoding of the decoded indices.
QuantizedLatent latent_decode_indices(BitReader& reader);
Eigen::MatrixXd latent_decode(BitReader& reader);

}  // namespace dualrcc

#endif  // DUALRCC_EXPLICIT_BRANCH_H_
