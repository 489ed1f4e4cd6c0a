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

#include "dualrcc/explicit_branch.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include "dualrcc/errors.h"
#include "dualrcc/hash.h"
#include "dualrcc/range_coder.h"

namespace dualrcc {
namespace {

void write_f32(BitWriter& writer, double value) {
  const float f = static_cast<float>(value);
  uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  writer.write_u32le(bits);
}

double read_f32(BitReader& reader) {
  const uint32_t bits = reader.read_u32le();
  float f;
  std::memcpy(&f, &bits, sizeof(f));
  return f;
}

std::vector<uint8_t> range_code(const QuantizedLatent& latent,
                                const TwoSidedGeometricModel& model) {
  RangeEncoder enc;
  // Column-major to match Eigen storage; order is part of the format.
  for (Eigen::Index i = 0; i < latent.values.size(); ++i) {
    model.encode(latent.values.data()[i], enc);
  }
  return enc.finish();
}

}  // namespace

TagVocabulary::TagVocabulary(std::vector<std::string> entries)
    : entries_(std::move(entries)) {
  if (entries_.size() < 2) {
    throw std::invalid_argument("TagVocabulary: need at least 2 entries");
  }
  std::string joined;
  for (size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i], static_cast<int>(i)).second) {
      throw std::invalid_argument("TagVocabulary: duplicate entry '" +
                                  entries_[i] + "'");
    }
    if (i > 0) joined += '\n';
    joined += entries_[i];
  }
  id_ = Fnv1a().str(joined).value();
}

TagVocabulary TagVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open vocabulary file " + path.string());
  }
  std::vector<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    entries.push_back(line);
  }
  return TagVocabulary(std::move(entries));
}

void TagVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  for (const auto& e : entries_) out << e << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

int TagVocabulary::index_of(const std::string& tag) const {
  const auto it = index_.find(tag);
  return it == index_.end() ? -1 : it->second;
}

int TagVocabulary::code_width() const { return tag_code_width(size()); }

int tag_code_width(size_t vocab_size) {
  if (vocab_size < 2) throw std::invalid_argument("vocabulary size must be >= 2");
  return std::bit_width(vocab_size - 1);
}

size_t tag_encode(const TagPrompt& prompt, size_t vocab_size, BitWriter& writer) {
  if (prompt.indices.size() > kMaxPromptTags) {
    throw std::invalid_argument("tag_encode: more than 255 tags");
  }
  const int width = tag_code_width(vocab_size);
  for (int idx : prompt.indices) {
    if (idx < 0 || static_cast<size_t>(idx) >= vocab_size) {
      throw std::invalid_argument("tag_encode: index " + std::to_string(idx) +
                                  " out of range");
    }
  }
  const size_t start = writer.bit_count();
  writer.write(prompt.indices.size(), 8);
  for (int idx : prompt.indices) writer.write(static_cast<uint64_t>(idx), width);
  return writer.bit_count() - start;
}

size_t tag_encode(const TagPrompt& prompt, const TagVocabulary& vocab,
                  BitWriter& writer) {
  return tag_encode(prompt, vocab.size(), writer);
}

TagPrompt tag_decode(BitReader& reader, size_t vocab_size) {
  const int width = tag_code_width(vocab_size);
  const size_t count = reader.read(8);
  TagPrompt prompt;
  prompt.indices.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    const size_t at = reader.position();
    const uint64_t idx = reader.read(width);
    if (idx >= vocab_size) {
      throw CodecError(ErrorKind::kCorrupt,
                       "tag index " + std::to_string(idx) + " >= vocabulary size",
                       at);
    }
    prompt.indices.push_back(static_cast<int>(idx));
  }
  return prompt;
}

TagPrompt tag_decode(BitReader& reader, const TagVocabulary& vocab) {
  return tag_decode(reader, vocab.size());
}

bool has_duplicate_tags(const TagPrompt& prompt) {
  std::set<int> seen(prompt.indices.begin(), prompt.indices.end());
  return seen.size() != prompt.indices.size();
}

QuantizedLatent quantize(const Eigen::MatrixXd& y, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("quantize: step must be > 0");
  QuantizedLatent q;
  q.step = step;
  q.values.resize(y.rows(), y.cols());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = std::nearbyint(y.data()[i] / step);
    if (!(std::fabs(r) <= kLatentAlphabetBound)) {
      throw CodecError(ErrorKind::kOverflow,
                       "latent index magnitude exceeds 2^15");
    }
    q.values.data()[i] = static_cast<int>(r);
  }
  return q;
}

size_t latent_encode_indices(const QuantizedLatent& latent, BitWriter& writer) {
  if (writer.bit_count() % 8 != 0) {
    throw std::invalid_argument("latent_encode: writer not byte aligned");
  }
  if (latent.values.rows() > 0xFFFF || latent.values.cols() > 0xFFFF) {
    throw std::invalid_argument("latent_encode: grid too large");
  }
  const size_t start = writer.bit_count();
  const std::span<const int32_t> flat(latent.values.data(),
                                      static_cast<size_t>(latent.values.size()));
  const TwoSidedGeometricModel model(TwoSidedGeometricModel::estimate_theta_q16(flat));
  writer.write_u16le(static_cast<uint16_t>(latent.values.rows()));
  writer.write_u16le(static_cast<uint16_t>(latent.values.cols()));
  write_f32(writer, latent.step);
  writer.write_u16le(model.theta_q16());
  writer.write_bytes(range_code(latent, model));
  return writer.bit_count() - start;
}

LatentEncodeResult latent_encode(const Eigen::MatrixXd& y, double step,
                                 BitWriter& writer) {
  if (static_cast<double>(static_cast<float>(step)) != step) {
    throw std::invalid_argument("latent_encode: step must be exact in float32");
  }
  LatentEncodeResult result;
  result.latent = quantize(y, step);
  result.bits = latent_encode_indices(result.latent, writer);
  return result;
}

QuantizedLatent latent_decode_indices(BitReader& reader) {
  const size_t section_start = reader.position();
  if (section_start % 8 != 0) {
    throw std::invalid_argument("latent_decode: reader not byte aligned");
  }
  QuantizedLatent latent;
  const int rows = reader.read_u16le();
  const int cols = reader.read_u16le();
  latent.step = read_f32(reader);
  if (!(latent.step > 0.0) || !std::isfinite(latent.step)) {
    throw CodecError(ErrorKind::kCorrupt, "latent step not positive", section_start);
  }
  const TwoSidedGeometricModel model(static_cast<uint16_t>(reader.read_u16le()));

  const size_t payload_bit = reader.position();
  const size_t avail = reader.remaining() / 8;
  std::vector<uint8_t> bytes(avail);
  {
    BitReader copy = reader;
    for (auto& b : bytes) b = static_cast<uint8_t>(copy.read(8));
  }
  latent.values.resize(rows, cols);
  RangeDecoder dec(bytes);
  for (Eigen::Index i = 0; i < latent.values.size(); ++i) {
    const int32_t v = model.decode(dec);
    if (std::abs(v) > kLatentAlphabetBound) {
      throw CodecError(ErrorKind::kCorrupt, "latent index out of alphabet",
                       payload_bit);
    }
    latent.values.data()[i] = v;
  }
  const std::vector<uint8_t> canonical = range_code(latent, model);
  if (canonical.size() > bytes.size() ||
      !std::equal(canonical.begin(), canonical.end(), bytes.begin())) {
    throw CodecError(ErrorKind::kCorrupt, "non-canonical latent coding",
                     payload_bit);
  }
  for (size_t i = 0; i < canonical.size(); ++i) reader.read(8);
  return latent;
}

Eigen::MatrixXd latent_decode(BitReader& reader) {
  return latent_decode_indices(reader).dequantize();
}

}  // namespace dualrcc
