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

#include "dualrcc/report.h"

#include <cstdio>
#include <regex>
#include <stdexcept>

#include "dualrcc/errors.h"
#include "dualrcc/explicit_branch.h"
#include "dualrcc/tiling.h"

namespace dualrcc {
namespace {

void add(KvLines& out, std::string key, std::string value) {
  out.emplace_back(std::move(key), std::move(value));
}

template <typename T>
void add_num(KvLines& out, std::string key, T v) {
  add(out, std::move(key), std::to_string(v));
}

}  // namespace

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_kv(const KvLines& lines) {
  std::string out;
  for (const auto& [k, v] : lines) out += k + "=" + v + "\n";
  return out;
}

KvLines parse_kv_text(std::string_view text) {
  static const std::regex line_re("([a-z0-9_.]+)=([^\n]*)");
  KvLines out;
  size_t pos = 0;
  int n = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line(text.substr(pos, end - pos));
    ++n;
    pos = end + 1;
    std::smatch m;
    if (!std::regex_match(line, m, line_re)) {
      throw std::invalid_argument("report line " + std::to_string(n) + " malformed");
    }
    out.emplace_back(m[1], m[2]);
  }
  return out;
}

const std::string* find_kv(const KvLines& lines, std::string_view key) {
  for (const auto& [k, v] : lines) {
    if (k == key) return &v;
  }
  return nullptr;
}

KvLines to_kv(const StreamHeader& h, const std::string& p) {
  KvLines out;
  add_num(out, p + "version", h.version);
  add_num(out, p + "schedule", h.schedule);
  add_num(out, p + "steps", h.steps);
  add_num(out, p + "coded_steps", h.coded_steps);
  std::string bitmap;
  for (bool b : h.skipped) bitmap += b ? '1' : '0';
  add(out, p + "skip_bitmap", bitmap);
  add(out, p + "tau", format_real(h.tau_q8 / 255.0));
  add_num(out, p + "seed", h.seed);
  add_num(out, p + "tile", h.tile_size);
  add_num(out, p + "overlap", h.overlap);
  add_num(out, p + "tag_cap", h.tag_cap);
  add(out, p + "sigma", format_real(h.sigma_q16 / 65536.0));
  add_num(out, p + "vocab_hash", h.vocab_hash);
  add_num(out, p + "vocab_size", h.vocab_size);
  add_num(out, p + "rows", h.rows);
  add_num(out, p + "cols", h.cols);
  add(out, p + "kl_target", format_real(h.kl_target_q8 / 256.0));
  add(out, p + "skip_threshold", format_real(h.skip_threshold_q12 / 4096.0));
  add_num(out, p + "model_hash", h.model_hash);
  return out;
}

KvLines to_kv(const EncodeReport& r) {
  KvLines out;
  add_num(out, "total_bits", r.total_bits);
  add_num(out, "header_bits", r.header_bits);
  add_num(out, "tag_bits", r.tag_bits);
  add_num(out, "latent_bits", r.latent_bits);
  add_num(out, "explicit_bits", r.explicit_bits);
  add_num(out, "implicit_bits", r.implicit_bits);
  add_num(out, "tail_bits", r.tail_bits);
  add_num(out, "framing_bits", r.framing_bits);
  add_num(out, "trailer_bits", r.trailer_bits);
  add(out, "bpp", format_real(r.bpp));
  add(out, "kl_total_bits", format_real(r.kl_total_bits));
  add_num(out, "tiles", r.tiles);
  add_num(out, "coded_steps", r.steps.size());
  std::string skipped;
  for (int t : r.steps_skipped) skipped += (skipped.empty() ? "" : ",") + std::to_string(t);
  add(out, "steps_skipped", skipped);
  for (size_t i = 0; i < r.steps.size(); ++i) {
    const StepReport& s = r.steps[i];
    const std::string p = "step." + std::to_string(i) + ".";
    add_num(out, p + "t", s.t);
    add_num(out, p + "skipped", s.skipped ? 1 : 0);
    add_num(out, p + "rechunked", s.rechunked ? 1 : 0);
    add(out, p + "kl_bits", format_real(s.kl_bits));
    add(out, p + "predicted_kl_bits", format_real(s.predicted_kl_bits));
    add_num(out, p + "payload_bits", s.payload_bits);
    add_num(out, p + "chunks", s.chunks);
    add_num(out, p + "candidates", s.candidates);
  }
  add_num(out, "content_hash", r.content_hash);
  return out;
}

KvLines to_kv(const DecodeReport& r) {
  KvLines out = to_kv(r.header);
  add_num(out, "total_bits", r.total_bits);
  add_num(out, "explicit_bits", r.explicit_bits);
  add_num(out, "implicit_bits", r.implicit_bits);
  add_num(out, "trailer_verified", r.trailer_verified ? 1 : 0);
  add_num(out, "content_hash", r.content_hash);
  return out;
}

KvLines inspect_stream(std::span<const uint8_t> stream) {
  const ParsedStream ps = parse_stream(stream);
  KvLines out = to_kv(ps.header);
  add_num(out, "total_bits", stream.size() * 8);
  add_num(out, "header_bits", ps.header_bits);
  add(out, "latent.source", "block-average-standin");
  size_t rcc = 0;
  size_t sum = ps.header_bits;
  for (size_t i = 0; i < ps.sections.size(); ++i) {
    const Section& s = ps.sections[i];
    const std::string p = "section." + std::to_string(i) + ".";
    add(out, p + "name", section_name(s.tag));
    add_num(out, p + "offset_bits", s.offset_bits);
    add_num(out, p + "payload_bits", s.payload_bits);
    add_num(out, p + "framing_bits", s.total_bits() - s.payload_bits);
    add_num(out, p + "bits", s.total_bits());
    sum += s.total_bits();
    const auto tag = static_cast<SectionTag>(s.tag);
    if (tag == SectionTag::kRccStep || tag == SectionTag::kRccStepRechunked) ++rcc;
    if (tag == SectionTag::kTags) {
      const TileGrid grid = make_grid(ps.header.rows, ps.header.cols,
                                      ps.header.tile_size, ps.header.overlap);
      BitReader r = s.reader();
      for (size_t t = 0; t < grid.tiles.size(); ++t) {
        const TagPrompt prompt = tag_decode(r, ps.header.vocab_size);
        const std::string tp = "tags.tile." + std::to_string(t) + ".";
        add_num(out, tp + "count", prompt.indices.size());
        add_num(out, tp + "duplicates", has_duplicate_tags(prompt) ? 1 : 0);
      }
    }
  }
  add_num(out, "rcc_sections", rcc);
  add_num(out, "section_bits_sum", sum);
  return out;
}

}  // namespace dualrcc
