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

#ifndef DUALRCC_REPORT_H_
#define DUALRCC_REPORT_H_

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dualrcc/bitstream.h"
#include "dualrcc/pipeline.h"

namespace dualrcc {

// Line-oriented report format: one `key=value` per line, keys match
// [a-z0-9_.]+, values contain no newline. Reals use %.17g.
using KvLines = std::vector<std::pair<std::string, std::string>>;

std::string format_real(double v);
std::string format_kv(const KvLines& lines);
// Throws std::invalid_argument on a line outside the grammar.
KvLines parse_kv_text(std::string_view text);
const std::string* find_kv(const KvLines& lines, std::string_view key);

KvLines to_kv(const StreamHeader& h, const std::string& prefix = "header.");
KvLines to_kv(const EncodeReport& r);
KvLines to_kv(const DecodeReport& r);

// Section breakdown of a stream. Per-section bits include framing and sum
// with header_bits to total_bits. Throws CodecError on malformed input.
KvLines inspect_stream(std::span<const uint8_t> stream);

}  // namespace dualrcc

#endif  // DUALRCC_REPORT_H_
