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

#ifndef DUALRCC_CONFIG_H_
#define DUALRCC_CONFIG_H_

#include <filesystem>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dualrcc/pipeline.h"
#include "dualrcc/toy.h"

namespace dualrcc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Line grammar: `key = value`. '#' starts a comment, blank lines are
// ignored, keys are [a-z0-9_.]+, values are trimmed and may not be empty.
struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};
std::vector<KeyValue> parse_kv(std::istream& in, const std::string& source);
std::vector<KeyValue> load_kv(const std::filesystem::path& path);

struct ModelSpec {
  ToyOptions toy;
  std::optional<std::string> decoder_path;
  // "pattern:amplitude[:weight]"; overrides the toy's default components.
  std::vector<std::string> components;
  // "tag:component,component,..."
  std::vector<std::string> tag_map;
};

struct RunConfig {
  PipelineConfig pipeline;
  ModelSpec model;
  std::optional<std::string> vocab_path;
};

// Applies one entry; throws ConfigError naming the key on failure.
void apply(RunConfig& cfg, const KeyValue& kv);
void apply_all(RunConfig& cfg, const std::vector<KeyValue>& entries);

CodecModel build_model(const ModelSpec& spec);
TagVocabulary default_vocabulary(const ModelSpec& spec);

// Fully resolved configuration as key=value lines in a fixed order.
std::vector<KeyValue> resolved_entries(const RunConfig& cfg);

}  // namespace dualrcc

#endif  // DUALRCC_CONFIG_H_
