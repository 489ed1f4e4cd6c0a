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

#include "dualrcc/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "dualrcc/diffusion.h"
#include "dualrcc/grid_io.h"

namespace dualrcc {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const KeyValue& kv, const std::string& why) {
  throw ConfigError("config line " + std::to_string(kv.line) + ": " + kv.key + ": " + why);
}

double to_double(const KeyValue& kv) {
  try {
    size_t used = 0;
    const double v = std::stod(kv.value, &used);
    if (used != kv.value.size()) throw std::invalid_argument(kv.value);
    return v;
  } catch (const std::exception&) {
    bad(kv, "expected a number, got '" + kv.value + "'");
  }
}

long long to_int(const KeyValue& kv, long long lo, long long hi) {
  long long v = 0;
  const char* end = kv.value.data() + kv.value.size();
  const auto [ptr, ec] = std::from_chars(kv.value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad(kv, "expected an integer, got '" + kv.value + "'");
  if (v < lo || v > hi) {
    bad(kv, "value " + kv.value + " outside [" + std::to_string(lo) + ", " +
                std::to_string(hi) + "]");
  }
  return v;
}

uint64_t to_u64(const KeyValue& kv) {
  uint64_t v = 0;
  const char* end = kv.value.data() + kv.value.size();
  const auto [ptr, ec] = std::from_chars(kv.value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad(kv, "expected an unsigned integer");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<KeyValue> parse_kv(std::istream& in, const std::string& source) {
  static const std::regex key_re("[a-z0-9_.]+");
  std::vector<KeyValue> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(n) + ": expected key = value");
    }
    KeyValue kv{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), n};
    if (!std::regex_match(kv.key, key_re)) {
      throw ConfigError(source + ":" + std::to_string(n) + ": invalid key '" + kv.key + "'");
    }
    if (kv.value.empty()) {
      throw ConfigError(source + ":" + std::to_string(n) + ": empty value for " + kv.key);
    }
    out.push_back(std::move(kv));
  }
  return out;
}

std::vector<KeyValue> load_kv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_kv(in, path.string());
}

void apply(RunConfig& cfg, const KeyValue& kv) {
  PipelineConfig& p = cfg.pipeline;
  ToyOptions& toy = cfg.model.toy;
  const std::string& k = kv.key;
  if (k == "schedule") {
    const auto idx = schedule_index(kv.value);
    if (!idx) bad(kv, "unknown schedule id '" + kv.value + "'");
    p.schedule = *idx;
  } else if (k == "te") {
    p.coded_steps = static_cast<int>(to_int(kv, 0, 65535));
  } else if (k == "kl_target") {
    p.kl_target_bits = to_double(kv);
  } else if (k == "skip_threshold") {
    p.skip_threshold_bits = to_double(kv);
  } else if (k == "tau") {
    p.tau = to_double(kv);
  } else if (k == "seed") {
    p.seed = to_u64(kv);
  } else if (k == "tile") {
    p.tiles.tile_size = static_cast<int>(to_int(kv, 1, 65535));
  } else if (k == "overlap") {
    p.tiles.overlap = static_cast<int>(to_int(kv, 0, 65535));
  } else if (k == "tag_cap") {
    p.tiles.tag_cap = static_cast<int>(to_int(kv, 0, 255));
  } else if (k == "sigma") {
    p.tiles.sigma_fraction = to_double(kv);
  } else if (k == "latent_step") {
    p.latent_step = to_double(kv);
  } else if (k == "threads") {
    p.threads = static_cast<int>(to_int(kv, 1, 256));
  } else if (k == "vocab") {
    cfg.vocab_path = kv.value;
  } else if (k == "model.rows") {
    toy.latent_rows = static_cast<int>(to_int(kv, 1, 256));
  } else if (k == "model.cols") {
    toy.latent_cols = static_cast<int>(to_int(kv, 1, 256));
  } else if (k == "model.components") {
    toy.components = static_cast<int>(to_int(kv, 1, static_cast<long long>(pattern_names().size())));
  } else if (k == "model.amplitude") {
    toy.amplitude = to_double(kv);
  } else if (k == "model.variance") {
    toy.within_variance = to_double(kv);
    if (!(toy.within_variance > 0.0)) bad(kv, "must be positive");
  } else if (k == "model.blur") {
    toy.blur = to_double(kv);
    if (!(toy.blur > 0.0)) bad(kv, "must be positive");
  } else if (k == "model.noise") {
    toy.pixel_noise = to_double(kv);
  } else if (k == "model.decoder") {
    cfg.model.decoder_path = kv.value;
  } else if (k == "model.component") {
    const auto parts = split(kv.value, ':');
    if (parts.size() < 2 || parts.size() > 3) bad(kv, "expected pattern:amplitude[:weight]");
    cfg.model.components.push_back(kv.value);
  } else if (k == "model.tag_map") {
    if (kv.value.find(':') == std::string::npos) bad(kv, "expected tag:component,...");
    cfg.model.tag_map.push_back(kv.value);
  } else {
    bad(kv, "unknown key");
  }
}

void apply_all(RunConfig& cfg, const std::vector<KeyValue>& entries) {
  for (const auto& kv : entries) apply(cfg, kv);
}

CodecModel build_model(const ModelSpec& spec) {
  const ToyOptions& toy = spec.toy;
  Eigen::MatrixXd decoder;
  int lr = toy.latent_rows, lc = toy.latent_cols;
  int pr = 2 * lr, pc = 2 * lc;
  if (spec.decoder_path) {
    DecoderMatrix d = read_decoder_matrix(*spec.decoder_path);
    lr = d.latent_rows;
    lc = d.latent_cols;
    pr = d.pixel_rows;
    pc = d.pixel_cols;
    decoder = std::move(d.matrix);
  } else {
    decoder = blur_decoder(lr, lc, toy.blur);
  }
  MixtureModel prior;
  prior.observation_variance = toy.within_variance;
  std::vector<double> weights;
  if (spec.components.empty()) {
    if (toy.components > static_cast<int>(pattern_names().size())) {
      throw ConfigError("model.components: too many components");
    }
    for (int k = 0; k < toy.components; ++k) {
      prior.component_means.push_back(flatten(pattern(pattern_names()[k], lr, lc, toy.amplitude)));
      weights.push_back(1.0);
    }
  } else {
    for (const auto& c : spec.components) {
      const auto parts = split(c, ':');
      try {
        prior.component_means.push_back(
            flatten(pattern(parts[0], lr, lc, std::stod(parts[1]))));
        weights.push_back(parts.size() == 3 ? std::stod(parts[2]) : 1.0);
      } catch (const std::exception& e) {
        throw ConfigError("model.component '" + c + "': " + e.what());
      }
      if (!(weights.back() > 0.0)) throw ConfigError("model.component '" + c + "': weight must be > 0");
    }
  }
  double total = 0;
  for (double w : weights) total += w;
  prior.component_weights = Eigen::VectorXd(weights.size());
  for (size_t i = 0; i < weights.size(); ++i) prior.component_weights[i] = weights[i] / total;
  for (const auto& entry : spec.tag_map) {
    const auto colon = entry.find(':');
    try {
      const size_t tag = std::stoul(entry.substr(0, colon));
      if (tag > 65535) throw std::out_of_range("tag");
      if (prior.tag_components.size() <= tag) prior.tag_components.resize(tag + 1);
      for (const auto& comp : split(entry.substr(colon + 1), ',')) {
        prior.tag_components[tag].push_back(std::stoi(comp));
      }
    } catch (const std::exception& e) {
      throw ConfigError("model.tag_map '" + entry + "': " + e.what());
    }
  }
  try {
    return make_model(std::move(decoder), lr, lc, pr, pc, std::move(prior));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
}

TagVocabulary default_vocabulary(const ModelSpec& spec) {
  if (spec.components.empty()) return toy_vocabulary(spec.toy.components);
  std::vector<std::string> entries;
  for (size_t k = 0; k < spec.components.size(); ++k) {
    entries.push_back("component-" + std::to_string(k));
  }
  if (entries.size() < 2) entries.push_back("unused");
  return TagVocabulary(std::move(entries));
}

std::vector<KeyValue> resolved_entries(const RunConfig& cfg) {
  const PipelineConfig p = cfg.pipeline.resolved();
  const auto& toy = cfg.model.toy;
  std::string sched = "custom";
  for (const auto& e : schedule_registry()) {
    if (e.index == p.schedule) sched = e.id;
  }
  std::vector<KeyValue> out = {
      {"schedule", sched},
      {"steps", std::to_string(p.steps())},
      {"te", std::to_string(p.coded_steps)},
      {"td", std::to_string(p.free_steps())},
      {"kl_target", fmt(p.kl_target_bits)},
      {"skip_threshold", fmt(p.skip_threshold_bits)},
      {"tau", fmt(p.tau)},
      {"seed", std::to_string(p.seed)},
      {"tile", std::to_string(p.tiles.tile_size)},
      {"overlap", std::to_string(p.tiles.overlap)},
      {"tag_cap", std::to_string(p.tiles.tag_cap)},
      {"sigma", fmt(p.tiles.sigma_fraction)},
      {"latent_step", fmt(p.latent_step)},
      {"threads", std::to_string(p.threads)},
      {"vocab", cfg.vocab_path.value_or("builtin")},
      {"model.decoder", cfg.model.decoder_path.value_or("builtin")},
      {"model.rows", std::to_string(toy.latent_rows)},
      {"model.cols", std::to_string(toy.latent_cols)},
      {"model.components", std::to_string(toy.components)},
      {"model.amplitude", fmt(toy.amplitude)},
      {"model.variance", fmt(toy.within_variance)},
      {"model.blur", fmt(toy.blur)},
      {"model.noise", fmt(toy.pixel_noise)},
  };
  for (const auto& c : cfg.model.components) out.push_back({"model.component", c});
  for (const auto& t : cfg.model.tag_map) out.push_back({"model.tag_map", t});
  return out;
}

}  // namespace dualrcc
