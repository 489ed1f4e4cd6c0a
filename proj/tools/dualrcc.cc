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

// dualrcc command-line tool: encode, decode, inspect, bench, sample, vocab.
// Exit codes: 0 ok, 2 I/O, 3 configuration, 4 codec.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dualrcc/config.h"
#include "dualrcc/errors.h"
#include "dualrcc/grid_io.h"
#include "dualrcc/pipeline.h"
#include "dualrcc/report.h"
#include "dualrcc/sweeps.h"
#include "dualrcc/toy.h"

namespace {

using namespace dualrcc;

constexpr int kExitIo = 2;
constexpr int kExitConfig = 3;
constexpr int kExitCodec = 4;

struct Flags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> te;
  std::optional<double> tau;
  std::optional<int> tile;
  std::optional<int> overlap;
  std::optional<double> skip_threshold;
  std::optional<double> kl_target;
  std::optional<std::string> schedule;
  std::optional<std::string> vocab;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_path, "key=value config file");
  app->add_option("--seed", f.seed, "shared-randomness seed");
  app->add_option("--threads", f.threads, "worker threads");
  app->add_option("--te", f.te, "coded diffusion steps T_E");
  app->add_option("--tau", f.tau, "distortion-perception knob in [0, 1]");
  app->add_option("--tile", f.tile, "tile size in latent cells");
  app->add_option("--overlap", f.overlap, "tile overlap in latent cells");
  app->add_option("--skip-threshold", f.skip_threshold, "per-step skip threshold (bits)");
  app->add_option("--kl-target", f.kl_target, "RCC chunk target (bits)");
  app->add_option("--schedule", f.schedule, "noise schedule id");
  app->add_option("--vocab", f.vocab, "tag vocabulary file");
}

template <typename T>
void flag_entry(std::vector<KeyValue>& out, const char* key, const std::optional<T>& v) {
  if (!v) return;
  std::ostringstream s;
  s.precision(17);
  s << *v;
  out.push_back({key, s.str(), 0});
}

RunConfig resolve(const Flags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) apply_all(cfg, load_kv(f.config_path));
  std::vector<KeyValue> flags;
  flag_entry(flags, "seed", f.seed);
  flag_entry(flags, "threads", f.threads);
  flag_entry(flags, "te", f.te);
  flag_entry(flags, "tau", f.tau);
  flag_entry(flags, "tile", f.tile);
  flag_entry(flags, "overlap", f.overlap);
  flag_entry(flags, "skip_threshold", f.skip_threshold);
  flag_entry(flags, "kl_target", f.kl_target);
  flag_entry(flags, "schedule", f.schedule);
  flag_entry(flags, "vocab", f.vocab);
  apply_all(cfg, flags);
  try {
    cfg.pipeline = cfg.pipeline.resolved();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

TagVocabulary load_vocab(const RunConfig& cfg) {
  if (!cfg.vocab_path) return default_vocabulary(cfg.model);
  if (!std::filesystem::is_regular_file(*cfg.vocab_path)) {
    throw ConfigError("vocabulary file '" + *cfg.vocab_path + "' not found");
  }
  try {
    return TagVocabulary::load(*cfg.vocab_path);
  } catch (const std::exception& e) {
    throw ConfigError("vocabulary file '" + *cfg.vocab_path + "': " + e.what());
  }
}

// Lines: `tag` or `tag row0 col0 row1 col1` (latent cells, end exclusive).
Condition load_tags(const std::string& path, const TagVocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ConfigError("tags file '" + path + "' not found");
  Condition cond;
  std::string line;
  int n = 0;
  bool any_region = false;
  while (std::getline(in, line)) {
    ++n;
    std::istringstream s(line);
    std::string name;
    if (!(s >> name) || name[0] == '#') continue;
    const int idx = vocab.index_of(name);
    if (idx < 0) {
      throw ConfigError(path + ":" + std::to_string(n) + ": tag '" + name +
                        "' not in vocabulary");
    }
    cond.tags.push_back(idx);
    CellRect r;
    if (s >> r.row0 >> r.col0 >> r.row1 >> r.col1) {
      cond.tag_regions.push_back(r);
      any_region = true;
    } else {
      cond.tag_regions.push_back(std::nullopt);
    }
  }
  if (!any_region) cond.tag_regions.clear();
  return cond;
}

void print(const KvLines& lines, const std::string& prefix = "") {
  for (const auto& [k, v] : lines) std::cout << prefix << k << "=" << v << "\n";
}

void echo_config(const RunConfig& cfg) {
  for (const auto& kv : resolved_entries(cfg)) {
    std::cout << "config." << kv.key << "=" << kv.value << "\n";
  }
}

int cmd_encode(const Flags& f, const std::string& input, const std::string& output,
               const std::string& tags_path, const std::string& report_path) {
  const RunConfig cfg = resolve(f);
  const TagVocabulary vocab = load_vocab(cfg);
  const Condition cond = tags_path.empty() ? Condition{} : load_tags(tags_path, vocab);
  const CodecModel model = build_model(cfg.model);
  const Eigen::MatrixXd x = read_input(input);
  const EncodeResult r = encode(x, cond, cfg.pipeline, model, vocab);
  write_file(output, r.stream);
  echo_config(cfg);
  const KvLines rep = to_kv(r.report);
  print(rep);
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << format_kv(rep);
    if (!out) throw IoError("cannot write report '" + report_path + "'");
  }
  return 0;
}

int cmd_decode(const Flags& f, const std::string& input, const std::string& output) {
  const RunConfig cfg = resolve(f);
  const TagVocabulary vocab = load_vocab(cfg);
  const CodecModel model = build_model(cfg.model);
  const auto bytes = read_file(input);
  const DecodeResult r = decode(bytes, model, vocab, cfg.pipeline.threads);
  write_output(output, r.reconstruction);
  print(to_kv(r.report));
  return 0;
}

int cmd_inspect(const std::string& input, bool machine) {
  const auto bytes = read_file(input);
  const KvLines lines = inspect_stream(bytes);
  if (machine) {
    print(lines);
    return 0;
  }
  const std::string* total = find_kv(lines, "total_bits");
  std::printf("stream %s: %s bits\n", input.c_str(), total->c_str());
  std::printf("  %-20s %10s %10s %10s\n", "section", "offset", "payload", "bits");
  std::printf("  %-20s %10d %10s %10s\n", "header", 0, "-",
              find_kv(lines, "header_bits")->c_str());
  for (int i = 0;; ++i) {
    const std::string p = "section." + std::to_string(i) + ".";
    const std::string* name = find_kv(lines, p + "name");
    if (!name) break;
    std::printf("  %-20s %10s %10s %10s\n", name->c_str(),
                find_kv(lines, p + "offset_bits")->c_str(),
                find_kv(lines, p + "payload_bits")->c_str(),
                find_kv(lines, p + "bits")->c_str());
  }
  std::printf("  sum of section bits: %s\n", find_kv(lines, "section_bits_sum")->c_str());
  print(lines, "  ");
  return 0;
}

std::vector<Sample> toy_samples(const RunConfig& cfg, const CodecModel& model, size_t n,
                                bool with_tags) {
  std::vector<Sample> out;
  for (size_t i = 0; i < n; ++i) {
    const ToySample t = sample_toy(model, cfg.model.toy, cfg.pipeline.seed, i);
    Sample s{t.pixels, {}};
    if (with_tags) s.cond.tags = {t.component};
    out.push_back(std::move(s));
  }
  return out;
}

int cmd_bench(const Flags& f, const std::string& suite, size_t samples, double budget) {
  const RunConfig cfg = resolve(f);
  const auto& p = cfg.pipeline;
  std::cout << "# suite=" << suite << " seed=" << p.seed << "\n";
  if (suite == "pfr-bound") {
    const size_t trials = samples ? samples : 10000;
    std::cout << "kl_bits\ttrials\tmean_bits\tci95\tbound\tmean_candidates\n";
    for (double kl : {1.0, 2.0, 4.0, 8.0, 16.0}) {
      const PfrBoundPoint r = pfr_bound(kl, trials, p.seed);
      std::cout << kl << "\t" << r.trials << "\t" << format_real(r.bits.mean) << "\t"
                << format_real(1.96 * r.bits.se) << "\t" << format_real(r.bound) << "\t"
                << format_real(r.candidates.mean) << "\n";
    }
    return 0;
  }
  const TagVocabulary vocab = load_vocab(cfg);
  const CodecModel model = build_model(cfg.model);
  if (suite == "tradeoff") {
    const auto xs = toy_samples(cfg, model, samples ? samples : 200, true);
    std::cout << "te\ttau\tmse\tmse_se\tbits\tbits_se\n";
    for (int te : {4, 16}) {
      PipelineConfig c = p;
      c.coded_steps = std::min(te, c.steps());
      for (const auto& row :
           distortion_curve(xs, {0.0, 0.25, 0.5, 0.75, 1.0}, c, model, vocab)) {
        std::cout << c.coded_steps << "\t" << format_real(row.tau) << "\t"
                  << format_real(row.mse.mean) << "\t" << format_real(row.mse.se) << "\t"
                  << format_real(row.bits.mean) << "\t" << format_real(row.bits.se)
                  << "\n";
      }
    }
    return 0;
  }
  if (suite == "rate-sweep") {
    const auto xs = toy_samples(cfg, model, samples ? samples : 100, true);
    std::vector<int> tes;
    for (int te : {0, 8, 16, 32, 64}) {
      if (te <= p.steps()) tes.push_back(te);
    }
    const auto rows = rate_sweep(xs, tes, p, model, vocab);
    std::cout << "te\tbits\tbits_se\timplicit_bits\tmse\tmse_se\n";
    for (const auto& r : rows) {
      std::cout << r.coded_steps << "\t" << format_real(r.bits.mean) << "\t"
                << format_real(r.bits.se) << "\t" << format_real(r.implicit_bits.mean)
                << "\t" << format_real(r.mse.mean) << "\t" << format_real(r.mse.se)
                << "\n";
    }
    std::cout << "# bits_strictly_increasing=" << bits_strictly_increasing(rows)
              << " mse_nonincreasing=" << mse_nonincreasing(rows) << "\n";
    return 0;
  }
  if (suite == "rate-allocation") {
    const auto xs = toy_samples(cfg, model, samples ? samples : 50, true);
    std::vector<int> tes;
    for (int te : {0, 1, 2, 4, 8, 16, 32}) {
      if (te <= p.steps()) tes.push_back(te);
    }
    const auto rows =
        rate_allocation(xs, {0.0625, 0.125, 0.25, 0.5, 1.0, 2.0}, tes, budget, p, model, vocab);
    std::cout << "latent_step\tte\texplicit_bits\timplicit_bits\ttotal_bits\tmse\tmse_se\n";
    for (const auto& r : rows) {
      std::cout << format_real(r.latent_step) << "\t" << r.coded_steps << "\t"
                << format_real(r.explicit_bits) << "\t" << format_real(r.implicit_bits)
                << "\t" << format_real(r.total_bits) << "\t" << format_real(r.mse.mean)
                << "\t" << format_real(r.mse.se) << "\n";
    }
    return 0;
  }
  throw ConfigError("unknown bench suite '" + suite + "'");
}

int cmd_sample(const Flags& f, const std::string& output, const std::string& tags_out,
               uint64_t index) {
  const RunConfig cfg = resolve(f);
  const CodecModel model = build_model(cfg.model);
  const ToySample s = sample_toy(model, cfg.model.toy, cfg.pipeline.seed, index);
  write_output(output, s.pixels);
  if (!tags_out.empty()) {
    const TagVocabulary vocab = load_vocab(cfg);
    std::ofstream out(tags_out);
    out << vocab.entry(static_cast<size_t>(s.component) % vocab.size()) << "\n";
    if (!out) throw IoError("cannot write '" + tags_out + "'");
  }
  std::cout << "component=" << s.component << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dualrcc: dual-branch codec with reverse-channel coding"};
  app.require_subcommand(1);
  Flags flags;
  std::string input, output, tags, report, suite, tags_out;
  bool machine = false;
  size_t samples = 0;
  double budget = 200.0;
  uint64_t index = 0;

  auto* enc = app.add_subcommand("encode", "encode a grid into a stream");
  enc->add_option("-i,--input", input, "input grid (.pgm or raw f64)")->required();
  enc->add_option("-o,--output", output, "output stream")->required();
  enc->add_option("--tags", tags, "tags file");
  enc->add_option("--report", report, "also write the report here");
  add_common(enc, flags);

  auto* dec = app.add_subcommand("decode", "decode a stream");
  dec->add_option("-i,--input", input, "input stream")->required();
  dec->add_option("-o,--output", output, "reconstruction (.pgm or raw f64)")->required();
  add_common(dec, flags);

  auto* ins = app.add_subcommand("inspect", "section and bit breakdown of a stream");
  ins->add_option("-i,--input", input, "input stream")->required();
  ins->add_flag("--machine", machine, "key=value output only");

  auto* bench = app.add_subcommand("bench", "desk-scale tables");
  bench->add_option("--suite", suite,
                    "pfr-bound | tradeoff | rate-sweep | rate-allocation")->required();
  bench->add_option("--samples", samples, "samples or trials per point");
  bench->add_option("--budget", budget, "rate-allocation target bits");
  add_common(bench, flags);

  auto* smp = app.add_subcommand("sample", "draw a toy input");
  smp->add_option("-o,--output", output, "output grid (.pgm or raw f64)")->required();
  smp->add_option("--index", index, "sample index");
  smp->add_option("--tags-out", tags_out, "write the true component tag here");
  add_common(smp, flags);

  auto* voc = app.add_subcommand("vocab", "write the built-in vocabulary");
  voc->add_option("-o,--output", output, "vocabulary file")->required();
  add_common(voc, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*enc) return cmd_encode(flags, input, output, tags, report);
    if (*dec) return cmd_decode(flags, input, output);
    if (*ins) return cmd_inspect(input, machine);
    if (*bench) return cmd_bench(flags, suite, samples, budget);
    if (*smp) return cmd_sample(flags, output, tags_out, index);
    if (*voc) {
      const RunConfig cfg = resolve(flags);
      default_vocabulary(cfg.model).save(output);
      return 0;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CodecError& e) {
    std::cerr << "codec error (" << error_kind_name(e.kind()) << ") at bit "
              << e.offset_bits() << ": " << e.what() << "\n";
    return kExitCodec;
  } catch (const std::exception& e) {
    std::cerr << "codec error: " << e.what() << "\n";
    return kExitCodec;
  }
  return 0;
}
