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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "dualrcc/bit_io.h"
#include "dualrcc/config.h"
#include "dualrcc/grid_io.h"
#include "dualrcc/pipeline.h"
#include "dualrcc/report.h"
#include "dualrcc/toy.h"

using namespace dualrcc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dualrcc_cfg_" + std::to_string(reinterpret_cast<uintptr_t>(this)) + "_" +
            std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<KeyValue> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_kv(in, "test");
}

}  // namespace

TEST_CASE("config lines parse with comments and blanks") {
  const auto kv = parse("# header\n\nte = 12  # trailing\n  schedule=cosine-16 \nmodel.rows = 4\n");
  REQUIRE(kv.size() == 3);
  CHECK(kv[0].key == "te");
  CHECK(kv[0].value == "12");
  CHECK(kv[0].line == 3);
  CHECK(kv[1].value == "cosine-16");
  CHECK(kv[2].key == "model.rows");
}

TEST_CASE("malformed config lines are rejected") {
  CHECK_THROWS_AS(parse("te 12\n"), ConfigError);
  CHECK_THROWS_AS(parse("Te = 12\n"), ConfigError);
  CHECK_THROWS_AS(parse("te =\n"), ConfigError);
  CHECK_THROWS_AS(load_kv("/nonexistent/dualrcc.cfg"), ConfigError);
}

TEST_CASE("config entries apply to the run") {
  RunConfig cfg;
  apply_all(cfg, parse("schedule = linear-16\nte = 5\nkl_target = 10\ntau = 0.5\nseed = 99\n"
                       "tile = 6\noverlap = 2\ntag_cap = 3\nthreads = 2\nmodel.blur = 0.7\n"));
  CHECK(cfg.pipeline.schedule == 2);
  CHECK(cfg.pipeline.coded_steps == 5);
  CHECK(cfg.pipeline.kl_target_bits == 10);
  CHECK(cfg.pipeline.tau == 0.5);
  CHECK(cfg.pipeline.seed == 99);
  CHECK(cfg.pipeline.tiles.tile_size == 6);
  CHECK(cfg.pipeline.tiles.overlap == 2);
  CHECK(cfg.pipeline.tiles.tag_cap == 3);
  CHECK(cfg.pipeline.threads == 2);
  CHECK(cfg.model.toy.blur == 0.7);
  CHECK(cfg.pipeline.steps() == 16);
}

TEST_CASE("bad config values name the key") {
  const char* cases[] = {"schedule = linear-7", "te = -1", "te = x", "tag_cap = 256",
                         "model.variance = 0", "model.component = checker",
                         "model.tag_map = 3", "bogus = 1"};
  for (const char* c : cases) {
    RunConfig cfg;
    const auto kv = parse(std::string(c) + "\n");
    try {
      apply(cfg, kv[0]);
      FAIL("accepted: " << c);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(kv[0].key) != std::string::npos);
    }
  }
}

TEST_CASE("resolved entries parse back to the same run") {
  RunConfig cfg;
  apply_all(cfg, parse("schedule = cosine-64\nte = 9\ntau = 0.3\nmodel.component = checker:1.5:2\n"
                       "model.component = const:0.5\nmodel.tag_map = 1:0,1\n"));
  const auto first = resolved_entries(cfg);
  RunConfig again;
  for (const auto& kv : first) {
    if (kv.key == "steps" || kv.key == "td" || kv.value == "builtin") continue;
    apply(again, kv);
  }
  const auto second = resolved_entries(again);
  REQUIRE(first.size() == second.size());
  for (size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].key == second[i].key);
    CHECK(first[i].value == second[i].value);
  }
}

TEST_CASE("model built from components and tag map") {
  RunConfig cfg;
  apply_all(cfg, parse("model.rows = 4\nmodel.cols = 6\nmodel.component = checker:1.5:3\n"
                       "model.component = const:0.5:1\nmodel.tag_map = 2:0,1\n"));
  const CodecModel m = build_model(cfg.model);
  CHECK(m.latent_rows == 4);
  CHECK(m.latent_cols == 6);
  CHECK(m.pixel_rows == 8);
  CHECK(m.pixel_cols == 12);
  REQUIRE(m.prior.component_means.size() == 2);
  CHECK(m.prior.component_weights[0] == doctest::Approx(0.75));
  REQUIRE(m.prior.tag_components.size() == 3);
  CHECK(m.prior.tag_components[2] == std::vector<int>{0, 1});
  CHECK(default_vocabulary(cfg.model).size() == 2);

  RunConfig bad;
  apply_all(bad, parse("model.component = nosuch:1\n"));
  CHECK_THROWS_AS(build_model(bad.model), ConfigError);
}

TEST_CASE("raw grid round trip is exact") {
  TempDir dir;
  Eigen::MatrixXd g(3, 5);
  g.setRandom();
  g(1, 2) = 1e300;
  write_grid(dir.path / "g.bin", g);
  CHECK(read_grid(dir.path / "g.bin") == g);
  CHECK(read_input(dir.path / "g.bin") == g);
  write_output(dir.path / "h.raw", g);
  CHECK(read_input(dir.path / "h.raw") == g);
}

TEST_CASE("pgm round trip within one level") {
  TempDir dir;
  Eigen::MatrixXd g(4, 7);
  g.setRandom();
  g(0, 0) = 3.0;  // clamped
  write_output(dir.path / "g.pgm", g);
  const Eigen::MatrixXd back = read_input(dir.path / "g.pgm");
  REQUIRE(back.rows() == 4);
  REQUIRE(back.cols() == 7);
  CHECK(back(0, 0) == 1.0);
  for (Eigen::Index i = 1; i < g.size(); ++i) {
    CHECK(std::abs(back.reshaped()(i) - g.reshaped()(i)) <= 1.0 / 255 + 1e-12);
  }
}

TEST_CASE("pgm with a comment and a wide maxval") {
  TempDir dir;
  const fs::path p = dir.path / "w.pgm";
  {
    std::ofstream out(p, std::ios::binary);
    out << "P5\n# comment\n2 1\n65535\n";
    const unsigned char px[] = {0x00, 0x00, 0xff, 0xff};
    out.write(reinterpret_cast<const char*>(px), 4);
  }
  const Eigen::MatrixXd g = read_pgm(p);
  CHECK(g(0, 0) == -1.0);
  CHECK(g(0, 1) == 1.0);
}

TEST_CASE("malformed grids are io errors") {
  TempDir dir;
  write_file(dir.path / "short.bin", {2, 0, 0, 0, 2, 0, 0, 0, 1, 2, 3});
  CHECK_THROWS_AS(read_grid(dir.path / "short.bin"), IoError);
  write_file(dir.path / "bad.pgm", {'P', '5', '\n', 'x'});
  CHECK_THROWS_AS(read_pgm(dir.path / "bad.pgm"), IoError);
  CHECK_THROWS_AS(read_input(dir.path / "missing.bin"), IoError);
  CHECK_THROWS_AS(read_file(dir.path / "missing.bin"), IoError);
}

TEST_CASE("decoder matrix round trip drives the model") {
  TempDir dir;
  DecoderMatrix d;
  d.pixel_rows = 8;
  d.pixel_cols = 8;
  d.latent_rows = 4;
  d.latent_cols = 4;
  d.matrix = blur_decoder(4, 4, 0.8);
  write_decoder_matrix(dir.path / "dec.bin", d);
  const DecoderMatrix back = read_decoder_matrix(dir.path / "dec.bin");
  CHECK(back.matrix == d.matrix);
  CHECK(back.latent_cols == 4);

  RunConfig cfg;
  apply_all(cfg, parse("model.decoder = " + (dir.path / "dec.bin").string() + "\n"));
  const CodecModel m = build_model(cfg.model);
  CHECK(m.latent_rows == 4);
  CHECK(m.pixel_rows == 8);

  d.latent_rows = 5;
  CHECK_THROWS(write_decoder_matrix(dir.path / "bad.bin", d));
}

TEST_CASE("report lines round trip") {
  const KvLines lines = {{"a", "1"}, {"b.c", format_real(0.1)}, {"d_e", "x y"}};
  const std::string text = format_kv(lines);
  CHECK(parse_kv_text(text) == lines);
  CHECK(format_real(0.1) == "0.10000000000000001");
  REQUIRE(find_kv(lines, "b.c") != nullptr);
  CHECK(find_kv(lines, "zz") == nullptr);
  CHECK_THROWS_AS(parse_kv_text("A=1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_kv_text("novalue\n"), std::invalid_argument);
}

TEST_CASE("inspect sums to the file size") {
  ToyOptions o;
  const CodecModel m = make_toy_model(o);
  const TagVocabulary v = toy_vocabulary(4);
  const ToySample s = sample_toy(m, o, 5, 0);
  PipelineConfig c;
  c.schedule = 2;
  c.coded_steps = 4;
  const EncodeResult r = encode(s.pixels, Condition{{s.component}, {}, {}}, c, m, v);
  const KvLines kv = inspect_stream(r.stream);
  REQUIRE(find_kv(kv, "total_bits") != nullptr);
  CHECK(std::stoull(*find_kv(kv, "total_bits")) == r.stream.size() * 8);
  uint64_t sum = std::stoull(*find_kv(kv, "header_bits"));
  for (const auto& [k, val] : kv) {
    if (k.starts_with("section.") && k.ends_with(".bits")) sum += std::stoull(val);
  }
  CHECK(sum == r.stream.size() * 8);
}
