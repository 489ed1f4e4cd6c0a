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

#include <cmath>

#include "doctest.h"
#include "dualrcc/errors.h"
#include "dualrcc/pipeline.h"
#include "dualrcc/sweeps.h"
#include "dualrcc/toy.h"

using namespace dualrcc;

namespace {

struct Fixture {
  ToyOptions opt;
  CodecModel model;
  TagVocabulary vocab;
  explicit Fixture(ToyOptions o = {})
      : opt(o), model(make_toy_model(o)), vocab(toy_vocabulary(o.components)) {}

  ToySample sample(uint64_t i) const { return sample_toy(model, opt, 1234, i); }
  Condition cond(const ToySample& s) const { return Condition{{s.component}, {}, {}}; }
};

PipelineConfig config(int te, uint64_t seed = 1) {
  PipelineConfig c;
  c.coded_steps = te;
  c.seed = seed;
  return c;
}

ErrorKind decode_error(const std::vector<uint8_t>& stream, const Fixture& f) {
  try {
    decode(stream, f.model, f.vocab);
  } catch (const CodecError& e) {
    return e.kind();
  }
  FAIL("expected a codec error");
  return ErrorKind::kOverflow;
}

void check_accounting(const EncodeResult& r, const CodecModel& model) {
  const EncodeReport& rep = r.report;
  CHECK(rep.total_bits == r.stream.size() * 8);
  CHECK(rep.header_bits + rep.explicit_bits + rep.implicit_bits + rep.tail_bits +
            rep.framing_bits + rep.trailer_bits ==
        rep.total_bits);
  const ParsedStream p = parse_stream(r.stream);
  size_t sum = p.header_bits;
  for (const auto& s : p.sections) sum += s.total_bits();
  CHECK(sum == rep.total_bits);
  size_t step_bits = 0;
  double kl = 0;
  for (const auto& s : rep.steps) {
    step_bits += s.payload_bits;
    kl += s.kl_bits;
    if (s.skipped) CHECK(s.payload_bits == 0);
  }
  CHECK(step_bits == rep.implicit_bits);
  CHECK(std::fabs(kl - rep.kl_total_bits) <= 1e-9 * std::max(1.0, kl));
  CHECK(rep.bpp == static_cast<double>(rep.total_bits - rep.trailer_bits) /
                       static_cast<double>(model.latent_rows * model.latent_cols));
}

}  // namespace

TEST_CASE("explicit only stream") {
  const Fixture f;
  const ToySample s = f.sample(0);
  const EncodeResult r = encode(s.pixels, f.cond(s), config(0), f.model, f.vocab);
  const ParsedStream p = parse_stream(r.stream);
  REQUIRE(p.sections.size() == 3);
  CHECK(p.sections[0].tag == 0x01);
  CHECK(p.sections[1].tag == 0x02);
  CHECK(p.sections[2].tag == 0x7F);
  CHECK(r.report.implicit_bits == 0);
  CHECK(r.report.steps.empty());
  check_accounting(r, f.model);
  const DecodeResult d = decode(r.stream, f.model, f.vocab);
  CHECK(d.report.trailer_verified);
  CHECK(d.latent == r.latent);
  CHECK(d.reconstruction == r.reconstruction);
}

TEST_CASE("decode reproduces the encoder") {
  const Fixture f;
  std::vector<PipelineConfig> configs;
  configs.push_back(config(8));
  PipelineConfig c = config(10, 5);
  c.schedule = 1;
  configs.push_back(c);
  c = config(32, 9);
  c.tau = 0.3;
  c.skip_threshold_bits = 2.0;
  configs.push_back(c);
  c = config(4, 11);
  c.kl_target_bits = 4;
  c.latent_step = 0.25;
  configs.push_back(c);
  for (size_t k = 0; k < configs.size(); ++k) {
    const ToySample s = f.sample(k);
    const EncodeResult r = encode(s.pixels, f.cond(s), configs[k], f.model, f.vocab);
    check_accounting(r, f.model);
    const DecodeResult d = decode(r.stream, f.model, f.vocab);
    CHECK(d.report.trailer_verified);
    CHECK(d.report.content_hash == r.report.content_hash);
    CHECK(d.chain_end == r.chain_end);
    CHECK(d.latent == r.latent);
    CHECK(d.report.implicit_bits == r.report.implicit_bits);
    CHECK(d.report.explicit_bits == r.report.explicit_bits);
    const EncodeResult again = encode(s.pixels, f.cond(s), configs[k], f.model, f.vocab);
    CHECK(again.stream == r.stream);
  }
}

TEST_CASE("skipped steps are substituted on both sides") {
  const Fixture f;
  PipelineConfig c = config(20, 3);
  c.skip_threshold_bits = 6.0;
  const ToySample s = f.sample(3);
  const EncodeResult r = encode(s.pixels, f.cond(s), c, f.model, f.vocab);
  REQUIRE_FALSE(r.report.steps_skipped.empty());
  const ParsedStream p = parse_stream(r.stream);
  size_t coded = 0;
  for (size_t k = 0; k < r.report.steps.size(); ++k) {
    const StepReport& st = r.report.steps[k];
    CHECK(st.t == 64 - static_cast<int>(k));
    CHECK(p.header.skipped[k] == st.skipped);
    CHECK(st.skipped == (st.kl_bits < 6.0));
    if (!st.skipped) ++coded;
  }
  CHECK(p.sections.size() == 3 + coded);
  const DecodeResult d = decode(r.stream, f.model, f.vocab);
  CHECK(d.report.trailer_verified);
  CHECK(d.chain_end == r.chain_end);
}

TEST_CASE("full chain is lossless") {
  const Fixture f;
  for (uint16_t schedule : {uint16_t{2}, uint16_t{0}}) {
    for (uint64_t seed = 0; seed < 3; ++seed) {
      PipelineConfig c = config(schedule == 2 ? 16 : 64, seed);
      c.schedule = schedule;
      c.skip_threshold_bits = 0;
      const ToySample s = f.sample(10 + seed);
      const EncodeResult r = encode(s.pixels, f.cond(s), c, f.model, f.vocab, true);
      check_accounting(r, f.model);
      CHECK(r.report.tail_bits > 0);
      const DecodeResult d = decode(r.stream, f.model, f.vocab);
      CHECK(d.chain_end == r.chain_end);
      CHECK(d.latent == r.latent);
      const Eigen::MatrixXd floor = unflatten(
          f.model.autoencoder.decoder * flatten(r.z_bar), f.model.pixel_rows,
          f.model.pixel_cols);
      CHECK(std::fabs(mse(s.pixels, d.reconstruction) - mse(s.pixels, floor)) <= 1e-9);
      CHECK((d.latent - r.z_bar).cwiseAbs().maxCoeff() <= kTailStep);
      REQUIRE(r.chain_log.size() == 1);
      CHECK(r.chain_log[0].size() == static_cast<size_t>(c.coded_steps));
      CHECK(r.chain_log[0].back() == r.chain_end[0]);
    }
  }
}

TEST_CASE("implicit bits stay within the chunk bounds") {
  const Fixture f;
  double bits = 0, lower = 0, upper = 0;
  const int trials = 1000;
  for (int i = 0; i < trials; ++i) {
    const ToySample s = f.sample(100 + i);
    const EncodeResult r = encode(s.pixels, f.cond(s), config(8, 500 + i), f.model, f.vocab);
    bits += static_cast<double>(r.report.implicit_bits);
    for (const auto& st : r.report.steps) {
      CHECK(st.chunk_kl_bits.size() == st.chunks);
      for (double kl : st.chunk_kl_bits) {
        lower += kl;
        upper += kl + std::log2(kl + 1) + 5;
      }
    }
  }
  CHECK(bits / trials >= lower / trials);
  CHECK(bits / trials <= upper / trials);
}

TEST_CASE("worker count does not change the stream") {
  ToyOptions o;
  o.latent_rows = 16;
  o.latent_cols = 12;
  const Fixture f(o);
  PipelineConfig c = config(12, 7);
  c.tiles.tile_size = 8;
  c.tiles.overlap = 4;
  const ToySample s = f.sample(1);
  Condition cond = f.cond(s);
  cond.tags.push_back((s.component + 1) % o.components);
  cond.tag_regions = {std::nullopt, CellRect{0, 0, 4, 4}};
  const EncodeResult one = encode(s.pixels, cond, c, f.model, f.vocab);
  CHECK(one.report.tiles == 6);
  check_accounting(one, f.model);
  c.threads = 3;
  const EncodeResult three = encode(s.pixels, cond, c, f.model, f.vocab);
  CHECK(one.stream == three.stream);
  CHECK(one.latent == three.latent);
  const DecodeResult d1 = decode(one.stream, f.model, f.vocab, 1);
  const DecodeResult d4 = decode(one.stream, f.model, f.vocab, 4);
  CHECK(d1.latent == one.latent);
  CHECK(d4.latent == one.latent);
  CHECK(d1.report.trailer_verified);
  REQUIRE(d1.report.tile_tags.size() == 6);
  CHECK(d1.report.tile_tags[0].indices.size() == 2);
  CHECK(d1.report.tile_tags[5].indices.size() == 1);
}

TEST_CASE("candidate cap triggers one re-chunk") {
  const Fixture f;
  const ToySample s = f.sample(2);
  PipelineConfig c = config(6, 2);
  c.candidate_cap = uint64_t{1} << 14;
  const EncodeResult r = encode(s.pixels, f.cond(s), c, f.model, f.vocab);
  const ParsedStream p = parse_stream(r.stream);
  bool rechunked = false;
  for (const auto& st : r.report.steps) rechunked = rechunked || st.rechunked;
  CHECK(rechunked);
  size_t tagged = 0;
  for (const auto& sec : p.sections) tagged += sec.tag == 0x11;
  CHECK(tagged > 0);
  const DecodeResult d = decode(r.stream, f.model, f.vocab);
  CHECK(d.chain_end == r.chain_end);
  CHECK(d.report.trailer_verified);

  c.candidate_cap = 1;
  try {
    encode(s.pixels, f.cond(s), c, f.model, f.vocab);
    FAIL("expected a cap error");
  } catch (const CodecError& e) {
    CHECK(e.kind() == ErrorKind::kCapExceeded);
  }
}

TEST_CASE("decode rejects mismatched context") {
  const Fixture f;
  const ToySample s = f.sample(4);
  const EncodeResult r = encode(s.pixels, f.cond(s), config(8), f.model, f.vocab);

  const TagVocabulary other({"a", "b", "c", "d"});
  try {
    decode(r.stream, f.model, other);
    FAIL("expected a vocabulary error");
  } catch (const CodecError& e) {
    CHECK(e.kind() == ErrorKind::kVocabularyMismatch);
  }
  ToyOptions o;
  o.pixel_noise = 0.1;
  const Fixture g(o);
  ToyOptions o2;
  o2.within_variance = 0.3;
  const CodecModel m2 = make_toy_model(o2);
  try {
    decode(r.stream, m2, f.vocab);
    FAIL("expected a model error");
  } catch (const CodecError& e) {
    CHECK(e.kind() == ErrorKind::kModelMismatch);
  }

  auto bad = r.stream;
  bad[5] = 9;
  CHECK(decode_error(bad, f) == ErrorKind::kUnknownSchedule);
  bad = r.stream;
  bad[4] = 7;
  CHECK(decode_error(bad, f) == ErrorKind::kVersionMismatch);
  bad = r.stream;
  bad.back() ^= 0x10;
  CHECK(decode_error(bad, f) == ErrorKind::kCorrupt);
  bad.assign(r.stream.begin(), r.stream.end() - 20);
  CHECK(decode_error(bad, f) == ErrorKind::kTruncated);
}

TEST_CASE("encode validates its inputs") {
  const Fixture f;
  const ToySample s = f.sample(5);
  CHECK_THROWS_AS(encode(Eigen::MatrixXd::Zero(3, 3), {}, config(2), f.model, f.vocab),
                  std::invalid_argument);
  try {
    encode(s.pixels, Condition{{9}, {}, {}}, config(2), f.model, f.vocab);
    FAIL("expected a vocabulary error");
  } catch (const CodecError& e) {
    CHECK(e.kind() == ErrorKind::kVocabularyMismatch);
  }
  PipelineConfig c = config(65);
  CHECK_THROWS_AS(encode(s.pixels, {}, c, f.model, f.vocab), std::invalid_argument);
  c = config(8);
  c.tau = 1.5;
  CHECK_THROWS_AS(encode(s.pixels, {}, c, f.model, f.vocab), std::invalid_argument);
  c = config(8);
  c.schedule = 40;
  CHECK_THROWS_AS(encode(s.pixels, {}, c, f.model, f.vocab), CodecError);
}

TEST_CASE("single bit flips are detected") {
  const Fixture f;
  const ToySample s = f.sample(6);
  const EncodeResult r = encode(s.pixels, f.cond(s), config(8, 6), f.model, f.vocab);
  const size_t bits = r.stream.size() * 8;
  for (size_t k = 0; k < 300; ++k) {
    const size_t pos = (k * 7919) % bits;
    auto bad = r.stream;
    bad[pos / 8] ^= static_cast<uint8_t>(0x80 >> (pos % 8));
    try {
      const DecodeResult d = decode(bad, f.model, f.vocab);
      CHECK(d.report.content_hash != r.report.content_hash);
    } catch (const CodecError&) {
    }
  }
}

TEST_CASE("sweep shapes") {
  const Fixture f;
  std::vector<Sample> batch;
  for (uint64_t i = 0; i < 3; ++i) {
    const ToySample s = f.sample(i);
    batch.push_back({s.pixels, f.cond(s)});
  }
  const auto rows = rate_sweep(batch, {0}, config(0), f.model, f.vocab);
  CHECK(rows.size() == 1);
  CHECK(rows[0].coded_steps == 0);
  const auto curve = distortion_curve(batch, {0.5}, config(4), f.model, f.vocab);
  CHECK(curve.size() == 1);
  CHECK(curve[0].tau == doctest::Approx(0.5).epsilon(1.0 / 255));
}
