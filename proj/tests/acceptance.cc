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

// Acceptance suite: one PASS/FAIL line per criterion, each with its time
// budget. Arguments, when given, select criteria by name substring.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/SpecialFunctions>

#include "dualrcc/bit_io.h"
#include "dualrcc/bitstream.h"
#include "dualrcc/diffusion.h"
#include "dualrcc/errors.h"
#include "dualrcc/explicit_branch.h"
#include "dualrcc/pipeline.h"
#include "dualrcc/rcc.h"
#include "dualrcc/report.h"
#include "dualrcc/sweeps.h"
#include "dualrcc/tiling.h"
#include "dualrcc/toy.h"

using namespace dualrcc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Kolmogorov survival function with the Stephens small-sample correction.
double ks_p_value(double d, size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double x = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0;
  for (int k = 1; k <= 100; ++k) {
    p += 2 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * x * x);
  }
  return std::clamp(p, 0.0, 1.0);
}

// One-sided p-value of Student's t with df degrees of freedom, P(T >= t).
double t_upper_p(double t, double df) {
  const Eigen::ArrayXd a = Eigen::ArrayXd::Constant(1, df / 2);
  const Eigen::ArrayXd b = Eigen::ArrayXd::Constant(1, 0.5);
  const Eigen::ArrayXd x = Eigen::ArrayXd::Constant(1, df / (df + t * t));
  const double tail = 0.5 * Eigen::betainc(a, b, x)(0);
  return t >= 0 ? tail : 1.0 - tail;
}

struct Toy {
  ToyOptions opt;
  CodecModel model;
  TagVocabulary vocab;
  explicit Toy(ToyOptions o = {})
      : opt(o), model(make_toy_model(o)), vocab(toy_vocabulary(o.components)) {}
  ToySample sample(uint64_t seed, uint64_t i) const { return sample_toy(model, opt, seed, i); }
};

Condition with_tag(const ToySample& s) { return Condition{{s.component}, {}, {}}; }

// PFR exactness: KS against q and decode equal to the encoder's candidate.
Outcome pfr_exactness() {
  const size_t n = 100000;
  Eigen::VectorXd m(1), v(1);
  m << 1.5;
  v << 0.36;
  const Gaussian q(m, v);
  const Gaussian p = Gaussian::isotropic(Eigen::VectorXd::Zero(1), 1.0);
  const Block256 key = expand_seed(20260001);
  std::vector<double> xs(n);
  size_t mismatches = 0;
  for (size_t i = 0; i < n; ++i) {
    const DeterministicSampler s(key, i);
    const PfrResult r = pfr_encode(q, p, s);
    const Eigen::VectorXd d = pfr_decode(r.index, p, s);
    if (!(d == r.sample)) ++mismatches;
    xs[i] = d[0];
  }
  std::sort(xs.begin(), xs.end());
  double dmax = 0;
  for (size_t i = 0; i < n; ++i) {
    const double f = 0.5 * std::erfc(-(xs[i] - 1.5) / (0.6 * std::numbers::sqrt2));
    dmax = std::max({dmax, f - static_cast<double>(i) / n,
                     static_cast<double>(i + 1) / n - f});
  }
  const double pv = ks_p_value(dmax, n);
  return {pv > 0.001 && mismatches == 0,
          "D=" + fmt("%.5f", dmax) + " p=" + fmt("%.4f", pv) +
              " mismatches=" + std::to_string(mismatches)};
}

// PFR mean index bits against KL + log2(KL + 1) + 5.
Outcome pfr_codelength() {
  bool pass = true;
  std::string detail;
  for (double kl : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    const PfrBoundPoint r = pfr_bound(kl, 10000, 20260002);
    pass &= r.bits.mean <= r.bound && r.trials >= 10000;
    detail += "kl" + fmt("%g", kl) + ":" + fmt("%.3f", r.bits.mean) + "<=" +
              fmt("%.3f", r.bound) + " ";
  }
  return {pass, detail};
}

// Per-step KL recomputed from the logged chain with the public model pieces.
std::vector<double> offline_step_kl(const EncodeResult& r, const Condition& cond,
                                    const PipelineConfig& cfg, const CodecModel& model) {
  const PipelineConfig c = cfg.resolved();
  const NoiseSchedule sched = schedule_by_index(c.schedule);
  const int T = sched.steps();
  const TileGrid grid = make_grid(model.latent_rows, model.latent_cols, c.tiles.tile_size,
                                  c.tiles.overlap);
  const QuantizedLatent yhat = quantize(block_average(r.z_bar), c.latent_step);
  Condition hint;
  hint.latent_hint = latent_hint(yhat, model.latent_rows, model.latent_cols);
  const auto hint_parts = partition_condition(hint, grid, 0);
  const auto tag_parts = partition_condition(
      Condition{cond.tags, cond.tag_regions, std::nullopt}, grid, c.tiles.tag_cap);
  std::vector<double> out(static_cast<size_t>(c.coded_steps), 0.0);
  for (size_t i = 0; i < grid.tiles.size(); ++i) {
    Condition tc = hint_parts[i];
    tc.tags = tag_parts[i].tags;
    const MixtureDenoiser den(model.region_prior(grid.tiles[i]), sched);
    const Eigen::VectorXd x0 = flatten(crop(r.z_bar, grid.tiles[i]));
    for (int k = 0; k < c.coded_steps; ++k) {
      const int t = T - k;
      double kl;
      if (t == T) {
        kl = kl_bits(forward_marginal(x0, t, sched),
                     Gaussian::isotropic(Eigen::VectorXd::Zero(x0.size()), 1.0));
      } else {
        const Eigen::VectorXd& prev = r.chain_log[i][static_cast<size_t>(k - 1)];
        kl = kl_bits(posterior(x0, prev, t, sched), reverse_kernel(den, prev, t, tc, sched));
      }
      out[static_cast<size_t>(k)] += kl;
    }
  }
  return out;
}

Outcome accounting() {
  std::mt19937_64 rng(20260003);
  auto uni = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };
  auto real = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  double worst = 0;
  int failures = 0, steps = 0;
  for (int cfg_i = 0; cfg_i < 100; ++cfg_i) {
    ToyOptions o;
    o.latent_rows = uni(4, 12);
    o.latent_cols = uni(4, 12);
    o.components = uni(2, 6);
    o.amplitude = real(0.5, 1.5);
    const Toy toy(o);
    PipelineConfig c;
    c.schedule = static_cast<uint16_t>(uni(0, 4));
    const int T = schedule_by_index(c.schedule).steps();
    c.coded_steps = (T <= 64 && uni(0, 9) == 0) ? T : uni(0, std::min(T, 24));
    c.kl_target_bits = real(6, 14);
    c.skip_threshold_bits = uni(0, 2) == 0 ? 0.0 : real(0, 4);
    c.tau = real(0, 1);
    c.seed = rng();
    c.tiles.tile_size = uni(4, 12);
    c.tiles.overlap = uni(0, c.tiles.tile_size / 2);
    c.tiles.tag_cap = uni(0, 4);
    c.tiles.sigma_fraction = real(0.2, 0.5);
    c.latent_step = std::ldexp(1.0, uni(-2, 0));
    const ToySample s = toy.sample(rng(), 0);
    Condition cond;
    const int n_tags = uni(0, 3);
    for (int k = 0; k < n_tags; ++k) {
      cond.tags.push_back(uni(0, o.components - 1));
      if (uni(0, 1)) {
        const int r0 = uni(0, o.latent_rows - 1), c0 = uni(0, o.latent_cols - 1);
        cond.tag_regions.push_back(
            CellRect{r0, c0, uni(r0 + 1, o.latent_rows), uni(c0 + 1, o.latent_cols)});
      } else {
        cond.tag_regions.push_back(std::nullopt);
      }
    }
    const EncodeResult r = encode(s.pixels, cond, c, toy.model, toy.vocab, true);
    bool ok = r.report.total_bits == r.stream.size() * 8;
    const KvLines kv = inspect_stream(r.stream);
    ok &= std::stoull(*find_kv(kv, "section_bits_sum")) == r.stream.size() * 8;
    ok &= r.report.steps.size() == static_cast<size_t>(c.coded_steps);
    const std::vector<double> offline = offline_step_kl(r, cond, c, toy.model);
    double total = 0;
    for (size_t k = 0; k < offline.size() && ok; ++k) {
      const double diff = std::fabs(offline[k] - r.report.steps[k].kl_bits);
      worst = std::max(worst, diff);
      ok &= diff <= 1e-9;
      total += offline[k];
      ++steps;
    }
    ok &= std::fabs(total - r.report.kl_total_bits) <= 1e-9;
    if (!ok) ++failures;
  }
  return {failures == 0, "configs=100 steps=" + std::to_string(steps) +
                             " max_kl_diff=" + fmt("%.3g", worst) +
                             " failures=" + std::to_string(failures)};
}

Outcome lossless_chain() {
  const Toy toy;
  int failures = 0;
  double worst = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    PipelineConfig c;
    c.schedule = 0;
    c.coded_steps = 64;
    c.skip_threshold_bits = 0;
    c.seed = seed;
    const ToySample s = toy.sample(20260004, seed);
    const EncodeResult r = encode(s.pixels, with_tag(s), c, toy.model, toy.vocab);
    const DecodeResult d = decode(r.stream, toy.model, toy.vocab);
    const Eigen::MatrixXd floor =
        unflatten(toy.model.autoencoder.decoder * flatten(r.z_bar), toy.model.pixel_rows,
                  toy.model.pixel_cols);
    const double gap = std::fabs(mse(s.pixels, d.reconstruction) - mse(s.pixels, floor));
    worst = std::max(worst, gap);
    if (!(d.chain_end == r.chain_end) || !(d.latent == r.latent) || gap > 1e-9 ||
        !d.report.trailer_verified) {
      ++failures;
    }
  }
  return {failures == 0, "seeds=100 dim=64 T=64 max_mse_gap=" + fmt("%.3g", worst) +
                             " failures=" + std::to_string(failures)};
}

Outcome conditioning_benefit() {
  const Toy toy;
  const int n = 500;
  std::vector<double> with(n), without(n), diff(n);
  for (int i = 0; i < n; ++i) {
    PipelineConfig c;
    c.schedule = 1;
    c.coded_steps = 10;
    c.seed = static_cast<uint64_t>(i);
    const ToySample s = toy.sample(20260005, static_cast<uint64_t>(i));
    with[i] = static_cast<double>(
        encode(s.pixels, with_tag(s), c, toy.model, toy.vocab).report.implicit_bits);
    without[i] = static_cast<double>(
        encode(s.pixels, Condition{}, c, toy.model, toy.vocab).report.implicit_bits);
    diff[i] = without[i] - with[i];
  }
  const Stat w = summarize(with), u = summarize(without), d = summarize(diff);
  const double t = d.mean / d.se;
  const double pv = t_upper_p(t, n - 1);
  const double saving = 1.0 - w.mean / u.mean;
  return {saving >= 0.05 && pv < 0.01,
          "cond=" + fmt("%.1f", w.mean) + " uncond=" + fmt("%.1f", u.mean) +
              " saving=" + fmt("%.2f%%", 100 * saving) + " t=" + fmt("%.2f", t) +
              " p=" + fmt("%.3g", pv)};
}

std::vector<Sample> toy_batch(const Toy& toy, uint64_t seed, int n) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) {
    const ToySample s = toy.sample(seed, static_cast<uint64_t>(i));
    out.push_back({s.pixels, with_tag(s)});
  }
  return out;
}

Outcome rate_monotonicity() {
  const Toy toy;
  PipelineConfig c;
  c.schedule = 0;
  c.tau = 0;
  const auto rows = rate_sweep(toy_batch(toy, 20260006, 500), {0, 8, 16, 32, 64}, c,
                               toy.model, toy.vocab);
  std::string detail;
  for (const auto& r : rows) {
    detail += "te" + std::to_string(r.coded_steps) + ":" + fmt("%.1f", r.bits.mean) + "b/" +
              fmt("%.4f", r.mse.mean) + " ";
  }
  return {bits_strictly_increasing(rows) && mse_nonincreasing(rows), detail};
}

Outcome tradeoff_monotonicity() {
  const Toy toy;
  const auto batch = toy_batch(toy, 20260007, 200);
  bool pass = true;
  std::string detail;
  for (int te : {4, 16}) {
    PipelineConfig c;
    c.schedule = 0;
    c.coded_steps = te;
    const auto rows = distortion_curve(batch, {0.0, 1.0}, c, toy.model, toy.vocab);
    const double gap = std::fabs(rows[0].bits.mean - rows[1].bits.mean) /
                       std::max(rows[0].bits.mean, rows[1].bits.mean);
    pass &= rows[0].mse.mean < rows[1].mse.mean && gap < 0.10;
    detail += "te" + std::to_string(te) + ": mse " + fmt("%.4f", rows[0].mse.mean) + "<" +
              fmt("%.4f", rows[1].mse.mean) + " bits_gap=" + fmt("%.2f%% ", 100 * gap);
  }
  return {pass, detail};
}

Outcome tag_codec() {
  std::mt19937_64 rng(20260008);
  const size_t sizes[] = {2, 100, 4096, 4449};
  size_t length_errors = 0, round_trip_errors = 0;
  for (size_t vocab : sizes) {
    const int width = static_cast<int>(std::ceil(std::log2(static_cast<double>(vocab))));
    for (int k = 0; k <= 255; ++k) {
      TagPrompt p;
      for (int j = 0; j < k; ++j) p.indices.push_back(static_cast<int>(rng() % vocab));
      BitWriter w;
      const size_t bits = tag_encode(p, vocab, w);
      if (bits != static_cast<size_t>(8 + k * width) || w.bit_count() != bits) ++length_errors;
    }
  }
  for (int i = 0; i < 10000; ++i) {
    const size_t vocab = sizes[rng() % 4];
    TagPrompt p;
    const int k = static_cast<int>(rng() % 256);
    for (int j = 0; j < k; ++j) p.indices.push_back(static_cast<int>(rng() % vocab));
    BitWriter w;
    tag_encode(p, vocab, w);
    BitReader r(w.bytes(), w.bit_count());
    if (!(tag_decode(r, vocab) == p) || !r.at_end()) ++round_trip_errors;
  }
  return {length_errors == 0 && round_trip_errors == 0,
          "length_errors=" + std::to_string(length_errors) +
              " round_trip_errors=" + std::to_string(round_trip_errors) + " of 10000"};
}

// Decoder of a single-tile stream rebuilt on the whole latent without the
// tiling layer: full prior, unsplit condition, no crop or merge.
Eigen::MatrixXd untiled_reconstruction(const EncodeResult& r, const DecodeResult& d,
                                       const Condition& cond, const PipelineConfig& cfg,
                                       const CodecModel& model) {
  const PipelineConfig c = cfg.resolved();
  const NoiseSchedule sched = schedule_by_index(c.schedule);
  const int T = sched.steps();
  const Block256 key = expand_seed(c.seed);
  Condition full;
  full.tags = cond.tags;
  if (full.tags.size() > static_cast<size_t>(c.tiles.tag_cap)) full.tags.resize(c.tiles.tag_cap);
  full.latent_hint = latent_hint(quantize(block_average(r.z_bar), c.latent_step),
                                 model.latent_rows, model.latent_cols);
  const MixtureDenoiser den(model.prior, sched);
  Eigen::VectorXd z;
  int s;
  if (c.coded_steps == 0) {
    z = simulate(1, Gaussian::isotropic(Eigen::VectorXd::Zero(model.prior.dim()), 1.0),
                 free_step_sampler(key, 0, T));
    s = T;
  } else {
    z = d.chain_end[0];
    s = T - c.coded_steps + 1;
  }
  for (int t = s - 1; t >= 1; --t) {
    z = simulate(1, reverse_kernel(den, z, t, full, sched), free_step_sampler(key, 0, t));
  }
  const Eigen::VectorXd latent = final_mean(den, z, full, sched);
  return unflatten(model.autoencoder.decoder * latent, model.pixel_rows, model.pixel_cols);
}

Outcome tiling() {
  std::mt19937_64 rng(20260009);
  size_t normalization_errors = 0, geometries = 0;
  double worst_constant = 0;
  for (int g = 0; g < 500; ++g) {
    const int rows = 1 + static_cast<int>(rng() % 40), cols = 1 + static_cast<int>(rng() % 40);
    const int tile = 1 + static_cast<int>(rng() % 16);
    const int overlap = static_cast<int>(rng() % tile);
    const double sigma = 0.1 + 0.5 * static_cast<double>(rng() % 1000) / 1000;
    const TileGrid grid = make_grid(rows, cols, tile, overlap);
    const auto masks = grid_masks(grid, sigma);
    std::vector<Eigen::MatrixXd> ones, consts;
    const double value = std::ldexp(static_cast<double>(rng() % 2001) - 1000.0, -3) + 0.1;
    for (size_t i = 0; i < grid.tiles.size(); ++i) {
      ones.push_back(Eigen::MatrixXd::Ones(grid.tile_rows(i), grid.tile_cols(i)));
      consts.push_back(Eigen::MatrixXd::Constant(grid.tile_rows(i), grid.tile_cols(i), value));
    }
    // Normalized weights sum to exactly one where every cell is covered.
    const Eigen::MatrixXd w = merge_weights(grid, masks);
    if (!(w.array() > 0).all() || merge(ones, grid, masks) != Eigen::MatrixXd::Ones(rows, cols)) {
      ++normalization_errors;
    }
    const double err =
        (merge(consts, grid, masks).array() - value).abs().maxCoeff() / std::fabs(value);
    worst_constant = std::max(worst_constant, err);
    ++geometries;
  }

  const Toy toy;
  size_t mismatches = 0, decodes = 0;
  for (int te : {0, 5}) {
    for (uint64_t i = 0; i < 3; ++i) {
      PipelineConfig c;
      c.schedule = 2;
      c.coded_steps = te;
      c.seed = 77 + i;
      c.tiles.tile_size = 8;
      c.tiles.overlap = 4;
      const ToySample s = toy.sample(20260010, i);
      const Condition cond = with_tag(s);
      const EncodeResult r = encode(s.pixels, cond, c, toy.model, toy.vocab);
      const DecodeResult d = decode(r.stream, toy.model, toy.vocab);
      if (r.report.tiles != 1 ||
          untiled_reconstruction(r, d, cond, c, toy.model) != d.reconstruction) {
        ++mismatches;
      }
      ++decodes;
    }
  }
  return {normalization_errors == 0 && worst_constant <= 1e-12 && mismatches == 0,
          "geometries=" + std::to_string(geometries) +
              " normalization_errors=" + std::to_string(normalization_errors) +
              " constant_err=" + fmt("%.3g", worst_constant) +
              " untiled_mismatches=" + std::to_string(mismatches) + "/" +
              std::to_string(decodes)};
}

// Child exit codes of one fuzz decode.
constexpr int kChildCodecError = 10;
constexpr int kChildHashChanged = 11;
constexpr int kChildHashSame = 12;
constexpr int kChildOtherError = 13;

Outcome robustness() {
  const Toy toy;
  const ToySample s = toy.sample(20260011, 0);
  PipelineConfig c;
  c.schedule = 2;
  c.coded_steps = 8;
  c.seed = 5;
  c.tiles.tile_size = 6;
  c.tiles.overlap = 2;
  const EncodeResult r = encode(s.pixels, with_tag(s), c, toy.model, toy.vocab);
  const uint64_t clean_hash = decode(r.stream, toy.model, toy.vocab).report.content_hash;
  std::mt19937_64 rng(20260012);
  int codec_errors = 0, changed = 0, same = 0, other = 0, crashes = 0, hangs = 0;
  std::fflush(stdout);
  for (int i = 0; i < 1000; ++i) {
    std::vector<uint8_t> bad = r.stream;
    const size_t bit = rng() % (bad.size() * 8);
    bad[bit / 8] ^= static_cast<uint8_t>(0x80u >> (bit % 8));
    const pid_t pid = fork();
    if (pid == 0) {
      int code;
      try {
        const DecodeResult d = decode(bad, toy.model, toy.vocab);
        code = d.report.content_hash != clean_hash ? kChildHashChanged : kChildHashSame;
      } catch (const CodecError&) {
        code = kChildCodecError;
      } catch (...) {
        code = kChildOtherError;
      }
      _exit(code);
    }
    int status = 0;
    const auto start = std::chrono::steady_clock::now();
    bool done = false;
    while (!done) {
      const pid_t w = waitpid(pid, &status, WNOHANG);
      if (w == pid) {
        done = true;
      } else if (std::chrono::steady_clock::now() - start > std::chrono::seconds(10)) {
        kill(pid, SIGKILL);
        waitpid(pid, &status, 0);
        ++hangs;
        break;
      } else {
        std::this_thread::sleep_for(std::chrono::microseconds(200));
      }
    }
    if (!done) continue;
    if (!WIFEXITED(status)) {
      ++crashes;
      continue;
    }
    switch (WEXITSTATUS(status)) {
      case kChildCodecError: ++codec_errors; break;
      case kChildHashChanged: ++changed; break;
      case kChildHashSame: ++same; break;
      default: ++other; break;
    }
  }
  return {same == 0 && other == 0 && crashes == 0 && hangs == 0,
          "flips=1000 codec_errors=" + std::to_string(codec_errors) +
              " hash_changed=" + std::to_string(changed) + " hash_same=" +
              std::to_string(same) + " other_errors=" + std::to_string(other) +
              " crashes=" + std::to_string(crashes) + " hangs=" + std::to_string(hangs)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"pfr_exactness", 120, pfr_exactness},
      {"pfr_codelength_bound", 600, pfr_codelength},
      {"step_kl_accounting", 300, accounting},
      {"lossless_chain", 300, lossless_chain},
      {"conditioning_benefit", 600, conditioning_benefit},
      {"rate_monotonicity", 900, rate_monotonicity},
      {"tradeoff_monotonicity", 900, tradeoff_monotonicity},
      {"tag_codec", 60, tag_codec},
      {"tiling", 120, tiling},
      {"robustness", 600, robustness},
  };
  int failed = 0, ran = 0;
  for (const Criterion& c : criteria) {
    bool selected = argc < 2;
    for (int a = 1; a < argc; ++a) selected |= std::string(c.name).find(argv[a]) != std::string::npos;
    if (!selected) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.pass && secs <= c.budget_seconds;
    if (!pass) ++failed;
    std::printf("%s %s (%s; %.1f s of %.0f s)\n", pass ? "PASS" : "FAIL", c.name,
                o.detail.c_str(), secs, c.budget_seconds);
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
