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

#include "dualrcc/toy.h"

#include <cmath>
#include <stdexcept>

#include "dualrcc/sampler.h"

namespace dualrcc {

const std::vector<std::string>& pattern_names() {
  static const std::vector<std::string> names = {
      "hstripe", "vstripe", "checker", "hstripe4", "vstripe4", "checker4", "const"};
  return names;
}

Eigen::MatrixXd pattern(const std::string& name, int rows, int cols,
                        double amplitude) {
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int sign;
      if (name == "hstripe") {
        sign = r % 2;
      } else if (name == "vstripe") {
        sign = c % 2;
      } else if (name == "checker") {
        sign = (r + c) % 2;
      } else if (name == "hstripe4") {
        sign = (r / 2) % 2;
      } else if (name == "vstripe4") {
        sign = (c / 2) % 2;
      } else if (name == "checker4") {
        sign = (r / 2 + c / 2) % 2;
      } else if (name == "const") {
        sign = 0;
      } else {
        throw std::invalid_argument("unknown pattern '" + name + "'");
      }
      m(r, c) = sign ? -amplitude : amplitude;
    }
  }
  return m;
}

Eigen::MatrixXd blur_decoder(int latent_rows, int latent_cols, double blur) {
  if (latent_rows < 1 || latent_cols < 1 || !(blur > 0.0)) {
    throw std::invalid_argument("blur_decoder: invalid arguments");
  }
  const int pr = 2 * latent_rows, pc = 2 * latent_cols;
  Eigen::MatrixXd d(pr * pc, latent_rows * latent_cols);
  for (int p = 0; p < pr; ++p) {
    for (int q = 0; q < pc; ++q) {
      for (int i = 0; i < latent_rows; ++i) {
        for (int j = 0; j < latent_cols; ++j) {
          const double dr = p - (2 * i + 0.5), dc = q - (2 * j + 0.5);
          d(p * pc + q, i * latent_cols + j) =
              std::exp(-(dr * dr + dc * dc) / (2 * blur * blur));
        }
      }
    }
  }
  return d;
}

CodecModel make_model(Eigen::MatrixXd decoder, int latent_rows, int latent_cols,
                      int pixel_rows, int pixel_cols, MixtureModel prior) {
  CodecModel m;
  m.latent_rows = latent_rows;
  m.latent_cols = latent_cols;
  m.pixel_rows = pixel_rows;
  m.pixel_cols = pixel_cols;
  m.autoencoder = make_autoencoder(std::move(decoder));
  m.prior = std::move(prior);
  m.validate();
  return m;
}

CodecModel make_toy_model(const ToyOptions& opt) {
  const auto& names = pattern_names();
  if (opt.components < 1 || opt.components > static_cast<int>(names.size())) {
    throw std::invalid_argument("toy: unsupported component count");
  }
  MixtureModel prior;
  for (int k = 0; k < opt.components; ++k) {
    prior.component_means.push_back(
        flatten(pattern(names[k], opt.latent_rows, opt.latent_cols, opt.amplitude)));
  }
  prior.component_weights = Eigen::VectorXd::Constant(opt.components, 1.0 / opt.components);
  prior.observation_variance = opt.within_variance;
  return make_model(blur_decoder(opt.latent_rows, opt.latent_cols, opt.blur),
                    opt.latent_rows, opt.latent_cols, 2 * opt.latent_rows,
                    2 * opt.latent_cols, std::move(prior));
}

TagVocabulary toy_vocabulary(int components) {
  const auto& names = pattern_names();
  std::vector<std::string> entries;
  for (int k = 0; k < components && k < static_cast<int>(names.size()); ++k) {
    entries.push_back(names[k]);
  }
  if (entries.size() < 2) entries.push_back("unused");
  return TagVocabulary(std::move(entries));
}

ToySample sample_toy(const CodecModel& model, const ToyOptions& opt, uint64_t seed,
                     uint64_t index) {
  const DeterministicSampler s(expand_seed(seed), index);
  const Eigen::VectorXd& w = model.prior.component_weights;
  const double u = s.uniform(0, 0, Domain::kFree);
  int k = 0;
  double acc = w[0];
  while (u >= acc && k + 1 < w.size()) acc += w[++k];
  const Eigen::Index dim = model.prior.dim();
  Eigen::VectorXd z = model.prior.component_means[k];
  const double sd = std::sqrt(model.prior.observation_variance);
  for (Eigen::Index i = 0; i < dim; ++i) z[i] += sd * s.normal(1, i, Domain::kFree);
  Eigen::VectorXd x = model.autoencoder.decoder * z;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] += opt.pixel_noise * s.normal(2, i, Domain::kFree);
  }
  return {unflatten(x, model.pixel_rows, model.pixel_cols),
          unflatten(z, model.latent_rows, model.latent_cols), k};
}

}  // namespace dualrcc
