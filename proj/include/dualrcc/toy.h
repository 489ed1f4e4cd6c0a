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

#ifndef DUALRCC_TOY_H_
#define DUALRCC_TOY_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dualrcc/explicit_branch.h"
#include "dualrcc/pipeline.h"

namespace dualrcc {

// Analytic test model: a stride-2 Gaussian-blur decoder over a latent grid
// and a mixture of zero-block-mean stripe patterns, so y-hat carries no
// information about the component.
struct ToyOptions {
  int latent_rows = 8;
  int latent_cols = 8;
  int components = 4;
  double amplitude = 1.0;
  double within_variance = 0.25;
  double blur = 1.0;
  double pixel_noise = 0.05;
};

// Pattern names: hstripe, vstripe, checker, hstripe4, vstripe4, checker4,
// const. Components of the default toy use them in that order.
const std::vector<std::string>& pattern_names();
Eigen::MatrixXd pattern(const std::string& name, int rows, int cols,
                        double amplitude);

// Pixels = 2x latent per axis.
Eigen::MatrixXd blur_decoder(int latent_rows, int latent_cols, double blur);

CodecModel make_model(Eigen::MatrixXd decoder, int latent_rows, int latent_cols,
                      int pixel_rows, int pixel_cols, MixtureModel prior);
CodecModel make_toy_model(const ToyOptions& opt = {});

// One entry per component, named after its pattern.
TagVocabulary toy_vocabulary(int components);

struct ToySample {
  Eigen::MatrixXd pixels;
  Eigen::MatrixXd latent;
  int component = 0;
};
ToySample sample_toy(const CodecModel& model, const ToyOptions& opt,
                     uint64_t seed, uint64_t index);

}  // namespace dualrcc

#endif  // DUALRCC_TOY_H_
