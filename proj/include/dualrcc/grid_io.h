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

#ifndef DUALRCC_GRID_IO_H_
#define DUALRCC_GRID_IO_H_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace dualrcc {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<uint8_t>& bytes);

// Binary P5 graymap; samples map linearly from [0, maxval] to [-1, 1].
Eigen::MatrixXd read_pgm(const std::filesystem::path& path);
// Values are clamped to [-1, 1] and written with maxval 255.
void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& grid);

// u32 rows, u32 cols, then row-major float64, all little-endian.
Eigen::MatrixXd read_grid(const std::filesystem::path& path);
void write_grid(const std::filesystem::path& path, const Eigen::MatrixXd& grid);

// Picks the reader by content: "P5" magic or a raw grid.
Eigen::MatrixXd read_input(const std::filesystem::path& path);
// Picks the writer by extension: .pgm or raw grid.
void write_output(const std::filesystem::path& path, const Eigen::MatrixXd& grid);

// 16-byte header (u32 pixel_rows, pixel_cols, latent_rows, latent_cols)
// then the (pixels x latent) matrix row-major as float64, little-endian.
struct DecoderMatrix {
  int pixel_rows = 0;
  int pixel_cols = 0;
  int latent_rows = 0;
  int latent_cols = 0;
  Eigen::MatrixXd matrix;
};
DecoderMatrix read_decoder_matrix(const std::filesystem::path& path);
void write_decoder_matrix(const std::filesystem::path& path, const DecoderMatrix& d);

}  // namespace dualrcc

#endif  // DUALRCC_GRID_IO_H_
