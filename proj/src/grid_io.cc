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

#include "dualrcc/grid_io.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace dualrcc {
namespace {

struct Cursor {
  const std::vector<uint8_t>& data;
  const std::filesystem::path& path;
  size_t pos = 0;

  void need(size_t n) const {
    if (data.size() - pos < n) {
      throw IoError(path.string() + ": truncated at byte " + std::to_string(pos));
    }
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data[pos++]) << (8 * i);
    return v;
  }
  double f64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data[pos++]) << (8 * i);
    return std::bit_cast<double>(v);
  }
};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<uint8_t>& out, double d) {
  const auto v = std::bit_cast<uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

// Next whitespace-delimited PGM header token, skipping comments.
std::string pgm_token(const std::vector<uint8_t>& d, size_t& pos,
                      const std::filesystem::path& path) {
  for (;;) {
    while (pos < d.size() && std::isspace(d[pos])) ++pos;
    if (pos < d.size() && d[pos] == '#') {
      while (pos < d.size() && d[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string tok;
  while (pos < d.size() && !std::isspace(d[pos])) tok += static_cast<char>(d[pos++]);
  if (tok.empty()) throw IoError(path.string() + ": truncated PGM header");
  return tok;
}

int pgm_int(const std::string& tok, const std::filesystem::path& path) {
  try {
    size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad PGM header value '" + tok + "'");
  }
}

}  // namespace

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Eigen::MatrixXd read_pgm(const std::filesystem::path& path) {
  const auto d = read_file(path);
  size_t pos = 0;
  if (pgm_token(d, pos, path) != "P5") throw IoError(path.string() + ": not a P5 graymap");
  const int cols = pgm_int(pgm_token(d, pos, path), path);
  const int rows = pgm_int(pgm_token(d, pos, path), path);
  const int maxval = pgm_int(pgm_token(d, pos, path), path);
  if (maxval > 65535) throw IoError(path.string() + ": maxval above 65535");
  ++pos;  // single whitespace byte before the raster
  const size_t bps = maxval > 255 ? 2 : 1;
  const size_t need = static_cast<size_t>(rows) * cols * bps;
  if (pos > d.size() || d.size() - pos < need) {
    throw IoError(path.string() + ": truncated PGM raster");
  }
  Eigen::MatrixXd g(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      unsigned v = d[pos++];
      if (bps == 2) v = (v << 8) | d[pos++];
      g(r, c) = 2.0 * v / maxval - 1.0;
    }
  }
  return g;
}

void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& grid) {
  const std::string head = "P5\n" + std::to_string(grid.cols()) + " " +
                           std::to_string(grid.rows()) + "\n255\n";
  std::vector<uint8_t> out(head.begin(), head.end());
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      const double v = std::clamp(grid(r, c), -1.0, 1.0);
      out.push_back(static_cast<uint8_t>(std::lround((v + 1.0) * 127.5)));
    }
  }
  write_file(path, out);
}

Eigen::MatrixXd read_grid(const std::filesystem::path& path) {
  const auto d = read_file(path);
  Cursor cur{d, path};
  const uint32_t rows = cur.u32(), cols = cur.u32();
  if (rows == 0 || cols == 0 || rows > 65535 || cols > 65535) {
    throw IoError(path.string() + ": grid dimensions out of range");
  }
  cur.need(static_cast<size_t>(rows) * cols * 8);
  Eigen::MatrixXd g(rows, cols);
  for (uint32_t r = 0; r < rows; ++r) {
    for (uint32_t c = 0; c < cols; ++c) g(r, c) = cur.f64();
  }
  if (cur.pos != d.size()) throw IoError(path.string() + ": trailing bytes");
  return g;
}

void write_grid(const std::filesystem::path& path, const Eigen::MatrixXd& grid) {
  std::vector<uint8_t> out;
  put_u32(out, static_cast<uint32_t>(grid.rows()));
  put_u32(out, static_cast<uint32_t>(grid.cols()));
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) put_f64(out, grid(r, c));
  }
  write_file(path, out);
}

Eigen::MatrixXd read_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (in.gcount() == 2 && magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  return read_grid(path);
}

void write_output(const std::filesystem::path& path, const Eigen::MatrixXd& grid) {
  if (path.extension() == ".pgm") {
    write_pgm(path, grid);
  } else {
    write_grid(path, grid);
  }
}

DecoderMatrix read_decoder_matrix(const std::filesystem::path& path) {
  const auto d = read_file(path);
  Cursor cur{d, path};
  DecoderMatrix m;
  m.pixel_rows = static_cast<int>(cur.u32());
  m.pixel_cols = static_cast<int>(cur.u32());
  m.latent_rows = static_cast<int>(cur.u32());
  m.latent_cols = static_cast<int>(cur.u32());
  if (m.pixel_rows < 1 || m.pixel_cols < 1 || m.latent_rows < 1 || m.latent_cols < 1 ||
      m.pixel_rows > 65535 || m.pixel_cols > 65535 || m.latent_rows > 65535 ||
      m.latent_cols > 65535) {
    throw IoError(path.string() + ": decoder dimensions out of range");
  }
  const size_t rows = static_cast<size_t>(m.pixel_rows) * m.pixel_cols;
  const size_t cols = static_cast<size_t>(m.latent_rows) * m.latent_cols;
  if ((d.size() - 16) / 8 != rows * cols || (d.size() - 16) % 8 != 0) {
    throw IoError(path.string() + ": decoder payload size mismatch");
  }
  m.matrix.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (size_t r = 0; r < rows; ++r) {
    for (size_t c = 0; c < cols; ++c) m.matrix(r, c) = cur.f64();
  }
  return m;
}

void write_decoder_matrix(const std::filesystem::path& path, const DecoderMatrix& m) {
  if (m.matrix.rows() != static_cast<Eigen::Index>(m.pixel_rows) * m.pixel_cols ||
      m.matrix.cols() != static_cast<Eigen::Index>(m.latent_rows) * m.latent_cols) {
    throw std::invalid_argument("write_decoder_matrix: shape mismatch");
  }
  std::vector<uint8_t> out;
  put_u32(out, m.pixel_rows);
  put_u32(out, m.pixel_cols);
  put_u32(out, m.latent_rows);
  put_u32(out, m.latent_cols);
  for (Eigen::Index r = 0; r < m.matrix.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.matrix.cols(); ++c) put_f64(out, m.matrix(r, c));
  }
  write_file(path, out);
}

}  // namespace dualrcc
