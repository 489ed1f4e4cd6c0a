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

#include "dualrcc/tiling.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dualrcc {
namespace {

std::vector<int> axis_origins(int full, int tile, int overlap) {
  if (full <= tile) return {0};
  const int stride = tile - overlap;
  std::vector<int> origins;
  for (int o = 0;; o += stride) {
    if (o + tile >= full) {
      const int last = full - tile;
      if (origins.empty() || origins.back() != last) origins.push_back(last);
      break;
    }
    origins.push_back(o);
  }
  return origins;
}

Eigen::VectorXd mask_axis(int n, double sigma_fraction) {
  Eigen::VectorXd w(n);
  const double centre = 0.5 * (n - 1);
  const double sigma = sigma_fraction * n;
  for (int i = 0; i < n; ++i) {
    const double d = (i - centre) / sigma;
    w[i] = std::exp(-0.5 * d * d);
  }
  return w;
}

void check_masks(const TileGrid& grid, const std::vector<Eigen::MatrixXd>& masks) {
  if (masks.size() != grid.tiles.size()) {
    throw std::invalid_argument("merge: one mask per tile required");
  }
  for (size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].rows() != grid.tile_rows(i) || masks[i].cols() != grid.tile_cols(i)) {
      throw std::invalid_argument("merge: mask extent mismatch");
    }
  }
}

}  // namespace

TileGrid make_grid(int rows, int cols, int tile_size, int overlap) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("make_grid: empty shape");
  if (overlap < 0 || tile_size < 1 || overlap >= tile_size) {
    throw std::invalid_argument("make_grid: need 0 <= overlap < tile_size");
  }
  TileGrid grid{rows, cols, tile_size, overlap, {}};
  const auto ro = axis_origins(rows, tile_size, overlap);
  const auto co = axis_origins(cols, tile_size, overlap);
  for (int r : ro) {
    for (int c : co) {
      grid.tiles.push_back({r, c, std::min(rows, r + tile_size),
                            std::min(cols, c + tile_size)});
    }
  }
  return grid;
}

Eigen::MatrixXd gaussian_mask(int rows, int cols, double sigma_fraction) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("gaussian_mask: empty extent");
  if (!(sigma_fraction > 0.0)) {
    throw std::invalid_argument("gaussian_mask: sigma_fraction must be > 0");
  }
  const Eigen::MatrixXd m =
      mask_axis(rows, sigma_fraction) * mask_axis(cols, sigma_fraction).transpose();
  return m.cwiseMax(kMaskFloor);
}

std::vector<Eigen::MatrixXd> grid_masks(const TileGrid& grid, double sigma_fraction) {
  std::vector<Eigen::MatrixXd> masks;
  masks.reserve(grid.tiles.size());
  for (size_t i = 0; i < grid.tiles.size(); ++i) {
    masks.push_back(gaussian_mask(grid.tile_rows(i), grid.tile_cols(i), sigma_fraction));
  }
  return masks;
}

Eigen::MatrixXd merge_weights(const TileGrid& grid,
                              const std::vector<Eigen::MatrixXd>& masks) {
  check_masks(grid, masks);
  Eigen::MatrixXd den = Eigen::MatrixXd::Zero(grid.rows, grid.cols);
  for (size_t i = 0; i < grid.tiles.size(); ++i) {
    const CellRect& r = grid.tiles[i];
    den.block(r.row0, r.col0, grid.tile_rows(i), grid.tile_cols(i)) += masks[i];
  }
  return den;
}

Eigen::MatrixXd merge(const std::vector<Eigen::MatrixXd>& outputs,
                      const TileGrid& grid,
                      const std::vector<Eigen::MatrixXd>& masks) {
  check_masks(grid, masks);
  if (outputs.size() != grid.tiles.size()) {
    throw std::invalid_argument("merge: missing tile output");
  }
  Eigen::MatrixXd num = Eigen::MatrixXd::Zero(grid.rows, grid.cols);
  Eigen::MatrixXd den = Eigen::MatrixXd::Zero(grid.rows, grid.cols);
  Eigen::MatrixXi count = Eigen::MatrixXi::Zero(grid.rows, grid.cols);
  Eigen::MatrixXd last(grid.rows, grid.cols);
  for (size_t i = 0; i < grid.tiles.size(); ++i) {
    const CellRect& r = grid.tiles[i];
    const int h = grid.tile_rows(i), w = grid.tile_cols(i);
    if (outputs[i].rows() != h || outputs[i].cols() != w) {
      throw std::invalid_argument("merge: tile output extent mismatch");
    }
    num.block(r.row0, r.col0, h, w) += masks[i].cwiseProduct(outputs[i]);
    den.block(r.row0, r.col0, h, w) += masks[i];
    count.block(r.row0, r.col0, h, w).array() += 1;
    last.block(r.row0, r.col0, h, w) = outputs[i];
  }
  Eigen::MatrixXd out(grid.rows, grid.cols);
  for (Eigen::Index c = 0; c < grid.cols; ++c) {
    for (Eigen::Index r = 0; r < grid.rows; ++r) {
      if (count(r, c) == 0) throw std::invalid_argument("merge: uncovered cell");
      out(r, c) = count(r, c) == 1 ? last(r, c) : num(r, c) / den(r, c);
    }
  }
  return out;
}

std::vector<Condition> partition_condition(const Condition& cond,
                                           const TileGrid& grid, int tag_cap) {
  if (tag_cap < 0) throw std::invalid_argument("partition_condition: negative cap");
  if (!cond.tag_regions.empty() && cond.tag_regions.size() != cond.tags.size()) {
    throw std::invalid_argument("partition_condition: one region per tag required");
  }
  std::vector<Condition> out(grid.tiles.size());
  for (size_t i = 0; i < grid.tiles.size(); ++i) {
    const CellRect& tile = grid.tiles[i];
    Condition& c = out[i];
    for (size_t k = 0; k < cond.tags.size(); ++k) {
      if (static_cast<int>(c.tags.size()) >= tag_cap) break;
      const bool global = cond.tag_regions.empty() || !cond.tag_regions[k];
      if (global || cond.tag_regions[k]->intersects(tile)) {
        c.tags.push_back(cond.tags[k]);
      }
    }
    if (!cond.latent_hint) continue;
    LatentHint hint;
    hint.noise_variance = cond.latent_hint->noise_variance;
    const int width = tile.col1 - tile.col0;
    for (const auto& block : cond.latent_hint->blocks) {
      BlockObservation local{{}, block.value};
      bool inside = !block.cells.empty();
      for (int cell : block.cells) {
        const int r = cell / grid.cols, col = cell % grid.cols;
        if (r < tile.row0 || r >= tile.row1 || col < tile.col0 || col >= tile.col1) {
          inside = false;
          break;
        }
        local.cells.push_back((r - tile.row0) * width + (col - tile.col0));
      }
      if (inside) hint.blocks.push_back(std::move(local));
    }
    c.latent_hint = std::move(hint);
  }
  return out;
}

Eigen::MatrixXd crop(const Eigen::MatrixXd& full, const CellRect& r) {
  return full.block(r.row0, r.col0, r.row1 - r.row0, r.col1 - r.col0);
}

}  // namespace dualrcc
