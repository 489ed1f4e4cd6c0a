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

#ifndef DUALRCC_TILING_H_
#define DUALRCC_TILING_H_

#include <vector>

#include <Eigen/Dense>

#include "dualrcc/diffusion.h"

namespace dualrcc {

struct TileGrid {
  int rows = 0;
  int cols = 0;
  int tile_size = 0;
  int overlap = 0;
  std::vector<CellRect> tiles;  // row-major order

  int tile_rows(size_t i) const { return tiles[i].row1 - tiles[i].row0; }
  int tile_cols(size_t i) const { return tiles[i].col1 - tiles[i].col0; }
};

inline constexpr double kDefaultSigmaFraction = 0.3;
inline constexpr double kMaskFloor = 1e-4;

// Axes shorter than or equal to tile_size get a single full-length tile.
// Last tiles are shifted inward instead of padded.
TileGrid make_grid(int rows, int cols, int tile_size, int overlap);

// Separable Gaussian centred at ((rows-1)/2, (cols-1)/2) with standard
// deviation sigma_fraction * extent per axis, clamped below at kMaskFloor.
// Even extents therefore peak on the two middle cells.
Eigen::MatrixXd gaussian_mask(int rows, int cols,
                              double sigma_fraction = kDefaultSigmaFraction);

std::vector<Eigen::MatrixXd> grid_masks(const TileGrid& grid,
                                        double sigma_fraction);

// Sum of covering mask weights per cell.
Eigen::MatrixXd merge_weights(const TileGrid& grid,
                              const std::vector<Eigen::MatrixXd>& masks);

// Normalized overlap-add. Cells covered by one tile copy that tile's value.
Eigen::MatrixXd merge(const std::vector<Eigen::MatrixXd>& outputs,
                      const TileGrid& grid,
                      const std::vector<Eigen::MatrixXd>& masks);

// Splits a full-grid condition into per-tile conditions. Tags whose region
// misses the tile are dropped; tags without a region go everywhere; the
// remainder is truncated to `tag_cap` in input order. Latent-hint cells are
// global row-major indices; blocks lying entirely inside a tile are kept
// with tile-local indices. Region lists are not propagated.
std::vector<Condition> partition_condition(const Condition& cond,
                                           const TileGrid& grid, int tag_cap);

Eigen::MatrixXd crop(const Eigen::MatrixXd& full, const CellRect& r);

}  // namespace dualrcc

#endif  // DUALRCC_TILING_H_
