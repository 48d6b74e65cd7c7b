// Copyright 2026 The otaro Authors. All Rights Reserved.
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "otaro/bit_width.hpp"
#include "otaro/models.hpp"

namespace otaro {

/// Per-batch gradients stacked as rows: `fp` unquantized, `sefp` under fake
/// quantization, row i of both from the same batch.
struct GradientMatrixPair {
  Eigen::MatrixXd fp;
  Eigen::MatrixXd sefp;
};

/// Least-squares split G = G_fp X + Y.
struct LinearMapEstimate {
  Eigen::MatrixXd mapping;        ///< X, d x d
  Eigen::MatrixXd residual;       ///< Y, N x d
  Eigen::VectorXd residual_mean;  ///< column means of Y
  /// sigma_max / sigma_min of G_fp; infinite when rank deficient.
  double condition = 0.0;
  Eigen::Index rank = 0;
};

/// Solves min ||G - G_fp X||_F with a complete orthogonal decomposition, so
/// rank-deficient inputs get the minimum-norm X instead of failing.
LinearMapEstimate estimate_linear_map(const GradientMatrixPair& pair);

/// Which coordinates of which layer's weight gradient to track.
struct CoordinateSelection {
  /// Layer index; negative counts from the end (-1 = last layer).
  int layer = -1;
  /// Flattened row-major coordinates; empty means the whole tensor.
  std::vector<Eigen::Index> coordinates;

  /// `count` distinct coordinates of `layer`, drawn with `seed`.
  static CoordinateSelection sample(const ToyModel& model, int layer, std::size_t count,
                                    std::uint64_t seed);
};

/// Gradient of the selected coordinates at `width` (nullopt = unquantized).
Eigen::VectorXd flat_gradient(const ToyModel& model, const Batch& batch,
                              const std::optional<BitWidthConfig>& width,
                              const CoordinateSelection& selection);

/// Gradients with and without fake quantization at `width` on the first
/// `count` batches. The model is not updated.
GradientMatrixPair collect_gradient_pairs(const ToyModel& model, std::span<const Batch> data,
                                          const BitWidthConfig& width, std::size_t count,
                                          const CoordinateSelection& selection = {});

struct CosineTable {
  Eigen::MatrixXd cosine;
  /// Widths whose gradient vanished; their rows and columns hold NaN.
  std::vector<bool> zero_gradient;
};

/// Pairwise cosine similarity of the loss gradients at every width on one batch.
CosineTable cross_width_cosine_table(const ToyModel& model, const Batch& batch,
                                     const BitWidthSet& widths,
                                     const CoordinateSelection& selection = {});

/// ||grad_sefp|| - ||grad_fp|| per batch (rows) and width (columns).
Eigen::MatrixXd norm_errors(const ToyModel& model, std::span<const Batch> data,
                            const BitWidthSet& widths, const CoordinateSelection& selection = {});

struct SawtoothProfile {
  Eigen::VectorXd grid;
  Eigen::VectorXd error;
  double period = 0.0;
  double peak_to_peak = 0.0;
};

/// Samples the quantization-error term on [0, samples * 2^-(m+4)) and
/// measures its period (spacing of exact zeros) and peak-to-peak range.
/// Requires samples >= 16 * 2^m so the scan covers whole periods.
SawtoothProfile sawtooth_profile(int mantissa_bits, std::size_t samples);

/// CSV writers for external plotting.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& column_names,
                      const std::vector<std::string>& row_names = {});

}  // namespace otaro
