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
#include <optional>

#include "otaro/bit_width.hpp"
#include "otaro/tensor.hpp"

namespace otaro {

struct LinearGradients {
  Matrix weight;  ///< dL/dW, same shape as the master weights
  Matrix input;   ///< dL/dx
};

/// Bias-free linear layer y = x W^T with straight-through fake quantization.
///
/// Weights are stored out x in, so SEFP groups run along the input
/// dimension. The forward pass multiplies by Q(W, b); the backward pass
/// returns dL/dQ(W, b) as the master-weight gradient. Master weights are
/// never modified here.
class FakeQuantLinear {
 public:
  explicit FakeQuantLinear(Matrix weights, std::size_t group_size = 64);

  const Matrix& weights() const noexcept { return weights_; }
  Matrix& weights() noexcept { return weights_; }
  std::size_t group_size() const noexcept { return group_size_; }
  Eigen::Index in_features() const noexcept { return weights_.cols(); }
  Eigen::Index out_features() const noexcept { return weights_.rows(); }

  /// nullopt means unquantized (full working precision).
  void set_precision(std::optional<BitWidthConfig> config) { active_ = config; }
  const std::optional<BitWidthConfig>& precision() const noexcept { return active_; }

  /// Q(W, b), or W itself when unquantized.
  Matrix effective_weights() const;

  Matrix forward(const Matrix& x) const;
  LinearGradients backward(const Matrix& upstream, const Matrix& x) const;

 private:
  Matrix weights_;
  std::size_t group_size_;
  std::optional<BitWidthConfig> active_;
};

}  // namespace otaro
