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

#include "otaro/fake_quant.hpp"

#include "otaro/sefp.hpp"

namespace otaro {

FakeQuantLinear::FakeQuantLinear(Matrix weights, std::size_t group_size)
    : weights_(std::move(weights)), group_size_(group_size) {
  if (group_size_ == 0) throw InvalidArgument("group size must be at least 1");
}

Matrix FakeQuantLinear::effective_weights() const {
  if (!active_) return weights_;
  return dequantize_matrix(quantize(weights_, *active_, group_size_));
}

Matrix FakeQuantLinear::forward(const Matrix& x) const {
  if (x.cols() != weights_.cols())
    throw ShapeError("linear forward: input has " + std::to_string(x.cols()) +
                     " features, layer expects " + std::to_string(weights_.cols()));
  return matmul(x, effective_weights().transpose());
}

LinearGradients FakeQuantLinear::backward(const Matrix& upstream, const Matrix& x) const {
  if (x.cols() != weights_.cols() || upstream.cols() != weights_.rows() ||
      upstream.rows() != x.rows())
    throw ShapeError("linear backward: upstream/input shapes do not match the layer");
  // dQ/dW = 1: the gradient w.r.t. the quantized weights is passed through.
  LinearGradients g;
  g.weight = matmul(upstream.transpose(), x);
  g.input = matmul(upstream, effective_weights());
  return g;
}

}  // namespace otaro
