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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "otaro/fake_quant.hpp"
#include "otaro/laa.hpp"
#include "otaro/tensor.hpp"

namespace otaro {

enum class Architecture { mlp_regressor, char_lm };

std::string_view to_string(Architecture arch);

struct Batch {
  Matrix x;
  Matrix y;  ///< regression targets, or one-hot next-character targets
};

struct LossAndGradients {
  double loss;
  GradientList gradients;  ///< one per layer, shaped like the layer weights
};

/// Stack of fake-quantized linear layers with ReLU between them. The head
/// is mean squared error for the regressor and softmax cross-entropy for
/// the character model.
class ToyModel {
 public:
  ToyModel(Architecture arch, std::vector<FakeQuantLinear> layers);

  Architecture architecture() const noexcept { return arch_; }
  const std::vector<FakeQuantLinear>& layers() const noexcept { return layers_; }
  std::vector<FakeQuantLinear>& layers() noexcept { return layers_; }
  std::size_t group_size() const noexcept { return layers_.front().group_size(); }
  std::size_t parameter_count() const noexcept;

  /// Sets the fake-quantization width of every layer (nullopt = unquantized).
  void set_precision(std::optional<BitWidthConfig> config);

  Matrix logits(const Matrix& x) const;
  double loss(const Batch& batch) const;
  LossAndGradients loss_and_gradients(const Batch& batch) const;

  /// Plain SGD: W <- W - eta * g for every layer.
  void apply_update(const GradientList& gradient, double eta);

 private:
  Architecture arch_;
  std::vector<FakeQuantLinear> layers_;
};

/// inputs -> hidden -> 1, with He-normal initialization.
ToyModel make_mlp_regressor(Eigen::Index inputs, Eigen::Index hidden, Rng& rng,
                            std::size_t group_size = 64);

/// One-hot context window (context * vocab) -> hidden -> hidden -> vocab.
ToyModel make_char_lm(Eigen::Index context, Eigen::Index vocab, Eigen::Index hidden, Rng& rng,
                      std::size_t group_size = 64);

struct Dataset {
  std::vector<Batch> train;
  std::vector<Batch> eval;
  Eigen::Index input_dim = 0;
  Eigen::Index output_dim = 0;
  /// Character model only: sorted symbol inventory.
  std::string vocabulary;
};

/// Smooth synthetic regression on [-1, 1]^inputs plus a constant feature
/// (so the bias-free layers can model offsets).
Dataset make_regression_dataset(Eigen::Index inputs, std::size_t train_batches,
                                std::size_t eval_batches, std::size_t batch_size,
                                std::uint64_t seed);

/// Next-character prediction windows over `text`. The first
/// (1 - eval_fraction) of positions train, the rest evaluate; training
/// windows are shuffled with `seed` before batching.
Dataset make_char_dataset(std::string_view text, std::size_t context, std::size_t batch_size,
                          double eval_fraction, std::uint64_t seed);

std::string load_text(const std::filesystem::path& path);

}  // namespace otaro
