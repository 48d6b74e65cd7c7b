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
#include <optional>
#include <vector>

#include "otaro/bit_width.hpp"
#include "otaro/tensor.hpp"

namespace otaro {

/// One gradient tensor per model parameter tensor.
using GradientList = std::vector<Matrix>;

/// Delayed-update accumulator for low-precision batches.
///
/// Batches at a width in `low_set` add into one shared running sum; every
/// `delay`-th such batch releases the sum as a single update and resets.
/// Batches at other widths pass straight through and never touch the sum,
/// so an accumulation survives interleaved high-precision batches.
struct AccumulatorState {
  explicit AccumulatorState(std::size_t delay = 10,
                            std::vector<BitWidthConfig> low_set = default_low_set(),
                            bool average = false);

  static std::vector<BitWidthConfig> default_low_set() { return {{5, 4}, {5, 3}}; }

  std::size_t counter = 0;
  std::size_t delay;
  std::vector<BitWidthConfig> low_set;
  /// Divide the released sum by the number of accumulated batches.
  bool average;
  GradientList grad_sum;

  bool is_low(const BitWidthConfig& b) const;
};

struct UpdateDecision {
  enum class Action { apply, defer };

  Action action = Action::defer;
  /// Gradient to step with; empty when deferred.
  GradientList gradient;
  /// True when `gradient` is a released accumulation.
  bool accumulated = false;
  /// Number of low-precision batches folded into `gradient`.
  std::size_t batches = 0;

  bool applies() const noexcept { return action == Action::apply; }
};

UpdateDecision submit(AccumulatorState& state, const BitWidthConfig& b, GradientList grad);

/// Releases a partial accumulation (0 < counter < delay), if any.
std::optional<UpdateDecision> flush(AccumulatorState& state);

struct PerturbationTrialOptions {
  Eigen::Index dimension = 64;
  /// Standard deviation of each residual Y_i coordinate.
  double noise_scale = 1.0;
  /// Per-batch jitter on the clean gradient around its trial mean.
  double gradient_jitter = 0.1;
};

/// Monte-Carlo estimate of ||sum Y_i|| / ||sum grad_fp,i|| over `delay`
/// synthetic batches, averaged over `trials`. Decays like 1/sqrt(delay).
double perturbation_decay_trial(std::size_t delay, std::size_t trials, std::uint64_t seed,
                                const PerturbationTrialOptions& options = {});

}  // namespace otaro
