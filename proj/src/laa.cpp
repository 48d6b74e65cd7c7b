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

#include "otaro/laa.hpp"

#include <algorithm>
#include <cmath>

#include "otaro/errors.hpp"

namespace otaro {

namespace {

void check_finite(const GradientList& grad) {
  std::size_t offset = 0;
  for (const auto& g : grad) {
    for (Eigen::Index i = 0; i < g.size(); ++i)
      if (!std::isfinite(g.data()[i]))
        throw NonFiniteError(offset + static_cast<std::size_t>(i), "gradient submitted to LAA");
    offset += static_cast<std::size_t>(g.size());
  }
}

UpdateDecision release(AccumulatorState& state) {
  UpdateDecision d;
  d.action = UpdateDecision::Action::apply;
  d.accumulated = true;
  d.batches = state.counter;
  d.gradient = std::move(state.grad_sum);
  if (state.average)
    for (auto& g : d.gradient) g /= static_cast<double>(state.counter);
  state.grad_sum.clear();
  state.counter = 0;
  return d;
}

}  // namespace

AccumulatorState::AccumulatorState(std::size_t delay_in, std::vector<BitWidthConfig> low_set_in,
                                   bool average_in)
    : delay(delay_in), low_set(std::move(low_set_in)), average(average_in) {
  if (delay == 0) throw InvalidArgument("delay step must be at least 1");
}

bool AccumulatorState::is_low(const BitWidthConfig& b) const {
  return std::find(low_set.begin(), low_set.end(), b) != low_set.end();
}

UpdateDecision submit(AccumulatorState& state, const BitWidthConfig& b, GradientList grad) {
  check_finite(grad);
  if (!state.is_low(b)) {
    UpdateDecision d;
    d.action = UpdateDecision::Action::apply;
    d.gradient = std::move(grad);
    d.batches = 1;
    return d;
  }
  if (state.counter == 0) {
    state.grad_sum = std::move(grad);
  } else {
    if (grad.size() != state.grad_sum.size())
      throw ShapeError("LAA: gradient list length changed mid-accumulation");
    for (std::size_t k = 0; k < grad.size(); ++k) {
      if (grad[k].rows() != state.grad_sum[k].rows() || grad[k].cols() != state.grad_sum[k].cols())
        throw ShapeError("LAA: gradient shape changed mid-accumulation");
      state.grad_sum[k] += grad[k];
    }
  }
  ++state.counter;
  if (state.counter == state.delay) return release(state);
  return {};
}

std::optional<UpdateDecision> flush(AccumulatorState& state) {
  if (state.counter == 0) return std::nullopt;
  return release(state);
}

double perturbation_decay_trial(std::size_t delay, std::size_t trials, std::uint64_t seed,
                                const PerturbationTrialOptions& options) {
  if (delay == 0 || trials == 0) throw InvalidArgument("delay and trials must be at least 1");
  Rng rng(seed);
  const Eigen::Index d = options.dimension;
  double total = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const Eigen::VectorXd mean = rng.normal_matrix(d, 1);
    Eigen::VectorXd fp_sum = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd noise_sum = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i < delay; ++i) {
      fp_sum += mean + rng.normal_matrix(d, 1, options.gradient_jitter);
      noise_sum += rng.normal_matrix(d, 1, options.noise_scale);
    }
    const double signal = fp_sum.norm();
    if (signal == 0.0) throw InvalidArgument("clean gradient stream sums to zero");
    total += noise_sum.norm() / signal;
  }
  return total / static_cast<double>(trials);
}

}  // namespace otaro
