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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "otaro/bit_width.hpp"
#include "otaro/bps.hpp"
#include "otaro/laa.hpp"
#include "otaro/models.hpp"

namespace otaro {

enum class StrategyKind { otaro, fp_baseline, fixed, uniform };

struct Strategy {
  StrategyKind kind = StrategyKind::otaro;
  /// Only for `fixed`.
  std::optional<BitWidthConfig> fixed_width;

  /// "otaro", "fp", "uniform", or "fixed:E5M4".
  static Strategy parse(std::string_view text);
  std::string name() const;
};

struct TrainConfig {
  double eta = 1e-5;
  std::size_t epochs = 1;
  double lambda = 5.0;
  std::size_t delay = 10;
  BitWidthSet widths = BitWidthSet::standard();
  std::vector<BitWidthConfig> low_set = AccumulatorState::default_low_set();
  std::uint64_t seed = 0;
  double beta = 0.9;
  LossEstimate loss_estimate = LossEstimate::ema;
  /// Route low-set gradients through delayed accumulation. Unset means on
  /// for otaro and fixed, off for the uniform-sampling baseline.
  std::optional<bool> use_laa;
  bool average_accumulation = false;
  /// Abort once a batch loss exceeds this multiple of the first batch loss.
  double divergence_factor = 1e3;
  /// Evaluate every width on the eval stream after each epoch.
  bool evaluate_each_epoch = true;
  Strategy strategy;
};

/// Everything that happened on one batch, in pipeline order.
struct BatchEvent {
  std::uint64_t t = 0;
  /// nullopt for the unquantized baseline.
  std::optional<BitWidthConfig> width;
  std::size_t width_index = 0;
  double loss = 0.0;
  /// Scores used for the selection (empty during warm-up and for non-bandit strategies).
  std::vector<double> scores;
  /// L_b after this batch's report; NaN for widths not yet reported.
  std::vector<double> loss_estimates;
  /// Accumulation counter i after this batch.
  std::size_t accumulation_counter = 0;
  bool updated = false;
  /// Number of batch gradients in the applied update (0 when deferred).
  std::size_t update_batches = 0;
};

struct StepOutcome {
  double loss;
  GradientList gradient;
};

/// The per-batch pipeline: select a width, compute loss and gradient there,
/// route the gradient through the accumulator, and hand any resulting
/// update to the caller. Independent of any particular model.
class TrainingSchedule {
 public:
  using ComputeFn = std::function<StepOutcome(const std::optional<BitWidthConfig>&)>;
  using ApplyFn = std::function<void(const GradientList&)>;

  explicit TrainingSchedule(const TrainConfig& config);

  BatchEvent run_batch(const ComputeFn& compute, const ApplyFn& apply);
  /// Flushes a partial accumulation; returns how many batches it held.
  std::size_t finish(const ApplyFn& apply);

  const ScheduleState& scheduler() const noexcept { return scheduler_; }
  const AccumulatorState& accumulator() const noexcept { return accumulator_; }

 private:
  Strategy strategy_;
  bool use_laa_;
  ScheduleState scheduler_;
  AccumulatorState accumulator_;
};

struct WidthEvaluation {
  BitWidthConfig width;
  double mean_loss;
  /// exp(mean cross-entropy); character model only.
  std::optional<double> perplexity;
};

struct TrainResult {
  ToyModel model;
  std::vector<BatchEvent> events;
  /// One row per epoch, one entry per configured width.
  std::vector<std::vector<WidthEvaluation>> epoch_evaluations;
  std::size_t flushed_batches = 0;
};

/// Runs `config.epochs` passes over `train_data` (reshuffled each epoch with
/// `config.seed`). Bitwise reproducible for equal inputs. Throws
/// DivergenceError if the loss runs away.
TrainResult train(ToyModel model, const std::vector<Batch>& train_data,
                  const std::vector<Batch>& eval_data, const TrainConfig& config);

/// Mean loss of `model` at its current precision setting.
double evaluate(const ToyModel& model, const std::vector<Batch>& data);

/// Encodes the master weights once at the highest width, derives every other
/// width by mantissa truncation, and evaluates each.
std::vector<WidthEvaluation> evaluate_all_widths(const ToyModel& model,
                                                 const std::vector<Batch>& data,
                                                 const BitWidthSet& widths);

/// CSV: batch,width,loss,laa_counter,updated,update_batches,score_*,loss_*
void write_event_trace(std::ostream& out, const BitWidthSet& widths,
                       const std::vector<BatchEvent>& events);

/// CSV: epoch,width,mean_loss,perplexity
void write_evaluations(std::ostream& out,
                       const std::vector<std::vector<WidthEvaluation>>& rows);

}  // namespace otaro
