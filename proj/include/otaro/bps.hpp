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
#include <vector>

#include "otaro/bit_width.hpp"

namespace otaro {

/// How the per-width loss estimate L_b tracks reported batch losses.
enum class LossEstimate { ema, last };

/// Bandit state for bit-width path search. Index i of `pulls` / `losses`
/// refers to `widths[i]`.
struct ScheduleState {
  explicit ScheduleState(BitWidthSet widths, double lambda = 5.0, double beta = 0.9,
                         LossEstimate estimate = LossEstimate::ema);

  BitWidthSet widths;
  double lambda;
  double beta;
  LossEstimate estimate;
  std::uint64_t t = 0;
  std::vector<std::uint64_t> pulls;
  std::vector<double> losses;
  std::vector<bool> reported;

  bool warmed_up() const noexcept;
};

/// lambda * sqrt(ln t / t_b) - L_b.
double bps_score(double lambda, std::uint64_t t, std::uint64_t t_b, double loss);

/// Score of `b` at the state's current batch count. Throws WarmupRequired
/// if `b` has never been selected.
double score(const ScheduleState& state, const BitWidthConfig& b);

struct Selection {
  std::size_t index;
  BitWidthConfig width;
  /// Scores evaluated for this batch (empty during warm-up).
  std::vector<double> scores;
};

/// Picks the width for the next batch and books the pull.
///
/// The first |B| calls visit every width once, highest mantissa first.
/// Afterwards the argmax score at t+1 wins, ties going to the wider mantissa.
Selection select(ScheduleState& state);

/// Folds a batch loss into L_b (EMA with `beta`, or the raw value). The first
/// report for a width initializes it directly.
void report_loss(ScheduleState& state, const BitWidthConfig& b, double loss);

struct ScheduleTraceRow {
  std::uint64_t batch;
  std::size_t selected;
  std::vector<double> scores;
  std::vector<double> losses;
};

/// CSV: batch,selected,score_<label>...,loss_<label>... Unscored cells are
/// left empty.
void write_schedule_trace(std::ostream& out, const BitWidthSet& widths,
                          const std::vector<ScheduleTraceRow>& rows);

}  // namespace otaro
