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

#include "otaro/bps.hpp"

#include <cmath>
#include <ostream>

#include "otaro/errors.hpp"

namespace otaro {

ScheduleState::ScheduleState(BitWidthSet widths_in, double lambda_in, double beta_in,
                             LossEstimate estimate_in)
    : widths(std::move(widths_in)),
      lambda(lambda_in),
      beta(beta_in),
      estimate(estimate_in),
      pulls(widths.size(), 0),
      losses(widths.size(), 0.0),
      reported(widths.size(), false) {
  if (!(lambda > 0.0)) throw InvalidArgument("exploration coefficient must be positive");
  if (!(beta >= 0.0 && beta < 1.0)) throw InvalidArgument("loss smoothing must lie in [0, 1)");
}

bool ScheduleState::warmed_up() const noexcept {
  for (auto p : pulls)
    if (p == 0) return false;
  return true;
}

double bps_score(double lambda, std::uint64_t t, std::uint64_t t_b, double loss) {
  if (t_b == 0) throw WarmupRequired("width has not been selected yet");
  if (t == 0) throw InvalidArgument("score needs at least one batch");
  return lambda * std::sqrt(std::log(static_cast<double>(t)) / static_cast<double>(t_b)) - loss;
}

double score(const ScheduleState& state, const BitWidthConfig& b) {
  const std::size_t i = state.widths.index_of(b);
  if (state.pulls[i] == 0) throw WarmupRequired(b.label() + " has not been selected yet");
  return bps_score(state.lambda, state.t, state.pulls[i], state.losses[i]);
}

Selection select(ScheduleState& state) {
  const std::uint64_t t_now = state.t + 1;
  for (std::size_t i = 0; i < state.widths.size(); ++i) {
    if (state.pulls[i] == 0) {
      state.t = t_now;
      ++state.pulls[i];
      return {i, state.widths[i], {}};
    }
  }
  std::vector<double> scores(state.widths.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = bps_score(state.lambda, t_now, state.pulls[i], state.losses[i]);
    if (scores[i] > scores[best]) best = i;
  }
  state.t = t_now;
  ++state.pulls[best];
  return {best, state.widths[best], std::move(scores)};
}

void report_loss(ScheduleState& state, const BitWidthConfig& b, double loss) {
  const std::size_t i = state.widths.index_of(b);
  if (!std::isfinite(loss)) throw NonFiniteError(i, "loss report for " + b.label());
  if (!state.reported[i] || state.estimate == LossEstimate::last) {
    state.losses[i] = loss;
    state.reported[i] = true;
    return;
  }
  state.losses[i] = state.beta * state.losses[i] + (1.0 - state.beta) * loss;
}

void write_schedule_trace(std::ostream& out, const BitWidthSet& widths,
                          const std::vector<ScheduleTraceRow>& rows) {
  out << "batch,selected";
  for (const auto& w : widths) out << ",score_" << w.label();
  for (const auto& w : widths) out << ",loss_" << w.label();
  out << '\n';
  const auto precision = out.precision(17);
  for (const auto& row : rows) {
    out << row.batch << ',' << widths[row.selected].label();
    for (std::size_t i = 0; i < widths.size(); ++i) {
      out << ',';
      if (i < row.scores.size() && !std::isnan(row.scores[i])) out << row.scores[i];
    }
    for (std::size_t i = 0; i < widths.size(); ++i) {
      out << ',';
      if (i < row.losses.size() && !std::isnan(row.losses[i])) out << row.losses[i];
    }
    out << '\n';
  }
  out.precision(precision);
}

}  // namespace otaro
