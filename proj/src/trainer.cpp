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

#include "otaro/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "otaro/errors.hpp"
#include "otaro/sefp.hpp"

namespace otaro {

Strategy Strategy::parse(std::string_view text) {
  if (text == "otaro") return {StrategyKind::otaro, std::nullopt};
  if (text == "fp" || text == "fp-baseline") return {StrategyKind::fp_baseline, std::nullopt};
  if (text == "uniform") return {StrategyKind::uniform, std::nullopt};
  if (text.starts_with("fixed:"))
    return {StrategyKind::fixed, BitWidthConfig::parse(text.substr(6))};
  throw InvalidArgument("unknown strategy '" + std::string(text) + "'");
}

std::string Strategy::name() const {
  switch (kind) {
    case StrategyKind::otaro: return "otaro";
    case StrategyKind::fp_baseline: return "fp";
    case StrategyKind::uniform: return "uniform";
    case StrategyKind::fixed: return "fixed:" + fixed_width->label();
  }
  return "?";
}

namespace {

BitWidthSet schedule_widths(const TrainConfig& config) {
  if (config.strategy.kind != StrategyKind::fixed) return config.widths;
  if (!config.strategy.fixed_width) throw InvalidArgument("fixed strategy needs a width");
  return BitWidthSet({*config.strategy.fixed_width});
}

}  // namespace

TrainingSchedule::TrainingSchedule(const TrainConfig& config)
    : strategy_(config.strategy),
      use_laa_(config.use_laa.value_or(config.strategy.kind == StrategyKind::otaro ||
                                       config.strategy.kind == StrategyKind::fixed)),
      scheduler_(schedule_widths(config), config.lambda, config.beta, config.loss_estimate),
      accumulator_(config.delay, config.low_set, config.average_accumulation) {
  if (!(config.eta > 0.0)) throw InvalidArgument("learning rate must be positive");
}

BatchEvent TrainingSchedule::run_batch(const ComputeFn& compute, const ApplyFn& apply) {
  BatchEvent ev;
  switch (strategy_.kind) {
    case StrategyKind::fp_baseline:
      ev.t = ++scheduler_.t;
      break;
    case StrategyKind::uniform: {
      const std::size_t i = scheduler_.t % scheduler_.widths.size();
      ev.t = ++scheduler_.t;
      ++scheduler_.pulls[i];
      ev.width = scheduler_.widths[i];
      ev.width_index = i;
      break;
    }
    case StrategyKind::otaro:
    case StrategyKind::fixed: {
      Selection s = select(scheduler_);
      ev.t = scheduler_.t;
      ev.width = s.width;
      ev.width_index = s.index;
      ev.scores = std::move(s.scores);
      break;
    }
  }

  StepOutcome out = compute(ev.width);
  ev.loss = out.loss;
  if (ev.width) {
    report_loss(scheduler_, *ev.width, out.loss);
    ev.loss_estimates = scheduler_.losses;
    for (std::size_t i = 0; i < ev.loss_estimates.size(); ++i)
      if (!scheduler_.reported[i]) ev.loss_estimates[i] = std::numeric_limits<double>::quiet_NaN();
  }

  UpdateDecision decision;
  if (ev.width && use_laa_) {
    decision = submit(accumulator_, *ev.width, std::move(out.gradient));
  } else {
    decision.action = UpdateDecision::Action::apply;
    decision.gradient = std::move(out.gradient);
    decision.batches = 1;
  }
  if (decision.applies()) {
    apply(decision.gradient);
    ev.updated = true;
    ev.update_batches = decision.batches;
  }
  ev.accumulation_counter = accumulator_.counter;
  return ev;
}

std::size_t TrainingSchedule::finish(const ApplyFn& apply) {
  auto residue = flush(accumulator_);
  if (!residue) return 0;
  apply(residue->gradient);
  return residue->batches;
}

double evaluate(const ToyModel& model, const std::vector<Batch>& data) {
  if (data.empty()) throw InvalidArgument("evaluation stream is empty");
  double total = 0.0;
  for (const auto& b : data) total += model.loss(b);
  return total / static_cast<double>(data.size());
}

std::vector<WidthEvaluation> evaluate_all_widths(const ToyModel& model,
                                                 const std::vector<Batch>& data,
                                                 const BitWidthSet& widths) {
  std::vector<SefpTensor> master;
  for (const auto& layer : model.layers())
    master.push_back(quantize(layer.weights(), widths.highest(), layer.group_size()));

  ToyModel probe = model;
  probe.set_precision(std::nullopt);
  std::vector<WidthEvaluation> out;
  for (const auto& w : widths) {
    for (std::size_t k = 0; k < master.size(); ++k)
      probe.layers()[k].weights() = dequantize_matrix(truncate_precision(master[k], w));
    WidthEvaluation e{w, evaluate(probe, data), std::nullopt};
    if (model.architecture() == Architecture::char_lm) e.perplexity = std::exp(e.mean_loss);
    out.push_back(e);
  }
  return out;
}

TrainResult train(ToyModel model, const std::vector<Batch>& train_data,
                  const std::vector<Batch>& eval_data, const TrainConfig& config) {
  if (train_data.empty()) throw InvalidArgument("training stream is empty");
  const std::size_t total = config.epochs * train_data.size();
  if (config.strategy.kind == StrategyKind::otaro && total < config.widths.size())
    throw InvalidArgument("fewer batches than widths: warm-up does not fit");

  TrainingSchedule schedule(config);
  Rng rng(config.seed);
  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{model, {}, {}, 0};
  ToyModel& m = result.model;
  std::optional<double> initial_loss;

  const TrainingSchedule::ApplyFn apply = [&](const GradientList& g) {
    m.apply_update(g, config.eta);
  };

  result.events.reserve(total);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (const std::size_t idx : order) {
      const Batch& batch = train_data[idx];
      const TrainingSchedule::ComputeFn compute = [&](const std::optional<BitWidthConfig>& w) {
        m.set_precision(w);
        auto lg = m.loss_and_gradients(batch);
        if (!initial_loss) initial_loss = lg.loss;
        if (!std::isfinite(lg.loss) || lg.loss > config.divergence_factor * *initial_loss)
          throw DivergenceError("training diverged at batch " +
                                std::to_string(result.events.size() + 1) + ": loss " +
                                std::to_string(lg.loss) + " vs initial " +
                                std::to_string(*initial_loss));
        return StepOutcome{lg.loss, std::move(lg.gradients)};
      };
      result.events.push_back(schedule.run_batch(compute, apply));
    }
    if (config.evaluate_each_epoch && !eval_data.empty()) {
      m.set_precision(std::nullopt);
      result.epoch_evaluations.push_back(evaluate_all_widths(m, eval_data, config.widths));
    }
  }
  result.flushed_batches = schedule.finish(apply);
  m.set_precision(std::nullopt);
  if (result.flushed_batches > 0 && !result.epoch_evaluations.empty())
    result.epoch_evaluations.back() = evaluate_all_widths(m, eval_data, config.widths);
  return result;
}

void write_event_trace(std::ostream& out, const BitWidthSet& widths,
                       const std::vector<BatchEvent>& events) {
  out << "batch,width,loss,laa_counter,updated,update_batches";
  for (const auto& w : widths) out << ",score_" << w.label();
  for (const auto& w : widths) out << ",loss_" << w.label();
  out << '\n';
  const auto precision = out.precision(17);
  for (const auto& e : events) {
    out << e.t << ',' << (e.width ? e.width->label() : std::string("fp")) << ',' << e.loss << ','
        << e.accumulation_counter << ',' << (e.updated ? 1 : 0) << ',' << e.update_batches;
    // Fixed-width runs track a single width; align its column by label.
    for (int pass = 0; pass < 2; ++pass) {
      const auto& values = pass == 0 ? e.scores : e.loss_estimates;
      for (const auto& w : widths) {
        out << ',';
        if (values.empty()) continue;
        double v = std::numeric_limits<double>::quiet_NaN();
        if (values.size() == widths.size())
          v = values[widths.index_of(w)];
        else if (e.width && *e.width == w)
          v = values.front();
        if (!std::isnan(v)) out << v;
      }
    }
    out << '\n';
  }
  out.precision(precision);
}

void write_evaluations(std::ostream& out,
                       const std::vector<std::vector<WidthEvaluation>>& rows) {
  out << "epoch,width,mean_loss,perplexity\n";
  const auto precision = out.precision(17);
  for (std::size_t epoch = 0; epoch < rows.size(); ++epoch)
    for (const auto& e : rows[epoch]) {
      out << epoch + 1 << ',' << e.width.label() << ',' << e.mean_loss << ',';
      if (e.perplexity) out << *e.perplexity;
      out << '\n';
    }
  out.precision(precision);
}

}  // namespace otaro
