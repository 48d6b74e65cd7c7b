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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "otaro/bit_width.hpp"
#include "otaro/container.hpp"
#include "otaro/errors.hpp"
#include "otaro/grad_analysis.hpp"
#include "otaro/sefp.hpp"
#include "otaro/tasks.hpp"
#include "otaro/trainer.hpp"

namespace fs = std::filesystem;
using namespace otaro;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct UsageError : Error {
  using Error::Error;
};

Architecture parse_task(const std::string& s) {
  if (s == "mlp") return Architecture::mlp_regressor;
  if (s == "charlm") return Architecture::char_lm;
  throw UsageError("unknown task '" + s + "' (expected mlp or charlm)");
}

RoundingMode parse_rounding(const std::string& s) {
  if (s == "truncate") return RoundingMode::truncate;
  if (s == "nearest" || s == "nearest-even") return RoundingMode::nearest_even;
  throw UsageError("unknown rounding '" + s + "' (expected truncate or nearest)");
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot open " + p.string() + " for writing");
  return out;
}

// Writes to `path`, or stdout when empty.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
  } else {
    auto out = open_out(path);
    fn(out);
  }
}

// --- shared task flags --------------------------------------------------

struct TaskFlags {
  std::string task = "charlm";
  std::string corpus;
  std::optional<std::size_t> pretrain_epochs;
  std::optional<double> pretrain_lr;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> group_size;
  std::optional<long> hidden;
  std::string model;

  void attach(CLI::App* app) {
    app->add_option("--task", task, "mlp or charlm")->capture_default_str();
    app->add_option("--corpus", corpus, "Text file for the charlm task");
    app->add_option("--pretrain-epochs", pretrain_epochs, "Unquantized warm start epochs");
    app->add_option("--pretrain-lr", pretrain_lr, "Warm start learning rate");
    app->add_option("--batch-size", batch_size, "Batch size");
    app->add_option("--group-size", group_size, "SEFP group size");
    app->add_option("--hidden", hidden, "Hidden width");
    app->add_option("--model", model, "Load weights from a .sefp container instead of pre-training");
  }

  TaskOptions options() const {
    TaskOptions o = default_task_options(parse_task(task));
    if (!corpus.empty()) o.corpus = corpus;
    if (pretrain_epochs) o.pretrain_epochs = *pretrain_epochs;
    if (pretrain_lr) o.pretrain_lr = *pretrain_lr;
    if (batch_size) o.batch_size = *batch_size;
    if (group_size) o.group_size = *group_size;
    if (hidden) o.hidden = *hidden;
    if (!model.empty()) o.pretrain_epochs = 0;
    return o;
  }

  PreparedTask prepare() const {
    PreparedTask t = prepare_task(options());
    if (!model.empty()) {
      const auto tensors = read_container_file(model);
      auto& layers = t.model.layers();
      if (tensors.size() != layers.size())
        throw FormatError(FormatError::Kind::inconsistent,
                          "model file holds " + std::to_string(tensors.size()) +
                              " tensors, task expects " + std::to_string(layers.size()));
      for (std::size_t k = 0; k < layers.size(); ++k) {
        Matrix w = dequantize_matrix(tensors[k].tensor);
        if (w.rows() != layers[k].weights().rows() || w.cols() != layers[k].weights().cols())
          throw FormatError(FormatError::Kind::inconsistent,
                            "tensor '" + tensors[k].name + "' does not match the task layer shape");
        layers[k].weights() = std::move(w);
      }
    }
    return t;
  }
};

std::vector<NamedTensor> model_tensors(const ToyModel& model, const BitWidthConfig& width) {
  std::vector<NamedTensor> out;
  for (std::size_t k = 0; k < model.layers().size(); ++k)
    out.push_back({"layer" + std::to_string(k),
                   quantize(model.layers()[k].weights(), width, model.group_size())});
  return out;
}

// --- subcommands ----------------------------------------------------------

struct QuantizeCmd {
  std::string in, out, rounding = "truncate";
  int m = 8, e = 5;
  std::size_t group_size = 64;
  std::string name = "data";

  void attach(CLI::App& root) {
    auto* c = root.add_subcommand("quantize", "Raw float file to .sefp");
    c->add_option("--in", in, "Raw float input")->required();
    c->add_option("--out", out, ".sefp output")->required();
    c->add_option("--m", m, "Mantissa bits")->capture_default_str();
    c->add_option("--e", e, "Exponent bits")->capture_default_str();
    c->add_option("--group-size", group_size, "Elements per shared exponent")->capture_default_str();
    c->add_option("--rounding", rounding, "truncate or nearest")->capture_default_str();
    c->add_option("--name", name, "Tensor name")->capture_default_str();
    c->callback([this] { run(); });
  }

  void run() const {
    const BitWidthConfig cfg(e, m);
    const RoundingMode mode = parse_rounding(rounding);
    const auto raw = read_raw_floats(in);
    const std::vector<double> values(raw.begin(), raw.end());
    const NamedTensor t{name, quantize(std::span<const double>(values), {values.size()}, cfg,
                                       group_size, mode)};
    write_container_file(out, std::span(&t, 1));
  }
};

struct ConvertCmd {
  std::string in, out;
  int m = 3;

  void attach(CLI::App& root) {
    auto* c = root.add_subcommand("convert", "Truncate the mantissa planes of a .sefp file");
    c->add_option("--in", in, ".sefp input")->required();
    c->add_option("--m", m, "Target mantissa bits")->required();
    c->add_option("--out", out, ".sefp output")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    const auto tensors = read_container_file(in);
    if (tensors.empty()) {
      write_container_file(out, tensors);
      return;
    }
    const BitWidthConfig target(tensors.front().tensor.config.exponent_bits(), m);
    write_container_file(out, truncate_container(tensors, target));
  }
};

struct DequantizeCmd {
  std::string in, out;

  void attach(CLI::App& root) {
    auto* c = root.add_subcommand("dequantize", ".sefp to raw float file (tensors concatenated)");
    c->add_option("--in", in, ".sefp input")->required();
    c->add_option("--out", out, "Raw float output")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    std::vector<float> values;
    for (const auto& t : read_container_file(in)) {
      std::vector<double> buf(t.tensor.element_count());
      dequantize_into(t.tensor, buf);
      values.insert(values.end(), buf.begin(), buf.end());
    }
    write_raw_floats(out, values);
  }
};

struct TrainCmd {
  TaskFlags task;
  std::string strategy = "otaro", widths = "E5M8..E5M3", low_set = "E5M4,E5M3";
  std::string loss_estimate = "ema", out_dir = ".";
  double lambda = 5.0, beta = 0.9;
  std::optional<double> lr;
  std::optional<std::size_t> epochs;
  std::size_t delay = 10;
  std::uint64_t seed = 11;
  bool no_laa = false, with_laa = false, average = false;

  void attach(CLI::App& root) {
    auto* c = root.add_subcommand("train", "Fine-tune a toy model under a precision schedule");
    task.attach(c);
    c->add_option("--strategy", strategy, "otaro, fp, uniform or fixed:<label>")->capture_default_str();
    c->add_option("--widths", widths, "Bit-width set, range or list")->capture_default_str();
    c->add_option("--low-set", low_set, "Widths routed through delayed accumulation")
        ->capture_default_str();
    c->add_option("--lambda", lambda, "Exploration weight")->capture_default_str();
    c->add_option("--beta", beta, "Loss EMA factor")->capture_default_str();
    c->add_option("--loss-estimate", loss_estimate, "ema or last")->capture_default_str();
    c->add_option("--delay", delay, "Accumulation length N")->capture_default_str();
    c->add_option("--lr", lr, "Learning rate (default: task preset)");
    c->add_option("--epochs", epochs, "Fine-tuning epochs (default: task preset)");
    c->add_option("--seed", seed, "Shuffle seed")->capture_default_str();
    c->add_option("--out-dir", out_dir, "Directory for traces and the model")->capture_default_str();
    c->add_flag("--no-laa", no_laa, "Apply every gradient immediately");
    c->add_flag("--with-laa", with_laa, "Force delayed accumulation (default for otaro and fixed)");
    c->add_flag("--average-accumulation", average, "Divide released sums by their batch count");
    c->callback([this] { run(); });
  }

  void run() const {
    TrainConfig cfg;
    cfg.strategy = Strategy::parse(strategy);
    cfg.widths = BitWidthSet::parse(widths);
    cfg.low_set = BitWidthSet::parse(low_set).widths();
    cfg.lambda = lambda;
    cfg.beta = beta;
    if (loss_estimate == "ema")
      cfg.loss_estimate = LossEstimate::ema;
    else if (loss_estimate == "last")
      cfg.loss_estimate = LossEstimate::last;
    else
      throw UsageError("unknown loss estimate '" + loss_estimate + "'");
    cfg.delay = delay;
    cfg.seed = seed;
    if (no_laa && with_laa) throw UsageError("--no-laa and --with-laa are exclusive");
    if (no_laa) cfg.use_laa = false;
    if (with_laa) cfg.use_laa = true;
    cfg.average_accumulation = average;

    const TaskOptions opts = task.options();
    cfg.eta = lr.value_or(opts.finetune_lr);
    cfg.epochs = epochs.value_or(opts.finetune_epochs);
    const PreparedTask t = task.prepare();
    const TrainResult r = train(t.model, t.data.train, t.data.eval, cfg);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    const BitWidthSet& trace_widths = cfg.widths;
    {
      auto out = open_out(dir / "events.csv");
      write_event_trace(out, trace_widths, r.events);
    }
    {
      std::vector<ScheduleTraceRow> rows;
      const bool bandit = cfg.strategy.kind == StrategyKind::otaro;
      for (const auto& e : r.events)
        if (e.width)
          rows.push_back({e.t, trace_widths.index_of(*e.width), bandit ? e.scores : std::vector<double>{},
                          bandit ? e.loss_estimates : std::vector<double>{}});
      auto out = open_out(dir / "schedule.csv");
      write_schedule_trace(out, trace_widths, rows);
    }
    {
      auto out = open_out(dir / "eval.csv");
      write_evaluations(out, r.epoch_evaluations);
    }
    write_container_file(dir / "model.sefp", model_tensors(r.model, cfg.widths.highest()));

    if (!r.epoch_evaluations.empty()) {
      std::printf("%-6s %12s", "width", "eval_loss");
      if (opts.arch == Architecture::char_lm) std::printf(" %12s", "perplexity");
      std::printf("\n");
      for (const auto& e : r.epoch_evaluations.back()) {
        std::printf("%-6s %12.6f", e.width.label().c_str(), e.mean_loss);
        if (e.perplexity) std::printf(" %12.4f", *e.perplexity);
        std::printf("\n");
      }
    }
  }
};

struct AnalyzeCmd {
  TaskFlags task;
  std::string kind, out, widths = "E5M8..E5M3";
  int m = 3, layer = -1;
  std::size_t batches = 100, samples = 0, coords = 32;
  std::uint64_t seed = 5;

  void attach(CLI::App& root) {
    auto* c = root.add_subcommand("analyze", "Gradient and quantization-error diagnostics");
    c->add_option("kind", kind, "cosine, lsm, sawtooth or norms")
        ->required()
        ->check(CLI::IsMember({"cosine", "lsm", "sawtooth", "norms"}));
    task.attach(c);
    c->add_option("--widths", widths, "Bit-width set")->capture_default_str();
    c->add_option("--m", m, "Mantissa bits (lsm, sawtooth)")->capture_default_str();
    c->add_option("--layer", layer, "Layer index, negative from the end")->capture_default_str();
    c->add_option("--batches", batches, "Batches to analyze")->capture_default_str();
    c->add_option("--coords", coords, "Gradient coordinates tracked by lsm")->capture_default_str();
    c->add_option("--samples", samples, "Sawtooth grid points (default 32 * 2^m)");
    c->add_option("--seed", seed, "Coordinate sampling seed")->capture_default_str();
    c->add_option("--out", out, "CSV output (default stdout)");
    c->callback([this] { run(); });
  }

  std::vector<std::string> labels(const BitWidthSet& set) const {
    std::vector<std::string> out;
    for (const auto& w : set) out.push_back(w.label());
    return out;
  }

  std::vector<Batch> stream(const PreparedTask& t) const {
    std::vector<Batch> all = t.data.train;
    all.insert(all.end(), t.data.eval.begin(), t.data.eval.end());
    if (batches == 0 || batches > all.size())
      throw UsageError("--batches must lie in [1, " + std::to_string(all.size()) + "]");
    all.resize(batches);
    return all;
  }

  void run() const {
    if (kind == "sawtooth") {
      const std::size_t n = samples ? samples : (std::size_t{32} << m);
      const SawtoothProfile p = sawtooth_profile(m, n);
      emit(out, [&](std::ostream& os) {
        Eigen::MatrixXd table(p.grid.size(), 2);
        table << p.grid, p.error;
        write_matrix_csv(os, table, {"w", "error"});
      });
      std::fprintf(stderr, "period=%.17g peak_to_peak=%.17g\n", p.period, p.peak_to_peak);
      return;
    }

    const PreparedTask t = task.prepare();
    const BitWidthSet set = BitWidthSet::parse(widths);
    const auto data = stream(t);
    const CoordinateSelection all_coords{layer, {}};

    if (kind == "cosine") {
      Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(set.size(), set.size());
      Eigen::MatrixXd count = sum;
      for (const auto& b : data) {
        const CosineTable c = cross_width_cosine_table(t.model, b, set, all_coords);
        for (Eigen::Index i = 0; i < sum.rows(); ++i)
          for (Eigen::Index j = 0; j < sum.cols(); ++j)
            if (!std::isnan(c.cosine(i, j))) {
              sum(i, j) += c.cosine(i, j);
              count(i, j) += 1;
            }
      }
      const Eigen::MatrixXd mean = sum.cwiseQuotient(count);
      emit(out, [&](std::ostream& os) { write_matrix_csv(os, mean, labels(set), labels(set)); });
    } else if (kind == "norms") {
      const Eigen::MatrixXd err = norm_errors(t.model, data, set, all_coords);
      emit(out, [&](std::ostream& os) { write_matrix_csv(os, err, labels(set)); });
      for (Eigen::Index j = 0; j < err.cols(); ++j) {
        const auto col = err.col(j).array();
        const double var = (col - col.mean()).square().sum() / std::max<double>(1, col.size() - 1);
        std::fprintf(stderr, "%s mean=%.6g var=%.6g\n", set[static_cast<std::size_t>(j)].label().c_str(),
                     col.mean(), var);
      }
    } else {
      const BitWidthConfig w(set.highest().exponent_bits(), m);
      const auto sel = CoordinateSelection::sample(t.model, layer, coords, seed);
      const LinearMapEstimate est =
          estimate_linear_map(collect_gradient_pairs(t.model, data, w, data.size(), sel));
      emit(out, [&](std::ostream& os) {
        std::vector<std::string> cols;
        for (std::size_t i = 0; i < coords; ++i) cols.push_back("x" + std::to_string(i));
        write_matrix_csv(os, est.mapping, cols);
      });
      std::fprintf(stderr,
                   "width=%s rank=%ld condition=%.6g residual_rms=%.6g max_abs_residual_mean=%.6g\n",
                   w.label().c_str(), static_cast<long>(est.rank), est.condition,
                   std::sqrt(est.residual.squaredNorm() / static_cast<double>(est.residual.size())),
                   est.residual_mean.cwiseAbs().maxCoeff());
    }
  }
};

struct EstimateMemCmd {
  std::string spec, precision = "E5M4", kv_precision = "same";
  std::size_t group_size = 64;

  void attach(CLI::App& root) {
    auto* c = root.add_subcommand("estimate-mem", "Weights plus KV cache footprint");
    c->add_option("--spec", spec, "Model geometry JSON")->required();
    c->add_option("--precision", precision, "fp16 or E<e>M<m>")->capture_default_str();
    c->add_option("--group-size", group_size, "SEFP group size")->capture_default_str();
    c->add_option("--kv-precision", kv_precision, "same or fp16")->capture_default_str();
    c->callback([this] { run(); });
  }

  void run() const {
    const DeviceModelSpec s = DeviceModelSpec::from_json_file(spec);
    std::optional<BitWidthConfig> cfg;
    if (precision != "fp16") cfg = BitWidthConfig::parse(precision);
    KvPrecision kv;
    if (kv_precision == "same")
      kv = KvPrecision::same_as_weights;
    else if (kv_precision == "fp16")
      kv = KvPrecision::fp16;
    else
      throw UsageError("unknown kv precision '" + kv_precision + "'");
    const MemoryEstimate m = estimate_memory(s, cfg, group_size, kv);
    constexpr double gib = 1073741824.0;
    std::printf("precision,bits_per_weight,weight_gib,kv_gib,total_gib\n");
    std::printf("%s,%.9g,%.6f,%.6f,%.6f\n", precision.c_str(), bits_per_element(cfg, group_size),
                m.weight_bytes / gib, m.kv_bytes / gib, m.total_gib());
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-exponent quantization, once-for-all training and diagnostics"};
  app.require_subcommand(1);
  QuantizeCmd quantize_cmd;
  ConvertCmd convert_cmd;
  DequantizeCmd dequantize_cmd;
  TrainCmd train_cmd;
  AnalyzeCmd analyze_cmd;
  EstimateMemCmd estimate_cmd;
  quantize_cmd.attach(app);
  convert_cmd.attach(app);
  dequantize_cmd.attach(app);
  train_cmd.attach(app);
  analyze_cmd.attach(app);
  estimate_cmd.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumeric;
  } catch (const NonFiniteError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumeric;
  } catch (const ExponentOverflow& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
