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

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "otaro/bit_width.hpp"
#include "otaro/bps.hpp"
#include "otaro/container.hpp"
#include "otaro/grad_analysis.hpp"
#include "otaro/laa.hpp"
#include "otaro/sefp.hpp"
#include "otaro/tasks.hpp"
#include "otaro/tensor.hpp"
#include "otaro/trainer.hpp"

using namespace otaro;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Random group: normal values at a random binary scale, some exact zeros.
std::vector<double> random_groups(Rng& rng, std::size_t groups, std::size_t size) {
  std::vector<double> v(groups * size);
  for (std::size_t g = 0; g < groups; ++g) {
    const double scale = std::ldexp(1.0, static_cast<int>(rng.below(25)) - 12);
    for (std::size_t i = 0; i < size; ++i) {
      double x = rng.normal() * scale;
      if (rng.below(32) == 0) x = 0.0;
      v[g * size + i] = x;
    }
  }
  return v;
}

std::vector<double> decode(const SefpTensor& t) {
  std::vector<double> out(t.element_count());
  dequantize_into(t, out);
  return out;
}

// --- 1: codec round-trip bound ---------------------------------------------

Outcome codec_bound() {
  constexpr std::size_t kGroups = 100000, kSize = 64;
  Rng rng(1001);
  const auto values = random_groups(rng, kGroups, kSize);
  std::size_t violations = 0;
  for (int m = 3; m <= 8; ++m) {
    const SefpTensor t = quantize(values, {values.size()}, {5, m}, kSize);
    const auto back = decode(t);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const int e = t.unbiased_exponent(i / kSize);
      if (std::fabs(back[i] - values[i]) > std::ldexp(1.0, e - (m - 1))) ++violations;
    }
  }
  return {violations == 0, fmt("%zu violations over 1e5 groups x m=3..8", violations)};
}

// --- 2: truncation commutativity -------------------------------------------

std::size_t commutation_mismatches(const std::vector<double>& values, std::size_t group) {
  std::vector<SefpTensor> direct;
  for (int m = 3; m <= 8; ++m) direct.push_back(quantize(values, {values.size()}, {5, m}, group));
  std::size_t bad = 0;
  for (int hi = 4; hi <= 8; ++hi)
    for (int lo = 3; lo < hi; ++lo)
      if (truncate_precision(direct[hi - 3], {5, lo}) != direct[lo - 3]) ++bad;
  return bad;
}

Outcome truncation_commutes() {
  Rng rng(1002);
  std::size_t bad = commutation_mismatches(random_groups(rng, 100000, 64), 64);

  // Every 12-bit pattern k * 2^-11 on [0, 2), both signs, alone, in runs of
  // 64, and next to the largest pattern as group maximum.
  std::vector<double> sweep;
  for (int k = 0; k < 4096; ++k) sweep.push_back(std::ldexp(k, -11));
  std::vector<double> both = sweep;
  for (double x : sweep) both.push_back(-x);
  bad += commutation_mismatches(both, 64);
  bad += commutation_mismatches(both, 1);
  std::vector<double> paired;
  const double top = std::ldexp(4095.0, -11);
  for (double x : both) {
    paired.push_back(x);
    paired.push_back(std::signbit(x) ? -top : top);
  }
  bad += commutation_mismatches(paired, 2);
  return {bad == 0, fmt("%zu mismatching tensors over 15 width pairs", bad)};
}

// --- 3: bandit convergence -------------------------------------------------

Outcome bandit_converges() {
  constexpr std::uint64_t T = 10000, kWindow = 1000;
  const BitWidthSet widths = BitWidthSet::standard();
  ScheduleState state(widths, 5.0);
  Rng rng(1003);
  const std::size_t n = widths.size();
  std::size_t top_hits = 0;
  std::vector<double> delta_sum(n * n, 0.0);
  for (std::uint64_t t = 1; t <= T; ++t) {
    const Selection s = select(state);
    const int m = s.width.mantissa_bits();
    const double loss = 0.1 + 0.5 * (8 - m) + rng.normal(0.0, 0.01);
    if (t > T - kWindow) {
      if (s.index == 0) ++top_hits;
      for (std::size_t h = 0; h < n; ++h)
        for (std::size_t l = h + 1; l < n; ++l) delta_sum[h * n + l] += s.scores[h] - s.scores[l];
    }
    report_loss(state, s.width, loss);
  }
  double worst = INFINITY;
  for (std::size_t h = 0; h < n; ++h)
    for (std::size_t l = h + 1; l < n; ++l) worst = std::min(worst, delta_sum[h * n + l] / kWindow);
  const double share = static_cast<double>(top_hits) / kWindow;
  return {share >= 0.9 && worst > 0.0,
          fmt("top-width share %.3f, smallest mean score gap %.4g", share, worst)};
}

// --- 4: parity with fixed-precision training ---------------------------------

Outcome parity_with_fixed() {
  const TaskOptions opts = default_task_options(Architecture::char_lm);
  const PreparedTask task = prepare_task(opts);
  const BitWidthSet widths = BitWidthSet::standard();
  auto run = [&](const std::string& strategy) {
    TrainConfig cfg;
    cfg.strategy = Strategy::parse(strategy);
    cfg.eta = opts.finetune_lr;
    cfg.epochs = opts.finetune_epochs;
    cfg.seed = 11;
    cfg.evaluate_each_epoch = true;
    return train(task.model, task.data.train, task.data.eval, cfg).epoch_evaluations.back();
  };
  const auto otaro_eval = run("otaro");
  const auto uniform_eval = run("uniform");
  bool within = true;
  std::string per_width;
  double otaro_avg = 0.0, uniform_avg = 0.0;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const double fixed = run("fixed:" + widths[i].label())[i].mean_loss;
    const double ours = otaro_eval[i].mean_loss;
    const double rel = ours / fixed - 1.0;
    if (rel > 0.02) within = false;
    per_width += fmt(" %s%+.2f%%", widths[i].label().c_str(), 100.0 * rel);
    otaro_avg += ours / static_cast<double>(widths.size());
    uniform_avg += uniform_eval[i].mean_loss / static_cast<double>(widths.size());
  }
  return {within && otaro_avg < uniform_avg,
          fmt("vs fixed:%s; average %.4f vs uniform %.4f", per_width.c_str(), otaro_avg,
              uniform_avg)};
}

// --- 5: accumulation noise decay --------------------------------------------

Outcome accumulation_decay() {
  const double r100 = perturbation_decay_trial(100, 400, 1005);
  const double r1 = perturbation_decay_trial(1, 400, 1005);
  const double ratio = r100 / r1;
  return {ratio >= 0.05 && ratio <= 0.15, fmt("ratio %.4f over 400 trials", ratio)};
}

// --- 6: pipeline against a straight-line transcription -----------------------

struct Trace {
  std::vector<std::size_t> selected;
  std::vector<std::size_t> counter;
  std::vector<double> applied;  // NaN when no update
};

double scripted_loss(std::uint64_t t, int m) {
  return 0.2 * (8 - m) + 0.3 * std::sin(0.7 * static_cast<double>(t) + m);
}

Trace pipeline_trace(std::uint64_t batches) {
  TrainConfig cfg;
  cfg.strategy = Strategy::parse("otaro");
  TrainingSchedule schedule(cfg);
  Trace tr;
  for (std::uint64_t t = 1; t <= batches; ++t) {
    double applied = NAN;
    const BatchEvent ev = schedule.run_batch(
        [&](const std::optional<BitWidthConfig>& w) {
          return StepOutcome{scripted_loss(t, w->mantissa_bits()),
                             {Matrix::Constant(1, 1, static_cast<double>(t))}};
        },
        [&](const GradientList& g) { applied = g[0](0, 0); });
    tr.selected.push_back(ev.width_index);
    tr.counter.push_back(ev.accumulation_counter);
    tr.applied.push_back(applied);
  }
  return tr;
}

// Reference batch loop on plain arrays: score, select, report, accumulate, update.
Trace transcription_trace(std::uint64_t batches) {
  const int mantissas[] = {8, 7, 6, 5, 4, 3};
  const double lambda = 5.0, beta = 0.9;
  const std::size_t N = 10;
  std::size_t t_b[6] = {0}, i = 0;
  double L[6] = {0}, acc = 0.0;
  Trace tr;
  for (std::uint64_t t = 1; t <= batches; ++t) {
    std::size_t b = 0;
    if (t <= 6) {
      b = t - 1;
    } else {
      double best = -INFINITY;
      for (std::size_t k = 0; k < 6; ++k) {
        const double s = lambda * std::sqrt(std::log(static_cast<double>(t)) / t_b[k]) - L[k];
        if (s > best) best = s, b = k;
      }
    }
    ++t_b[b];
    const double loss = scripted_loss(t, mantissas[b]);
    L[b] = t_b[b] == 1 ? loss : beta * L[b] + (1 - beta) * loss;
    const double grad = static_cast<double>(t);
    double applied = NAN;
    if (mantissas[b] <= 4) {
      acc = i == 0 ? grad : acc + grad;
      ++i;
      if (i == N) {
        applied = acc;
        i = 0;
      }
    } else {
      applied = grad;
    }
    tr.selected.push_back(b);
    tr.counter.push_back(i);
    tr.applied.push_back(applied);
  }
  return tr;
}

Outcome pipeline_fidelity() {
  const Trace a = pipeline_trace(100), b = transcription_trace(100);
  std::size_t diff = 0, releases = 0, low = 0;
  for (std::size_t k = 0; k < 100; ++k) {
    const bool same_update = std::isnan(a.applied[k]) ? std::isnan(b.applied[k])
                                                      : a.applied[k] == b.applied[k];
    if (a.selected[k] != b.selected[k] || a.counter[k] != b.counter[k] || !same_update) ++diff;
    if (b.selected[k] >= 4) ++low;
    if (b.selected[k] >= 4 && !std::isnan(b.applied[k])) ++releases;
  }
  return {diff == 0 && releases > 0,
          fmt("%zu differing batches; %zu low-width batches, %zu releases", diff, low, releases)};
}

// --- 7: linear-map recovery ---------------------------------------------------

Outcome linear_map_recovery() {
  constexpr Eigen::Index N = 256, d = 32;
  constexpr double sigma = 0.1;
  Rng rng(1007);
  Eigen::MatrixXd g_fp = rng.normal_matrix(N, d);
  g_fp.rowwise() += Eigen::RowVectorXd(rng.normal_matrix(1, d));
  const Eigen::MatrixXd x0 = rng.normal_matrix(d, d);
  const LinearMapEstimate clean = estimate_linear_map({g_fp, g_fp * x0});
  const double rel = (clean.mapping - x0).norm() / x0.norm();

  const double bound = 3.0 * sigma / std::sqrt(static_cast<double>(N));
  std::vector<int> held(d, 0);
  for (int rep = 0; rep < 100; ++rep) {
    Rng noise(2000 + static_cast<std::uint64_t>(rep));
    const LinearMapEstimate est =
        estimate_linear_map({g_fp, g_fp * x0 + noise.normal_matrix(N, d, sigma)});
    for (Eigen::Index c = 0; c < d; ++c)
      if (std::fabs(est.residual_mean[c]) <= bound) ++held[c];
  }
  const int worst = *std::min_element(held.begin(), held.end());
  return {rel <= 1e-6 && worst >= 95,
          fmt("relative error %.3g; worst column within bound in %d/100 repetitions", rel, worst)};
}

// --- 8: sawtooth ----------------------------------------------------------

Outcome sawtooth_shape() {
  bool ok = true;
  std::string detail;
  for (int m = 3; m <= 8; ++m) {
    const SawtoothProfile p = sawtooth_profile(m, std::size_t{32} << m);
    const double expect = std::ldexp(1.0, -m);
    if (p.period != expect || p.peak_to_peak != expect) ok = false;
    detail += fmt(" m%d:%g/%g", m, p.period * (1 << m), p.peak_to_peak * (1 << m));
  }
  return {ok, "period/peak-to-peak in units of 2^-m:" + detail};
}

// --- 9: memory arithmetic -------------------------------------------------

Outcome memory_estimate() {
  const auto spec = DeviceModelSpec::from_json_file(fs::path(OTARO_CONFIG_DIR) / "llama3-8b.json");
  const double fp16 = estimate_memory(spec, std::nullopt).total_gib();
  const double e5m4 = estimate_memory(spec, BitWidthConfig(5, 4)).total_gib();
  const double bits = bits_per_element(BitWidthConfig(5, 4), 64);
  const bool ok = std::fabs(fp16 / 15.20 - 1) <= 0.05 && std::fabs(e5m4 / 4.77 - 1) <= 0.05 &&
                  bits == 5.078125;
  return {ok, fmt("fp16 %.3f GiB, E5M4 %.3f GiB, %.9g bits per weight", fp16, e5m4, bits)};
}

// --- 10: gradient structure across widths ----------------------------------

Outcome gradient_structure() {
  const PreparedTask task = prepare_task(default_task_options(Architecture::char_lm));
  std::vector<Batch> stream = task.data.train;
  stream.insert(stream.end(), task.data.eval.begin(), task.data.eval.end());
  stream.resize(100);
  const BitWidthSet widths = BitWidthSet::standard();  // index i holds m = 8 - i
  int ordered[3] = {0, 0, 0};                           // m = 5, 6, 7
  for (const auto& b : stream) {
    const CosineTable c = cross_width_cosine_table(task.model, b, widths);
    for (int m = 5; m <= 7; ++m) {
      const int i = 8 - m;
      if (c.cosine(i, i - 1) > c.cosine(i, i + 2)) ++ordered[m - 5];
    }
  }
  const Eigen::MatrixXd err = norm_errors(task.model, stream, widths);
  auto variance = [&](Eigen::Index col) {
    const Eigen::ArrayXd v = err.col(col).array();
    return (v - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
  };
  const double v8 = variance(0), v3 = variance(5);
  const bool ok = ordered[0] >= 80 && ordered[1] >= 80 && ordered[2] >= 80 && v3 > v8;
  return {ok, fmt("ordering held in %d/%d/%d of 100 batches (m=5/6/7); norm-error variance "
                  "%.3g at m=3 vs %.3g at m=8",
                  ordered[0], ordered[1], ordered[2], v3, v8)};
}

// --- 11: straight-through gradient --------------------------------------------

// Smallest |pre-activation| over the hidden layers.
double kink_margin(const ToyModel& model, const Batch& b) {
  double margin = INFINITY;
  Matrix act = b.x;
  for (std::size_t k = 0; k + 1 < model.layers().size(); ++k) {
    act = model.layers()[k].forward(act);
    margin = std::min(margin, act.cwiseAbs().minCoeff());
    act = act.cwiseMax(0.0);
  }
  return margin;
}

Outcome straight_through() {
  double worst = 0.0;
  std::size_t checked = 0, kinks = 0;
  // Dense context weights: with one-hot inputs, weights flushed to zero
  // leave pre-activations sitting exactly on the kink.
  auto char_batch = [](Rng& rng) {
    Batch b{rng.uniform_matrix(10, 10, 0.0, 1.0), Matrix::Zero(10, 5)};
    for (Eigen::Index r = 0; r < 10; ++r) b.y(r, static_cast<Eigen::Index>(rng.below(5))) = 1;
    return b;
  };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(3000 + seed);
    const BitWidthConfig width(5, 3 + static_cast<int>(seed % 6));
    ToyModel model = seed % 2 ? make_char_lm(2, 5, 6, rng, 8) : make_mlp_regressor(5, 7, rng, 8);
    model.set_precision(width);
    // Loss as a function of the quantized weights themselves.
    ToyModel ref = model;
    ref.set_precision(std::nullopt);
    for (std::size_t k = 0; k < ref.layers().size(); ++k)
      ref.layers()[k].weights() = model.layers()[k].effective_weights();

    // Draw samples whose hidden pre-activations stay clear of the ReLU kink.
    constexpr double h = 1e-6;
    Batch b;
    bool clear = false;
    for (int attempt = 0; attempt < 1000 && !clear; ++attempt) {
      b = seed % 2 ? char_batch(rng) : Batch{rng.normal_matrix(9, 5), rng.normal_matrix(9, 1)};
      clear = kink_margin(ref, b) > 1e-3;
    }
    if (!clear) ++kinks;
    const auto lg = model.loss_and_gradients(b);

    for (std::size_t k = 0; k < ref.layers().size(); ++k)
      for (Eigen::Index i = 0; i < ref.layers()[k].weights().size(); ++i) {
        ToyModel plus = ref, minus = ref;
        plus.layers()[k].weights().data()[i] += h;
        minus.layers()[k].weights().data()[i] -= h;
        const double fd = (plus.loss(b) - minus.loss(b)) / (2 * h);
        const double an = lg.gradients[k].data()[i];
        const double err = std::fabs(an) > 1e-6 ? oracle::relative_error(an, fd)
                                                : std::fabs(fd - an) / 1e-6;
        worst = std::max(worst, err);
        ++checked;
      }
  }
  return {worst <= 1e-4 && kinks == 0,
          fmt("worst relative error %.3g over %zu coordinates, 20 seeds; %zu seeds without clear samples",
              worst, checked, kinks)};
}

// --- 12: container round trip -----------------------------------------------

std::string bytes_of(const std::vector<NamedTensor>& ts) {
  std::ostringstream out(std::ios::binary);
  write_container(out, ts);
  return out.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome container_round_trip() {
  Rng rng(1012);
  std::size_t bad = 0;
  for (int k = 0; k < 1000; ++k) {
    const int m = 3 + k % 6;
    const auto rows = static_cast<Eigen::Index>(1 + rng.below(12));
    const auto cols = static_cast<Eigen::Index>(1 + rng.below(100));
    const std::size_t group = 1 + rng.below(96);
    const Matrix w = rng.normal_matrix(rows, cols, std::ldexp(1.0, static_cast<int>(rng.below(9)) - 4));
    const std::vector<NamedTensor> ts{{"t" + std::to_string(k), quantize(w, {5, m}, group)}};
    const std::string b = bytes_of(ts);
    std::istringstream in(b, std::ios::binary);
    const auto back = read_container(in);
    if (back != ts || bytes_of(back) != b) ++bad;
  }

  // Golden files, rebuilt from their documented values.
  const fs::path golden = OTARO_TEST_GOLDEN_DIR;
  std::size_t golden_bad = 0;
  if (read_file(golden / "empty.sefp") != bytes_of({})) ++golden_bad;
  const std::vector<double> small{1.5, 0.375, -0.25, 0.0};
  if (read_file(golden / "small_e5m3.sefp") != bytes_of({{"w", quantize(small, {4}, {5, 3})}}))
    ++golden_bad;
  std::vector<double> layer0;
  for (int k = 0; k < 15; ++k) layer0.push_back((k - 7) / 8.0 * (k % 3 ? 1.0 : 1.0 / 16));
  const std::vector<double> bias{-3.0, 1.0 / 1024};
  if (read_file(golden / "two_tensors_e5m4.sefp") !=
      bytes_of({{"layer0", quantize(layer0, {3, 5}, {5, 4}, 4)},
                {"bias", quantize(bias, {2}, {5, 4}, 4)}}))
    ++golden_bad;
  return {bad == 0 && golden_bad == 0,
          fmt("%zu of 1000 random containers differ; %zu of 3 golden files differ", bad,
              golden_bad)};
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds, 0 = none
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "codec round-trip bound", 10, codec_bound},
      {2, "truncation commutes with direct quantization", 0, truncation_commutes},
      {3, "bit-width bandit converges to the widest mantissa", 5, bandit_converges},
      {4, "once-for-all training matches fixed-width training", 600, parity_with_fixed},
      {5, "accumulated perturbation decays like 1/sqrt(N)", 0, accumulation_decay},
      {6, "training pipeline follows the reference batch loop", 0, pipeline_fidelity},
      {7, "least-squares recovery of the gradient map", 0, linear_map_recovery},
      {8, "quantization-error sawtooth period and range", 0, sawtooth_shape},
      {9, "memory estimate for the 8B model", 0, memory_estimate},
      {10, "gradient similarity across widths", 0, gradient_structure},
      {11, "straight-through gradient matches finite differences", 0, straight_through},
      {12, "container round trip and golden files", 0, container_round_trip},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0 && secs >= c.time_limit) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s limit", c.time_limit);
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
