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

#include "otaro/grad_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "otaro/errors.hpp"
#include "otaro/sefp.hpp"
#include "otaro/tensor.hpp"

namespace otaro {

LinearMapEstimate estimate_linear_map(const GradientMatrixPair& pair) {
  const auto& fp = pair.fp;
  const auto& g = pair.sefp;
  if (fp.rows() != g.rows() || fp.cols() != g.cols())
    throw ShapeError("gradient matrices differ in shape");
  if (fp.rows() == 0 || fp.cols() == 0) throw InvalidArgument("gradient matrices are empty");
  if (fp.isZero(0.0)) throw InvalidArgument("unquantized gradients are identically zero");

  LinearMapEstimate est;
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(fp);
  est.mapping = cod.solve(g);
  est.rank = cod.rank();
  est.residual = g - fp * est.mapping;
  est.residual_mean = est.residual.colwise().mean().transpose();

  const Eigen::VectorXd sv = Eigen::BDCSVD<Eigen::MatrixXd>(fp).singularValues();
  est.condition = est.rank < fp.cols() ? std::numeric_limits<double>::infinity()
                                       : sv[0] / sv[sv.size() - 1];
  return est;
}

namespace {

std::size_t resolve_layer(const ToyModel& model, int layer) {
  const auto n = static_cast<int>(model.layers().size());
  const int idx = layer < 0 ? n + layer : layer;
  if (idx < 0 || idx >= n) throw InvalidArgument("layer index out of range");
  return static_cast<std::size_t>(idx);
}

}  // namespace

CoordinateSelection CoordinateSelection::sample(const ToyModel& model, int layer,
                                                std::size_t count, std::uint64_t seed) {
  const std::size_t k = resolve_layer(model, layer);
  const auto size = static_cast<std::size_t>(model.layers()[k].weights().size());
  if (count > size) throw InvalidArgument("more coordinates requested than the layer holds");
  std::vector<Eigen::Index> all(size);
  for (std::size_t i = 0; i < size; ++i) all[i] = static_cast<Eigen::Index>(i);
  Rng rng(seed);
  rng.shuffle(std::span(all));
  all.resize(count);
  std::sort(all.begin(), all.end());
  return {layer, std::move(all)};
}

Eigen::VectorXd flat_gradient(const ToyModel& model, const Batch& batch,
                              const std::optional<BitWidthConfig>& width,
                              const CoordinateSelection& selection) {
  const std::size_t k = resolve_layer(model, selection.layer);
  ToyModel probe = model;
  probe.set_precision(width);
  const Matrix grad = std::move(probe.loss_and_gradients(batch).gradients[k]);
  const Eigen::Map<const Eigen::VectorXd> flat(grad.data(), grad.size());
  if (selection.coordinates.empty()) return flat;
  Eigen::VectorXd out(static_cast<Eigen::Index>(selection.coordinates.size()));
  for (std::size_t i = 0; i < selection.coordinates.size(); ++i) {
    const auto c = selection.coordinates[i];
    if (c < 0 || c >= flat.size()) throw InvalidArgument("coordinate out of range");
    out[static_cast<Eigen::Index>(i)] = flat[c];
  }
  return out;
}

GradientMatrixPair collect_gradient_pairs(const ToyModel& model, std::span<const Batch> data,
                                          const BitWidthConfig& width, std::size_t count,
                                          const CoordinateSelection& selection) {
  if (count == 0 || count > data.size())
    throw InvalidArgument("need between 1 and " + std::to_string(data.size()) + " batches");
  GradientMatrixPair pair;
  for (std::size_t i = 0; i < count; ++i) {
    const Eigen::VectorXd fp = flat_gradient(model, data[i], std::nullopt, selection);
    const Eigen::VectorXd q = flat_gradient(model, data[i], width, selection);
    if (i == 0) {
      pair.fp.resize(static_cast<Eigen::Index>(count), fp.size());
      pair.sefp.resize(static_cast<Eigen::Index>(count), q.size());
    }
    pair.fp.row(static_cast<Eigen::Index>(i)) = fp.transpose();
    pair.sefp.row(static_cast<Eigen::Index>(i)) = q.transpose();
  }
  return pair;
}

CosineTable cross_width_cosine_table(const ToyModel& model, const Batch& batch,
                                     const BitWidthSet& widths,
                                     const CoordinateSelection& selection) {
  const auto n = static_cast<Eigen::Index>(widths.size());
  std::vector<Eigen::VectorXd> grads;
  for (const auto& w : widths) grads.push_back(flat_gradient(model, batch, w, selection));

  CosineTable table{Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN()),
                    std::vector<bool>(widths.size())};
  for (Eigen::Index i = 0; i < n; ++i) table.zero_gradient[i] = grads[i].isZero(0.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (table.zero_gradient[i]) continue;
    table.cosine(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (table.zero_gradient[j]) continue;
      const double c = norms_and_cosine(grads[i], grads[j]).cosine;
      table.cosine(i, j) = c;
      table.cosine(j, i) = c;
    }
  }
  return table;
}

Eigen::MatrixXd norm_errors(const ToyModel& model, std::span<const Batch> data,
                            const BitWidthSet& widths, const CoordinateSelection& selection) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(data.size()),
                      static_cast<Eigen::Index>(widths.size()));
  for (std::size_t b = 0; b < data.size(); ++b) {
    const double fp = flat_gradient(model, data[b], std::nullopt, selection).norm();
    for (std::size_t w = 0; w < widths.size(); ++w)
      out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(w)) =
          flat_gradient(model, data[b], widths[w], selection).norm() - fp;
  }
  return out;
}

SawtoothProfile sawtooth_profile(int mantissa_bits, std::size_t samples) {
  if (mantissa_bits < 1 || mantissa_bits > 30) throw InvalidArgument("mantissa bits out of range");
  const std::size_t per_period = std::size_t{16};
  if (samples < (per_period << mantissa_bits))
    throw InvalidArgument("sawtooth scan needs at least 16 * 2^m samples");
  const double step = std::ldexp(1.0, -mantissa_bits - 4);

  SawtoothProfile p;
  const auto n = static_cast<Eigen::Index>(samples);
  p.grid.resize(n);
  p.error.resize(n);
  std::vector<Eigen::Index> zeros;
  for (Eigen::Index j = 0; j < n; ++j) {
    p.grid[j] = static_cast<double>(j) * step;
    p.error[j] = quantization_error(p.grid[j], mantissa_bits, RoundingMode::nearest_even);
    if (p.error[j] == 0.0) zeros.push_back(j);
  }
  // Spacing of the exact zeros; take the most frequent one if they vary.
  std::vector<Eigen::Index> gaps;
  for (std::size_t i = 1; i < zeros.size(); ++i) gaps.push_back(zeros[i] - zeros[i - 1]);
  if (!gaps.empty()) {
    std::sort(gaps.begin(), gaps.end());
    Eigen::Index best = gaps.front(), best_count = 0;
    for (std::size_t i = 0; i < gaps.size();) {
      std::size_t j = i;
      while (j < gaps.size() && gaps[j] == gaps[i]) ++j;
      if (static_cast<Eigen::Index>(j - i) > best_count) {
        best = gaps[i];
        best_count = static_cast<Eigen::Index>(j - i);
      }
      i = j;
    }
    p.period = static_cast<double>(best) * step;
  }
  p.peak_to_peak = p.error.maxCoeff() - p.error.minCoeff();
  return p;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& column_names,
                      const std::vector<std::string>& row_names) {
  if (static_cast<Eigen::Index>(column_names.size()) != m.cols())
    throw InvalidArgument("column name count does not match the matrix");
  const bool labelled = !row_names.empty();
  if (labelled && static_cast<Eigen::Index>(row_names.size()) != m.rows())
    throw InvalidArgument("row name count does not match the matrix");
  out << (labelled ? "row" : "index");
  for (const auto& c : column_names) out << ',' << c;
  out << '\n';
  const auto precision = out.precision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (labelled)
      out << row_names[static_cast<std::size_t>(r)];
    else
      out << r;
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << m(r, c);
    out << '\n';
  }
  out.precision(precision);
}

}  // namespace otaro
