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

#include "otaro/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "otaro/errors.hpp"

namespace otaro {

std::string_view to_string(Architecture arch) {
  return arch == Architecture::mlp_regressor ? "mlp" : "charlm";
}

ToyModel::ToyModel(Architecture arch, std::vector<FakeQuantLinear> layers)
    : arch_(arch), layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidArgument("model needs at least one layer");
  for (std::size_t k = 1; k < layers_.size(); ++k) {
    if (layers_[k].in_features() != layers_[k - 1].out_features())
      throw ShapeError("consecutive layer widths do not chain");
    if (layers_[k].group_size() != layers_[0].group_size())
      throw InvalidArgument("all quantized layers must share one group size");
  }
}

std::size_t ToyModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights().size());
  return n;
}

void ToyModel::set_precision(std::optional<BitWidthConfig> config) {
  for (auto& l : layers_) l.set_precision(config);
}

Matrix ToyModel::logits(const Matrix& x) const {
  Matrix h = x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    h = layers_[k].forward(h);
    if (k + 1 < layers_.size()) h = relu(h);
  }
  return h;
}

namespace {

double mse(const Matrix& out, const Matrix& y) {
  return (out - y).squaredNorm() / static_cast<double>(out.size());
}

// Mean over rows of -log softmax(z)[target], with y one-hot.
double cross_entropy(const Matrix& z, const Matrix& y) {
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double peak = z.row(r).maxCoeff();
    const double log_norm = peak + std::log((z.row(r).array() - peak).exp().sum());
    total += log_norm - z.row(r).dot(y.row(r));
  }
  return total / static_cast<double>(z.rows());
}

}  // namespace

double ToyModel::loss(const Batch& batch) const {
  const Matrix z = logits(batch.x);
  if (z.rows() != batch.y.rows() || z.cols() != batch.y.cols())
    throw ShapeError("targets do not match the model output");
  return arch_ == Architecture::mlp_regressor ? mse(z, batch.y) : cross_entropy(z, batch.y);
}

LossAndGradients ToyModel::loss_and_gradients(const Batch& batch) const {
  // Inputs to each layer, kept for the backward pass.
  std::vector<Matrix> inputs;
  inputs.reserve(layers_.size());
  Matrix h = batch.x;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    inputs.push_back(h);
    h = layers_[k].forward(h);
    if (k + 1 < layers_.size()) h = relu(h);
  }
  if (h.rows() != batch.y.rows() || h.cols() != batch.y.cols())
    throw ShapeError("targets do not match the model output");

  LossAndGradients out;
  Matrix upstream;
  if (arch_ == Architecture::mlp_regressor) {
    out.loss = mse(h, batch.y);
    upstream = (h - batch.y) * (2.0 / static_cast<double>(h.size()));
  } else {
    out.loss = cross_entropy(h, batch.y);
    upstream = (softmax_rows(h) - batch.y) / static_cast<double>(h.rows());
  }

  out.gradients.resize(layers_.size());
  for (std::size_t k = layers_.size(); k-- > 0;) {
    auto g = layers_[k].backward(upstream, inputs[k]);
    out.gradients[k] = std::move(g.weight);
    if (k > 0) upstream = g.input.cwiseProduct((inputs[k].array() > 0.0).cast<double>().matrix());
  }
  return out;
}

void ToyModel::apply_update(const GradientList& gradient, double eta) {
  if (gradient.size() != layers_.size()) throw ShapeError("update has the wrong tensor count");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    auto& w = layers_[k].weights();
    if (gradient[k].rows() != w.rows() || gradient[k].cols() != w.cols())
      throw ShapeError("update tensor shape differs from layer weights");
    w -= eta * gradient[k];
  }
}

ToyModel make_mlp_regressor(Eigen::Index inputs, Eigen::Index hidden, Rng& rng,
                            std::size_t group_size) {
  std::vector<FakeQuantLinear> layers;
  layers.emplace_back(rng.normal_matrix(hidden, inputs, std::sqrt(2.0 / inputs)), group_size);
  layers.emplace_back(rng.normal_matrix(1, hidden, std::sqrt(1.0 / hidden)), group_size);
  return ToyModel(Architecture::mlp_regressor, std::move(layers));
}

ToyModel make_char_lm(Eigen::Index context, Eigen::Index vocab, Eigen::Index hidden, Rng& rng,
                      std::size_t group_size) {
  const Eigen::Index in = context * vocab;
  std::vector<FakeQuantLinear> layers;
  layers.emplace_back(rng.normal_matrix(hidden, in, std::sqrt(2.0 / context)), group_size);
  layers.emplace_back(rng.normal_matrix(hidden, hidden, std::sqrt(2.0 / hidden)), group_size);
  layers.emplace_back(rng.normal_matrix(vocab, hidden, std::sqrt(1.0 / hidden)), group_size);
  return ToyModel(Architecture::char_lm, std::move(layers));
}

namespace {

double regression_target(const Eigen::RowVectorXd& x) {
  const double a = x.size() > 0 ? x[0] : 0.0;
  const double b = x.size() > 1 ? x[1] : 0.0;
  const double c = x.size() > 2 ? x[2] : 0.0;
  const double d = x.size() > 3 ? x[3] : 0.0;
  return std::sin(std::numbers::pi * a) * std::cos(b) + 0.5 * c * c - 0.3 * d;
}

Batch regression_batch(Eigen::Index inputs, std::size_t batch_size, Rng& rng) {
  const auto rows = static_cast<Eigen::Index>(batch_size);
  Batch b{Matrix(rows, inputs + 1), Matrix(rows, 1)};
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::RowVectorXd x(inputs);
    for (Eigen::Index j = 0; j < inputs; ++j) x[j] = rng.uniform(-1.0, 1.0);
    b.x.row(r).head(inputs) = x;
    b.x(r, inputs) = 1.0;
    b.y(r, 0) = regression_target(x);
  }
  return b;
}

}  // namespace

Dataset make_regression_dataset(Eigen::Index inputs, std::size_t train_batches,
                                std::size_t eval_batches, std::size_t batch_size,
                                std::uint64_t seed) {
  if (inputs < 1 || batch_size == 0) throw InvalidArgument("empty regression task");
  Rng rng(seed);
  Dataset ds;
  ds.input_dim = inputs + 1;
  ds.output_dim = 1;
  for (std::size_t i = 0; i < train_batches; ++i) ds.train.push_back(regression_batch(inputs, batch_size, rng));
  for (std::size_t i = 0; i < eval_batches; ++i) ds.eval.push_back(regression_batch(inputs, batch_size, rng));
  return ds;
}

Dataset make_char_dataset(std::string_view text, std::size_t context, std::size_t batch_size,
                          double eval_fraction, std::uint64_t seed) {
  if (context == 0 || batch_size == 0) throw InvalidArgument("empty character task");
  if (text.size() <= context + 1) throw InvalidArgument("corpus shorter than the context window");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
    throw InvalidArgument("eval fraction must lie in (0, 1)");

  Dataset ds;
  ds.vocabulary = std::string(text);
  std::sort(ds.vocabulary.begin(), ds.vocabulary.end());
  ds.vocabulary.erase(std::unique(ds.vocabulary.begin(), ds.vocabulary.end()), ds.vocabulary.end());
  const auto vocab = static_cast<Eigen::Index>(ds.vocabulary.size());
  ds.input_dim = static_cast<Eigen::Index>(context) * vocab;
  ds.output_dim = vocab;

  std::vector<Eigen::Index> code(text.size());
  for (std::size_t i = 0; i < text.size(); ++i)
    code[i] = static_cast<Eigen::Index>(ds.vocabulary.find(text[i]));

  std::vector<std::size_t> positions(text.size() - context);
  std::iota(positions.begin(), positions.end(), context);
  const auto split = static_cast<std::size_t>(
      std::floor(static_cast<double>(positions.size()) * (1.0 - eval_fraction)));
  std::vector<std::size_t> train(positions.begin(), positions.begin() + split);
  std::vector<std::size_t> eval(positions.begin() + split, positions.end());
  Rng rng(seed);
  rng.shuffle(std::span(train));

  const auto to_batches = [&](const std::vector<std::size_t>& pos) {
    std::vector<Batch> out;
    for (std::size_t start = 0; start + batch_size <= pos.size(); start += batch_size) {
      const auto rows = static_cast<Eigen::Index>(batch_size);
      Batch b{Matrix::Zero(rows, ds.input_dim), Matrix::Zero(rows, vocab)};
      for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t p = pos[start + static_cast<std::size_t>(r)];
        for (std::size_t c = 0; c < context; ++c)
          b.x(r, static_cast<Eigen::Index>(c) * vocab + code[p - context + c]) = 1.0;
        b.y(r, code[p]) = 1.0;
      }
      out.push_back(std::move(b));
    }
    return out;
  };
  ds.train = to_batches(train);
  ds.eval = to_batches(eval);
  if (ds.train.empty() || ds.eval.empty())
    throw InvalidArgument("corpus too small for the requested batch size");
  return ds;
}

std::string load_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace otaro
