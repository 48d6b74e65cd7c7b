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

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "otaro/errors.hpp"

namespace otaro {

/// Dense row-major tensor of rank <= 2. Flattening follows storage order,
/// which is also the SEFP grouping order.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Working precision of the toy models.
using Matrix = Tensor<double>;

template <typename A, typename B>
Tensor<typename A::Scalar> matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                     std::to_string(b.rows()) + " differ");
  Tensor<typename A::Scalar> out = a * b;
  return out;
}

enum class ElementwiseOp { add, sub, mul, scale, relu, softmax_rows };

/// Applies `op` to `a` (and `b` for the binary tags). `factor` is only read
/// by `scale`.
template <typename Scalar>
Tensor<Scalar> elementwise(ElementwiseOp op, const Tensor<Scalar>& a,
                           const Tensor<Scalar>* b = nullptr, Scalar factor = Scalar(1)) {
  const bool binary = op == ElementwiseOp::add || op == ElementwiseOp::sub || op == ElementwiseOp::mul;
  if (binary) {
    if (b == nullptr) throw InvalidArgument("binary elementwise op needs a second operand");
    if (a.rows() != b->rows() || a.cols() != b->cols())
      throw ShapeError("elementwise: operand shapes differ");
  }
  switch (op) {
    case ElementwiseOp::add: return a + *b;
    case ElementwiseOp::sub: return a - *b;
    case ElementwiseOp::mul: return a.cwiseProduct(*b);
    case ElementwiseOp::scale: return a * factor;
    case ElementwiseOp::relu: return a.cwiseMax(Scalar(0));
    case ElementwiseOp::softmax_rows: {
      Tensor<Scalar> out(a.rows(), a.cols());
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const auto shifted = (a.row(r).array() - a.row(r).maxCoeff()).exp();
        out.row(r) = shifted / shifted.sum();
      }
      return out;
    }
  }
  throw InvalidArgument("unknown elementwise op");
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  return elementwise(ElementwiseOp::relu, a);
}

template <typename Scalar>
Tensor<Scalar> softmax_rows(const Tensor<Scalar>& a) {
  return elementwise(ElementwiseOp::softmax_rows, a);
}

struct NormsAndCosine {
  double norm_a;
  double norm_b;
  double cosine;
};

/// Euclidean norms of both operands and their cosine similarity. A zero
/// operand paired with a nonzero one has cosine 0; two zeros throw
/// UndefinedCosine.
template <typename A, typename B>
NormsAndCosine norms_and_cosine(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("norms_and_cosine: operand shapes differ");
  const auto& da = a.derived();
  const auto& db = b.derived();
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (Eigen::Index i = 0; i < da.rows(); ++i)
    for (Eigen::Index j = 0; j < da.cols(); ++j) {
      const double x = static_cast<double>(da(i, j));
      const double y = static_cast<double>(db(i, j));
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na == 0.0 && nb == 0.0) throw UndefinedCosine("cosine of two zero tensors is undefined");
  const double cosine = (na == 0.0 || nb == 0.0) ? 0.0 : dot / (na * nb);
  return {na, nb, cosine};
}

/// Seeded mt19937_64 stream. Uniform and normal variates are derived from
/// the raw 64-bit words here rather than through <random> distributions,
/// whose algorithms are implementation-defined.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[below(i)]);
  }

  Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, double stddev = 1.0);
  Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace otaro
