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
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "otaro/bit_width.hpp"

namespace otaro {

/// How a scaled mantissa is reduced to its stored width. Truncation is the
/// only mode under which cross-precision conversion commutes bit-exactly.
enum class RoundingMode { truncate, nearest_even };

/// Shared Exponent Floating Point tensor.
///
/// Elements are grouped in row-major order, `group_size` at a time; the last
/// group may be short. Every group stores one biased exponent, every element
/// a sign bit and an unsigned mantissa of `config.mantissa_bits()` bits whose
/// top bit is the explicit integer bit. An element decodes to
///
///     (-1)^sign * mantissa / 2^(m-1) * 2^(biased - bias)
///
/// A group whose inputs were all zero stores biased exponent 0.
struct SefpTensor {
  std::vector<std::size_t> shape;
  std::size_t group_size = 64;
  BitWidthConfig config{5, 8};
  std::vector<std::uint8_t> shared_exponents;
  std::vector<std::uint8_t> signs;
  std::vector<std::uint16_t> mantissas;

  std::size_t element_count() const noexcept;
  std::size_t group_count() const noexcept;
  int unbiased_exponent(std::size_t group) const noexcept {
    return static_cast<int>(shared_exponents[group]) - config.bias();
  }

  /// Throws InvalidArgument when a structural invariant is broken.
  void validate() const;

  friend bool operator==(const SefpTensor&, const SefpTensor&) = default;
};

std::size_t shape_product(std::span<const std::size_t> shape) noexcept;

/// Encodes `values` (row-major, product(shape) elements).
///
/// Per group the shared exponent is the largest binary exponent present;
/// each magnitude is aligned to it and reduced to `m` bits under `mode`.
/// Elements that shift below the mantissa width flush to a signed zero.
/// Shared exponents below the representable minimum are clamped up to it,
/// which leaves such groups denormalized. Throws NonFiniteError,
/// ExponentOverflow, or InvalidArgument (group_size == 0, size mismatch).
SefpTensor quantize(std::span<const double> values, std::vector<std::size_t> shape,
                    const BitWidthConfig& config, std::size_t group_size = 64,
                    RoundingMode mode = RoundingMode::truncate);

/// Eigen front end. Matrices are flattened row-major and keep a rank-2 shape.
template <typename Derived>
SefpTensor quantize(const Eigen::DenseBase<Derived>& values, const BitWidthConfig& config,
                    std::size_t group_size = 64, RoundingMode mode = RoundingMode::truncate) {
  using Flat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Flat flat = values.derived().template cast<double>();
  std::vector<std::size_t> shape;
  if constexpr (Derived::IsVectorAtCompileTime)
    shape = {static_cast<std::size_t>(flat.size())};
  else
    shape = {static_cast<std::size_t>(flat.rows()), static_cast<std::size_t>(flat.cols())};
  return quantize(std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())),
                  std::move(shape), config, group_size, mode);
}

/// Writes the decoded elements of `tensor` into `out` (size element_count()).
void dequantize_into(const SefpTensor& tensor, std::span<double> out);

/// Decoded elements as a flat vector.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dequantize(const SefpTensor& tensor) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(tensor.element_count()));
  dequantize_into(tensor, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out.template cast<Scalar>();
}

/// Decoded rank-2 tensor in its original row-major layout.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dequantize_matrix(
    const SefpTensor& tensor) {
  using Out = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto rows = static_cast<Eigen::Index>(tensor.shape.empty() ? 1 : tensor.shape[0]);
  const auto cols = rows == 0 ? Eigen::Index{0}
                              : static_cast<Eigen::Index>(tensor.element_count()) / rows;
  Out out(rows, cols);
  dequantize_into(tensor, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out.template cast<Scalar>();
}

/// Lowers the mantissa width by dropping low-order bits. Exponents, signs,
/// shape and grouping are untouched, so no full-precision source is needed.
SefpTensor truncate_precision(const SefpTensor& tensor, const BitWidthConfig& target);

/// Worst-case |decode - input| for elements of `group` under `mode`.
double reconstruction_bound(const SefpTensor& tensor, std::size_t group,
                            RoundingMode mode = RoundingMode::truncate);

/// Scalar quantization-error term (w 2^m - [w 2^m]) / 2^m.
double quantization_error(double w, int mantissa_bits,
                          RoundingMode mode = RoundingMode::nearest_even);

/// Elementwise sawtooth error term; period and peak-to-peak are 2^-m.
template <typename Derived>
Eigen::ArrayXd quantization_error_grad(const Eigen::DenseBase<Derived>& values, int mantissa_bits,
                                       RoundingMode mode = RoundingMode::nearest_even) {
  Eigen::ArrayXd out(values.size());
  Eigen::Index k = 0;
  const auto& d = values.derived();
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = 0; j < d.cols(); ++j)
      out[k++] = quantization_error(static_cast<double>(d(i, j)), mantissa_bits, mode);
  return out;
}

}  // namespace otaro
