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

#include "otaro/sefp.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>

#include "otaro/errors.hpp"

namespace otaro {

namespace {

double round_half_even(double x) {
  const double below = std::floor(x);
  const double diff = x - below;
  if (diff > 0.5) return below + 1.0;
  if (diff < 0.5) return below;
  return std::fmod(below, 2.0) == 0.0 ? below : below + 1.0;
}

double reduce(double scaled, RoundingMode mode) {
  return mode == RoundingMode::truncate ? std::trunc(scaled) : round_half_even(scaled);
}

void encode_group(std::span<const double> in, const BitWidthConfig& config, RoundingMode mode,
                  std::uint8_t& biased, std::span<std::uint8_t> signs,
                  std::span<std::uint16_t> mantissas) {
  int shared = INT_MIN;
  for (std::size_t i = 0; i < in.size(); ++i) {
    signs[i] = std::signbit(in[i]) ? 1 : 0;
    if (in[i] != 0.0) shared = std::max(shared, std::ilogb(in[i]));
  }
  if (shared == INT_MIN) {
    biased = 0;
    std::fill(mantissas.begin(), mantissas.end(), std::uint16_t{0});
    return;
  }
  if (shared > config.max_exponent())
    throw ExponentOverflow("group exponent " + std::to_string(shared) + " exceeds " +
                           config.label() + " maximum " + std::to_string(config.max_exponent()));
  shared = std::max(shared, config.min_exponent());

  const int m = config.mantissa_bits();
  const double limit = std::ldexp(1.0, m);
  for (;;) {
    bool overflow = false;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const double q = reduce(std::ldexp(std::fabs(in[i]), m - 1 - shared), mode);
      overflow |= q >= limit;
      mantissas[i] = static_cast<std::uint16_t>(std::min(q, limit - 1.0));
    }
    // Only round-to-nearest can carry out of the top bit; renormalize.
    if (!overflow || shared == config.max_exponent()) break;
    ++shared;
  }
  biased = static_cast<std::uint8_t>(shared + config.bias());
}

}  // namespace

std::size_t shape_product(std::span<const std::size_t> shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t SefpTensor::element_count() const noexcept { return shape_product(shape); }

std::size_t SefpTensor::group_count() const noexcept {
  return group_size == 0 ? 0 : (element_count() + group_size - 1) / group_size;
}

void SefpTensor::validate() const {
  if (group_size == 0) throw InvalidArgument("group size must be at least 1");
  const std::size_t n = element_count();
  if (signs.size() != n || mantissas.size() != n)
    throw InvalidArgument("sign/mantissa planes do not match the shape");
  if (shared_exponents.size() != group_count())
    throw InvalidArgument("shared exponent count does not match the group count");
  const unsigned exp_limit = 1u << config.exponent_bits();
  for (auto e : shared_exponents)
    if (e >= exp_limit) throw InvalidArgument("shared exponent exceeds the exponent field");
  const unsigned mant_limit = 1u << config.mantissa_bits();
  for (auto s : signs)
    if (s > 1) throw InvalidArgument("sign plane holds a value other than 0/1");
  for (auto mnt : mantissas)
    if (mnt >= mant_limit) throw InvalidArgument("mantissa exceeds the mantissa field");
}

SefpTensor quantize(std::span<const double> values, std::vector<std::size_t> shape,
                    const BitWidthConfig& config, std::size_t group_size, RoundingMode mode) {
  if (group_size == 0) throw InvalidArgument("group size must be at least 1");
  if (shape_product(shape) != values.size())
    throw InvalidArgument("shape does not match the number of values");
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i])) throw NonFiniteError(i, "cannot quantize");

  SefpTensor out;
  out.shape = std::move(shape);
  out.group_size = group_size;
  out.config = config;
  out.signs.resize(values.size());
  out.mantissas.resize(values.size());
  out.shared_exponents.resize(out.group_count());
  for (std::size_t g = 0; g < out.shared_exponents.size(); ++g) {
    const std::size_t begin = g * group_size;
    const std::size_t len = std::min(group_size, values.size() - begin);
    encode_group(values.subspan(begin, len), config, mode, out.shared_exponents[g],
                 std::span(out.signs).subspan(begin, len),
                 std::span(out.mantissas).subspan(begin, len));
  }
  return out;
}

void dequantize_into(const SefpTensor& tensor, std::span<double> out) {
  const std::size_t n = tensor.element_count();
  if (out.size() != n) throw ShapeError("dequantize output has the wrong length");
  const int frac = tensor.config.mantissa_bits() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t g = i / tensor.group_size;
    const double magnitude =
        std::ldexp(static_cast<double>(tensor.mantissas[i]), tensor.unbiased_exponent(g) - frac);
    out[i] = tensor.signs[i] ? -magnitude : magnitude;
  }
}

SefpTensor truncate_precision(const SefpTensor& tensor, const BitWidthConfig& target) {
  if (target.exponent_bits() != tensor.config.exponent_bits())
    throw InvalidArgument("cannot convert " + tensor.config.label() + " to " + target.label() +
                          ": exponent widths differ");
  if (target.mantissa_bits() > tensor.config.mantissa_bits())
    throw InvalidArgument("cannot widen " + tensor.config.label() + " to " + target.label());
  SefpTensor out = tensor;
  out.config = target;
  const int shift = tensor.config.mantissa_bits() - target.mantissa_bits();
  for (auto& m : out.mantissas) m = static_cast<std::uint16_t>(m >> shift);
  return out;
}

double reconstruction_bound(const SefpTensor& tensor, std::size_t group, RoundingMode mode) {
  const double ulp =
      std::ldexp(1.0, tensor.unbiased_exponent(group) - (tensor.config.mantissa_bits() - 1));
  return mode == RoundingMode::truncate ? ulp : 0.5 * ulp;
}

double quantization_error(double w, int mantissa_bits, RoundingMode mode) {
  const double scaled = std::ldexp(w, mantissa_bits);
  return std::ldexp(scaled - reduce(scaled, mode), -mantissa_bits);
}

}  // namespace otaro
