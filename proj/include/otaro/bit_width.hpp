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
#include <string>
#include <string_view>
#include <vector>

namespace otaro {

/// A SEFP precision point E<e>M<m>. The mantissa width counts the explicit
/// leading bit, so M4 stores one integer bit and three fraction bits.
class BitWidthConfig {
 public:
  static constexpr int kMaxExponentBits = 8;
  static constexpr int kMaxMantissaBits = 11;

  BitWidthConfig(int exponent_bits, int mantissa_bits);

  /// Parses labels of the form "E5M4" (case-insensitive).
  static BitWidthConfig parse(std::string_view label);

  int exponent_bits() const noexcept { return exponent_bits_; }
  int mantissa_bits() const noexcept { return mantissa_bits_; }

  /// IEEE-style bias, 2^(e-1) - 1 (15 for e = 5).
  int bias() const noexcept { return (1 << (exponent_bits_ - 1)) - 1; }
  /// Smallest unbiased shared exponent of a nonzero group (biased value 1).
  int min_exponent() const noexcept { return 1 - bias(); }
  /// Largest unbiased shared exponent (biased value 2^e - 1).
  int max_exponent() const noexcept { return (1 << exponent_bits_) - 1 - bias(); }

  std::string label() const;

  friend bool operator==(const BitWidthConfig&, const BitWidthConfig&) = default;

 private:
  int exponent_bits_;
  int mantissa_bits_;
};

/// Ordered set of precision points sharing one exponent width, strictly
/// decreasing in mantissa bits.
class BitWidthSet {
 public:
  explicit BitWidthSet(std::vector<BitWidthConfig> widths);

  /// E<e>M<hi>, E<e>M<hi-1>, ..., E<e>M<lo>.
  static BitWidthSet range(int exponent_bits, int mantissa_hi, int mantissa_lo);
  /// Accepts "E5M8..E5M3" or a comma-separated list such as "E5M8,E5M4".
  static BitWidthSet parse(std::string_view text);
  /// The six widths used throughout: E5M8 down to E5M3.
  static BitWidthSet standard() { return range(5, 8, 3); }

  std::size_t size() const noexcept { return widths_.size(); }
  const BitWidthConfig& operator[](std::size_t i) const { return widths_[i]; }
  auto begin() const noexcept { return widths_.begin(); }
  auto end() const noexcept { return widths_.end(); }
  const std::vector<BitWidthConfig>& widths() const noexcept { return widths_; }

  const BitWidthConfig& highest() const { return widths_.front(); }
  const BitWidthConfig& lowest() const { return widths_.back(); }

  bool contains(const BitWidthConfig& w) const;
  /// Position of `w`; throws InvalidArgument if absent.
  std::size_t index_of(const BitWidthConfig& w) const;

 private:
  std::vector<BitWidthConfig> widths_;
};

}  // namespace otaro
