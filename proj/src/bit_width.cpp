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

#include "otaro/bit_width.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "otaro/errors.hpp"

namespace otaro {

namespace {

int parse_int(std::string_view s, std::string_view context) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw InvalidArgument("malformed bit-width label '" + std::string(context) + "'");
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

BitWidthConfig::BitWidthConfig(int exponent_bits, int mantissa_bits)
    : exponent_bits_(exponent_bits), mantissa_bits_(mantissa_bits) {
  if (exponent_bits < 1 || exponent_bits > kMaxExponentBits)
    throw InvalidArgument("exponent bits must lie in [1, 8], got " + std::to_string(exponent_bits));
  if (mantissa_bits < 1 || mantissa_bits > kMaxMantissaBits)
    throw InvalidArgument("mantissa bits must lie in [1, 11], got " + std::to_string(mantissa_bits));
}

BitWidthConfig BitWidthConfig::parse(std::string_view label) {
  const std::string_view text = trim(label);
  if (text.size() < 4 || std::toupper(static_cast<unsigned char>(text[0])) != 'E')
    throw InvalidArgument("malformed bit-width label '" + std::string(label) + "'");
  std::size_t m_pos = std::string_view::npos;
  for (std::size_t i = 1; i < text.size(); ++i)
    if (std::toupper(static_cast<unsigned char>(text[i])) == 'M') {
      m_pos = i;
      break;
    }
  if (m_pos == std::string_view::npos)
    throw InvalidArgument("malformed bit-width label '" + std::string(label) + "'");
  return BitWidthConfig(parse_int(text.substr(1, m_pos - 1), label),
                        parse_int(text.substr(m_pos + 1), label));
}

std::string BitWidthConfig::label() const {
  return "E" + std::to_string(exponent_bits_) + "M" + std::to_string(mantissa_bits_);
}

BitWidthSet::BitWidthSet(std::vector<BitWidthConfig> widths) : widths_(std::move(widths)) {
  if (widths_.empty()) throw InvalidArgument("bit-width set must not be empty");
  for (std::size_t i = 1; i < widths_.size(); ++i) {
    if (widths_[i].exponent_bits() != widths_[0].exponent_bits())
      throw InvalidArgument("bit-width set mixes exponent widths");
    if (widths_[i].mantissa_bits() >= widths_[i - 1].mantissa_bits())
      throw InvalidArgument("bit-width set must be strictly decreasing in mantissa bits");
  }
}

BitWidthSet BitWidthSet::range(int exponent_bits, int mantissa_hi, int mantissa_lo) {
  if (mantissa_hi < mantissa_lo) throw InvalidArgument("empty mantissa range");
  std::vector<BitWidthConfig> widths;
  for (int m = mantissa_hi; m >= mantissa_lo; --m) widths.emplace_back(exponent_bits, m);
  return BitWidthSet(std::move(widths));
}

BitWidthSet BitWidthSet::parse(std::string_view text) {
  const auto dots = text.find("..");
  if (dots != std::string_view::npos) {
    const auto hi = BitWidthConfig::parse(text.substr(0, dots));
    const auto lo = BitWidthConfig::parse(text.substr(dots + 2));
    if (hi.exponent_bits() != lo.exponent_bits())
      throw InvalidArgument("bit-width range endpoints differ in exponent bits");
    return range(hi.exponent_bits(), hi.mantissa_bits(), lo.mantissa_bits());
  }
  std::vector<BitWidthConfig> widths;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                          : comma - start);
    widths.push_back(BitWidthConfig::parse(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  std::stable_sort(widths.begin(), widths.end(), [](const auto& a, const auto& b) {
    return a.mantissa_bits() > b.mantissa_bits();
  });
  return BitWidthSet(std::move(widths));
}

bool BitWidthSet::contains(const BitWidthConfig& w) const {
  return std::find(widths_.begin(), widths_.end(), w) != widths_.end();
}

std::size_t BitWidthSet::index_of(const BitWidthConfig& w) const {
  const auto it = std::find(widths_.begin(), widths_.end(), w);
  if (it == widths_.end()) throw InvalidArgument(w.label() + " is not in the bit-width set");
  return static_cast<std::size_t>(it - widths_.begin());
}

}  // namespace otaro
