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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otaro/bit_width.hpp"
#include "otaro/sefp.hpp"

namespace otaro {

/// On-disk layout, all integers little-endian:
///
///   header   "SEFP" | version u8 (=1) | e u8 | m u8 | group_size u32 | tensor_count u32
///   tensor   name_len u16 | name (UTF-8) | rank u8 | dims u64 x rank
///            exponents: one byte per group
///            signs:     1 bit per element, MSB first, padded to a byte
///            mantissas: m bits per element, MSB first, padded to a byte
struct ContainerHeader {
  static constexpr char kMagic[4] = {'S', 'E', 'F', 'P'};
  static constexpr std::uint8_t kVersion = 1;
  static constexpr std::size_t kSize = 15;
};

struct NamedTensor {
  std::string name;
  SefpTensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Serializes `tensors`; all must share (e, m, group_size). An empty list
/// writes an E5M8 / group-64 header. Returns the byte count written.
std::size_t write_container(std::ostream& out, std::span<const NamedTensor> tensors);

/// Exact inverse of write_container. Throws FormatError with kind
/// bad_magic, truncated, unknown_version or inconsistent.
std::vector<NamedTensor> read_container(std::istream& in);

void write_container_file(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_container_file(const std::filesystem::path& path);

/// Rewrites only the mantissa planes to a narrower width.
std::vector<NamedTensor> truncate_container(std::span<const NamedTensor> tensors,
                                            const BitWidthConfig& target);

/// Raw interchange format: u64 element count, then little-endian f32 values.
std::vector<float> read_raw_floats(const std::filesystem::path& path);
void write_raw_floats(const std::filesystem::path& path, std::span<const float> values);

/// Model geometry for the weights-plus-KV-cache memory estimate.
struct DeviceModelSpec {
  double parameter_count = 0;
  std::uint64_t layer_count = 0;
  std::uint64_t kv_head_count = 0;
  std::uint64_t head_dim = 0;
  std::uint64_t context_tokens = 0;

  /// Reads {"parameter_count", "layer_count", "kv_head_count", "head_dim",
  /// "context_tokens"} from a JSON file.
  static DeviceModelSpec from_json_file(const std::filesystem::path& path);
  static DeviceModelSpec from_json_text(const std::string& text);
  void validate() const;
};

/// Whether the KV cache follows the weight format or stays fp16.
enum class KvPrecision { same_as_weights, fp16 };

/// Storage bits per element: 16 for fp16 (nullopt), else 1 + m + e / group_size.
double bits_per_element(const std::optional<BitWidthConfig>& config, std::size_t group_size);

struct MemoryEstimate {
  double weight_bytes;
  double kv_bytes;
  double total_bytes() const noexcept { return weight_bytes + kv_bytes; }
  double total_gib() const noexcept { return total_bytes() / 1073741824.0; }
};

MemoryEstimate estimate_memory(const DeviceModelSpec& spec,
                               const std::optional<BitWidthConfig>& config,
                               std::size_t group_size = 64,
                               KvPrecision kv = KvPrecision::same_as_weights);

}  // namespace otaro
