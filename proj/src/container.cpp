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

#include "otaro/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "otaro/errors.hpp"

namespace otaro {

namespace {

using Kind = FormatError::Kind;

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw FormatError(Kind::io, "write failed");
    count_ += n;
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  template <typename T>
  void le(T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(T));
  }
  std::size_t count() const noexcept { return count_; }

 private:
  std::ostream& out_;
  std::size_t count_ = 0;
};

class ByteReader {
 public:
  explicit ByteReader(std::istream& in) : in_(in) {}

  void bytes(void* data, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw FormatError(Kind::truncated, std::string("container truncated while reading ") + what);
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t v;
    bytes(&v, 1, what);
    return v;
  }
  template <typename T>
  T le(const char* what) {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T), what);
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(buf[i]) << (8 * i));
    return v;
  }

 private:
  std::istream& in_;
};

// MSB-first packing of `width`-bit fields.
std::vector<std::uint8_t> pack_bits(std::span<const std::uint16_t> values, int width) {
  std::vector<std::uint8_t> out((values.size() * static_cast<std::size_t>(width) + 7) / 8, 0);
  std::size_t bit = 0;
  for (const auto v : values)
    for (int b = width - 1; b >= 0; --b, ++bit)
      if ((v >> b) & 1u) out[bit / 8] |= static_cast<std::uint8_t>(0x80u >> (bit % 8));
  return out;
}

std::vector<std::uint16_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t count,
                                       int width) {
  std::vector<std::uint16_t> out(count, 0);
  std::size_t bit = 0;
  for (auto& v : out)
    for (int b = width - 1; b >= 0; --b, ++bit)
      if (bytes[bit / 8] & (0x80u >> (bit % 8))) v |= static_cast<std::uint16_t>(1u << b);
  return out;
}

}  // namespace

std::size_t write_container(std::ostream& out, std::span<const NamedTensor> tensors) {
  const BitWidthConfig config = tensors.empty() ? BitWidthConfig(5, 8) : tensors[0].tensor.config;
  const std::size_t group_size = tensors.empty() ? 64 : tensors[0].tensor.group_size;
  for (const auto& t : tensors) {
    if (t.tensor.config != config || t.tensor.group_size != group_size)
      throw InvalidArgument("container tensors must share exponent/mantissa widths and group size");
    if (t.name.size() > 0xFFFF) throw InvalidArgument("tensor name longer than 65535 bytes");
    if (t.tensor.shape.size() > 0xFF) throw InvalidArgument("tensor rank above 255");
    t.tensor.validate();
  }
  if (group_size > 0xFFFFFFFFu || tensors.size() > 0xFFFFFFFFu)
    throw InvalidArgument("group size or tensor count exceeds 32 bits");

  ByteWriter w(out);
  w.bytes(ContainerHeader::kMagic, 4);
  w.u8(ContainerHeader::kVersion);
  w.u8(static_cast<std::uint8_t>(config.exponent_bits()));
  w.u8(static_cast<std::uint8_t>(config.mantissa_bits()));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(group_size));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.le<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u8(static_cast<std::uint8_t>(t.tensor.shape.size()));
    for (auto d : t.tensor.shape) w.le<std::uint64_t>(d);
    w.bytes(t.tensor.shared_exponents.data(), t.tensor.shared_exponents.size());
    std::vector<std::uint16_t> signs(t.tensor.signs.begin(), t.tensor.signs.end());
    const auto sign_plane = pack_bits(signs, 1);
    w.bytes(sign_plane.data(), sign_plane.size());
    const auto mantissa_plane = pack_bits(t.tensor.mantissas, config.mantissa_bits());
    w.bytes(mantissa_plane.data(), mantissa_plane.size());
  }
  return w.count();
}

std::vector<NamedTensor> read_container(std::istream& in) {
  ByteReader r(in);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, ContainerHeader::kMagic, 4) != 0)
    throw FormatError(Kind::bad_magic, "not a SEFP container (bad magic)");
  const std::uint8_t version = r.u8("version");
  if (version != ContainerHeader::kVersion)
    throw FormatError(Kind::unknown_version,
                      "unsupported container version " + std::to_string(version));
  const int e = r.u8("exponent bits");
  const int m = r.u8("mantissa bits");
  const auto group_size = r.le<std::uint32_t>("group size");
  const auto count = r.le<std::uint32_t>("tensor count");

  std::optional<BitWidthConfig> config;
  try {
    config.emplace(e, m);
  } catch (const InvalidArgument& ex) {
    throw FormatError(Kind::inconsistent, std::string("bad header: ") + ex.what());
  }
  if (group_size == 0) throw FormatError(Kind::inconsistent, "bad header: group size 0");

  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name.resize(r.le<std::uint16_t>("name length"));
    r.bytes(nt.name.data(), nt.name.size(), "name");
    const std::uint8_t rank = r.u8("rank");
    nt.tensor.shape.resize(rank);
    for (auto& d : nt.tensor.shape) d = r.le<std::uint64_t>("dimension");
    nt.tensor.config = *config;
    nt.tensor.group_size = group_size;
    const std::size_t n = nt.tensor.element_count();

    nt.tensor.shared_exponents.resize(nt.tensor.group_count());
    r.bytes(nt.tensor.shared_exponents.data(), nt.tensor.shared_exponents.size(), "exponents");
    std::vector<std::uint8_t> plane((n + 7) / 8);
    r.bytes(plane.data(), plane.size(), "sign plane");
    const auto signs = unpack_bits(plane, n, 1);
    nt.tensor.signs.assign(signs.begin(), signs.end());
    plane.resize((n * static_cast<std::size_t>(m) + 7) / 8);
    r.bytes(plane.data(), plane.size(), "mantissa plane");
    nt.tensor.mantissas = unpack_bits(plane, n, m);
    try {
      nt.tensor.validate();
    } catch (const InvalidArgument& ex) {
      throw FormatError(Kind::inconsistent, "tensor '" + nt.name + "': " + ex.what());
    }
    out.push_back(std::move(nt));
  }
  return out;
}

void write_container_file(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(Kind::io, "cannot open " + path.string() + " for writing");
  write_container(out, tensors);
}

std::vector<NamedTensor> read_container_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(Kind::io, "cannot open " + path.string());
  return read_container(in);
}

std::vector<NamedTensor> truncate_container(std::span<const NamedTensor> tensors,
                                            const BitWidthConfig& target) {
  std::vector<NamedTensor> out;
  out.reserve(tensors.size());
  for (const auto& t : tensors) out.push_back({t.name, truncate_precision(t.tensor, target)});
  return out;
}

std::vector<float> read_raw_floats(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(Kind::io, "cannot open " + path.string());
  ByteReader r(in);
  const auto count = r.le<std::uint64_t>("element count");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  if (size < 8 || (size - 8) / 4 < count)
    throw FormatError(Kind::truncated, "raw float file holds fewer values than its header claims");
  if (size - 8 != count * 4)
    throw FormatError(Kind::inconsistent, "raw float file has trailing bytes");
  in.seekg(8);
  std::vector<float> out(count);
  for (auto& v : out) v = std::bit_cast<float>(r.le<std::uint32_t>("value"));
  return out;
}

void write_raw_floats(const std::filesystem::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(Kind::io, "cannot open " + path.string() + " for writing");
  ByteWriter w(out);
  w.le<std::uint64_t>(values.size());
  for (const float v : values) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(v));
}

DeviceModelSpec DeviceModelSpec::from_json_text(const std::string& text) {
  DeviceModelSpec spec;
  try {
    const auto j = nlohmann::json::parse(text);
    spec.parameter_count = j.at("parameter_count").get<double>();
    spec.layer_count = j.at("layer_count").get<std::uint64_t>();
    spec.kv_head_count = j.at("kv_head_count").get<std::uint64_t>();
    spec.head_dim = j.at("head_dim").get<std::uint64_t>();
    spec.context_tokens = j.at("context_tokens").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(Kind::inconsistent, std::string("bad model spec: ") + ex.what());
  }
  spec.validate();
  return spec;
}

DeviceModelSpec DeviceModelSpec::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(Kind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void DeviceModelSpec::validate() const {
  if (!(parameter_count > 0) || layer_count == 0 || kv_head_count == 0 || head_dim == 0 ||
      context_tokens == 0)
    throw FormatError(Kind::inconsistent, "model spec fields must all be positive");
}

double bits_per_element(const std::optional<BitWidthConfig>& config, std::size_t group_size) {
  if (!config) return 16.0;
  if (group_size == 0) throw InvalidArgument("group size must be at least 1");
  return 1.0 + config->mantissa_bits() +
         static_cast<double>(config->exponent_bits()) / static_cast<double>(group_size);
}

MemoryEstimate estimate_memory(const DeviceModelSpec& spec,
                               const std::optional<BitWidthConfig>& config,
                               std::size_t group_size, KvPrecision kv) {
  spec.validate();
  const double weight_bits = bits_per_element(config, group_size);
  const double kv_bits = kv == KvPrecision::fp16 ? 16.0 : weight_bits;
  const double kv_elements = 2.0 * static_cast<double>(spec.layer_count) *
                             static_cast<double>(spec.kv_head_count) *
                             static_cast<double>(spec.head_dim) *
                             static_cast<double>(spec.context_tokens);
  return {spec.parameter_count * weight_bits / 8.0, kv_elements * kv_bits / 8.0};
}

}  // namespace otaro
