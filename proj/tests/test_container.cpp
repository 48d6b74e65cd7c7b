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

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "otaro/container.hpp"
#include "otaro/errors.hpp"
#include "otaro/sefp.hpp"
#include "otaro/tensor.hpp"

using namespace otaro;
namespace fs = std::filesystem;

namespace {

std::string bytes_of(const std::vector<NamedTensor>& tensors) {
  std::ostringstream out(std::ios::binary);
  write_container(out, tensors);
  return out.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<NamedTensor> parse(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  return read_container(in);
}

FormatError::Kind failure_kind(const std::string& bytes) {
  try {
    parse(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("expected FormatError");
  return FormatError::Kind::io;
}

std::vector<double> decode(const SefpTensor& t) {
  std::vector<double> out(t.element_count());
  dequantize_into(t, out);
  return out;
}

const fs::path kGolden = OTARO_TEST_GOLDEN_DIR;

}  // namespace

TEST_CASE("empty container is a bare header") {
  const std::string b = bytes_of({});
  CHECK(b.size() == ContainerHeader::kSize);
  CHECK(b == std::string("SEFP\x01\x05\x08\x40\0\0\0\0\0\0\0", 15));
  CHECK(parse(b).empty());
}

TEST_CASE("payload size of one full group") {
  Rng rng(1);
  const Matrix w = rng.normal_matrix(1, 64);
  const NamedTensor t{"g", quantize(Eigen::VectorXd(w.row(0).transpose()), {5, 4})};
  const std::size_t header = ContainerHeader::kSize + 2 + 1 + 1 + 8;
  CHECK(bytes_of({t}).size() == header + 1 + 8 + 32);
}

TEST_CASE("round trip on random tensors") {
  Rng rng(2);
  for (int m = 1; m <= 11; ++m) {
    const std::size_t group = 1 + rng.below(80);
    std::vector<NamedTensor> ts;
    for (int k = 0; k < 4; ++k) {
      const auto rows = static_cast<Eigen::Index>(1 + rng.below(9));
      const auto cols = static_cast<Eigen::Index>(1 + rng.below(70));
      ts.push_back({"t" + std::to_string(k), quantize(rng.normal_matrix(rows, cols), {5, m}, group)});
    }
    const std::string b = bytes_of(ts);
    const auto back = parse(b);
    CHECK(back == ts);
    CHECK(bytes_of(back) == b);
  }
}

TEST_CASE("golden files") {
  using F = std::vector<double>;
  SUBCASE("empty") { CHECK(read_file(kGolden / "empty.sefp") == bytes_of({})); }
  SUBCASE("single tensor") {
    const F v{1.5, 0.375, -0.25, 0.0};
    const NamedTensor t{"w", quantize(v, {4}, {5, 3})};
    const std::string golden = read_file(kGolden / "small_e5m3.sefp");
    CHECK(golden == bytes_of({t}));
    const auto back = parse(golden);
    REQUIRE(back.size() == 1);
    CHECK(decode(back[0].tensor) == F{1.5, 0.25, -0.25, 0.0});
  }
  SUBCASE("two tensors, short groups") {
    F layer0;
    for (int k = 0; k < 15; ++k) layer0.push_back((k - 7) / 8.0 * (k % 3 ? 1.0 : 1.0 / 16));
    const F bias{-3.0, 1.0 / 1024};
    const std::vector<NamedTensor> ts{{"layer0", quantize(layer0, {3, 5}, {5, 4}, 4)},
                                      {"bias", quantize(bias, {2}, {5, 4}, 4)}};
    const std::string golden = read_file(kGolden / "two_tensors_e5m4.sefp");
    CHECK(golden == bytes_of(ts));
    CHECK(parse(golden) == ts);
  }
}

TEST_CASE("container truncation only touches mantissas") {
  Rng rng(3);
  std::vector<double> v(200);
  for (auto& x : v) x = rng.normal();
  const std::vector<NamedTensor> src{{"a", quantize(v, {200}, {5, 8})}};
  const auto low = truncate_container(src, {5, 3});
  CHECK(low[0].tensor == quantize(v, {200}, {5, 3}));
  CHECK(low[0].tensor.shared_exponents == src[0].tensor.shared_exponents);
  CHECK(low[0].tensor.signs == src[0].tensor.signs);
}

TEST_CASE("writer rejects mixed formats") {
  const std::vector<double> v{1.0, 2.0};
  CHECK_THROWS_AS(bytes_of({{"a", quantize(v, {2}, {5, 4})}, {"b", quantize(v, {2}, {5, 3})}}),
                  InvalidArgument);
  CHECK_THROWS_AS(bytes_of({{"a", quantize(v, {2}, {5, 4}, 2)}, {"b", quantize(v, {2}, {5, 4}, 4)}}),
                  InvalidArgument);
}

TEST_CASE("reader reports each failure distinctly") {
  const std::vector<double> v{1.0, -0.5, 0.25};
  const std::string good = bytes_of({{"x", quantize(v, {3}, {5, 4})}});
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(failure_kind(bad_magic) == FormatError::Kind::bad_magic);
  std::string bad_version = good;
  bad_version[4] = 2;
  CHECK(failure_kind(bad_version) == FormatError::Kind::unknown_version);
  for (std::size_t cut : {std::size_t{2}, std::size_t{10}, good.size() - 1})
    CHECK(failure_kind(good.substr(0, cut)) == FormatError::Kind::truncated);
  std::string bad_width = good;
  bad_width[6] = 0;
  CHECK(failure_kind(bad_width) == FormatError::Kind::inconsistent);
  std::string zero_group = good;
  zero_group[7] = zero_group[8] = zero_group[9] = zero_group[10] = 0;
  CHECK(failure_kind(zero_group) == FormatError::Kind::inconsistent);
  CHECK_THROWS_AS(read_container_file("/nonexistent/file.sefp"), FormatError);
}

TEST_CASE("raw float files") {
  const fs::path p = fs::temp_directory_path() / "otaro_raw_test.bin";
  const std::vector<float> v{1.0f, -2.5f, 3.25e-5f};
  write_raw_floats(p, v);
  CHECK(fs::file_size(p) == 8 + 12);
  CHECK(read_raw_floats(p) == v);
  fs::resize_file(p, 16);
  CHECK_THROWS_AS(read_raw_floats(p), FormatError);
  fs::remove(p);
}

TEST_CASE("memory estimate") {
  const DeviceModelSpec spec = DeviceModelSpec::from_json_file(OTARO_CONFIG_DIR "/llama3-8b.json");
  CHECK(bits_per_element(BitWidthConfig(5, 4), 64) == 5.078125);
  CHECK(bits_per_element(std::nullopt, 64) == 16.0);
  const double fp16 = estimate_memory(spec, std::nullopt).total_gib();
  const double e5m4 = estimate_memory(spec, BitWidthConfig(5, 4)).total_gib();
  CHECK(std::fabs(fp16 - 15.20) / 15.20 <= 0.05);
  CHECK(std::fabs(e5m4 - 4.77) / 4.77 <= 0.05);
  CHECK(std::fabs((1 - 5.078125 / 16) * 100 - 69) <= 1.5);
  double prev = 0;
  for (int m = 1; m <= 11; ++m) {
    const double t = estimate_memory(spec, BitWidthConfig(5, m)).total_bytes();
    CHECK(t > prev);
    prev = t;
  }
  const double kv16 = estimate_memory(spec, BitWidthConfig(5, 4), 64, KvPrecision::fp16).kv_bytes;
  CHECK(kv16 == 2.0 * 32 * 8 * 128 * 2000 * 2);
  CHECK_THROWS_AS(DeviceModelSpec::from_json_text("{\"parameter_count\": 1}"), FormatError);
  CHECK_THROWS_AS(DeviceModelSpec::from_json_text(
                      R"({"parameter_count":1,"layer_count":0,"kv_head_count":1,"head_dim":1,"context_tokens":1})"),
                  FormatError);
  CHECK_THROWS_AS(bits_per_element(BitWidthConfig(5, 4), 0), InvalidArgument);
}
