// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// Single-file binary container: "BCMQ" magic, u32 little-endian header length,
// a JSON header, then a raw little-endian payload. The header always carries
// "kind", "schema_version" and "payload_bytes".
namespace bcmq::container {

inline constexpr int kSchemaVersion = 1;

struct Blob {
  nlohmann::json header;
  std::vector<std::uint8_t> payload;
};

void write(const std::filesystem::path& path, nlohmann::json header, const std::vector<std::uint8_t>& payload);
// Fails closed: bad magic, wrong kind, version mismatch or short reads throw.
Blob read(const std::filesystem::path& path, const std::string& expected_kind);

class Writer {
public:
  void f32(float v);
  void f64(double v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
  float f32();
  double f64();
  std::uint32_t u32();
  std::uint64_t u64();
  std::uint8_t u8();
  std::size_t remaining() const { return bytes_.size() - pos_; }

private:
  void need(std::size_t n) const;
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace bcmq::container
