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


#include "bcmq/container.hpp"

#include "bcmq/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace bcmq::container {

namespace {

constexpr char kMagic[4] = {'B', 'C', 'M', 'Q'};

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::uint8_t* p, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

void Writer::f32(float v) { put_le(bytes_, std::bit_cast<std::uint32_t>(v), 4); }
void Writer::f64(double v) { put_le(bytes_, std::bit_cast<std::uint64_t>(v), 8); }
void Writer::u32(std::uint32_t v) { put_le(bytes_, v, 4); }
void Writer::u64(std::uint64_t v) { put_le(bytes_, v, 8); }

void Reader::need(std::size_t n) const {
  if (remaining() < n) throw Error(ErrorKind::TruncatedFile, "payload ends early");
}
float Reader::f32() {
  need(4);
  const auto v = static_cast<std::uint32_t>(get_le(bytes_.data() + pos_, 4));
  pos_ += 4;
  return std::bit_cast<float>(v);
}
double Reader::f64() {
  need(8);
  const auto v = get_le(bytes_.data() + pos_, 8);
  pos_ += 8;
  return std::bit_cast<double>(v);
}
std::uint32_t Reader::u32() {
  need(4);
  const auto v = static_cast<std::uint32_t>(get_le(bytes_.data() + pos_, 4));
  pos_ += 4;
  return v;
}
std::uint64_t Reader::u64() {
  need(8);
  const auto v = get_le(bytes_.data() + pos_, 8);
  pos_ += 8;
  return v;
}
std::uint8_t Reader::u8() {
  need(1);
  return bytes_[pos_++];
}

void write(const std::filesystem::path& path, nlohmann::json header, const std::vector<std::uint8_t>& payload) {
  header["schema_version"] = kSchemaVersion;
  header["payload_bytes"] = payload.size();
  const std::string text = header.dump();
  std::vector<std::uint8_t> prefix(kMagic, kMagic + 4);
  put_le(prefix, text.size(), 4);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(prefix.data()), static_cast<std::streamsize>(prefix.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

Blob read(const std::filesystem::path& path, const std::string& expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 8) throw Error(ErrorKind::TruncatedFile, path.string() + ": file shorter than the fixed prefix");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(ErrorKind::Format, path.string() + ": bad magic");
  const auto header_len = static_cast<std::size_t>(get_le(bytes.data() + 4, 4));
  if (bytes.size() < 8 + header_len) throw Error(ErrorKind::TruncatedFile, path.string() + ": header cut short");

  Blob blob;
  try {
    blob.header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, path.string() + ": corrupt header: " + e.what());
  }
  if (!blob.header.is_object() || !blob.header.contains("schema_version") || !blob.header.contains("kind") ||
      !blob.header.contains("payload_bytes")) {
    throw Error(ErrorKind::Format, path.string() + ": header lacks kind/schema_version/payload_bytes");
  }
  const int version = blob.header.at("schema_version").get<int>();
  if (version != kSchemaVersion) {
    throw Error(ErrorKind::VersionMismatch, path.string() + ": schema version " + std::to_string(version) +
                                                ", this build reads " + std::to_string(kSchemaVersion));
  }
  if (blob.header.at("kind").get<std::string>() != expected_kind) {
    throw Error(ErrorKind::Format, path.string() + ": expected a " + expected_kind + " file, found " +
                                       blob.header.at("kind").get<std::string>());
  }
  const auto declared = blob.header.at("payload_bytes").get<std::size_t>();
  const std::size_t available = bytes.size() - 8 - header_len;
  if (available < declared) {
    throw Error(ErrorKind::TruncatedFile, path.string() + ": payload has " + std::to_string(available) +
                                              " bytes, header declares " + std::to_string(declared));
  }
  if (available > declared) throw Error(ErrorKind::Format, path.string() + ": trailing bytes after payload");
  blob.payload.assign(bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_len), bytes.end());
  return blob;
}

}  // namespace bcmq::container
