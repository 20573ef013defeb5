// Copyright 2026 The structsum Authors. All Rights Reserved.
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

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "structsum/errors.hpp"
#include "structsum/tensor.hpp"

namespace structsum {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'S', 'M', 'C', 'K', 'P', 'T'};

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_arrays(const std::string& path, const std::vector<NamedArray>& arrays, const std::string& meta_json) {
  nlohmann::json header;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& a : arrays) {
    const std::uint64_t nbytes = a.value.size() * 8;
    header["tensors"].push_back({{"name", a.name},
                                 {"shape", {a.value.rows(), a.value.cols()}},
                                 {"dtype", "float64"},
                                 {"offset", offset},
                                 {"nbytes", nbytes}});
    offset += nbytes;
  }
  header["meta"] = meta_json.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta_json);
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& a : arrays)
    for (double v : a.value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw FormatError("short write to " + path);
}

ArrayFile load_arrays(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw FormatError(path + " is not a checkpoint");
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (16 + header_len > bytes.size()) throw FormatError(path + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad header: " + e.what());
  }
  const std::size_t payload = 16 + header_len;

  ArrayFile file;
  file.meta_json = header.value("meta", nlohmann::json::object()).dump();
  for (const auto& t : header.at("tensors")) {
    if (t.value("dtype", "") != "float64") throw FormatError(path + ": unsupported dtype");
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw FormatError(path + ": tensors must be 2-D");
    const auto offset = t.at("offset").get<std::uint64_t>();
    const std::size_t count = shape[0] * shape[1];
    if (payload + offset + count * 8 > bytes.size()) throw FormatError(path + ": truncated payload");
    Matrix m(shape[0], shape[1]);
    for (std::size_t i = 0; i < count; ++i)
      m.values()[i] = std::bit_cast<double>(get_u64(bytes.data() + payload + offset + 8 * i));
    file.arrays.push_back({t.at("name").get<std::string>(), std::move(m)});
  }
  return file;
}

}  // namespace structsum
