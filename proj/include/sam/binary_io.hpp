// Copyright 2026 The samgar Authors. All Rights Reserved.
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

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sam::io {

/// Little-endian blob container shared by dataset payloads and checkpoints.
/// Every blob starts with eight int64 words:
/// magic, version, dim0, dim1, dim2, tag, flags, reserved.
inline constexpr std::int64_t kFeatureMagic = 0x5441454647414D53;  // "SAMGFEAT"
inline constexpr std::int64_t kParamMagic = 0x4D52415047414D53;    // "SAMGPARM"
inline constexpr std::int64_t kMaskMagic = 0x4B53414D47414D53;     // "SAMGMASK"
inline constexpr std::int64_t kFormatVersion = 1;

using Header = std::array<std::int64_t, 8>;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Writer {
 public:
  void i64(std::int64_t v) { put(std::bit_cast<std::uint64_t>(v)); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v)); }
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void header(const Header& h) {
    for (auto w : h) i64(w);
  }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }

  const std::vector<char>& bytes() const noexcept { return bytes_; }

  void save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw IoError("write failed: " + path.string());
  }

 private:
  void put(std::uint64_t bits) {
    for (int b = 0; b < 8; ++b) bytes_.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : name_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + name_);
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::int64_t i64() { return std::bit_cast<std::int64_t>(get()); }
  double f64() { return std::bit_cast<double>(get()); }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  Header header() {
    Header h{};
    for (auto& w : h) w = i64();
    return h;
  }
  void f64s(std::span<double> out) {
    for (auto& v : out) v = f64();
  }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }
  const std::string& name() const noexcept { return name_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("truncated file: " + name_);
  }
  std::uint64_t get() {
    need(8);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += 8;
    return bits;
  }

  std::string name_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

inline void expect_magic(const Header& h, std::int64_t magic, const std::string& what) {
  if (h[0] != magic) throw IoError(what + ": bad magic");
  if (h[1] != kFormatVersion) {
    throw IoError(what + ": unsupported version " + std::to_string(h[1]));
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace sam::io
