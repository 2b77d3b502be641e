// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dvclip {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

/// Malformed, truncated or mismatched file content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  }

  void magic(std::string_view tag, std::uint32_t version) {
    out_.write(tag.data(), static_cast<std::streamsize>(tag.size()));
    u32(version);
  }

  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }

  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }

  void doubles(const double* data, std::size_t n) { raw(data, n * sizeof(double)); }

  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write to '" + path_.string() + "' failed");
  }

 private:
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

  std::filesystem::path path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  /// Checks the tag and returns the stored version.
  std::uint32_t magic(std::string_view tag) {
    std::string got(tag.size(), '\0');
    raw(got.data(), tag.size());
    if (got != tag) throw FormatError("'" + path_.string() + "' is not a " + std::string(tag.substr(0, tag.find('\0'))) + " file");
    return u32();
  }

  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    raw(&v, sizeof v);
    return v;
  }

  std::string str() {
    const auto n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  std::vector<double> doubles(std::uint64_t n) {
    if (n > remaining() / sizeof(double)) {
      throw FormatError("'" + path_.string() + "' is truncated: expected " + std::to_string(n) + " values");
    }
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  bool at_end() const { return pos_ == data_.size(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  void raw(void* p, std::size_t n) {
    if (n > remaining()) throw FormatError("'" + path_.string() + "' is truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }

  std::filesystem::path path_;
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace dvclip
