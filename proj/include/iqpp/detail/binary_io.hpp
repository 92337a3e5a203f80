#pragma once

// Little-endian primitive readers/writers shared by the binary formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iqpp/error.hpp"

namespace iqpp::detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::filesystem::path& path)
      : out_(open(path)), path_(path) {
    if (!out_) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "' for writing");
  }

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }

  template <typename T>
  void scalar(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
    bytes(buf, sizeof(T));
  }
  void u16(std::uint16_t v) { scalar(v); }
  void u32(std::uint32_t v) { scalar(v); }
  void u64(std::uint64_t v) { scalar(v); }
  void f32(float v) { scalar(v); }
  void f64(double v) { scalar(v); }

  void short_string(std::string_view s) {
    if (s.size() > 0xFFFF) throw Error(ErrorCode::kFormatError, "string longer than 65535 bytes");
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }

  void finish() {
    out_.flush();
    if (!out_) throw Error(ErrorCode::kIoError, "write failed for '" + path_.string() + "'");
  }

 private:
  static std::ofstream open(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    return std::ofstream(path, std::ios::binary | std::ios::trunc);
  }

  std::ofstream out_;
  std::filesystem::path path_;
};

// Reads from an in-memory copy of the file; every read is bounds-checked
// and a short read raises kFormatError.
class BinaryReader {
 public:
  explicit BinaryReader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
    data_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }

  void bytes(void* dst, std::size_t n) {
    if (n > remaining()) {
      throw Error(ErrorCode::kFormatError, "truncated file '" + path_.string() + "'");
    }
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    if (m.size() > remaining()) {
      throw Error(ErrorCode::kFormatError, "bad magic in '" + path_.string() + "'");
    }
    bytes(got.data(), got.size());
    if (got != m) throw Error(ErrorCode::kFormatError, "bad magic in '" + path_.string() + "'");
  }

  template <typename T>
  T scalar() {
    unsigned char buf[sizeof(T)];
    bytes(buf, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
    }
    T value;
    std::memcpy(&value, buf, sizeof(T));
    return value;
  }
  std::uint16_t u16() { return scalar<std::uint16_t>(); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  float f32() { return scalar<float>(); }
  double f64() { return scalar<double>(); }

  std::string short_string() {
    std::string s(u16(), '\0');
    bytes(s.data(), s.size());
    return s;
  }

  // Guards count fields before allocating: `count` items of at least
  // `min_item_bytes` must still fit in the file.
  void require(std::uint64_t count, std::uint64_t min_item_bytes) const {
    if (min_item_bytes != 0 && count > remaining() / min_item_bytes) {
      throw Error(ErrorCode::kFormatError, "truncated file '" + path_.string() + "'");
    }
  }

  void expect_end() const {
    if (!at_end()) {
      throw Error(ErrorCode::kFormatError, "trailing bytes in '" + path_.string() + "'");
    }
  }

 private:
  std::vector<char> data_;
  std::size_t pos_ = 0;
  std::filesystem::path path_;
};

}  // namespace iqpp::detail
