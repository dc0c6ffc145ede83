#pragma once

// Little-endian file helpers shared by the binary formats.

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "cibhash/types.hpp"

namespace cibhash::detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_if_big(T value) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    std::reverse(std::begin(bytes), std::end(bytes));
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

class ByteWriter {
 public:
  explicit ByteWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  }

  void magic(std::string_view m) { out_.write(m.data(), static_cast<std::streamsize>(m.size())); }

  template <typename T>
  void put(T value) {
    value = byteswap_if_big(value);
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }

  template <typename T>
  void put_all(const T* data, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
      out_.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
    } else {
      for (std::size_t i = 0; i < count; ++i) put(data[i]);
    }
  }

  void finish() {
    out_.flush();
    if (!out_) fail(ErrorCode::io, "write failed for '" + path_.string() + "'");
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
    buffer_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void expect_magic(std::string_view m) {
    need(m.size());
    if (std::string_view(buffer_.data() + pos_, m.size()) != m)
      fail(ErrorCode::bad_magic, "'" + path_.string() + "' is not a " + std::string(m) + " file");
    pos_ += m.size();
  }

  void expect_version(std::uint32_t version) {
    auto v = get<std::uint32_t>();
    if (v != version)
      fail(ErrorCode::bad_version, "'" + path_.string() + "' has version " + std::to_string(v));
  }

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, buffer_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return byteswap_if_big(value);
  }

  template <typename T>
  void get_all(T* data, std::size_t count) {
    need_bytes(count, sizeof(T));
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(data, buffer_.data() + pos_, count * sizeof(T));
      pos_ += count * sizeof(T);
    } else {
      for (std::size_t i = 0; i < count; ++i) data[i] = get<T>();
    }
  }

  /// Throws dimension_overflow if count * size does not fit, truncated if the
  /// file is shorter than that.
  void need_bytes(std::uint64_t count, std::size_t size) const {
    if (count > std::numeric_limits<std::uint64_t>::max() / size)
      fail(ErrorCode::dimension_overflow, "'" + path_.string() + "' declares too many elements");
    need(count * size);
  }

  std::size_t remaining() const noexcept { return buffer_.size() - pos_; }

  void expect_end() const {
    if (pos_ != buffer_.size())
      fail(ErrorCode::malformed, "'" + path_.string() + "' has " + std::to_string(remaining()) +
                                     " trailing bytes");
  }

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void need(std::uint64_t bytes) const {
    if (bytes > remaining()) fail(ErrorCode::truncated, "'" + path_.string() + "' ends early");
  }

  std::filesystem::path path_;
  std::vector<char> buffer_;
  std::size_t pos_ = 0;
};

}  // namespace cibhash::detail
