// Copyright 2026 The listener-dynamics Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "vivid/error.hpp"

namespace vivid::binio {

namespace detail {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::big) {
    U out{};
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out = static_cast<U>((out << 8) | ((v >> (8 * i)) & 0xff));
    }
    return out;
  } else {
    return v;
  }
}

}  // namespace detail

/// Little-endian byte sink.
class Writer {
 public:
  void bytes(std::string_view s) { buf_.append(s.data(), s.size()); }

  void u32(std::uint32_t v) { put(detail::to_little(v)); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  /// u32 byte length followed by the raw bytes.
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }

  const std::string& data() const { return buf_; }

 private:
  template <typename U>
  void put(U v) {
    char tmp[sizeof(U)];
    std::memcpy(tmp, &v, sizeof(U));
    buf_.append(tmp, sizeof(U));
  }

  std::string buf_;
};

/// Little-endian byte source over an in-memory buffer. Every read checks the
/// remaining length and reports truncation as Errc::truncated.
class Reader {
 public:
  Reader(std::string data, std::string origin) : data_(std::move(data)), origin_(std::move(origin)) {}

  std::string_view bytes(std::size_t n) {
    need(n);
    std::string_view out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, bytes(4).data(), 4);
    return detail::to_little(v);
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }

  std::string str() {
    const std::uint32_t n = u32();
    return std::string(bytes(n));
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& origin() const { return origin_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      fail(Errc::truncated, origin_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                                std::to_string(pos_) + ", file has " + std::to_string(data_.size()) + ")");
    }
  }

  std::string data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(Errc::missing_file, "missing file: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) fail(Errc::io, "write failed for " + path.string());
}

}  // namespace vivid::binio
