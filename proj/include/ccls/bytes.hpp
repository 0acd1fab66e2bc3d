#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccls/errors.hpp"

namespace ccls::bytes {

inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

inline void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int s = 56; s >= 0; s -= 8) out.push_back(uint8_t(v >> s));
}

// Big-endian reader with bounds checking.  All errors surface as
// malformed_encoding so callers can map truncation and garbage uniformly.
class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  std::span<const uint8_t> take(size_t n) {
    if (remaining() < n) fail(Errc::malformed_encoding, "truncated input");
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  uint32_t u32() {
    auto s = take(4);
    return uint32_t(s[0]) << 24 | uint32_t(s[1]) << 16 | uint32_t(s[2]) << 8 | uint32_t(s[3]);
  }

  uint64_t u64() {
    auto s = take(8);
    uint64_t v = 0;
    for (auto b : s) v = v << 8 | b;
    return v;
  }

  void expect_end() const {
    if (!done()) fail(Errc::malformed_encoding, "trailing bytes");
  }

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

inline std::string to_hex(std::span<const uint8_t> data) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 15]);
  }
  return out;
}

inline std::vector<uint8_t> from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2) fail(Errc::malformed_encoding, "odd hex length");
  std::vector<uint8_t> out(hex.size() / 2);
  for (size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]), lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) fail(Errc::malformed_encoding, "bad hex digit");
    out[i] = uint8_t(hi << 4 | lo);
  }
  return out;
}

}  // namespace ccls::bytes
