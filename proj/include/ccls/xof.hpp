#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccls/bigint.hpp"
#include "ccls/bytes.hpp"
#include "ccls/errors.hpp"

namespace ccls {

inline std::array<uint8_t, 32> sha256(std::span<const uint8_t> data) {
  std::array<uint8_t, 32> out{};
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) || len != 32)
    fail(Errc::generation_failure, "sha256 failed");
  return out;
}

inline std::string sha256_hex(std::span<const uint8_t> data) {
  auto d = sha256(data);
  return bytes::to_hex(d);
}

// Deterministic unbounded byte stream: block n of the stream is
// SHAKE256(message || be32(n)) squeezed to 136 bytes.  Every random-looking
// value in the system (coefficients, primes, shuffles, simulated payloads) is
// drawn from one of these streams, keyed by a seed plus a domain label, so
// that runs are reproducible bit for bit.
class XofStream {
 public:
  explicit XofStream(std::vector<uint8_t> message) : msg_(std::move(message)) { refill(); }

  XofStream(std::span<const uint8_t> seed, std::string_view label)
      : XofStream(make_message(seed, label, {})) {}

  XofStream(std::span<const uint8_t> seed, std::string_view label,
            std::span<const uint64_t> fields)
      : XofStream(make_message(seed, label, fields)) {}

  static std::vector<uint8_t> make_message(std::span<const uint8_t> seed, std::string_view label,
                                           std::span<const uint64_t> fields) {
    std::vector<uint8_t> msg(seed.begin(), seed.end());
    msg.insert(msg.end(), label.begin(), label.end());
    for (auto f : fields) bytes::put_u64(msg, f);
    return msg;
  }

  void fill(uint8_t* out, size_t n) {
    while (n > 0) {
      if (pos_ == block_.size()) refill();
      size_t take = std::min(n, block_.size() - pos_);
      std::memcpy(out, block_.data() + pos_, take);
      pos_ += take;
      out += take;
      n -= take;
    }
  }

  std::vector<uint8_t> next(size_t n) {
    std::vector<uint8_t> out(n);
    fill(out.data(), n);
    return out;
  }

  uint64_t u64() {
    uint8_t buf[8];
    fill(buf, 8);
    uint64_t v = 0;
    for (auto b : buf) v = v << 8 | b;
    return v;
  }

  // Uniform draw from [0, n) by rejection on 64-bit draws.
  uint64_t below(uint64_t n) {
    if (n == 0) fail(Errc::invalid_argument, "empty range");
    uint64_t limit = n == 1 ? 0 : UINT64_MAX - UINT64_MAX % n;
    for (;;) {
      uint64_t v = u64();
      if (n == 1) return 0;
      if (v < limit) return v % n;
    }
  }

  // Uniform draw from [0, bound) by rejection on fixed-width big-endian
  // draws of `draw_bytes` bytes.  Requires 2^(8*draw_bytes) >= bound.
  Int uniform_int(const Int& bound, size_t draw_bytes) {
    if (bound <= 0) fail(Errc::invalid_argument, "empty range");
    Int space = Int(1) << (8 * draw_bytes);
    if (space < bound) fail(Errc::invalid_argument, "draw width below bound");
    Int limit = space - space % bound;
    std::vector<uint8_t> buf(draw_bytes);
    for (;;) {
      fill(buf.data(), buf.size());
      Int v = int_from_bytes_be(buf);
      if (v < limit) return v % bound;
    }
  }

  // Raw draw of exactly `nbits` bits (the top bit is not forced).
  Int raw_bits(unsigned nbits) {
    size_t nbytes = (nbits + 7) / 8;
    std::vector<uint8_t> buf(nbytes);
    fill(buf.data(), buf.size());
    unsigned excess = unsigned(nbytes * 8 - nbits);
    if (excess) buf[0] &= uint8_t(0xff >> excess);
    return int_from_bytes_be(buf);
  }

 private:
  void refill() {
    std::vector<uint8_t> input = msg_;
    bytes::put_u32(input, counter_++);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_shake256(), nullptr) &&
              EVP_DigestUpdate(ctx, input.data(), input.size()) &&
              EVP_DigestFinalXOF(ctx, block_.data(), block_.size());
    EVP_MD_CTX_free(ctx);
    if (!ok) fail(Errc::generation_failure, "shake256 failed");
    pos_ = 0;
  }

  std::vector<uint8_t> msg_;
  std::array<uint8_t, 136> block_{};
  size_t pos_ = 0;
  uint32_t counter_ = 0;
};

}  // namespace ccls
