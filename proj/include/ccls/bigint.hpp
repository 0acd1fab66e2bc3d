#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccls/bytes.hpp"
#include "ccls/errors.hpp"

namespace ccls {

using Int = mpz_class;

inline size_t bit_length(const Int& x) {
  return x == 0 ? 0 : mpz_sizeinbase(x.get_mpz_t(), 2);
}

inline Int int_from_bytes_be(std::span<const uint8_t> data) {
  Int out;
  if (!data.empty()) mpz_import(out.get_mpz_t(), data.size(), 1, 1, 1, 0, data.data());
  return out;
}

// Writes x into exactly `width` big-endian bytes, left-padded with zeros.
inline void int_to_bytes_be(const Int& x, uint8_t* out, size_t width) {
  if (sgn(x) < 0) fail(Errc::invalid_argument, "negative integer");
  size_t need = (bit_length(x) + 7) / 8;
  if (need > width) fail(Errc::invalid_argument, "integer too wide for field");
  std::memset(out, 0, width);
  if (x != 0) {
    size_t count = 0;
    mpz_export(out + (width - need), &count, 1, 1, 1, 0, x.get_mpz_t());
  }
}

inline void append_int_be(std::vector<uint8_t>& out, const Int& x, size_t width) {
  size_t at = out.size();
  out.resize(at + width);
  int_to_bytes_be(x, out.data() + at, width);
}

inline std::string int_to_hex(const Int& x, size_t width_bytes) {
  std::vector<uint8_t> buf(width_bytes);
  int_to_bytes_be(x, buf.data(), width_bytes);
  return bytes::to_hex(buf);
}

inline Int int_from_hex(std::string_view hex) {
  auto buf = bytes::from_hex(hex);
  return int_from_bytes_be(buf);
}

inline Int powmod(const Int& base, const Int& exp, const Int& mod) {
  Int out;
  mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return out;
}

inline Int invmod(const Int& x, const Int& mod) {
  Int out;
  if (!mpz_invert(out.get_mpz_t(), x.get_mpz_t(), mod.get_mpz_t()))
    fail(Errc::invalid_argument, "element not invertible");
  return out;
}

inline Int mulmod(const Int& a, const Int& b, const Int& mod) {
  Int out = a * b;
  mpz_mod(out.get_mpz_t(), out.get_mpz_t(), mod.get_mpz_t());
  return out;
}

}  // namespace ccls
