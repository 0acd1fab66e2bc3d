#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "ccls/bigint.hpp"
#include "ccls/errors.hpp"

namespace ccls {

// Simultaneous fixed-window exponentiation: computes prod_i base[i]^e[i] mod
// modulus with one shared squaring chain (ceil(exp_bits / window) * window
// squarings total, instead of one chain per base) plus per-base tables of
// base^1 .. base^(2^w - 1).
//
// Tables are built either eagerly (constructor cost, read-only afterwards,
// safe to share across threads) or lazily on first use of each base (cheaper
// when most bases never appear, e.g. sparse coefficient vectors; not thread
// safe).
class PowProductTable {
 public:
  PowProductTable(Int modulus, std::vector<Int> bases, unsigned exp_bits, unsigned window,
                  bool precompute)
      : mod_(std::move(modulus)), bases_(std::move(bases)), exp_bits_(exp_bits), window_(window) {
    if (window_ == 0 || window_ > 12) fail(Errc::invalid_argument, "bad window width");
    if (exp_bits_ == 0 || exp_bits_ > kMaxExpBits) fail(Errc::invalid_argument, "bad exponent width");
    rows_ = (exp_bits_ + window_ - 1) / window_;
    tables_.resize(bases_.size());
    if (precompute)
      for (uint32_t v = 0; v < bases_.size(); ++v) ensure_table(v);
  }

  size_t base_count() const { return bases_.size(); }
  const Int& modulus() const { return mod_; }

  // dense form: one exponent per base
  Int product(std::span<const Int> exponents) const {
    if (exponents.size() != bases_.size()) fail(Errc::dimension_mismatch, "exponent count");
    std::vector<uint32_t> indices(exponents.size());
    for (uint32_t i = 0; i < exponents.size(); ++i) indices[i] = i;
    return product(indices, exponents);
  }

  // sparse form: exponents for an index subset, other bases implicitly ^0
  Int product(std::span<const uint32_t> indices, std::span<const Int> exponents) const {
    if (indices.size() != exponents.size()) fail(Errc::dimension_mismatch, "index count");
    size_t n = indices.size();
    std::vector<std::array<uint64_t, 6>> limbs(n);
    for (size_t t = 0; t < n; ++t) {
      const Int& e = exponents[t];
      if (sgn(e) < 0 || bit_length(e) > exp_bits_)
        fail(Errc::invalid_argument, "exponent out of range");
      if (indices[t] >= bases_.size()) fail(Errc::dimension_mismatch, "base index");
      limbs[t].fill(0);
      if (e != 0) {
        size_t count = 0;
        mpz_export(limbs[t].data(), &count, -1, 8, 0, 0, e.get_mpz_t());
      }
    }
    Int acc = 1, tmp;
    for (int row = int(rows_) - 1; row >= 0; --row) {
      if (acc != 1)
        for (unsigned s = 0; s < window_; ++s) {
          mpz_mul(tmp.get_mpz_t(), acc.get_mpz_t(), acc.get_mpz_t());
          mpz_mod(acc.get_mpz_t(), tmp.get_mpz_t(), mod_.get_mpz_t());
        }
      for (size_t t = 0; t < n; ++t) {
        unsigned d = digit(limbs[t], unsigned(row) * window_);
        if (d) {
          const Int& entry = ensure_table(indices[t])[d - 1];
          mpz_mul(tmp.get_mpz_t(), acc.get_mpz_t(), entry.get_mpz_t());
          mpz_mod(acc.get_mpz_t(), tmp.get_mpz_t(), mod_.get_mpz_t());
        }
      }
    }
    return acc;
  }

 private:
  static constexpr unsigned kMaxExpBits = 384;

  const std::vector<Int>& ensure_table(uint32_t v) const {
    auto& table = tables_[v];
    if (table.empty()) {
      size_t entries = (size_t(1) << window_) - 1;
      table.reserve(entries);
      table.push_back(bases_[v] % mod_);
      Int tmp;
      for (size_t i = 1; i < entries; ++i) {
        mpz_mul(tmp.get_mpz_t(), table.back().get_mpz_t(), table.front().get_mpz_t());
        table.push_back(Int());
        mpz_mod(table.back().get_mpz_t(), tmp.get_mpz_t(), mod_.get_mpz_t());
      }
    }
    return table;
  }

  unsigned digit(const std::array<uint64_t, 6>& limbs, unsigned pos) const {
    unsigned word = pos >> 6, off = pos & 63;
    uint64_t v = limbs[word] >> off;
    if (off + window_ > 64 && word + 1 < limbs.size()) v |= limbs[word + 1] << (64 - off);
    return unsigned(v & ((uint64_t(1) << window_) - 1));
  }

  Int mod_;
  std::vector<Int> bases_;
  unsigned exp_bits_;
  unsigned window_;
  unsigned rows_;
  mutable std::vector<std::vector<Int>> tables_;
};

// One-shot convenience for callers without a precomputed table.
inline Int pow_product(const Int& modulus, std::span<const Int> bases,
                       std::span<const Int> exponents, unsigned exp_bits, unsigned window = 4) {
  PowProductTable table(modulus, std::vector<Int>(bases.begin(), bases.end()), exp_bits, window,
                        false);
  return table.product(exponents);
}

}  // namespace ccls
