#pragma once

// Self-contained brute-force reference implementations over small moduli.
// Everything here is deliberately naive (repeated multiplication, exhaustive
// search) and shares no code with the library, so the two can check each
// other.

#include <cstdint>
#include <optional>
#include <vector>

namespace oracle {

// base^exp by literal repeated multiplication.
inline uint64_t powmod(uint64_t base, uint64_t exp, uint64_t mod) {
  uint64_t acc = 1 % mod;
  for (uint64_t i = 0; i < exp; ++i) acc = acc * (base % mod) % mod;
  return acc;
}

// prod_v g[v]^f[v] mod p
inline uint64_t hash_fragment(uint64_t p, const std::vector<uint64_t>& g,
                              const std::vector<uint64_t>& f) {
  uint64_t acc = 1 % p;
  for (size_t v = 0; v < g.size(); ++v) acc = acc * powmod(g[v], f[v], p) % p;
  return acc;
}

// prod_l h[l]^a[l] mod p
inline uint64_t combine(uint64_t p, const std::vector<uint64_t>& h,
                        const std::vector<uint64_t>& a) {
  uint64_t acc = 1 % p;
  for (size_t l = 0; l < h.size(); ++l) acc = acc * powmod(h[l], a[l], p) % p;
  return acc;
}

// sum_l a[l] * f[l][v] mod q, per element v
inline std::vector<uint64_t> encode(uint64_t q, const std::vector<std::vector<uint64_t>>& f,
                                    const std::vector<uint64_t>& a) {
  std::vector<uint64_t> out(f[0].size(), 0);
  for (size_t l = 0; l < f.size(); ++l)
    for (size_t v = 0; v < out.size(); ++v) out[v] = (out[v] + a[l] * f[l][v]) % q;
  return out;
}

// Exhaustive search for source fragments x (k fragments of m elements over
// Z_q) satisfying every coded row: coded[r] == sum_l coeff[r][l] * x[l].
// Returns nullopt when no assignment fits, the unique fit otherwise (callers
// pick instances small enough that the search space q^(k*m) is enumerable).
inline std::optional<std::vector<std::vector<uint64_t>>> solve_bruteforce(
    uint64_t q, size_t k, size_t m, const std::vector<std::vector<uint64_t>>& coeffs,
    const std::vector<std::vector<uint64_t>>& coded) {
  size_t cells = k * m;
  std::vector<uint64_t> flat(cells, 0);
  std::optional<std::vector<std::vector<uint64_t>>> found;
  for (;;) {
    bool all_rows_fit = true;
    for (size_t r = 0; r < coeffs.size() && all_rows_fit; ++r)
      for (size_t v = 0; v < m && all_rows_fit; ++v) {
        uint64_t sum = 0;
        for (size_t l = 0; l < k; ++l) sum = (sum + coeffs[r][l] * flat[l * m + v]) % q;
        if (sum != coded[r][v]) all_rows_fit = false;
      }
    if (all_rows_fit) {
      std::vector<std::vector<uint64_t>> sol(k, std::vector<uint64_t>(m));
      for (size_t l = 0; l < k; ++l)
        for (size_t v = 0; v < m; ++v) sol[l][v] = flat[l * m + v];
      if (found) return std::nullopt;  // ambiguous: rows do not pin a unique source
      found = sol;
    }
    size_t i = 0;
    while (i < cells && ++flat[i] == q) flat[i++] = 0;
    if (i == cells) break;
  }
  return found;
}

}  // namespace oracle
