#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "ccls/errors.hpp"

namespace ccls {

// Storage planning for a node keeping r coded fragments (plus the k source
// hashes) per block instead of the block itself.
//
// Per block the node stores r coded fragments of S_B/k bytes and k+r hashes
// of S_H bytes, so the ratio of stored bytes to block bytes is
//   c(k) = (k + r) * S_H / S_B + r / k.
// c is convex in k: fragments shrink as 1/k while hash overhead grows
// linearly, so the integer minimizer sits next to sqrt(r * S_B / S_H).

inline double compression_factor(uint32_t k, uint32_t r, uint64_t block_bytes,
                                 double hash_bytes) {
  if (k == 0 || r == 0) fail(Errc::invalid_argument, "k and r must be positive");
  if (block_bytes == 0 || !(hash_bytes > 0)) fail(Errc::invalid_argument, "sizes must be positive");
  return (double(k) + double(r)) * hash_bytes / double(block_bytes) + double(r) / double(k);
}

inline uint32_t optimal_k(uint32_t r, uint64_t block_bytes, double hash_bytes) {
  if (r == 0) fail(Errc::invalid_argument, "r must be positive");
  if (block_bytes == 0 || !(hash_bytes > 0)) fail(Errc::invalid_argument, "sizes must be positive");
  double x = std::sqrt(double(r) * double(block_bytes) / hash_bytes);
  uint32_t lo = x < 1 ? 1 : uint32_t(std::floor(x));
  uint32_t hi = uint32_t(std::ceil(x));
  if (hi < 1) hi = 1;
  if (lo == hi) return lo;
  double c_lo = compression_factor(lo, r, block_bytes, hash_bytes);
  double c_hi = compression_factor(hi, r, block_bytes, hash_bytes);
  return c_hi < c_lo ? hi : lo;
}

struct StoragePlan {
  uint32_t k = 0;
  uint32_t r = 0;
  uint64_t block_bytes = 0;
  double hash_bytes = 0;
  double compression = 0;

  bool operator==(const StoragePlan&) const = default;
};

inline StoragePlan make_plan(uint32_t k, uint32_t r, uint64_t block_bytes, double hash_bytes) {
  return StoragePlan{k, r, block_bytes, hash_bytes,
                     compression_factor(k, r, block_bytes, hash_bytes)};
}

inline StoragePlan optimal_plan(uint32_t r, uint64_t block_bytes, double hash_bytes) {
  return make_plan(optimal_k(r, block_bytes, hash_bytes), r, block_bytes, hash_bytes);
}

inline std::vector<StoragePlan> plan_table(std::span<const uint32_t> ks,
                                           std::span<const uint32_t> rs, uint64_t block_bytes,
                                           double hash_bytes) {
  std::vector<StoragePlan> out;
  out.reserve(ks.size() * rs.size());
  for (uint32_t r : rs)
    for (uint32_t k : ks) out.push_back(make_plan(k, r, block_bytes, hash_bytes));
  return out;
}

inline std::string plan_table_csv(std::span<const StoragePlan> plans) {
  std::string out = "k,r,block_bytes,hash_bytes,compression\n";
  char line[160];
  for (const StoragePlan& p : plans) {
    std::snprintf(line, sizeof(line), "%u,%u,%llu,%.6g,%.6g\n", p.k, p.r,
                  (unsigned long long)p.block_bytes, p.hash_bytes, p.compression);
    out += line;
  }
  return out;
}

}  // namespace ccls
