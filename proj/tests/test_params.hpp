#pragma once

#include <map>
#include <tuple>

#include "ccls/group_params.hpp"

// Parameter generation is deterministic but not free at the 1024-bit scale,
// so test suites share instances through this cache.
inline const ccls::SystemParams& cached_params(uint32_t k, uint64_t block_size,
                                               unsigned p_bits = 1024, unsigned q_bits = 257,
                                               uint32_t element_size = 32) {
  using Key = std::tuple<uint32_t, uint64_t, unsigned, unsigned, uint32_t>;
  static std::map<Key, ccls::SystemParams> cache;
  Key key{k, block_size, p_bits, q_bits, element_size};
  auto it = cache.find(key);
  if (it == cache.end()) {
    ccls::GenOptions opt;
    opt.p_bits = p_bits;
    opt.q_bits = q_bits;
    opt.k = k;
    opt.element_size = element_size;
    opt.block_size = block_size;
    it = cache.emplace(key, ccls::generate_params(opt)).first;
  }
  return it->second;
}

// Small instance (96-bit p, 33-bit q) for fast property tests.
inline const ccls::SystemParams& small_params(uint32_t k = 4, uint64_t block_size = 128) {
  return cached_params(k, block_size, 96, 33, 2);
}
