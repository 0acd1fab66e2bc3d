#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ccls/bigint.hpp"
#include "ccls/bytes.hpp"
#include "ccls/errors.hpp"
#include "ccls/xof.hpp"

namespace ccls {

// Miller-Rabin repetitions: error probability below 4^-40 = 2^-80.
inline constexpr int kPrimalityReps = 40;

inline bool is_probably_prime(const Int& x) {
  return mpz_probab_prime_p(x.get_mpz_t(), kPrimalityReps) != 0;
}

// Public system parameters: a prime-order subgroup of Z_p^* described by
// (p, q, generators g_1..g_m), plus the block geometry (k fragments per
// block, m data elements per fragment, element_size bytes packed into each
// element, block size budget s_B) and the 32-byte seed all deterministic
// derivations are keyed with.
//
// element_size == 0 is the "unpacked" sentinel: fragments are handled
// directly as vectors of field elements and the byte-packing layer
// (split/reassemble and its geometry invariants) is disabled.  The toy
// instance below uses it.
struct SystemParams {
  Int p;
  Int q;
  std::vector<Int> g;
  uint32_t k = 0;
  uint32_t m = 0;
  uint32_t element_size = 0;
  uint64_t block_size = 0;
  std::array<uint8_t, 32> seed{};

  size_t p_width() const { return (bit_length(p) + 7) / 8; }
  size_t q_width() const { return (bit_length(q) + 7) / 8; }
  // capacity in bytes of one block's worth of packed elements
  uint64_t packed_capacity() const {
    return uint64_t(k) * m * element_size;
  }

  bool operator==(const SystemParams&) const = default;
};

inline uint64_t ceil_div_u64(uint64_t a, uint64_t b) { return a / b + (a % b != 0); }

// m = ceil(ceil(s_B / k) / element_size)
inline uint32_t fragment_element_count(uint64_t block_size, uint32_t k, uint32_t element_size) {
  uint64_t per_fragment = ceil_div_u64(block_size, k);
  uint64_t m = ceil_div_u64(per_fragment, element_size);
  if (m == 0 || m > UINT32_MAX) fail(Errc::invalid_geometry, "fragment element count out of range");
  return uint32_t(m);
}

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;

  void flag(const std::string& msg) {
    ok = false;
    violations.push_back(msg);
  }
};

inline ValidationReport validate_params(const SystemParams& params) {
  ValidationReport report;
  if (params.p <= 2 || !is_probably_prime(params.p)) report.flag("p not prime");
  if (params.q <= 1 || !is_probably_prime(params.q)) report.flag("q not prime");
  if (params.q > 1 && (params.p - 1) % params.q != 0) report.flag("q does not divide p-1");
  if (params.k == 0) report.flag("k not positive");
  if (params.m == 0) report.flag("m not positive");
  if (params.g.size() != params.m) report.flag("generator count mismatch");
  for (const Int& g : params.g) {
    if (g <= 0 || g >= params.p) {
      report.flag("generator out of range");
      continue;
    }
    if (g == 1) {
      report.flag("generator equals identity");
      continue;
    }
    if (powmod(g, params.q, params.p) != 1) report.flag("generator order not q");
  }
  if (params.element_size > 0) {
    if (uint64_t(params.element_size) * 8 >= bit_length(params.q))
      report.flag("element size too large for q");
    if (params.block_size < params.k) report.flag("block size below k");
    else if (params.m != fragment_element_count(params.block_size, params.k, params.element_size))
      report.flag("m inconsistent with block geometry");
  }
  return report;
}

struct GenOptions {
  unsigned p_bits = 1024;
  unsigned q_bits = 257;
  uint32_t k = 32;
  uint32_t element_size = 32;
  uint64_t block_size = uint64_t(1) << 20;
  std::array<uint8_t, 32> seed{};
};

// Deterministic parameter generation.  q is found first by rejection over
// q_bits-wide odd candidates drawn from the seeded stream; p is the first
// prime q*t + 1 (t even, scanned upward) that makes p exactly p_bits wide,
// so q | p-1 by construction.  Generators are x^((p-1)/q) for streamed x,
// rejecting results <= 1; anything that survives has order exactly q.
inline SystemParams generate_params(const GenOptions& opt) {
  if (opt.q_bits < 2 || opt.p_bits <= opt.q_bits)
    fail(Errc::invalid_geometry, "need p_bits > q_bits >= 2");
  if (opt.k == 0) fail(Errc::invalid_geometry, "k must be positive");
  if (opt.element_size == 0) fail(Errc::invalid_geometry, "element_size must be positive");
  if (uint64_t(opt.element_size) * 8 >= opt.q_bits)
    fail(Errc::invalid_geometry, "element_size too large for q width");
  if (opt.block_size < opt.k) fail(Errc::invalid_geometry, "block_size below k");

  SystemParams params;
  params.k = opt.k;
  params.element_size = opt.element_size;
  params.block_size = opt.block_size;
  params.seed = opt.seed;
  params.m = fragment_element_count(opt.block_size, opt.k, opt.element_size);

  XofStream qs(params.seed, "prime-q");
  bool found = false;
  for (unsigned attempt = 0; attempt < 100 * opt.q_bits; ++attempt) {
    Int cand = qs.raw_bits(opt.q_bits);
    mpz_setbit(cand.get_mpz_t(), opt.q_bits - 1);
    mpz_setbit(cand.get_mpz_t(), 0);
    if (is_probably_prime(cand)) {
      params.q = cand;
      found = true;
      break;
    }
  }
  if (!found) fail(Errc::generation_failure, "no prime q found");

  Int low = Int(1) << (opt.p_bits - 1);
  Int high = Int(1) << opt.p_bits;
  Int t = (low - 1) / params.q + 1;
  if (t % 2 != 0) t += 1;
  found = false;
  for (Int p = params.q * t + 1; p < high; p += 2 * params.q) {
    if (p < low) continue;
    if (is_probably_prime(p)) {
      params.p = p;
      found = true;
      break;
    }
  }
  if (!found) fail(Errc::generation_failure, "no prime p = q*t + 1 in range");

  Int cofactor = (params.p - 1) / params.q;
  XofStream gs(params.seed, "generators");
  params.g.reserve(params.m);
  for (uint32_t v = 0; v < params.m; ++v) {
    Int g;
    unsigned attempts = 0;
    do {
      if (++attempts > 1000) fail(Errc::generation_failure, "no generator found");
      Int x = gs.uniform_int(params.p, params.p_width() + 8);
      g = powmod(x, cofactor, params.p);
    } while (g <= 1);
    params.g.push_back(g);
  }
  return params;
}

// Toy instance over p=23, q=11 with generators 2 and 4 (both of order 11).
// Unpacked: element_size 0, data handled as field elements directly.
inline SystemParams toy_params() {
  SystemParams params;
  params.p = 23;
  params.q = 11;
  params.g = {Int(2), Int(4)};
  params.k = 2;
  params.m = 2;
  params.element_size = 0;
  params.block_size = 0;
  params.seed.fill(0);
  return params;
}

inline constexpr char kParamMagic[4] = {'C', 'C', 'L', 'S'};
inline constexpr uint8_t kParamVersion = 0x01;

// Binary layout: magic "CCLS", version 0x01, then p and q as 4-byte BE
// length + magnitude, 4-byte BE m, m generators at the fixed width of p,
// 4-byte BE k and element_size, 8-byte BE block size, 32-byte seed.
inline std::vector<uint8_t> serialize_params(const SystemParams& params) {
  std::vector<uint8_t> out(kParamMagic, kParamMagic + 4);
  out.push_back(kParamVersion);
  auto put_varint = [&out](const Int& x) {
    size_t width = (bit_length(x) + 7) / 8;
    bytes::put_u32(out, uint32_t(width));
    append_int_be(out, x, width);
  };
  put_varint(params.p);
  put_varint(params.q);
  bytes::put_u32(out, params.m);
  for (const Int& g : params.g) append_int_be(out, g, params.p_width());
  bytes::put_u32(out, params.k);
  bytes::put_u32(out, params.element_size);
  bytes::put_u64(out, params.block_size);
  out.insert(out.end(), params.seed.begin(), params.seed.end());
  return out;
}

inline SystemParams parse_params(std::span<const uint8_t> data) {
  bytes::Reader r(data);
  auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), kParamMagic))
    fail(Errc::malformed_encoding, "bad magic");
  auto version = r.take(1);
  if (version[0] != kParamVersion) fail(Errc::malformed_encoding, "unsupported version");
  auto get_varint = [&r]() {
    uint32_t width = r.u32();
    if (width == 0 || width > 16384) fail(Errc::malformed_encoding, "integer width out of range");
    return int_from_bytes_be(r.take(width));
  };
  SystemParams params;
  params.p = get_varint();
  params.q = get_varint();
  params.m = r.u32();
  if (params.m == 0 || params.m > (uint32_t(1) << 20))
    fail(Errc::malformed_encoding, "generator count out of range");
  size_t gw = params.p_width();
  params.g.reserve(params.m);
  for (uint32_t v = 0; v < params.m; ++v) params.g.push_back(int_from_bytes_be(r.take(gw)));
  params.k = r.u32();
  params.element_size = r.u32();
  params.block_size = r.u64();
  auto seed = r.take(32);
  std::copy(seed.begin(), seed.end(), params.seed.begin());
  r.expect_end();
  return params;
}

}  // namespace ccls
