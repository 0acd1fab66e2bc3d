#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ccls/group_params.hpp"
#include "ccls/multiexp.hpp"

namespace ccls {

// A fragment is m data elements of Z_q.
struct Fragment {
  std::vector<Int> elements;

  bool operator==(const Fragment&) const = default;
};

// h(F) = prod_v g_v^(f_v) mod p, an element of the order-q subgroup.
struct FragmentHash {
  Int value;

  bool operator==(const FragmentHash&) const = default;
};

inline bool fragment_is_canonical(const SystemParams& params, const Fragment& f) {
  if (f.elements.size() != params.m) return false;
  for (const Int& e : f.elements)
    if (sgn(e) < 0 || e >= params.q) return false;
  return true;
}

inline void check_fragment(const SystemParams& params, const Fragment& f) {
  if (f.elements.size() != params.m) fail(Errc::dimension_mismatch, "fragment element count");
  for (const Int& e : f.elements)
    if (sgn(e) < 0 || e >= params.q) fail(Errc::element_out_of_range, "fragment element not in Z_q");
}

// Reusable hasher holding fixed-window tables for the system generators.
// Construction costs m * (2^window - 2) multiplications; afterwards the
// tables are read-only, so a single instance can serve concurrent hashing.
class FragmentHasher {
 public:
  explicit FragmentHasher(const SystemParams& params, unsigned window = 5)
      : params_(&params),
        table_(params.p, params.g, unsigned(bit_length(params.q)), window, true) {}

  FragmentHash hash(const Fragment& f) const {
    check_fragment(*params_, f);
    return FragmentHash{table_.product(f.elements)};
  }

  bool verify(const Fragment& f, const FragmentHash& claimed) const {
    return hash(f).value == claimed.value;
  }

  const SystemParams& params() const { return *params_; }

 private:
  const SystemParams* params_;
  PowProductTable table_;
};

inline FragmentHash hash_fragment(const SystemParams& params, const Fragment& f) {
  check_fragment(params, f);
  return FragmentHash{pow_product(params.p, params.g, f.elements, unsigned(bit_length(params.q)))};
}

inline std::vector<FragmentHash> hash_block(const SystemParams& params,
                                            std::span<const Fragment> fragments) {
  if (fragments.size() != params.k) fail(Errc::dimension_mismatch, "fragment count");
  FragmentHasher hasher(params, 4);
  std::vector<FragmentHash> out;
  out.reserve(fragments.size());
  for (const Fragment& f : fragments) out.push_back(hasher.hash(f));
  return out;
}

// Combines k source hashes under a coefficient vector:
//   prod_l h_l^(a_l) mod p.
// Coefficients are accepted as arbitrary non-negative integers and reduced
// mod q; zero coefficients are skipped entirely, so sparse vectors cost
// only their support.  Tables for each source hash are built on first use
// and reused across calls, which is what makes per-manifest verification of
// many coded fragments cheap.
class HashCombiner {
 public:
  HashCombiner(const SystemParams& params, std::span<const FragmentHash> sources,
               unsigned window = 0)
      : p_(params.p), q_(params.q) {
    if (sources.size() != params.k) fail(Errc::dimension_mismatch, "source hash count");
    std::vector<Int> bases;
    bases.reserve(sources.size());
    for (const FragmentHash& h : sources) {
      if (h.value <= 0 || h.value >= p_) fail(Errc::element_out_of_range, "hash not in group");
      bases.push_back(h.value);
    }
    if (window == 0) window = params.k >= 128 ? 7 : 6;
    table_.emplace(p_, std::move(bases), unsigned(bit_length(q_)), window, false);
  }

  size_t size() const { return table_->base_count(); }

  FragmentHash combine(std::span<const Int> coeffs) const {
    if (coeffs.size() != size()) fail(Errc::dimension_mismatch, "coefficient count");
    std::vector<uint32_t> indices;
    std::vector<Int> exps;
    for (uint32_t l = 0; l < coeffs.size(); ++l) {
      if (sgn(coeffs[l]) < 0) fail(Errc::invalid_argument, "negative coefficient");
      Int r = coeffs[l] % q_;
      if (r != 0) {
        indices.push_back(l);
        exps.push_back(std::move(r));
      }
    }
    return FragmentHash{table_->product(indices, exps)};
  }

  bool verify(std::span<const Int> coeffs, const FragmentHash& claimed) const {
    return combine(coeffs).value == claimed.value;
  }

 private:
  Int p_, q_;
  std::optional<PowProductTable> table_;
};

inline FragmentHash combine_hashes(const SystemParams& params,
                                   std::span<const FragmentHash> sources,
                                   std::span<const Int> coeffs) {
  HashCombiner combiner(params, sources, 4);
  return combiner.combine(coeffs);
}

inline bool verify_coded_hash(const SystemParams& params, std::span<const FragmentHash> sources,
                              std::span<const Int> coeffs, const FragmentHash& claimed) {
  return combine_hashes(params, sources, coeffs).value == claimed.value;
}

inline bool verify_coded_fragment(const SystemParams& params, const Fragment& coded,
                                  const FragmentHash& claimed) {
  return hash_fragment(params, coded).value == claimed.value;
}

}  // namespace ccls
