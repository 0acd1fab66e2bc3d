#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "ccls/homomorphic_hash.hpp"
#include "ccls/xof.hpp"

namespace ccls {

// Coefficient vector for one coded fragment.  The vector always has k
// entries; a sparse code of degree d leaves k-d of them zero.  Coefficients
// are a pure function of (seed, node_id, block_id, index), so any party can
// re-derive them and nobody has to ship them on the wire.
struct CoeffVector {
  uint64_t node_id = 0;
  uint64_t block_id = 0;
  uint32_t index = 0;
  uint32_t degree = 0;
  std::vector<Int> coeffs;

  bool operator==(const CoeffVector&) const = default;
};

struct CodedFragment {
  uint64_t node_id = 0;
  uint64_t block_id = 0;
  uint32_t index = 0;
  Fragment data;

  bool operator==(const CodedFragment&) const = default;
};

struct BlockLayout {
  uint64_t block_len = 0;
  uint32_t k = 0;
  uint32_t m = 0;
  uint32_t element_size = 0;

  bool operator==(const BlockLayout&) const = default;
};

struct SplitResult {
  std::vector<Fragment> fragments;
  BlockLayout layout;
};

// Packs a block into k fragments of m elements.  The byte layout is an
// 8-byte big-endian length prefix, the block, then zero padding out to
// k*m*element_size bytes; consecutive element_size-byte chunks fill fragment
// 0 first, then fragment 1, and so on.  Each chunk is read big-endian, and
// element_size*8 < |q| keeps every value canonical in Z_q.
inline SplitResult split_block(const SystemParams& params, std::span<const uint8_t> block) {
  if (params.element_size == 0) fail(Errc::invalid_geometry, "params have no packed layout");
  if (block.size() > params.block_size) fail(Errc::block_too_large, "block exceeds size budget");
  uint64_t capacity = params.packed_capacity();
  if (block.size() + 8 > capacity)
    fail(Errc::block_too_large, "prefixed block exceeds packed capacity");

  std::vector<uint8_t> payload;
  payload.reserve(capacity);
  bytes::put_u64(payload, block.size());
  payload.insert(payload.end(), block.begin(), block.end());
  payload.resize(capacity, 0);

  SplitResult out;
  out.layout = BlockLayout{block.size(), params.k, params.m, params.element_size};
  out.fragments.resize(params.k);
  const uint8_t* at = payload.data();
  for (auto& fragment : out.fragments) {
    fragment.elements.reserve(params.m);
    for (uint32_t v = 0; v < params.m; ++v) {
      fragment.elements.push_back(int_from_bytes_be({at, params.element_size}));
      at += params.element_size;
    }
  }
  return out;
}

inline std::vector<uint8_t> reassemble_block(const SystemParams& params,
                                             std::span<const Fragment> fragments,
                                             const BlockLayout& layout) {
  if (params.element_size == 0) fail(Errc::invalid_geometry, "params have no packed layout");
  if (layout.k != params.k || layout.m != params.m || layout.element_size != params.element_size)
    fail(Errc::dimension_mismatch, "layout disagrees with params");
  if (fragments.size() != params.k) fail(Errc::dimension_mismatch, "fragment count");

  Int bound = Int(1) << (8 * params.element_size);
  std::vector<uint8_t> payload(params.packed_capacity());
  uint8_t* at = payload.data();
  for (const Fragment& fragment : fragments) {
    if (fragment.elements.size() != params.m) fail(Errc::dimension_mismatch, "element count");
    for (const Int& e : fragment.elements) {
      if (sgn(e) < 0 || e >= bound) fail(Errc::corrupt_layout, "element exceeds packed width");
      int_to_bytes_be(e, at, params.element_size);
      at += params.element_size;
    }
  }
  bytes::Reader r(payload);
  uint64_t len = r.u64();
  if (len + 8 > payload.size()) fail(Errc::corrupt_layout, "length prefix out of range");
  if (len != layout.block_len) fail(Errc::corrupt_layout, "length prefix disagrees with layout");
  return {payload.begin() + 8, payload.begin() + 8 + len};
}

// Deterministic coefficients for coded fragment (node_id, block_id, index).
// All draws come from one seeded stream: a dense vector (degree == k) is k
// uniform draws over Z_q, redrawn wholesale in the all-zero corner case; a
// sparse vector picks its support by Fisher-Yates over the k positions and
// then draws a nonzero value per selected position, in selection order.
inline CoeffVector derive_coefficients(const SystemParams& params, uint64_t node_id,
                                       uint64_t block_id, uint32_t index, uint32_t degree) {
  if (degree < 1 || degree > params.k) fail(Errc::invalid_degree, "degree outside [1, k]");
  std::vector<uint8_t> msg(params.seed.begin(), params.seed.end());
  const char label[] = "coefficients";
  msg.insert(msg.end(), label, label + sizeof(label) - 1);
  bytes::put_u64(msg, node_id);
  bytes::put_u64(msg, block_id);
  bytes::put_u32(msg, index);
  XofStream stream(std::move(msg));

  CoeffVector cv;
  cv.node_id = node_id;
  cv.block_id = block_id;
  cv.index = index;
  cv.degree = degree;
  cv.coeffs.assign(params.k, Int(0));
  size_t width = params.q_width();

  if (degree == params.k) {
    for (;;) {
      bool any = false;
      for (auto& c : cv.coeffs) {
        c = stream.uniform_int(params.q, width);
        any = any || c != 0;
      }
      if (any) return cv;
    }
  }

  std::vector<uint32_t> pos(params.k);
  std::iota(pos.begin(), pos.end(), 0);
  for (uint32_t t = 0; t < degree; ++t) {
    uint32_t r = t + uint32_t(stream.below(params.k - t));
    std::swap(pos[t], pos[r]);
  }
  for (uint32_t t = 0; t < degree; ++t) {
    Int c;
    do {
      c = stream.uniform_int(params.q, width);
    } while (c == 0);
    cv.coeffs[pos[t]] = c;
  }
  return cv;
}

// Coded fragment elements: out_v = sum_l coeffs[l] * fragments[l].elements[v]
// mod q.  Zero coefficients contribute nothing, so the cost is degree * m.
inline CodedFragment encode_fragment(const SystemParams& params,
                                     std::span<const Fragment> fragments,
                                     const CoeffVector& cv) {
  if (fragments.size() != params.k || cv.coeffs.size() != params.k)
    fail(Errc::dimension_mismatch, "fragment or coefficient count");
  for (const Fragment& f : fragments) check_fragment(params, f);

  std::vector<uint32_t> support;
  for (uint32_t l = 0; l < params.k; ++l) {
    if (sgn(cv.coeffs[l]) < 0) fail(Errc::invalid_argument, "negative coefficient");
    if (cv.coeffs[l] != 0) support.push_back(l);
  }

  CodedFragment out;
  out.node_id = cv.node_id;
  out.block_id = cv.block_id;
  out.index = cv.index;
  out.data.elements.assign(params.m, Int(0));
  Int acc;
  for (uint32_t v = 0; v < params.m; ++v) {
    acc = 0;
    for (uint32_t l : support)
      mpz_addmul(acc.get_mpz_t(), cv.coeffs[l].get_mpz_t(),
                 fragments[l].elements[v].get_mpz_t());
    mpz_mod(acc.get_mpz_t(), acc.get_mpz_t(), params.q.get_mpz_t());
    out.data.elements[v] = acc;
  }
  return out;
}

// Incremental Gaussian elimination over Z_q.  Rows are fed one at a time;
// each is reduced against the pivot rows collected so far and either becomes
// a new pivot or is discarded as dependent, so rank never regresses and the
// first k independent rows in feed order win.
//
// Inner loops defer modular reduction: row entries accumulate signed
// products via addmul/submul and are reduced only when a column is
// inspected or a pivot is frozen.  With k <= 512 and |q| <= 384 bits the
// intermediate magnitudes stay far below GMP limits, and skipping the
// per-operation reductions roughly triples elimination throughput.
class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(const SystemParams& params)
      : q_(params.q), k_(params.k), m_(params.m), pivot_row_(params.k, kNoRow) {}

  uint32_t rank() const { return rank_; }
  bool complete() const { return rank_ == k_; }
  uint32_t rows_fed() const { return fed_; }

  bool feed(const CoeffVector& cv, const CodedFragment& cf) {
    if (cv.node_id != cf.node_id || cv.block_id != cf.block_id || cv.index != cf.index)
      fail(Errc::invalid_argument, "coefficients do not match fragment origin");
    if (cv.coeffs.size() != k_ || cf.data.elements.size() != m_)
      fail(Errc::dimension_mismatch, "row shape");
    if (!saw_block_) {
      block_id_ = cf.block_id;
      saw_block_ = true;
    } else if (cf.block_id != block_id_) {
      fail(Errc::invalid_argument, "mixed block ids");
    }
    ++fed_;
    if (complete()) return false;

    std::vector<Int> row(k_ + m_);
    for (uint32_t l = 0; l < k_; ++l)
      mpz_mod(row[l].get_mpz_t(), cv.coeffs[l].get_mpz_t(), q_.get_mpz_t());
    for (uint32_t v = 0; v < m_; ++v)
      mpz_mod(row[k_ + v].get_mpz_t(), cf.data.elements[v].get_mpz_t(), q_.get_mpz_t());

    for (uint32_t col = 0; col < k_; ++col) {
      mpz_mod(row[col].get_mpz_t(), row[col].get_mpz_t(), q_.get_mpz_t());
      if (row[col] == 0) continue;
      if (pivot_row_[col] == kNoRow) {
        for (size_t e = col + 1; e < row.size(); ++e)
          mpz_mod(row[e].get_mpz_t(), row[e].get_mpz_t(), q_.get_mpz_t());
        Int inv = invmod(row[col], q_);
        rows_.push_back(Row{std::move(row), col, std::move(inv)});
        pivot_row_[col] = uint32_t(rows_.size() - 1);
        ++rank_;
        return true;
      }
      const Row& pr = rows_[pivot_row_[col]];
      Int c = mulmod(row[col], pr.inv, q_);
      if (c != 0)
        for (size_t e = col + 1; e < row.size(); ++e)
          mpz_submul(row[e].get_mpz_t(), c.get_mpz_t(), pr.entries[e].get_mpz_t());
      row[col] = 0;
    }
    return false;
  }

  // Back-substitution.  Requires full rank.
  std::vector<Fragment> solve() const {
    if (!complete()) fail(Errc::rank_deficient, "not enough independent rows");
    std::vector<std::vector<Int>> sol(k_);
    for (uint32_t col = k_; col-- > 0;) {
      const Row& r = rows_[pivot_row_[col]];
      std::vector<Int> acc(r.entries.begin() + k_, r.entries.end());
      for (uint32_t c2 = col + 1; c2 < k_; ++c2) {
        const Int& a = r.entries[c2];
        if (a != 0)
          for (uint32_t v = 0; v < m_; ++v)
            mpz_submul(acc[v].get_mpz_t(), a.get_mpz_t(), sol[c2][v].get_mpz_t());
      }
      for (uint32_t v = 0; v < m_; ++v) {
        mpz_mod(acc[v].get_mpz_t(), acc[v].get_mpz_t(), q_.get_mpz_t());
        acc[v] = mulmod(acc[v], r.inv, q_);
      }
      sol[col] = std::move(acc);
    }
    std::vector<Fragment> out(k_);
    for (uint32_t l = 0; l < k_; ++l) out[l].elements = std::move(sol[l]);
    return out;
  }

 private:
  static constexpr uint32_t kNoRow = UINT32_MAX;

  struct Row {
    std::vector<Int> entries;  // k coefficient columns then m payload columns
    uint32_t col;
    Int inv;
  };

  Int q_;
  uint32_t k_, m_;
  std::vector<uint32_t> pivot_row_;
  std::vector<Row> rows_;
  uint32_t rank_ = 0;
  uint32_t fed_ = 0;
  uint64_t block_id_ = 0;
  bool saw_block_ = false;
};

// Solves for the k source fragments from coded rows, consuming rows in
// order and ignoring dependent ones.
inline std::vector<Fragment> decode_block(
    const SystemParams& params, std::span<const std::pair<CoeffVector, CodedFragment>> rows) {
  IncrementalDecoder dec(params);
  for (const auto& [cv, cf] : rows) {
    dec.feed(cv, cf);
    if (dec.complete()) break;
  }
  return dec.solve();
}

// Wire form: 4-byte BE element count, then fixed-width big-endian elements
// of ceil(|q|/8) bytes each.
inline std::vector<uint8_t> fragment_to_bytes(const SystemParams& params, const Fragment& f) {
  std::vector<uint8_t> out;
  size_t width = params.q_width();
  out.reserve(4 + f.elements.size() * width);
  bytes::put_u32(out, uint32_t(f.elements.size()));
  for (const Int& e : f.elements) append_int_be(out, e, width);
  return out;
}

inline Fragment fragment_from_reader(const SystemParams& params, bytes::Reader& r) {
  uint32_t count = r.u32();
  if (count != params.m) fail(Errc::malformed_encoding, "element count mismatch");
  Fragment f;
  f.elements.reserve(count);
  size_t width = params.q_width();
  for (uint32_t v = 0; v < count; ++v) f.elements.push_back(int_from_bytes_be(r.take(width)));
  return f;
}

inline Fragment fragment_from_bytes(const SystemParams& params, std::span<const uint8_t> data) {
  bytes::Reader r(data);
  Fragment f = fragment_from_reader(params, r);
  r.expect_end();
  return f;
}

// CodedFragment wire form prepends the origin: 8-byte BE node and block ids
// and the 4-byte BE fragment index.
inline std::vector<uint8_t> coded_fragment_to_bytes(const SystemParams& params,
                                                    const CodedFragment& cf) {
  std::vector<uint8_t> out;
  bytes::put_u64(out, cf.node_id);
  bytes::put_u64(out, cf.block_id);
  bytes::put_u32(out, cf.index);
  auto body = fragment_to_bytes(params, cf.data);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline CodedFragment coded_fragment_from_bytes(const SystemParams& params,
                                               std::span<const uint8_t> data) {
  bytes::Reader r(data);
  CodedFragment cf;
  cf.node_id = r.u64();
  cf.block_id = r.u64();
  cf.index = r.u32();
  cf.data = fragment_from_reader(params, r);
  r.expect_end();
  return cf;
}

}  // namespace ccls
