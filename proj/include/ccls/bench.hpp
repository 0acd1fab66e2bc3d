#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ccls/coding.hpp"
#include "ccls/node_protocol.hpp"

namespace ccls {

struct BenchRow {
  std::string suite;
  uint32_t k = 0;
  uint32_t d = 0;
  uint32_t m = 0;
  uint64_t size = 0;  // block size the geometry was derived from
  uint32_t trials = 0;
  double seconds = 0.0;  // per operation
};

// Mean wall time per call after one untimed warmup (the warmup also pays
// any lazy table construction, so timings reflect steady state).
template <typename F>
double time_op(uint32_t trials, F&& op) {
  if (trials == 0) fail(Errc::invalid_argument, "trials must be positive");
  op();
  auto t0 = std::chrono::steady_clock::now();
  for (uint32_t i = 0; i < trials; ++i) op();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / trials;
}

// One full producer step: slice the block, derive a coefficient vector of
// the given degree and emit one coded fragment.
inline BenchRow bench_encode(const SystemParams& params, uint32_t d, uint32_t trials) {
  uint64_t usable = std::min<uint64_t>(params.block_size, params.packed_capacity() - 8);
  XofStream stream(std::span<const uint8_t>(params.seed), "bench-block");
  std::vector<uint8_t> block = stream.next(usable);
  uint32_t index = 0;
  double seconds = time_op(trials, [&] {
    auto split = split_block(params, block);
    auto cv = derive_coefficients(params, 1, 0, index++, d);
    encode_fragment(params, split.fragments, cv);
  });
  return BenchRow{"encode", params.k, d, params.m, params.block_size, trials, seconds};
}

// Hashing one fragment of m elements with shared generator tables.
inline BenchRow bench_hash(const SystemParams& params, uint32_t trials) {
  XofStream stream(std::span<const uint8_t>(params.seed), "bench-fragment");
  unsigned ebits = params.element_size ? 8 * params.element_size
                                       : unsigned(bit_length(params.q));
  Fragment f;
  f.elements.reserve(params.m);
  for (uint32_t v = 0; v < params.m; ++v) {
    Int e = stream.raw_bits(ebits);
    if (e >= params.q) e %= params.q;
    f.elements.push_back(std::move(e));
  }
  FragmentHasher hasher(params);
  double seconds = time_op(trials, [&] { hasher.hash(f); });
  return BenchRow{"hash", params.k, 0, params.m, params.block_size, trials, seconds};
}

// Combining k source hashes under one degree-d coefficient vector.
inline BenchRow bench_combine(const SystemParams& params, uint32_t d, uint32_t trials) {
  XofStream stream(std::span<const uint8_t>(params.seed), "bench-sources");
  std::vector<FragmentHash> sources;
  sources.reserve(params.k);
  for (uint32_t l = 0; l < params.k; ++l)
    sources.push_back(FragmentHash{stream.uniform_int(params.p - 1, params.p_width()) + 1});
  HashCombiner combiner(params, sources);
  auto cv = derive_coefficients(params, 7, 7, 0, d);
  double seconds = time_op(trials, [&] { combiner.combine(cv.coeffs); });
  return BenchRow{"combine", params.k, d, params.m, params.block_size, trials, seconds};
}

inline std::string bench_rows_csv(std::span<const BenchRow> rows) {
  std::string out = "suite,k,d,m,size,trials,seconds\n";
  char line[160];
  for (const BenchRow& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%u,%u,%u,%llu,%u,%.9g\n", r.suite.c_str(), r.k, r.d,
                  r.m, (unsigned long long)r.size, r.trials, r.seconds);
    out += line;
  }
  return out;
}

inline std::vector<BenchRow> bench_rows_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "suite,k,d,m,size,trials,seconds")
    fail(Errc::malformed_encoding, "missing benchmark header row");
  std::vector<BenchRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    BenchRow r;
    char suite[32];
    unsigned long long size = 0;
    if (std::sscanf(line.c_str(), "%31[^,],%u,%u,%u,%llu,%u,%lf", suite, &r.k, &r.d, &r.m, &size,
                    &r.trials, &r.seconds) != 7)
      fail(Errc::malformed_encoding, "bad benchmark row: " + line);
    r.suite = suite;
    r.size = size;
    rows.push_back(std::move(r));
  }
  return rows;
}

struct ShapeReport {
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

// Checks the complexity shapes the implementation is supposed to have:
//   encode: at fixed degree and block size, time flat in k (max/min < 2);
//   hash:   at fixed block size, time strictly decreasing in k, and
//           log-log slope against m within [0.8, 1.2] (linear in m);
//   combine: dense time strictly increasing in k, and degree 4 cheaper
//           than dense for k >= 32.
// Rules apply only where the row set has enough points to evaluate them.
inline ShapeReport check_bench_shapes(std::span<const BenchRow> rows) {
  ShapeReport report;
  char buf[192];

  std::map<std::pair<uint32_t, uint64_t>, std::vector<BenchRow>> encode_groups;
  std::map<uint64_t, std::vector<BenchRow>> hash_groups;
  std::map<uint64_t, std::vector<BenchRow>> dense_combine;
  std::map<std::pair<uint64_t, uint32_t>, std::map<uint32_t, double>> combine_by_k;
  for (const BenchRow& r : rows) {
    if (r.suite == "encode") encode_groups[{r.d, r.size}].push_back(r);
    else if (r.suite == "hash") hash_groups[r.size].push_back(r);
    else if (r.suite == "combine") {
      if (r.d == r.k) dense_combine[r.size].push_back(r);
      combine_by_k[{r.size, r.k}][r.d] = r.seconds;
    }
  }
  auto by_k = [](const BenchRow& a, const BenchRow& b) { return a.k < b.k; };

  for (auto& [key, group] : encode_groups) {
    if (group.size() < 2) continue;
    double lo = group[0].seconds, hi = group[0].seconds;
    for (const BenchRow& r : group) {
      lo = std::min(lo, r.seconds);
      hi = std::max(hi, r.seconds);
    }
    if (hi >= 2.0 * lo) {
      std::snprintf(buf, sizeof(buf),
                    "encode d=%u size=%llu: time not flat in k (min %.3g s, max %.3g s)",
                    key.first, (unsigned long long)key.second, lo, hi);
      report.violations.push_back(buf);
    }
  }

  for (auto& [size, group] : hash_groups) {
    if (group.size() < 2) continue;
    std::sort(group.begin(), group.end(), by_k);
    for (size_t i = 1; i < group.size(); ++i)
      if (group[i].seconds >= group[i - 1].seconds) {
        std::snprintf(buf, sizeof(buf),
                      "hash size=%llu: time not strictly decreasing from k=%u to k=%u",
                      (unsigned long long)size, group[i - 1].k, group[i].k);
        report.violations.push_back(buf);
      }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const BenchRow& r : group) {
      double x = std::log(double(r.m)), y = std::log(r.seconds);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    double n = double(group.size());
    double var = sxx - sx * sx / n;
    if (var > 1e-9) {
      double slope = (sxy - sx * sy / n) / var;
      if (slope < 0.8 || slope > 1.2) {
        std::snprintf(buf, sizeof(buf),
                      "hash size=%llu: log-log slope vs m is %.3f, outside [0.8, 1.2]",
                      (unsigned long long)size, slope);
        report.violations.push_back(buf);
      }
    }
  }

  for (auto& [size, group] : dense_combine) {
    if (group.size() < 2) continue;
    std::sort(group.begin(), group.end(), by_k);
    for (size_t i = 1; i < group.size(); ++i)
      if (group[i].seconds <= group[i - 1].seconds) {
        std::snprintf(buf, sizeof(buf),
                      "combine size=%llu: dense time not strictly increasing from k=%u to k=%u",
                      (unsigned long long)size, group[i - 1].k, group[i].k);
        report.violations.push_back(buf);
      }
  }
  for (auto& [key, by_degree] : combine_by_k) {
    uint32_t k = key.second;
    if (k < 32) continue;
    auto sparse = by_degree.find(4);
    auto dense = by_degree.find(k);
    if (sparse == by_degree.end() || dense == by_degree.end()) continue;
    if (sparse->second >= dense->second) {
      std::snprintf(buf, sizeof(buf),
                    "combine k=%u size=%llu: degree 4 (%.3g s) not cheaper than dense (%.3g s)",
                    k, (unsigned long long)key.first, sparse->second, dense->second);
      report.violations.push_back(buf);
    }
  }
  return report;
}

}  // namespace ccls
