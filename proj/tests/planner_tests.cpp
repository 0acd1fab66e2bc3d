#include <catch2/catch_amalgamated.hpp>

#include "ccls/planner.hpp"

using namespace ccls;

namespace {
constexpr uint64_t kMiB = uint64_t(1) << 20;
constexpr double kHash = 134.0;
}  // namespace

TEST_CASE("compression factor closed form", "[planner]") {
  // hand-computed: (k + r) * S_H / S_B + r / k
  CHECK(compression_factor(1, 1, 1000, 10) == Catch::Approx(0.02 + 1.0).epsilon(1e-12));
  CHECK(compression_factor(4, 2, 1 << 10, 16) == Catch::Approx(6.0 * 16 / 1024 + 0.5));
  // storing everything once, hash as big as the block
  CHECK(compression_factor(1, 1, 100, 100) == Catch::Approx(3.0));
}

TEST_CASE("compression factor reference grid", "[planner]") {
  // frozen values for S_B = 1 MiB, S_H = 134 bytes, quoted to 3 significant
  // figures; tolerance per cell is the stated budget or half an ulp of the
  // quoted figure, whichever is looser
  struct Cell {
    uint32_t k, r;
    double expect;
    double tol;
  };
  const Cell cells[] = {
      {4, 1, 0.251, 3e-4},    {32, 1, 0.0355, 3e-4},  {64, 1, 0.0239, 3e-4},
      {128, 1, 0.0243, 3e-4}, {256, 1, 0.0369, 5e-4}, {32, 5, 0.161, 3e-4},
      {64, 5, 0.0870, 3e-4},  {128, 5, 0.0561, 3e-4}, {256, 5, 0.0529, 3e-4},
  };
  for (const auto& cell : cells) {
    double c = compression_factor(cell.k, cell.r, kMiB, kHash);
    INFO("k=" << cell.k << " r=" << cell.r << " c=" << c);
    double half_ulp = 0.5 * std::pow(10, std::floor(std::log10(cell.expect)) - 2);
    CHECK(std::abs(c - cell.expect) <= std::max(cell.tol, half_ulp) + 1e-12);
  }
  // exact rational spot check: c(4,1) = 5*134/2^20 + 1/4
  CHECK(compression_factor(4, 1, kMiB, kHash) ==
        Catch::Approx(5.0 * 134 / 1048576 + 0.25).epsilon(1e-15));
}

TEST_CASE("optimal fragment count", "[planner]") {
  CHECK(optimal_k(1, kMiB, kHash) == 88);
  CHECK(optimal_k(5, kMiB, kHash) == 198);
  CHECK(compression_factor(88, 1, kMiB, kHash) == Catch::Approx(0.0228).margin(2e-4));
  CHECK(compression_factor(198, 5, kMiB, kHash) == Catch::Approx(0.0512).margin(2e-4));
  // degenerate geometry: hash as large as the block
  CHECK(optimal_k(1, 100, 100.0) == 1);
}

TEST_CASE("optimal k is the integer argmin", "[planner]") {
  for (uint32_t r : {1u, 2u, 5u, 9u}) {
    uint32_t best = optimal_k(r, kMiB, kHash);
    double c_best = compression_factor(best, r, kMiB, kHash);
    for (uint32_t k = 1; k <= 512; ++k)
      CHECK(c_best <= compression_factor(k, r, kMiB, kHash) + 1e-15);
  }
}

TEST_CASE("compression is scale invariant", "[planner]") {
  for (uint64_t scale : {2ull, 7ull, 64ull}) {
    double a = compression_factor(32, 5, kMiB, kHash);
    double b = compression_factor(32, 5, kMiB * scale, kHash * double(scale));
    CHECK(a == Catch::Approx(b).epsilon(1e-12));
  }
}

TEST_CASE("planner rejects degenerate inputs", "[planner]") {
  CHECK_THROWS_AS(compression_factor(0, 1, kMiB, kHash), Error);
  CHECK_THROWS_AS(compression_factor(1, 0, kMiB, kHash), Error);
  CHECK_THROWS_AS(compression_factor(1, 1, 0, kHash), Error);
  CHECK_THROWS_AS(compression_factor(1, 1, kMiB, 0.0), Error);
  CHECK_THROWS_AS(optimal_k(0, kMiB, kHash), Error);
}

TEST_CASE("plan table and CSV shape", "[planner]") {
  std::vector<uint32_t> ks{4, 32};
  std::vector<uint32_t> rs{1, 5};
  auto plans = plan_table(ks, rs, kMiB, kHash);
  REQUIRE(plans.size() == 4);
  CHECK(plans[0] == make_plan(4, 1, kMiB, kHash));
  CHECK(plans[3] == make_plan(32, 5, kMiB, kHash));

  auto csv = plan_table_csv(plans);
  CHECK(csv.rfind("k,r,block_bytes,hash_bytes,compression\n", 0) == 0);
  CHECK(csv.find("4,1,1048576,134,0.250639") != std::string::npos);
  CHECK(csv.find("32,5,1048576,134,0.160978") != std::string::npos);
}
