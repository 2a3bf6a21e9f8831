#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "oracles.hpp"
#include "race/levels.hpp"

using namespace race;

namespace {

// level of each original vertex
std::vector<index_t> levels_of(const LevelSet& ls) {
  const auto lv_new = ls.level_of_new();
  std::vector<index_t> out(lv_new.size());
  for (std::size_t v = 0; v < out.size(); ++v) out[v] = lv_new[static_cast<std::size_t>(ls.perm(static_cast<index_t>(v)))];
  return out;
}

}  // namespace

TEST_CASE("build_levels - path", "[levels]") {
  auto ls = build_levels(oracle::path(5), 0);
  CHECK(ls.level_ptr == std::vector<index_t>{0, 1, 2, 3, 4, 5});
  CHECK(ls.total_levels() == 5);
}

TEST_CASE("build_levels - two islands get one empty separator", "[levels]") {
  auto ls = build_levels(oracle::two_islands(2, 2), 0);
  CHECK(ls.level_ptr == std::vector<index_t>{0, 1, 2, 2, 3, 4});
  auto lv = levels_of(ls);
  CHECK(lv == std::vector<index_t>{0, 1, 3, 4});
}

TEST_CASE("build_levels - star from center", "[levels]") {
  auto ls = build_levels(oracle::star(7), 0);
  CHECK(ls.total_levels() == 2);
  CHECK(ls.level_size(1) == 6);
}

TEST_CASE("build_levels - errors and empty", "[levels]") {
  CHECK_THROWS_AS(build_levels(oracle::path(3), 3), std::out_of_range);
  CHECK_THROWS_AS(build_levels(oracle::path(3), -1), std::out_of_range);
  auto ls = build_levels(CsrMatrix(), 0);
  CHECK(ls.total_levels() == 0);
}

TEST_CASE("build_levels - BFS distances and edge property", "[levels]") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto A = oracle::random_symmetric(60, 0.04, seed);
    const index_t root = static_cast<index_t>(seed % 60);
    auto ls = build_levels(A, root);
    auto lv = levels_of(ls);
    auto d = oracle::all_pairs(A);
    for (index_t u = 0; u < 60; ++u) {
      if (d(root, u) != oracle::unreachable) CHECK(lv[static_cast<std::size_t>(u)] == d(root, u));
      for (auto v : A.row_cols(u)) CHECK(std::abs(lv[static_cast<std::size_t>(u)] - lv[static_cast<std::size_t>(v)]) <= 1);
    }
    // contiguous ascending levels, bijective
    auto lv_new = ls.level_of_new();
    CHECK(std::is_sorted(lv_new.begin(), lv_new.end()));
    CHECK(ls.level_ptr.back() == 60);
    // deterministic
    CHECK(build_levels(A, root).perm == ls.perm);
  }
}

TEST_CASE("build_levels - separated levels stay more than k apart", "[levels]") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto A = oracle::random_symmetric(120, 0.025, seed);
    auto ls = build_levels(A, 0);
    auto lv = levels_of(ls);
    auto d = oracle::all_pairs(A);
    for (int k = 1; k <= 3; ++k)
      for (index_t u = 0; u < 120; ++u)
        for (index_t v = 0; v < 120; ++v)
          if (std::abs(lv[static_cast<std::size_t>(u)] - lv[static_cast<std::size_t>(v)]) >= k + 1) REQUIRE(d(u, v) > k);
  }
}

TEST_CASE("choose_root - path and grid", "[levels]") {
  auto P = permute_symmetric(oracle::path(12), oracle::random_permutation(12, 5));
  auto r = choose_root(P);
  CHECK(P.row_nnz(r) == 2);  // endpoint: diagonal plus one neighbour
  auto G = generate_stencil(8, 8, StencilPattern::five_point);
  auto rg = choose_root(G);
  CHECK(build_levels(G, rg).total_levels() >= build_levels(G, 27).total_levels());
  CHECK(build_levels(G, rg).total_levels() == 15);
  auto K = oracle::complete(6);
  auto rk = choose_root(K);
  CHECK(rk >= 0);
  CHECK(rk < 6);
}

TEST_CASE("rcm_order - bandwidth", "[levels]") {
  auto P = permute_symmetric(oracle::path(30), oracle::random_permutation(30, 9));
  CHECK(bandwidth(P) > 1);
  CHECK(bandwidth(permute_symmetric(P, rcm_order(P))) == 1);
  auto G = generate_stencil(16, 16, StencilPattern::five_point);
  CHECK(bandwidth(permute_symmetric(G, rcm_order(G))) <= 17);
  auto T = oracle::path(20);
  CHECK(bandwidth(permute_symmetric(T, rcm_order(T))) == 1);
  auto shuffled = permute_symmetric(G, oracle::random_permutation(256, 4));
  CHECK(bandwidth(permute_symmetric(shuffled, rcm_order(shuffled))) <= 17);
  // disconnected input still yields a bijection
  auto I = oracle::two_islands(5, 7);
  CHECK(rcm_order(I).size() == 12);
}
