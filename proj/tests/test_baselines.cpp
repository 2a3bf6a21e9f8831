#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "oracles.hpp"
#include "race/baselines.hpp"

using namespace race;

namespace {

// pairs within distance k in different blocks must differ in color
bool coloring_ok(const CsrMatrix& A, const Coloring& c, int k) {
  auto d = oracle::all_pairs(A);
  auto col = c.vertex_colors();
  std::vector<index_t> block(static_cast<std::size_t>(A.nrows()));
  for (index_t b = 0; b < c.nblocks(); ++b)
    for (auto v = c.block_ptr[static_cast<std::size_t>(b)]; v < c.block_ptr[static_cast<std::size_t>(b) + 1]; ++v)
      block[static_cast<std::size_t>(v)] = b;
  for (index_t u = 0; u < A.nrows(); ++u)
    for (index_t v = u + 1; v < A.nrows(); ++v)
      if (d(u, v) <= k && block[static_cast<std::size_t>(u)] != block[static_cast<std::size_t>(v)] &&
          col[static_cast<std::size_t>(u)] == col[static_cast<std::size_t>(v)])
        return false;
  return true;
}

}  // namespace

TEST_CASE("multicolor - path", "[baselines]") {
  auto P = oracle::path(10);
  CHECK(multicolor(P, 1).ncolors == 2);
  CHECK(multicolor(P, 2).ncolors == 3);
  CHECK(multicolor(P, 3).ncolors == 4);
  auto c = multicolor(P, 2);
  CHECK(c.vertex_colors() == std::vector<int>{0, 1, 2, 0, 1, 2, 0, 1, 2, 0});
  CHECK_THROWS(multicolor(P, 0));
}

TEST_CASE("multicolor - star and complete graph", "[baselines]") {
  CHECK(multicolor(oracle::star(9), 1).ncolors == 2);
  CHECK(multicolor(oracle::star(9), 2).ncolors == 9);
  CHECK(multicolor(oracle::complete(5), 1).ncolors == 5);
}

TEST_CASE("abmc - block examples", "[baselines]") {
  auto P = oracle::path(8);
  CHECK(abmc(P, 2, 100).ncolors == 1);
  CHECK(abmc(P, 2, 100).nblocks() == 1);
  auto c = abmc(P, 1, 2);
  CHECK(c.nblocks() == 4);
  CHECK(c.ncolors == 2);
  CHECK(abmc(P, 2, 2).ncolors == 2);
  CHECK(abmc(P, 1, 1).ncolors == multicolor(P, 1).ncolors);
  auto uneven = abmc(oracle::path(7), 1, 3);
  CHECK(uneven.block_ptr == std::vector<index_t>{0, 3, 6, 7});
  CHECK_THROWS(abmc(P, 1, 0));
}

TEST_CASE("colorings are valid on random graphs", "[baselines]") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    auto A = oracle::random_symmetric(150, 0.03, seed);
    for (int k = 1; k <= 3; ++k) {
      auto mc = multicolor(A, k);
      CHECK(coloring_ok(A, mc, k));
      CHECK(validate_coloring(A, mc, k).ok());
      for (index_t bs : {2, 7, 32}) {
        auto ab = abmc(A, k, bs);
        CHECK(coloring_ok(A, ab, k));
        CHECK(validate_coloring(A, ab, k).ok());
      }
    }
  }
}

TEST_CASE("validate_coloring finds conflicts", "[baselines]") {
  auto P = oracle::path(6);
  auto c = multicolor(P, 1);
  CHECK(validate_coloring(P, c, 1).ok());
  auto rep = validate_coloring(P, c, 2);
  CHECK_FALSE(rep.ok());
  CHECK(rep.violations == 4);
  CHECK(rep.first_u == 0);
  CHECK(rep.first_v == 2);
  CHECK_THROWS_AS(make_colored_plan(P, c, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(symmspmv_colored(extract_upper(P), std::vector<double>(6, 1.0), c, 1), std::invalid_argument);
}

TEST_CASE("colored plan splits colors into contiguous chunks", "[baselines]") {
  auto A = generate_stencil(12, 12, StencilPattern::five_point);
  auto c = abmc(A, 2, 4);
  auto plan = make_colored_plan(A, c, 3, 2);
  CHECK(plan.ncolors == c.ncolors);
  index_t cursor = 0;
  for (int col = 0; col < plan.ncolors; ++col)
    for (int t = 0; t < 3; ++t) {
      CHECK(plan.chunk_begin(col, t) == cursor);
      CHECK(plan.chunk_end(col, t) >= plan.chunk_begin(col, t));
      cursor = plan.chunk_end(col, t);
    }
  CHECK(cursor == 144);
  auto colors = c.vertex_colors();
  // rows of one color are contiguous in plan order
  auto inv = plan.perm.inv();
  for (int col = 0; col < plan.ncolors; ++col)
    for (auto r = plan.chunk_begin(col, 0); r < plan.chunk_end(col, 2); ++r)
      CHECK(colors[static_cast<std::size_t>(inv[static_cast<std::size_t>(r)])] == col);
}

TEST_CASE("colored symmspmv matches the dense reference", "[baselines]") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto A = oracle::random_symmetric(200, 0.04, seed);
    auto x = oracle::random_vector(200, seed);
    auto ref = oracle::matvec(oracle::to_dense(A), x);
    auto U = extract_upper(A);
    for (int threads : {1, 2, 4, 8}) {
      CHECK(oracle::rel_l2(symmspmv_colored(U, x, multicolor(A, 2), threads), ref) <= 1e-13);
      CHECK(oracle::rel_l2(symmspmv_colored(U, x, abmc(A, 2, 8), threads), ref) <= 1e-13);
    }
  }
  auto A = generate_stencil(10, 10, StencilPattern::nine_point);
  auto plan = make_colored_plan(A, multicolor(A, 2), 2, 2);
  ThreadPool pool(2);
  ColoredSymmSpmv op(plan, pool);
  CHECK(op.barriers_per_sweep() == plan.ncolors - 1);
  ThreadPool wrong(3);
  CHECK_THROWS(ColoredSymmSpmv(plan, wrong));
}
