#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "oracles.hpp"
#include "race/kernels.hpp"

using namespace race;

namespace {

// value type that counts multiplications
struct Counted {
  double v = 0.0;
  static inline long muls = 0;
};
inline Counted operator*(double a, Counted b) {
  ++Counted::muls;
  return {a * b.v};
}
inline Counted& operator+=(Counted& a, Counted b) {
  a.v += b.v;
  return a;
}

RaceConfig cfg(int threads, int k = 2) {
  RaceConfig c;
  c.k = k;
  c.nthreads = threads;
  return c;
}

}  // namespace

TEST_CASE("spmv - identity and 2x2", "[kernels]") {
  auto I = CsrMatrix::from_triplets(3, 3, {{0, 0, 1}, {1, 1, 1}, {2, 2, 1}});
  std::vector<double> x{1, 2, 3};
  CHECK(spmv(I, x) == x);
  CHECK(symmspmv(extract_upper(I), x) == x);
  auto A = CsrMatrix::from_triplets(2, 2, {{0, 0, 2}, {0, 1, 1}, {1, 0, 1}, {1, 1, 3}});
  std::vector<double> y{1, 1};
  CHECK(spmv(A, y) == std::vector<double>{3, 4});
  CHECK(symmspmv(extract_upper(A), y) == std::vector<double>{3, 4});
  std::vector<double> shortx{1};
  CHECK_THROWS_AS(spmv(A, shortx), std::invalid_argument);
}

TEST_CASE("symmspmv - dense 50x50 against long double reference", "[kernels]") {
  auto A = oracle::random_symmetric(50, 1.0, 3);
  auto x = oracle::random_vector(50, 4);
  auto ref = oracle::matvec(oracle::to_dense(A), x);
  CHECK(oracle::rel_l2(symmspmv(extract_upper(A), x), ref) <= 1e-14);
  CHECK(oracle::rel_l2(spmv(A, x), ref) <= 1e-14);
}

TEST_CASE("symmspmv - multiplication count equals full nonzeros", "[kernels]") {
  auto A = generate_stencil(9, 7, StencilPattern::nine_point);
  auto U = extract_upper(A);
  std::vector<Counted> x(static_cast<std::size_t>(U.nrows()), Counted{1.0});
  std::vector<Counted> b(x.size());
  Counted::muls = 0;
  symmspmv_range<Counted, Counted>(U, std::span<const Counted>(x), std::span<Counted>(b), 0, U.nrows());
  CHECK(Counted::muls == A.nnz());
  CHECK(symmspmv_flops(U) == 2.0 * static_cast<double>(Counted::muls));
  CHECK(spmv_flops(A) == symmspmv_flops(U));
}

TEST_CASE("symmspmv - linearity", "[kernels]") {
  auto A = oracle::random_symmetric(80, 0.05, 9);
  auto U = extract_upper(A);
  auto x = oracle::random_vector(80, 1);
  auto y = oracle::random_vector(80, 2);
  std::vector<double> z(80);
  for (std::size_t i = 0; i < 80; ++i) z[i] = 2.5 * x[i] - 0.5 * y[i];
  auto bx = symmspmv(U, x), by = symmspmv(U, y), bz = symmspmv(U, z);
  std::vector<double> comb(80);
  for (std::size_t i = 0; i < 80; ++i) comb[i] = 2.5 * bx[i] - 0.5 * by[i];
  CHECK(oracle::rel_l2(bz, comb) <= 1e-13);
}

TEST_CASE("race symmspmv - 8x8 grid on four threads", "[kernels]") {
  auto A = generate_stencil(8, 8, StencilPattern::five_point);
  RaceSymmSpmv op(A, cfg(4));
  CHECK(validate_schedule(op.plan().tree, A).ok());
  auto x = oracle::random_vector(64, 5);
  auto ref = oracle::matvec(oracle::to_dense(A), x);
  for (int rep = 0; rep < 5; ++rep) CHECK(oracle::rel_l2(op(x), ref) <= 1e-13);
}

TEST_CASE("race symmspmv - random matrices, threads 1..8", "[kernels]") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto A = oracle::random_symmetric(300, 0.03, seed);
    auto x = oracle::random_vector(300, seed + 50);
    auto ref = oracle::matvec(oracle::to_dense(A), x);
    for (int threads = 1; threads <= 8; ++threads) {
      RaceSymmSpmv op(A, cfg(threads));
      REQUIRE(oracle::rel_l2(op(x), ref) <= 1e-13);
    }
  }
}

TEST_CASE("race symmspmv - rejects distance-1 schedules and bad sizes", "[kernels]") {
  auto A = generate_stencil(6, 6, StencilPattern::five_point);
  auto plan = make_race_plan(A, cfg(2, 1));
  Executor ex(plan.schedule);
  std::vector<double> x(36, 1.0), b(36);
  CHECK_THROWS_AS(symmspmv_race(plan.upper, x, b, ex), std::invalid_argument);
  RaceSymmSpmv op(A, cfg(2));
  std::vector<double> bad(10, 1.0);
  CHECK_THROWS_AS(op(bad), std::invalid_argument);
}

TEST_CASE("parallel spmv", "[kernels]") {
  auto A = oracle::random_symmetric(200, 0.05, 8);
  auto x = oracle::random_vector(200, 9);
  auto ref = spmv(A, x);
  for (int threads : {1, 3, 4}) {
    ThreadPool pool(threads);
    ParallelSpmv op(A, pool);
    CHECK(op.split().front() == 0);
    CHECK(op.split().back() == 200);
    std::vector<double> b(200);
    op.apply(x, b);
    CHECK(b == ref);
  }
}
