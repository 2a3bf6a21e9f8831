#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "race/sparsemat.hpp"

using namespace race;

namespace {

CsrMatrix parse(const std::string& text) {
  std::istringstream in(text);
  return parse_matrix_market(in);
}

std::vector<double> sorted_eigenvalues(const CsrMatrix& A) {
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(A.nrows(), A.ncols());
  for (index_t r = 0; r < A.nrows(); ++r) {
    auto c = A.row_cols(r);
    auto v = A.row_vals(r);
    for (std::size_t i = 0; i < c.size(); ++i) M(r, c[i]) = v[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  std::vector<double> ev(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(ev.begin(), ev.end());
  return ev;
}

template <class T>
std::vector<std::remove_const_t<T>> vec(std::span<T> s) {
  return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("csr - validating constructor rejects broken structure", "[sparsemat]") {
  CHECK_THROWS_AS(CsrMatrix(2, 2, {0, 1}, {0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(CsrMatrix(1, 2, {0, 2}, {1, 0}, {1.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(CsrMatrix(1, 2, {0, 1}, {2}, {1.0}), std::invalid_argument);
  CHECK_NOTHROW(CsrMatrix(1, 2, {0, 2}, {0, 1}, {1.0, 1.0}));
}

TEST_CASE("csr - from_triplets sorts and sums duplicates", "[sparsemat]") {
  auto A = CsrMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 2, 0.5}, {1, 0, 3.0}});
  CHECK(A.nnz() == 3);
  CHECK(A.at(1, 2) == 1.5);
  CHECK(A.at(1, 0) == 3.0);
  CHECK(A.at(0, 1) == 2.0);
  CHECK(A.at(0, 0) == 0.0);
  CHECK_THROWS(CsrMatrix::from_triplets(2, 2, {{2, 0, 1.0}}));
}

TEST_CASE("matrix market - identity", "[sparsemat]") {
  auto A = parse("%%MatrixMarket matrix coordinate real general\n% c\n2 2 2\n1 1 1.0\n2 2 1.0\n");
  CHECK(vec(A.row_ptr()) == std::vector<offset_t>{0, 1, 2});
  CHECK(vec(A.col()) == std::vector<index_t>{0, 1});
  CHECK(vec(A.val()) == std::vector<double>{1.0, 1.0});
}

TEST_CASE("matrix market - symmetric expansion", "[sparsemat]") {
  auto A = parse("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1\n2 2 1\n2 1 5\n");
  CHECK(A.nnz() == 4);
  CHECK(A.at(0, 1) == 5.0);
  CHECK(A.at(1, 0) == 5.0);
}

TEST_CASE("matrix market - pattern path", "[sparsemat]") {
  auto A = parse("%%MatrixMarket matrix coordinate pattern symmetric\n3 3 2\n2 1\n3 2\n");
  CHECK(A.nnz() == 4);
  for (auto v : A.val()) CHECK(v == 1.0);
  CHECK(A.has_entry(0, 1));
  CHECK(A.has_entry(1, 0));
  CHECK(A.has_entry(1, 2));
  CHECK(A.has_entry(2, 1));
}

TEST_CASE("matrix market - duplicates summed, integer field", "[sparsemat]") {
  auto A = parse("%%MatrixMarket matrix coordinate integer general\n2 2 3\n1 2 2\n1 2 3\n2 1 1\n");
  CHECK(A.nnz() == 2);
  CHECK(A.at(0, 1) == 5.0);
}

TEST_CASE("matrix market - errors", "[sparsemat]") {
  CHECK_THROWS_AS(parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n"), ParseError);
  CHECK_THROWS_AS(parse("%%MatrixMarket matrix array real general\n1 1\n1\n"), ParseError);
  CHECK_THROWS_AS(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n"), ParseError);
  CHECK_THROWS_AS(parse("not a banner\n"), ParseError);
  CHECK_THROWS_AS(parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n"), ParseError);
}

TEST_CASE("matrix market - round trip", "[sparsemat]") {
  auto A = oracle::random_symmetric(40, 0.1, 7);
  std::ostringstream out;
  write_matrix_market(out, A);
  auto B = parse(out.str());
  CHECK(A == B);
}

TEST_CASE("csr binary - round trip", "[sparsemat]") {
  auto A = generate_stencil(7, 5, StencilPattern::nine_point);
  std::stringstream io;
  write_csr_binary(io, A);
  auto B = read_csr_binary(io);
  CHECK(A == B);
  std::stringstream bad("xx");
  CHECK_THROWS(read_csr_binary(bad));
}

TEST_CASE("extract_upper - dense 3x3", "[sparsemat]") {
  auto A = CsrMatrix::from_triplets(3, 3, {{0, 0, 4}, {0, 1, 1}, {0, 2, 2}, {1, 0, 1}, {1, 1, 5}, {1, 2, 3},
                                           {2, 0, 2}, {2, 1, 3}, {2, 2, 6}});
  auto U = extract_upper(A);
  CHECK(U.nnz() == 6);
  CHECK(U.col()[static_cast<std::size_t>(U.row_begin(0))] == 0);
  for (index_t r = 0; r < 3; ++r) CHECK(U.col()[static_cast<std::size_t>(U.row_begin(r))] == r);
}

TEST_CASE("extract_upper - identity and stencil count", "[sparsemat]") {
  auto I = CsrMatrix::from_triplets(4, 4, {{0, 0, 1}, {1, 1, 1}, {2, 2, 1}, {3, 3, 1}});
  CHECK(extract_upper(I) == I);
  auto A = generate_stencil(4, 4, StencilPattern::five_point);
  CHECK(A.nnz() == 64);
  CHECK(extract_upper(A).nnz() == 40);
}

TEST_CASE("extract_upper - errors", "[sparsemat]") {
  auto nodiag = CsrMatrix::from_triplets(3, 3, {{0, 0, 1}, {0, 1, 1}, {1, 0, 1}, {2, 2, 1}});
  try {
    extract_upper(nodiag);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
  auto asym = CsrMatrix::from_triplets(2, 2, {{0, 0, 1}, {0, 1, 1}, {1, 1, 1}});
  CHECK_THROWS_AS(extract_upper(asym), std::invalid_argument);
  auto numeric = CsrMatrix::from_triplets(2, 2, {{0, 0, 1}, {0, 1, 1}, {1, 0, 2}, {1, 1, 1}});
  CHECK_NOTHROW(extract_upper(numeric));
  CHECK_THROWS_AS(extract_upper(numeric, {true}), std::invalid_argument);
  auto fixed = insert_missing_diagonal(nodiag);
  CHECK(fixed.has_entry(1, 1));
  CHECK(fixed.at(1, 1) == 0.0);
  CHECK_NOTHROW(extract_upper(fixed));
}

TEST_CASE("extract_upper then mirror reproduces the matrix", "[sparsemat]") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto A = oracle::random_symmetric(30, 0.15, seed);
    CHECK(mirror_upper(extract_upper(A)) == A);
  }
}

TEST_CASE("permute_symmetric - identity and reversal", "[sparsemat]") {
  auto A = oracle::random_symmetric(20, 0.2, 3);
  CHECK(permute_symmetric(A, Permutation::identity(20)) == A);
  auto D = CsrMatrix::from_triplets(3, 3, {{0, 0, 1}, {1, 1, 2}, {2, 2, 3}});
  auto R = permute_symmetric(D, Permutation::from_order(std::vector<index_t>{2, 1, 0}));
  CHECK(R.at(0, 0) == 3.0);
  CHECK(R.at(1, 1) == 2.0);
  CHECK(R.at(2, 2) == 1.0);
  CHECK_THROWS(permute_symmetric(D, Permutation::identity(2)));
}

TEST_CASE("permute_symmetric - spectrum preserved", "[sparsemat]") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto A = oracle::random_symmetric(6, 0.5, seed);
    auto P = oracle::random_permutation(6, seed + 100);
    auto B = permute_symmetric(A, P);
    auto ea = sorted_eigenvalues(A);
    auto eb = sorted_eigenvalues(B);
    for (std::size_t i = 0; i < ea.size(); ++i) CHECK(ea[i] == Catch::Approx(eb[i]).margin(1e-12));
  }
}

TEST_CASE("permute_symmetric - inverse round trip and entrywise map", "[sparsemat]") {
  auto A = oracle::random_symmetric(50, 0.08, 11);
  auto P = oracle::random_permutation(50, 12);
  auto B = permute_symmetric(A, P);
  CHECK(permute_symmetric(B, P.inverse()) == A);
  for (index_t i = 0; i < 50; ++i)
    for (index_t j = 0; j < 50; ++j) REQUIRE(B.at(P(i), P(j)) == A.at(i, j));
}

TEST_CASE("permutation - composition and vector application", "[sparsemat]") {
  auto P = oracle::random_permutation(10, 1);
  auto Q = oracle::random_permutation(10, 2);
  auto PQ = P.then(Q);
  for (index_t i = 0; i < 10; ++i) CHECK(PQ(i) == Q(P(i)));
  std::vector<double> x{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto y = P.apply(x);
  for (index_t i = 0; i < 10; ++i) CHECK(y[static_cast<std::size_t>(P(i))] == x[static_cast<std::size_t>(i)]);
  CHECK(P.unapply(y) == x);
  CHECK_THROWS(Permutation(std::vector<index_t>{0, 0}));
}

TEST_CASE("bandwidth", "[sparsemat]") {
  auto D = CsrMatrix::from_triplets(3, 3, {{0, 0, 1}, {1, 1, 2}, {2, 2, 3}});
  CHECK(bandwidth(D) == 0);
  CHECK(bandwidth(oracle::path(10)) == 1);
  for (index_t nx : {3, 8, 13}) CHECK(bandwidth(generate_stencil(nx, 5, StencilPattern::five_point)) == nx);
}

TEST_CASE("generate_stencil", "[sparsemat]") {
  auto one = generate_stencil(1, 1, StencilPattern::five_point);
  CHECK(one.nrows() == 1);
  CHECK(one.nnz() == 1);
  CHECK(generate_stencil(2, 2, StencilPattern::five_point).nnz() == 12);
  auto nine = generate_stencil(8, 8, StencilPattern::nine_point);
  CHECK(nine.nrows() == 64);
  for (index_t r = 0; r < 64; ++r) CHECK(nine.row_nnz(r) <= 9);
  CHECK(is_structurally_symmetric(nine));
  for (index_t r = 0; r < 64; ++r) CHECK(nine.has_entry(r, r));
  CHECK_THROWS(generate_stencil(0, 3, StencilPattern::five_point));
  CHECK(parse_stencil_pattern("9pt") == StencilPattern::nine_point);
  CHECK_THROWS(parse_stencil_pattern("7"));
}
