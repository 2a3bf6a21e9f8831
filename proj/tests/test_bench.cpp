#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <vector>

#include "race/bench.hpp"

using namespace race;
using namespace race::bench;

namespace {

BenchConfig small_config() {
  BenchConfig c;
  c.stencil = StencilSpec{20, 20, StencilPattern::five_point};
  c.methods = {Method::spmv, Method::race, Method::mc, Method::abmc};
  c.threads = 2;
  c.reps = 3;
  c.ring_mb = 0.01;
  c.validate = true;
  return c;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

TEST_CASE("parse helpers", "[bench]") {
  CHECK(parse_method("abmc") == Method::abmc);
  CHECK_THROWS(parse_method("cg"));
  auto s = parse_stencil_spec("30,20,9pt");
  CHECK(s.nx == 30);
  CHECK(s.ny == 20);
  CHECK(s.pattern == StencilPattern::nine_point);
  CHECK_THROWS(parse_stencil_spec("30,20"));
  CHECK_THROWS(parse_stencil_spec("a,20,5"));
  CHECK_THROWS(parse_stencil_spec("0,20,5"));
}

TEST_CASE("summarize flags spread above five percent", "[bench]") {
  auto t = summarize({1.0, 1.0, 1.0});
  CHECK(t.mean == 1.0);
  CHECK_FALSE(t.spread);
  auto u = summarize({1.0, 1.2});
  CHECK(u.min == 1.0);
  CHECK(u.max == 1.2);
  CHECK(u.spread);
  CHECK(summarize({}).mean == 0.0);
}

TEST_CASE("run_benchmark - every method validates", "[bench]") {
  auto rows = run_benchmark(small_config());
  REQUIRE(rows.size() == 4);
  for (auto& r : rows) {
    CHECK(r.nrows == 400);
    CHECK(r.reps == 3);
    REQUIRE(r.validation_error.has_value());
    CHECK(*r.validation_error <= 1e-13);
    CHECK(r.gflops_mean > 0.0);
    CHECK(r.gflops_min <= r.gflops_max);
  }
  CHECK(rows[0].method == Method::spmv);
  CHECK_FALSE(rows[0].eta.has_value());
  REQUIRE(rows[1].eta.has_value());
  CHECK(*rows[1].eta > 0.0);
  CHECK(*rows[1].eta <= 1.0);
  CHECK(rows[2].colors.has_value());
  CHECK(rows[3].block_size.has_value());
  CHECK(rows[1].speedup_vs_spmv.has_value());
}

TEST_CASE("run_benchmark - roofline columns from machine file", "[bench]") {
  auto c = small_config();
  c.methods = {Method::spmv, Method::race};
  c.machine = perf::MachineModel{"m", 47e9, 40e9};
  auto rows = run_benchmark(c);
  for (auto& r : rows) {
    REQUIRE(r.roofline_lo.has_value());
    CHECK(*r.roofline_lo < *r.roofline_hi);
  }
  const double nnzr = rows[0].nnzr;
  const double I = perf::intensity_spmv(nnzr, perf::optimal_alpha(nnzr, perf::Kernel::spmv));
  CHECK(*rows[0].roofline_hi == Catch::Approx(I * 47.0));
}

TEST_CASE("run_benchmark - errors", "[bench]") {
  auto c = small_config();
  c.k = 1;
  c.methods = {Method::race};
  CHECK_THROWS_AS(run_benchmark(c), std::invalid_argument);
  auto d = small_config();
  d.reps = 0;
  CHECK_THROWS(run_benchmark(d));
  BenchConfig none;
  CHECK_THROWS(run_benchmark(none));
}

TEST_CASE("csv layout", "[bench]") {
  auto c = small_config();
  c.methods = {Method::spmv, Method::race};
  auto rows = run_benchmark(c);
  rows[0].matrix = "a,b";
  std::ostringstream os;
  write_csv(os, rows);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == csv_version_line);
  std::getline(in, line);
  CHECK(split(line) == csv_columns());
  std::getline(in, line);
  CHECK(line.rfind("\"a,b\",400,", 0) == 0);
  std::getline(in, line);
  CHECK(split(line).size() == csv_columns().size());
  CHECK(split(line)[6] == "race");
  auto table = format_table(rows);
  CHECK(std::count(table.begin(), table.end(), '\n') == 3);
}
