// Colors a 2D stencil for distance-2 SymmSpMV, prints the schedule tree and
// checks the parallel result against plain SpMV.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <vector>

#include "race/all.hpp"

int main(int argc, char** argv) {
  const int nx = argc > 1 ? std::atoi(argv[1]) : 16;
  const int threads = argc > 2 ? std::atoi(argv[2]) : 4;

  const auto A = race::generate_stencil(nx, nx, race::StencilPattern::five_point);
  race::RaceConfig cfg;
  cfg.k = 2;
  cfg.nthreads = threads;

  race::RaceSymmSpmv op(A, cfg);
  const auto& tree = op.plan().tree;
  std::cout << tree.dump();
  std::cout << "eta = " << race::efficiency(tree) << '\n';

  const auto report = race::validate_schedule(tree, A);
  std::cout << "schedule check: " << report.summary() << '\n';

  std::vector<double> x(static_cast<std::size_t>(A.nrows()));
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.1 * static_cast<double>(i));
  const auto ref = race::spmv(A, x);
  const auto got = op(x);
  double err = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) err = std::max(err, std::abs(got[i] - ref[i]));
  std::cout << "max |race - spmv| = " << err << '\n';
  return report.ok() && err < 1e-12 ? 0 : 1;
}
