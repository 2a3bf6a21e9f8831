#pragma once

/// \file race/kernels.hpp
/// \brief SpMV on full CSR and SymmSpMV on the upper triangle, serial per
/// range and scheduled through RACE.

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "race/executor.hpp"
#include "race/race.hpp"
#include "race/sparsemat.hpp"

namespace race {

namespace detail {

inline void require_len(std::size_t got, index_t want, const char* what) {
  if (got != static_cast<std::size_t>(want))
    throw std::invalid_argument(std::string(what) + ": length " + std::to_string(got) + ", expected " +
                                std::to_string(want));
}

}  // namespace detail

/// b[row] = sum A[idx] * x[col[idx]] for rows in [begin, end).
inline void spmv_range(const CsrMatrix& A, std::span<const double> x, std::span<double> b, index_t begin,
                       index_t end) {
  const auto* rp = A.row_ptr().data();
  const auto* col = A.col().data();
  const auto* val = A.val().data();
  for (index_t row = begin; row < end; ++row) {
    double tmp = 0.0;
    for (auto idx = rp[row]; idx < rp[row + 1]; ++idx) tmp += val[idx] * x[static_cast<std::size_t>(col[idx])];
    b[static_cast<std::size_t>(row)] = tmp;
  }
}

inline void spmv(const CsrMatrix& A, std::span<const double> x, std::span<double> b) {
  detail::require_len(x.size(), A.ncols(), "spmv x");
  detail::require_len(b.size(), A.nrows(), "spmv b");
  spmv_range(A, x, b, 0, A.nrows());
}

inline std::vector<double> spmv(const CsrMatrix& A, std::span<const double> x) {
  std::vector<double> b(static_cast<std::size_t>(A.nrows()));
  spmv(A, x, b);
  return b;
}

/// Upper-triangle sweep over rows [begin, end). Each row stores its diagonal
/// first; b must be zeroed before the first range of a full sweep.
template <class X, class B>
void symmspmv_range(const CsrMatrix& U, std::span<const X> x, std::span<B> b, index_t begin, index_t end) {
  const auto* rp = U.row_ptr().data();
  const auto* col = U.col().data();
  const auto* val = U.val().data();
  for (index_t row = begin; row < end; ++row) {
    const auto diag = rp[row];
    const auto xr = x[static_cast<std::size_t>(row)];
    b[static_cast<std::size_t>(row)] += val[diag] * xr;
    B tmp{};
    for (auto idx = diag + 1; idx < rp[row + 1]; ++idx) {
      const auto c = static_cast<std::size_t>(col[idx]);
      tmp += val[idx] * x[c];
      b[c] += val[idx] * xr;
    }
    b[static_cast<std::size_t>(row)] += tmp;
  }
}

inline void symmspmv_range(const CsrMatrix& U, std::span<const double> x, std::span<double> b, index_t begin,
                           index_t end) {
  symmspmv_range<double, double>(U, x, b, begin, end);
}

inline std::vector<double> symmspmv(const CsrMatrix& U, std::span<const double> x) {
  detail::require_len(x.size(), U.ncols(), "symmspmv x");
  std::vector<double> b(static_cast<std::size_t>(U.nrows()), 0.0);
  symmspmv_range(U, x, std::span<double>(b), 0, U.nrows());
  return b;
}

/// Flops of one SymmSpMV sweep: 4 per stored off-diagonal, 2 per diagonal.
inline double symmspmv_flops(const CsrMatrix& U) {
  return 4.0 * static_cast<double>(U.nnz() - U.nrows()) + 2.0 * static_cast<double>(U.nrows());
}

inline double spmv_flops(const CsrMatrix& A) { return 2.0 * static_cast<double>(A.nnz()); }

/// Scheduled SymmSpMV; `U` and the vectors are in schedule order. b is
/// zeroed in parallel before the sweep.
inline void symmspmv_race(const CsrMatrix& U, std::span<const double> x, std::span<double> b, Executor& ex) {
  if (ex.schedule().k < 2)
    throw std::invalid_argument("SymmSpMV requires a distance-2 schedule (k=" + std::to_string(ex.schedule().k) + ")");
  detail::require_len(x.size(), U.nrows(), "symmspmv_race x");
  detail::require_len(b.size(), U.nrows(), "symmspmv_race b");
  if (ex.schedule().nrows != U.nrows()) throw std::invalid_argument("schedule does not match matrix");
  const auto n = static_cast<std::size_t>(U.nrows());
  ex.execute(
      [&](int t, int nt) {
        const auto lo = n * static_cast<std::size_t>(t) / static_cast<std::size_t>(nt);
        const auto hi = n * static_cast<std::size_t>(t + 1) / static_cast<std::size_t>(nt);
        std::fill(b.begin() + static_cast<std::ptrdiff_t>(lo), b.begin() + static_cast<std::ptrdiff_t>(hi), 0.0);
      },
      [&](index_t begin, index_t end) { symmspmv_range(U, x, b, begin, end); });
}

/// Everything needed to run SymmSpMV with RACE on one matrix.
struct RacePlan {
  ScheduleTree tree;
  CsrMatrix upper;  ///< upper triangle in schedule order
  Schedule schedule;

  const Permutation& perm() const noexcept { return tree.perm(); }
};

inline RacePlan make_race_plan(const CsrMatrix& A, const RaceConfig& cfg) {
  RacePlan p;
  p.tree = build_schedule_tree(A, cfg);
  p.upper = extract_upper(permute_symmetric(A, p.tree.perm()));
  p.schedule = compile(p.tree);
  return p;
}

/// Convenience wrapper taking and returning vectors in the input ordering.
class RaceSymmSpmv {
 public:
  RaceSymmSpmv(const CsrMatrix& A, const RaceConfig& cfg, ExecutorOptions opt = {})
      : plan_(make_race_plan(A, cfg)), ex_(plan_.schedule, opt) {}

  const RacePlan& plan() const noexcept { return plan_; }
  Executor& executor() noexcept { return ex_; }

  void apply_permuted(std::span<const double> x, std::span<double> b) { symmspmv_race(plan_.upper, x, b, ex_); }

  std::vector<double> operator()(std::span<const double> x) {
    detail::require_len(x.size(), plan_.upper.nrows(), "x");
    const auto xp = plan_.perm().apply(x);
    std::vector<double> bp(xp.size());
    apply_permuted(xp, bp);
    return plan_.perm().unapply(std::span<const double>(bp));
  }

 private:
  RacePlan plan_;
  Executor ex_;
};

/// Row-parallel SpMV with row blocks of roughly equal nonzero count.
class ParallelSpmv {
 public:
  ParallelSpmv(const CsrMatrix& A, ThreadPool& pool) : A_(&A), pool_(&pool) {
    const int nt = pool.size();
    split_.assign(static_cast<std::size_t>(nt) + 1, 0);
    const auto nnz = A.nnz();
    index_t row = 0;
    for (int t = 1; t < nt; ++t) {
      const auto target = nnz * t / nt;
      while (row < A.nrows() && A.row_begin(row) < target) ++row;
      split_[static_cast<std::size_t>(t)] = row;
    }
    split_.back() = A.nrows();
  }

  const std::vector<index_t>& split() const noexcept { return split_; }

  void apply(std::span<const double> x, std::span<double> b) {
    detail::require_len(x.size(), A_->ncols(), "spmv x");
    detail::require_len(b.size(), A_->nrows(), "spmv b");
    pool_->run([&](int t) {
      spmv_range(*A_, x, b, split_[static_cast<std::size_t>(t)], split_[static_cast<std::size_t>(t) + 1]);
    });
  }

 private:
  const CsrMatrix* A_;
  ThreadPool* pool_;
  std::vector<index_t> split_;
};

}  // namespace race
