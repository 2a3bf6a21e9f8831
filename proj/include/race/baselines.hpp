#pragma once

/// \file race/baselines.hpp
/// \brief Reference distance-k colorings (vertex multicoloring and block
/// multicoloring) and a color-by-color SymmSpMV driver.

#include <algorithm>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "race/executor.hpp"
#include "race/kernels.hpp"
#include "race/sparsemat.hpp"

namespace race {

/// Contiguous vertex blocks of the input numbering with one color each.
/// Vertex multicoloring uses blocks of size one.
struct Coloring {
  std::vector<index_t> block_ptr{0};
  std::vector<int> block_color;
  int ncolors = 0;

  index_t nblocks() const noexcept { return static_cast<index_t>(block_color.size()); }
  index_t nrows() const noexcept { return block_ptr.back(); }

  std::vector<int> vertex_colors() const {
    std::vector<int> c(static_cast<std::size_t>(nrows()));
    for (index_t b = 0; b < nblocks(); ++b)
      for (auto v = block_ptr[static_cast<std::size_t>(b)]; v < block_ptr[static_cast<std::size_t>(b) + 1]; ++v)
        c[static_cast<std::size_t>(v)] = block_color[static_cast<std::size_t>(b)];
    return c;
  }
};

namespace detail {

/// Depth-limited BFS from a vertex set; calls visit(v, d) for every vertex
/// reached at distance 1..k that is not a source.
class KHop {
 public:
  explicit KHop(index_t n) : dist_(static_cast<std::size_t>(n), -1) {}

  template <class Visit>
  void run(const CsrMatrix& G, std::span<const index_t> sources, int k, Visit&& visit) {
    touched_.clear();
    frontier_.clear();
    for (auto s : sources) {
      dist_[static_cast<std::size_t>(s)] = 0;
      touched_.push_back(s);
      frontier_.push_back(s);
    }
    for (int d = 1; d <= k && !frontier_.empty(); ++d) {
      next_.clear();
      for (auto v : frontier_)
        for (auto u : G.row_cols(v)) {
          if (dist_[static_cast<std::size_t>(u)] != -1) continue;
          dist_[static_cast<std::size_t>(u)] = d;
          touched_.push_back(u);
          next_.push_back(u);
          visit(u, d);
        }
      frontier_.swap(next_);
    }
    for (auto v : touched_) dist_[static_cast<std::size_t>(v)] = -1;
  }

 private:
  std::vector<int> dist_;
  std::vector<index_t> touched_, frontier_, next_;
};

/// First-fit coloring of a conflict structure given by `neighbors(i, out)`.
template <class Neighbors>
std::vector<int> first_fit(index_t count, Neighbors&& neighbors, int& ncolors) {
  std::vector<int> color(static_cast<std::size_t>(count), -1);
  std::vector<index_t> stamp;
  std::vector<index_t> nb;
  ncolors = 0;
  for (index_t i = 0; i < count; ++i) {
    nb.clear();
    neighbors(i, nb);
    for (auto j : nb) {
      const int c = color[static_cast<std::size_t>(j)];
      if (c < 0) continue;
      if (static_cast<std::size_t>(c) >= stamp.size()) stamp.resize(static_cast<std::size_t>(c) + 1, -1);
      stamp[static_cast<std::size_t>(c)] = i;
    }
    int c = 0;
    while (static_cast<std::size_t>(c) < stamp.size() && stamp[static_cast<std::size_t>(c)] == i) ++c;
    color[static_cast<std::size_t>(i)] = c;
    ncolors = std::max(ncolors, c + 1);
  }
  return color;
}

}  // namespace detail

/// Greedy distance-k coloring: vertices in ascending order take the smallest
/// color not used within distance k.
inline Coloring multicolor(const CsrMatrix& A, int k) {
  detail::require_square(A, "multicolor");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const auto n = A.nrows();
  detail::KHop hop(n);
  Coloring c;
  c.block_ptr.resize(static_cast<std::size_t>(n) + 1);
  std::iota(c.block_ptr.begin(), c.block_ptr.end(), index_t{0});
  c.block_color = detail::first_fit(
      n,
      [&](index_t v, std::vector<index_t>& out) {
        const index_t src[1] = {v};
        hop.run(A, src, k, [&](index_t u, int) {
          if (u < v) out.push_back(u);
        });
      },
      c.ncolors);
  return c;
}

/// Contiguous blocks of `block_size` rows colored greedily on the quotient
/// graph, where blocks conflict if any of their vertices are within
/// distance k.
inline Coloring abmc(const CsrMatrix& A, int k, index_t block_size) {
  detail::require_square(A, "abmc");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (block_size < 1) throw std::invalid_argument("block size must be >= 1");
  const auto n = A.nrows();
  Coloring c;
  c.block_ptr.assign(1, 0);
  for (index_t s = 0; s < n; s += block_size) c.block_ptr.push_back(std::min(n, s + block_size));
  const auto nb = static_cast<index_t>(c.block_ptr.size()) - 1;
  std::vector<index_t> block_of(static_cast<std::size_t>(n));
  for (index_t b = 0; b < nb; ++b)
    for (auto v = c.block_ptr[static_cast<std::size_t>(b)]; v < c.block_ptr[static_cast<std::size_t>(b) + 1]; ++v)
      block_of[static_cast<std::size_t>(v)] = b;
  detail::KHop hop(n);
  std::vector<index_t> seen(static_cast<std::size_t>(nb), -1);
  std::vector<index_t> members;
  c.block_color = detail::first_fit(
      nb,
      [&](index_t b, std::vector<index_t>& out) {
        members.resize(static_cast<std::size_t>(c.block_ptr[static_cast<std::size_t>(b) + 1] -
                                                c.block_ptr[static_cast<std::size_t>(b)]));
        std::iota(members.begin(), members.end(), c.block_ptr[static_cast<std::size_t>(b)]);
        hop.run(A, members, k, [&](index_t u, int) {
          const auto ub = block_of[static_cast<std::size_t>(u)];
          if (ub < b && seen[static_cast<std::size_t>(ub)] != b) {
            seen[static_cast<std::size_t>(ub)] = b;
            out.push_back(ub);
          }
        });
      },
      c.ncolors);
  return c;
}

struct ColoringReport {
  std::size_t violations = 0;
  index_t first_u = -1;
  index_t first_v = -1;
  bool ok() const noexcept { return violations == 0; }
};

/// Vertices of different blocks with equal color must be more than k apart.
inline ColoringReport validate_coloring(const CsrMatrix& A, const Coloring& c, int k) {
  if (c.nrows() != A.nrows()) throw std::invalid_argument("coloring does not match matrix");
  ColoringReport rep;
  const auto n = A.nrows();
  std::vector<index_t> block_of(static_cast<std::size_t>(n));
  for (index_t b = 0; b < c.nblocks(); ++b)
    for (auto v = c.block_ptr[static_cast<std::size_t>(b)]; v < c.block_ptr[static_cast<std::size_t>(b) + 1]; ++v)
      block_of[static_cast<std::size_t>(v)] = b;
  detail::KHop hop(n);
  for (index_t v = 0; v < n; ++v) {
    const auto bv = block_of[static_cast<std::size_t>(v)];
    const index_t src[1] = {v};
    hop.run(A, src, k, [&](index_t u, int) {
      const auto bu = block_of[static_cast<std::size_t>(u)];
      if (u > v && bu != bv && c.block_color[static_cast<std::size_t>(bu)] == c.block_color[static_cast<std::size_t>(bv)]) {
        if (rep.violations++ == 0) {
          rep.first_u = v;
          rep.first_v = u;
        }
      }
    });
  }
  return rep;
}

/// Color-major execution layout: rows permuted so each color is contiguous
/// (blocks keep their relative order), and every color split into per-thread
/// chunks of whole blocks.
struct ColoredPlan {
  Permutation perm;
  CsrMatrix upper;  ///< upper triangle in color order
  int nthreads = 1;
  int ncolors = 0;
  /// split[c * (nthreads + 1) + t] is the first row of thread t in color c.
  std::vector<index_t> split;

  index_t chunk_begin(int color, int t) const {
    return split[static_cast<std::size_t>(color) * static_cast<std::size_t>(nthreads + 1) + static_cast<std::size_t>(t)];
  }
  index_t chunk_end(int color, int t) const { return chunk_begin(color, t + 1); }
};

/// `validate_k` > 0 runs validate_coloring first and throws on any conflict.
inline ColoredPlan make_colored_plan(const CsrMatrix& A, const Coloring& c, int nthreads, int validate_k = 0) {
  if (nthreads < 1) throw std::invalid_argument("nthreads must be >= 1");
  if (validate_k > 0) {
    const auto rep = validate_coloring(A, c, validate_k);
    if (!rep.ok())
      throw std::invalid_argument("invalid coloring: vertices " + std::to_string(rep.first_u) + " and " +
                                  std::to_string(rep.first_v) + " share a color within distance " +
                                  std::to_string(validate_k));
  }
  ColoredPlan p;
  p.nthreads = nthreads;
  p.ncolors = c.ncolors;
  std::vector<std::vector<index_t>> blocks(static_cast<std::size_t>(c.ncolors));
  for (index_t b = 0; b < c.nblocks(); ++b) blocks[static_cast<std::size_t>(c.block_color[static_cast<std::size_t>(b)])].push_back(b);
  std::vector<index_t> order;
  order.reserve(static_cast<std::size_t>(c.nrows()));
  p.split.reserve(static_cast<std::size_t>(c.ncolors) * static_cast<std::size_t>(nthreads + 1));
  for (int col = 0; col < c.ncolors; ++col) {
    const auto base = static_cast<index_t>(order.size());
    std::vector<index_t> block_end;  // cumulative rows within the color
    for (auto b : blocks[static_cast<std::size_t>(col)]) {
      for (auto v = c.block_ptr[static_cast<std::size_t>(b)]; v < c.block_ptr[static_cast<std::size_t>(b) + 1]; ++v)
        order.push_back(v);
      block_end.push_back(static_cast<index_t>(order.size()) - base);
    }
    const auto rows = static_cast<index_t>(order.size()) - base;
    p.split.push_back(base);
    std::size_t bi = 0;
    for (int t = 1; t < nthreads; ++t) {
      const auto target = static_cast<index_t>(static_cast<std::int64_t>(rows) * t / nthreads);
      while (bi < block_end.size() && block_end[bi] <= target) ++bi;
      // cut at the block boundary closest to the target
      index_t cut = bi == 0 ? 0 : block_end[bi - 1];
      if (bi < block_end.size() && block_end[bi] - target < target - cut) cut = block_end[bi];
      cut = std::max(cut, p.split.back() - base);
      p.split.push_back(base + cut);
    }
    p.split.push_back(base + rows);
  }
  p.perm = Permutation::from_order(order);
  p.upper = extract_upper(permute_symmetric(A, p.perm));
  return p;
}

/// SymmSpMV color by color with a global barrier between colors.
class ColoredSymmSpmv {
 public:
  ColoredSymmSpmv(const ColoredPlan& plan, ThreadPool& pool)
      : plan_(&plan), pool_(&pool), barrier_(pool.size()) {
    if (pool.size() != plan.nthreads) throw std::invalid_argument("pool size does not match colored plan");
  }

  /// x and b in plan order.
  void apply_permuted(std::span<const double> x, std::span<double> b) {
    const auto& p = *plan_;
    detail::require_len(x.size(), p.upper.nrows(), "colored x");
    detail::require_len(b.size(), p.upper.nrows(), "colored b");
    const auto n = static_cast<std::size_t>(p.upper.nrows());
    const int nt = p.nthreads;
    pool_->run([&](int t) {
      const auto lo = n * static_cast<std::size_t>(t) / static_cast<std::size_t>(nt);
      const auto hi = n * static_cast<std::size_t>(t + 1) / static_cast<std::size_t>(nt);
      std::fill(b.begin() + static_cast<std::ptrdiff_t>(lo), b.begin() + static_cast<std::ptrdiff_t>(hi), 0.0);
      if (nt > 1) barrier_.arrive_and_wait();
      for (int c = 0; c < p.ncolors; ++c) {
        symmspmv_range(p.upper, x, b, p.chunk_begin(c, t), p.chunk_end(c, t));
        if (nt > 1 && c + 1 < p.ncolors) barrier_.arrive_and_wait();
      }
    });
  }

  std::vector<double> operator()(std::span<const double> x) {
    const auto xp = plan_->perm.apply(x);
    std::vector<double> bp(xp.size());
    apply_permuted(xp, bp);
    return plan_->perm.unapply(std::span<const double>(bp));
  }

  /// Barriers per sweep excluding the one after zeroing.
  int barriers_per_sweep() const noexcept { return plan_->ncolors > 0 ? plan_->ncolors - 1 : 0; }

 private:
  const ColoredPlan* plan_;
  ThreadPool* pool_;
  ScopedBarrier barrier_;
};

/// One-shot colored SymmSpMV on an upper triangle `U` in the input
/// numbering; the coloring is validated for distance 2 first.
inline std::vector<double> symmspmv_colored(const CsrMatrix& U, std::span<const double> x, const Coloring& c,
                                            int threads) {
  const auto A = mirror_upper(U);
  const auto plan = make_colored_plan(A, c, threads, 2);
  ThreadPool pool(threads);
  ColoredSymmSpmv op(plan, pool);
  return op(x);
}

}  // namespace race
