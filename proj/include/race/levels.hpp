#pragma once

/// \file race/levels.hpp
/// \brief BFS level construction, pseudo-peripheral root selection and RCM.

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "race/sparsemat.hpp"

namespace race {

/// Vertices grouped by BFS distance from a root. `perm` maps original vertex
/// ids to level order; level i occupies [level_ptr[i], level_ptr[i+1]) of the
/// new numbering. Zero-width levels separate islands.
struct LevelSet {
  Permutation perm;
  std::vector<index_t> level_ptr{0};

  index_t total_levels() const noexcept { return static_cast<index_t>(level_ptr.size()) - 1; }
  index_t level_size(index_t i) const {
    return level_ptr[static_cast<std::size_t>(i) + 1] - level_ptr[static_cast<std::size_t>(i)];
  }
  /// Level number of every vertex, indexed by new (level-order) id.
  std::vector<index_t> level_of_new() const {
    std::vector<index_t> lv(static_cast<std::size_t>(level_ptr.back()));
    for (index_t l = 0; l < total_levels(); ++l)
      for (auto v = level_ptr[static_cast<std::size_t>(l)]; v < level_ptr[static_cast<std::size_t>(l) + 1]; ++v)
        lv[static_cast<std::size_t>(v)] = l;
    return lv;
  }
};

namespace detail {

/// Level order restricted to owned vertices of an induced subgraph.
struct SubgraphLevels {
  std::vector<index_t> order;      // owned vertex ids in level order
  std::vector<index_t> level_ptr;  // into order
};

/// Scratch arrays sized to the full graph, reused across subgraph BFS calls.
class BfsWorkspace {
 public:
  explicit BfsWorkspace(index_t n) : dist_(static_cast<std::size_t>(n), -1) {}

  index_t& dist(index_t v) { return dist_[static_cast<std::size_t>(v)]; }

  void reset(std::span<const index_t> touched) {
    for (auto v : touched) dist_[static_cast<std::size_t>(v)] = -1;
  }

 private:
  std::vector<index_t> dist_;
};

/// BFS levels on the subgraph induced by `in_subgraph`. Only `owned`
/// vertices (ascending, all inside the subgraph) are stored. BFS starts at
/// `root`; whenever a component is exhausted the smallest unvisited owned
/// vertex starts the next island two levels above the deepest stored level.
inline SubgraphLevels subgraph_levels(const CsrMatrix& G, std::span<const index_t> owned,
                                      std::span<const char> in_subgraph, std::span<const char> is_owned,
                                      index_t root, BfsWorkspace& ws) {
  SubgraphLevels out;
  std::vector<std::vector<index_t>> levels;
  std::vector<index_t> touched;
  std::vector<index_t> frontier, next;
  std::size_t owned_cursor = 0;
  index_t base = 0;
  index_t start = root;
  std::size_t stored = 0;

  while (true) {
    index_t max_owned = -1;
    frontier.assign(1, start);
    ws.dist(start) = base;
    touched.push_back(start);
    index_t lvl = base;
    while (!frontier.empty()) {
      next.clear();
      for (auto v : frontier) {
        if (is_owned[static_cast<std::size_t>(v)]) {
          if (levels.size() <= static_cast<std::size_t>(lvl)) levels.resize(static_cast<std::size_t>(lvl) + 1);
          levels[static_cast<std::size_t>(lvl)].push_back(v);
          max_owned = lvl;
          ++stored;
        }
        for (auto u : G.row_cols(v)) {
          if (!in_subgraph[static_cast<std::size_t>(u)] || ws.dist(u) != -1) continue;
          ws.dist(u) = lvl + 1;
          touched.push_back(u);
          next.push_back(u);
        }
      }
      frontier.swap(next);
      ++lvl;
    }
    if (stored == owned.size()) break;
    while (owned_cursor < owned.size() && ws.dist(owned[owned_cursor]) != -1) ++owned_cursor;
    start = owned[owned_cursor];
    base = max_owned + 2;
  }
  ws.reset(touched);

  // drop trailing levels that hold no owned vertex
  while (!levels.empty() && levels.back().empty()) levels.pop_back();
  out.level_ptr.assign(1, 0);
  out.order.reserve(owned.size());
  for (auto& l : levels) {
    out.order.insert(out.order.end(), l.begin(), l.end());
    out.level_ptr.push_back(static_cast<index_t>(out.order.size()));
  }
  return out;
}

struct BfsResult {
  std::vector<index_t> last_level;
  index_t eccentricity = 0;
};

inline BfsResult bfs_eccentricity(const CsrMatrix& G, index_t root, std::vector<index_t>& dist) {
  std::fill(dist.begin(), dist.end(), -1);
  std::vector<index_t> frontier{root}, next;
  dist[static_cast<std::size_t>(root)] = 0;
  BfsResult r;
  index_t lvl = 0;
  while (true) {
    next.clear();
    for (auto v : frontier)
      for (auto u : G.row_cols(v))
        if (dist[static_cast<std::size_t>(u)] == -1) {
          dist[static_cast<std::size_t>(u)] = lvl + 1;
          next.push_back(u);
        }
    if (next.empty()) break;
    frontier.swap(next);
    ++lvl;
  }
  r.last_level = frontier;
  r.eccentricity = lvl;
  return r;
}

/// George-Liu pseudo-peripheral search within the component of `start`.
inline index_t pseudo_peripheral(const CsrMatrix& G, index_t start, std::vector<index_t>& dist) {
  index_t root = start;
  auto res = bfs_eccentricity(G, root, dist);
  while (true) {
    index_t best = res.last_level.front();
    for (auto v : res.last_level)
      if (G.row_nnz(v) < G.row_nnz(best) || (G.row_nnz(v) == G.row_nnz(best) && v < best)) best = v;
    auto cand = bfs_eccentricity(G, best, dist);
    if (cand.eccentricity <= res.eccentricity) return root;
    root = best;
    res = std::move(cand);
  }
}

inline void require_square(const CsrMatrix& A, const char* what) {
  if (!A.square()) throw std::invalid_argument(std::string(what) + " requires a square matrix");
}

}  // namespace detail

/// Levels by BFS distance from `root`, islands separated by one empty level.
inline LevelSet build_levels(const CsrMatrix& A, index_t root) {
  detail::require_square(A, "build_levels");
  const auto n = A.nrows();
  if (n == 0) return LevelSet{Permutation::identity(0), {0}};
  if (root < 0 || root >= n)
    throw std::out_of_range("root " + std::to_string(root) + " outside [0," + std::to_string(n) + ")");
  std::vector<index_t> owned(static_cast<std::size_t>(n));
  for (index_t i = 0; i < n; ++i) owned[static_cast<std::size_t>(i)] = i;
  std::vector<char> all(static_cast<std::size_t>(n), 1);
  detail::BfsWorkspace ws(n);
  auto sl = detail::subgraph_levels(A, owned, all, all, root, ws);
  return LevelSet{Permutation::from_order(sl.order), std::move(sl.level_ptr)};
}

/// Pseudo-peripheral vertex reached from vertex 0.
inline index_t choose_root(const CsrMatrix& A) {
  detail::require_square(A, "choose_root");
  if (A.nrows() == 0) return 0;
  std::vector<index_t> dist(static_cast<std::size_t>(A.nrows()));
  return detail::pseudo_peripheral(A, 0, dist);
}

/// Reverse Cuthill-McKee: per component from a pseudo-peripheral root,
/// children queued by ascending degree (ties by id), final order reversed.
inline Permutation rcm_order(const CsrMatrix& A) {
  detail::require_square(A, "rcm_order");
  const auto n = A.nrows();
  std::vector<index_t> order;
  order.reserve(static_cast<std::size_t>(n));
  std::vector<char> visited(static_cast<std::size_t>(n), 0);
  std::vector<index_t> dist(static_cast<std::size_t>(n));
  std::vector<index_t> nbrs;
  for (index_t s = 0; s < n; ++s) {
    if (visited[static_cast<std::size_t>(s)]) continue;
    const auto root = detail::pseudo_peripheral(A, s, dist);
    std::size_t head = order.size();
    order.push_back(root);
    visited[static_cast<std::size_t>(root)] = 1;
    while (head < order.size()) {
      const auto v = order[head++];
      nbrs.clear();
      for (auto u : A.row_cols(v))
        if (!visited[static_cast<std::size_t>(u)]) {
          visited[static_cast<std::size_t>(u)] = 1;
          nbrs.push_back(u);
        }
      std::sort(nbrs.begin(), nbrs.end(), [&](index_t a, index_t b) {
        const auto da = A.row_nnz(a), db = A.row_nnz(b);
        return da != db ? da < db : a < b;
      });
      order.insert(order.end(), nbrs.begin(), nbrs.end());
    }
  }
  std::reverse(order.begin(), order.end());
  return Permutation::from_order(order);
}

}  // namespace race
