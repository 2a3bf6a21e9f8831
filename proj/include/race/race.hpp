#pragma once

/// \file race/race.hpp
/// \brief Recursive level-group coloring: aggregation of BFS levels under a
/// distance-k constraint, variance-driven load balancing, recursion into
/// multi-threaded level groups, and the resulting schedule tree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "race/levels.hpp"
#include "race/sparsemat.hpp"

namespace race {

enum class Color : std::uint8_t { red, blue };

inline const char* to_string(Color c) { return c == Color::red ? "red" : "blue"; }

enum class BalanceBy { rows, nonzeros };

struct RaceConfig {
  int k = 2;
  int nthreads = 1;
  /// Closeness threshold per recursion stage; stages past the end use eps_tail.
  std::vector<double> eps{0.8, 0.8};
  double eps_tail = 0.5;
  BalanceBy balance_by = BalanceBy::rows;
  /// Fixed BFS root for stage 0; pseudo-peripheral when empty.
  std::optional<index_t> root;
  /// Hard cap on recursion depth.
  int max_stages = 32;

  double eps_at(int stage) const {
    return stage >= 0 && static_cast<std::size_t>(stage) < eps.size() ? eps[static_cast<std::size_t>(stage)]
                                                                      : eps_tail;
  }

  void validate() const {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (nthreads < 1) throw std::invalid_argument("nthreads must be >= 1");
    auto check = [](double e) {
      if (!(e >= 0.5 && e < 1.0))
        throw std::invalid_argument("eps values must lie in [0.5, 1), got " + std::to_string(e));
    };
    for (auto e : eps) check(e);
    check(eps_tail);
    if (max_stages < 1) throw std::invalid_argument("max_stages must be >= 1");
  }
};

/// A contiguous run of levels forming one color of one thread group.
struct LevelGroup {
  index_t level_begin = 0;
  index_t level_end = 0;
  index_t begin = 0;  ///< first vertex (level order)
  index_t end = 0;
  Color color = Color::red;
  int threads = 1;
  int stage = 0;
  // bookkeeping of the aggregation window the group was formed in
  double window_weight = 0.0;
  int window_threads = 0;
  double window_eps = 0.0;
  double eps_threshold = 0.0;
  bool window_accepted = false;

  index_t levels() const noexcept { return level_end - level_begin; }
  index_t rows() const noexcept { return end - begin; }
};

/// Pair of adjacent red/blue groups sharing `threads` threads.
struct Window {
  index_t level_begin = 0;
  index_t level_end = 0;
  double weight = 0.0;
  int threads = 1;
  double eps = 0.0;
  /// True when the window met eps > eps_s and its thread count was not
  /// changed afterwards.
  bool accepted = false;
  /// Level end and weight at the moment the criterion was first met.
  index_t accept_level_end = 0;
  double accept_weight = 0.0;
};

namespace detail {

inline double closeness(double a, int b) { return 1.0 - std::abs(a - static_cast<double>(b)); }

inline int nearest_threads(double a) { return std::max(1, static_cast<int>(std::lround(a))); }

inline std::vector<double> prefix_sum(std::span<const double> x) {
  std::vector<double> p(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) p[i + 1] = p[i] + x[i];
  return p;
}

/// Keep the thread total equal to the parent's after rounding.
inline void reconcile_threads(std::vector<Window>& w, int parent_threads) {
  auto total = [&] {
    int t = 0;
    for (auto& x : w) t += x.threads;
    return t;
  };
  int sum = total();
  while (sum > parent_threads) {
    int best = -1;
    double best_score = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i].threads <= 1) continue;
      const double score = w[i].threads - w[i].weight;
      if (best < 0 || score > best_score) {
        best = static_cast<int>(i);
        best_score = score;
      }
    }
    if (best >= 0) {
      --w[static_cast<std::size_t>(best)].threads;
      w[static_cast<std::size_t>(best)].accepted = false;
    } else {
      // every window already runs on one thread: merge the lightest neighbours
      std::size_t m = 0;
      double lightest = w[0].weight + w[1].weight;
      for (std::size_t i = 1; i + 1 < w.size(); ++i)
        if (w[i].weight + w[i + 1].weight < lightest) {
          lightest = w[i].weight + w[i + 1].weight;
          m = i;
        }
      w[m].level_end = w[m + 1].level_end;
      w[m].weight += w[m + 1].weight;
      w[m].threads = 1;
      w[m].accepted = false;
      w.erase(w.begin() + static_cast<std::ptrdiff_t>(m) + 1);
    }
    sum = total();
  }
  while (sum < parent_threads) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < w.size(); ++i)
      if (w[i].weight / w[i].threads > w[best].weight / w[best].threads) best = i;
    ++w[best].threads;
    w[best].accepted = false;
    ++sum;
  }
}

}  // namespace detail

/// Greedy windowing of levels. Level weights are load / total_load *
/// parent_threads. Starting at the first untouched level, levels are added
/// until the window spans at least 2k levels and its weight a satisfies
/// 1 - |a - b| > eps_s for b = max(1, round(a)); with b fixed, the window
/// keeps growing while that closeness improves. Remaining levels that never
/// satisfy the criterion join the last window. Thread counts are then
/// reconciled so they add up to parent_threads.
inline std::vector<Window> aggregate_windows(std::span<const double> level_load, int parent_threads,
                                             int k, double eps_s) {
  if (parent_threads < 1) throw std::invalid_argument("parent_threads must be >= 1");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  const auto L = static_cast<index_t>(level_load.size());
  const double total = std::accumulate(level_load.begin(), level_load.end(), 0.0);
  std::vector<Window> out;
  if (L == 0) return out;
  const double scale = total > 0.0 ? parent_threads / total : 0.0;
  const index_t min_span = 2 * k;

  index_t start = 0;
  while (start < L) {
    double a = 0.0;
    index_t end = start;
    bool accepted = false;
    int b = 1;
    double eps = 0.0;
    while (end < L) {
      a += level_load[static_cast<std::size_t>(end)] * scale;
      ++end;
      if (end - start < min_span) continue;
      b = detail::nearest_threads(a);
      eps = detail::closeness(a, b);
      if (eps > eps_s) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (out.empty()) {
        const int nb = detail::nearest_threads(a);
        out.push_back(Window{start, L, a, nb, detail::closeness(a, nb), false, L, a});
      } else {
        out.back().level_end = L;
        out.back().weight += a;
        out.back().accepted = false;
      }
      break;
    }
    double best_a = a;
    double best_eps = eps;
    index_t best_end = end;
    double grow = a;
    for (index_t e = end; e < L; ++e) {
      grow += level_load[static_cast<std::size_t>(e)] * scale;
      const double ge = detail::closeness(grow, b);
      if (ge > best_eps) {
        best_eps = ge;
        best_a = grow;
        best_end = e + 1;
      } else {
        break;
      }
    }
    out.push_back(Window{start, best_end, best_a, b, best_eps, true, end, a});
    start = best_end;
  }
  detail::reconcile_threads(out, parent_threads);
  return out;
}

// ---------------------------------------------------------------------------
// Load balancing over T_ptr boundaries
// ---------------------------------------------------------------------------

/// Group boundaries over a level profile: group i spans
/// [t_ptr[i], t_ptr[i+1]) and is executed by workers[i] threads. Even
/// indices are red, odd are blue.
struct GroupPartition {
  std::vector<index_t> t_ptr{0};
  std::vector<int> workers;

  std::size_t size() const noexcept { return workers.size(); }
  index_t levels(std::size_t i) const { return t_ptr[i + 1] - t_ptr[i]; }
};

/// Overall variance: per color, the squared deviation of each group's
/// load-per-thread from that color's mean load-per-thread, summed over both
/// colors and divided by the number of groups.
inline double partition_variance(const GroupPartition& p, std::span<const double> prefix) {
  const auto len = p.size();
  if (len == 0) return 0.0;
  double sum[2] = {0.0, 0.0};
  double thr[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < len; ++i) {
    sum[i % 2] += prefix[static_cast<std::size_t>(p.t_ptr[i + 1])] - prefix[static_cast<std::size_t>(p.t_ptr[i])];
    thr[i % 2] += p.workers[i];
  }
  const double mean[2] = {thr[0] > 0 ? sum[0] / thr[0] : 0.0, thr[1] > 0 ? sum[1] / thr[1] : 0.0};
  double var = 0.0;
  for (std::size_t i = 0; i < len; ++i) {
    const double load = (prefix[static_cast<std::size_t>(p.t_ptr[i + 1])] - prefix[static_cast<std::size_t>(p.t_ptr[i])]) /
                        p.workers[i];
    const double d = load - mean[i % 2];
    var += d * d;
  }
  return var / static_cast<double>(len);
}

namespace detail {

inline std::vector<double> partition_deviation(const GroupPartition& p, std::span<const double> prefix) {
  const auto len = p.size();
  double sum[2] = {0.0, 0.0};
  double thr[2] = {0.0, 0.0};
  std::vector<double> load(len);
  for (std::size_t i = 0; i < len; ++i) {
    const double s = prefix[static_cast<std::size_t>(p.t_ptr[i + 1])] - prefix[static_cast<std::size_t>(p.t_ptr[i])];
    sum[i % 2] += s;
    thr[i % 2] += p.workers[i];
    load[i] = s / p.workers[i];
  }
  for (std::size_t i = 0; i < len; ++i) load[i] -= thr[i % 2] > 0 ? sum[i % 2] / thr[i % 2] : 0.0;
  return load;
}

/// Moves one level from `donor` to `receiver`; every group in between slides
/// by one level and keeps its level count.
inline void chain_shift(std::vector<index_t>& t_ptr, std::size_t donor, std::size_t receiver) {
  if (receiver < donor) {
    for (std::size_t i = receiver + 1; i <= donor; ++i) ++t_ptr[i];
  } else {
    for (std::size_t i = donor + 1; i <= receiver; ++i) --t_ptr[i];
  }
}

inline std::size_t count_empty(const GroupPartition& p, std::span<const double> prefix) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (prefix[static_cast<std::size_t>(p.t_ptr[i + 1])] - prefix[static_cast<std::size_t>(p.t_ptr[i])] <= 0.0) ++n;
  return n;
}

}  // namespace detail

struct BalanceTrace {
  std::vector<double> variance;  ///< initial value followed by one entry per accepted move
};

/// Iteratively shifts single levels between groups while the overall
/// variance strictly decreases. Groups are visited by descending absolute
/// deviation; an underloaded group acquires from donors ranked by descending
/// signed deviation, an overloaded one gives to receivers ranked by ascending
/// deviation, and finally the opposite direction is tried. A donor must keep
/// at least k levels and no move may leave a loaded group without load.
/// Terminates when no single shift lowers the variance.
inline GroupPartition balance_partition(GroupPartition p, std::span<const double> prefix, int k,
                                        BalanceTrace* trace = nullptr) {
  const auto len = p.size();
  double var = partition_variance(p, prefix);
  if (trace) trace->variance.assign(1, var);
  if (len < 2) return p;
  std::vector<std::size_t> abs_rank(len), rank(len);
  std::vector<index_t> trial;
  while (true) {
    const auto diff = detail::partition_deviation(p, prefix);
    std::iota(abs_rank.begin(), abs_rank.end(), std::size_t{0});
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(abs_rank.begin(), abs_rank.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(diff[a]) > std::abs(diff[b]); });
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) { return diff[a] < diff[b]; });
    const auto empty_before = detail::count_empty(p, prefix);

    bool moved = false;
    auto try_move = [&](std::size_t donor, std::size_t receiver) {
      if (donor == receiver || p.levels(donor) <= k) return false;
      trial = p.t_ptr;
      detail::chain_shift(p.t_ptr, donor, receiver);
      const double nv = partition_variance(p, prefix);
      if (nv < var * (1.0 - 1e-12) && detail::count_empty(p, prefix) <= empty_before) {
        var = nv;
        if (trace) trace->variance.push_back(var);
        return true;
      }
      p.t_ptr.swap(trial);
      return false;
    };

    for (std::size_t r = 0; r < len && !moved; ++r) {
      const auto x = abs_rank[r];
      const bool under = diff[x] < 0.0;
      for (int pass = 0; pass < 2 && !moved; ++pass) {
        const bool acquire = (pass == 0) == under;
        if (acquire) {
          for (std::size_t j = len; j-- > 0 && !moved;) moved = try_move(rank[j], x);
        } else {
          for (std::size_t j = 0; j < len && !moved; ++j) moved = try_move(x, rank[j]);
        }
      }
    }
    if (!moved) return p;
  }
}

// ---------------------------------------------------------------------------
// Schedule tree
// ---------------------------------------------------------------------------

struct TreeNode {
  int id = 0;
  int parent = -1;
  int stage = -1;  ///< -1 for the root pseudo-group
  Color color = Color::red;
  index_t level_begin = 0;  ///< into the parent's level set
  index_t level_end = 0;
  index_t begin = 0;  ///< vertex range in schedule order
  index_t end = 0;
  int threads = 1;
  int thread_begin = 0;
  index_t nrows_eff = 0;
  std::vector<int> children;
  // aggregation window metadata (stage >= 0)
  double window_weight = 0.0;
  int window_threads = 0;
  double window_eps = 0.0;
  double eps_threshold = 0.0;
  bool window_accepted = false;
  /// Leaf that still has threads > 1 because recursion found no finer split.
  bool unresolved = false;

  index_t rows() const noexcept { return end - begin; }
  bool leaf() const noexcept { return children.empty(); }
};

/// Nested shape used to build trees directly (analytics, tests).
struct TopologyNode {
  index_t rows = 0;  ///< leaf rows; ignored for inner nodes
  int threads = 1;
  std::vector<TopologyNode> children;
};

class ScheduleTree {
 public:
  ScheduleTree() = default;

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const TreeNode& root() const { return nodes_.front(); }
  /// Maps the input vertex numbering to schedule order.
  const Permutation& perm() const noexcept { return perm_; }
  int k() const noexcept { return k_; }
  int nthreads() const noexcept { return nthreads_; }
  index_t nrows() const noexcept { return nodes_.empty() ? 0 : nodes_.front().rows(); }

  std::vector<int> leaves() const {
    std::vector<int> out;
    collect_leaves(0, out);
    return out;
  }

  int max_stage() const {
    int s = -1;
    for (auto& n : nodes_) s = std::max(s, n.stage);
    return s;
  }

  /// One node per line, depth-first: stage, color, level range, vertex
  /// range, threads, first thread id, nrowsEff.
  std::string dump() const {
    std::ostringstream os;
    dump_node(os, 0, 0);
    return os.str();
  }

  /// Builds a tree from an explicit shape. Leaves receive consecutive vertex
  /// ranges; sibling pairs (2j, 2j+1) share threads, assigned compactly.
  static ScheduleTree from_topology(const TopologyNode& root, int k) {
    ScheduleTree t;
    t.k_ = k;
    t.nthreads_ = root.threads;
    index_t cursor = 0;
    t.nodes_.push_back(TreeNode{});
    t.nodes_[0].id = 0;
    t.nodes_[0].threads = root.threads;
    t.build_from(root, 0, cursor);
    t.perm_ = Permutation::identity(cursor);
    return t;
  }

 private:
  friend class TreeEngine;

  void collect_leaves(int id, std::vector<int>& out) const {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.leaf()) {
      out.push_back(id);
      return;
    }
    for (auto c : n.children) collect_leaves(c, out);
  }

  void dump_node(std::ostringstream& os, int id, int depth) const {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    os << std::string(static_cast<std::size_t>(2 * depth), ' ') << "stage=" << n.stage
       << " color=" << (n.stage < 0 ? "root" : to_string(n.color)) << " levels=[" << n.level_begin << ','
       << n.level_end << ") rows=[" << n.begin << ',' << n.end << ") threads=" << n.threads
       << " tid=" << n.thread_begin << " nrowsEff=" << n.nrows_eff;
    if (n.unresolved) os << " unresolved";
    os << '\n';
    for (auto c : n.children) dump_node(os, c, depth + 1);
  }

  void build_from(const TopologyNode& topo, int id, index_t& cursor) {
    auto& self = nodes_[static_cast<std::size_t>(id)];
    self.begin = cursor;
    if (topo.children.empty()) {
      cursor += topo.rows;
      nodes_[static_cast<std::size_t>(id)].end = cursor;
      return;
    }
    int red_threads = 0;
    for (std::size_t i = 0; i < topo.children.size(); i += 2) {
      red_threads += topo.children[i].threads;
      if (i + 1 < topo.children.size() && topo.children[i + 1].threads != topo.children[i].threads)
        throw std::invalid_argument("paired red/blue groups must share a thread count");
    }
    if (red_threads != topo.threads)
      throw std::invalid_argument("child thread counts must add up to the parent's");
    const int stage = self.stage + 1;
    int tb = self.thread_begin;
    for (std::size_t i = 0; i < topo.children.size(); ++i) {
      TreeNode c;
      c.id = static_cast<int>(nodes_.size());
      c.parent = id;
      c.stage = stage;
      c.color = i % 2 == 0 ? Color::red : Color::blue;
      c.threads = topo.children[i].threads;
      c.thread_begin = tb;
      if (i % 2 == 1 || i + 1 == topo.children.size()) tb += c.threads;
      nodes_[static_cast<std::size_t>(id)].children.push_back(c.id);
      nodes_.push_back(c);
      build_from(topo.children[i], c.id, cursor);
    }
    nodes_[static_cast<std::size_t>(id)].end = cursor;
  }

  std::vector<TreeNode> nodes_;
  Permutation perm_;
  int k_ = 1;
  int nthreads_ = 1;
};

// ---------------------------------------------------------------------------
// Analytics
// ---------------------------------------------------------------------------

/// Fills nrowsEff bottom-up: leaves hold their row count, inner nodes the
/// largest red child plus the largest blue child. Returns the root value.
inline index_t effective_rows(ScheduleTree& tree);

/// nrows_total / (nrowsEff(root) * nthreads).
inline double efficiency(const ScheduleTree& tree) {
  const auto eff = tree.root().nrows_eff;
  if (tree.nrows() == 0 || eff == 0) return 1.0;
  return static_cast<double>(tree.nrows()) / (static_cast<double>(eff) * tree.nthreads());
}

// ---------------------------------------------------------------------------
// Subgraph extension
// ---------------------------------------------------------------------------

/// Vertices of [begin, end) plus everything within graph distance k-1 of
/// them, ascending.
inline std::vector<index_t> extend_subgraph(index_t begin, index_t end, const CsrMatrix& G, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::vector<char> mark(static_cast<std::size_t>(G.nrows()), 0);
  std::vector<index_t> out, frontier, next;
  for (index_t v = begin; v < end; ++v) {
    mark[static_cast<std::size_t>(v)] = 1;
    out.push_back(v);
    frontier.push_back(v);
  }
  for (int d = 1; d < k && !frontier.empty(); ++d) {
    next.clear();
    for (auto v : frontier)
      for (auto u : G.row_cols(v))
        if (!mark[static_cast<std::size_t>(u)]) {
          mark[static_cast<std::size_t>(u)] = 1;
          out.push_back(u);
          next.push_back(u);
        }
    frontier.swap(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<index_t> extend_subgraph(const LevelGroup& g, const CsrMatrix& G, int k) {
  return extend_subgraph(g.begin, g.end, G, k);
}

// ---------------------------------------------------------------------------
// Level-group helpers on LevelSets
// ---------------------------------------------------------------------------

/// Row or nonzero count per level; `G` must be numbered in level order.
inline std::vector<double> level_loads(const LevelSet& ls, const CsrMatrix& G, BalanceBy by) {
  std::vector<double> load(static_cast<std::size_t>(ls.total_levels()), 0.0);
  for (index_t l = 0; l < ls.total_levels(); ++l) {
    if (by == BalanceBy::rows) {
      load[static_cast<std::size_t>(l)] = ls.level_size(l);
    } else {
      double s = 0.0;
      for (auto v = ls.level_ptr[static_cast<std::size_t>(l)]; v < ls.level_ptr[static_cast<std::size_t>(l) + 1]; ++v)
        s += G.row_nnz(v);
      load[static_cast<std::size_t>(l)] = s;
    }
  }
  return load;
}

namespace detail {

/// Splits every window into red/blue halves of at least k levels each,
/// choosing the split with the smallest load difference.
inline GroupPartition split_windows(const std::vector<Window>& windows, std::span<const double> prefix, int k) {
  GroupPartition p;
  p.t_ptr.assign(1, windows.empty() ? 0 : windows.front().level_begin);
  for (const auto& w : windows) {
    index_t split = w.level_end;
    if (w.level_end - w.level_begin >= 2 * k) {
      double best = -1.0;
      for (index_t m = w.level_begin + k; m <= w.level_end - k; ++m) {
        const double red = prefix[static_cast<std::size_t>(m)] - prefix[static_cast<std::size_t>(w.level_begin)];
        const double blue = prefix[static_cast<std::size_t>(w.level_end)] - prefix[static_cast<std::size_t>(m)];
        const double d = std::abs(red - blue);
        if (best < 0.0 || d < best) {
          best = d;
          split = m;
        }
      }
    }
    p.t_ptr.push_back(split);
    p.t_ptr.push_back(w.level_end);
    p.workers.push_back(w.threads);
    p.workers.push_back(w.threads);
  }
  return p;
}

inline std::vector<LevelGroup> groups_from(const GroupPartition& p, const std::vector<Window>& windows,
                                           std::span<const index_t> level_ptr, int stage, double eps_s) {
  std::vector<LevelGroup> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    LevelGroup g;
    g.level_begin = p.t_ptr[i];
    g.level_end = p.t_ptr[i + 1];
    g.begin = level_ptr[static_cast<std::size_t>(g.level_begin)];
    g.end = level_ptr[static_cast<std::size_t>(g.level_end)];
    g.color = i % 2 == 0 ? Color::red : Color::blue;
    g.threads = p.workers[i];
    g.stage = stage;
    const auto& w = windows[i / 2];
    g.window_weight = w.weight;
    g.window_threads = w.threads;
    g.window_eps = w.eps;
    g.eps_threshold = eps_s;
    g.window_accepted = w.accepted;
    out.push_back(g);
  }
  return out;
}

inline GroupPartition partition_of(const std::vector<LevelGroup>& groups) {
  GroupPartition p;
  p.t_ptr.assign(1, groups.empty() ? 0 : groups.front().level_begin);
  for (auto& g : groups) {
    p.t_ptr.push_back(g.level_end);
    p.workers.push_back(g.threads);
  }
  return p;
}

}  // namespace detail

/// Forms red/blue level-group pairs for one stage. `level_load` holds the
/// balance functional per level of `ls`.
inline std::vector<LevelGroup> aggregate(const LevelSet& ls, std::span<const double> level_load,
                                         const RaceConfig& cfg, int parent_threads, int stage = 0) {
  if (static_cast<index_t>(level_load.size()) != ls.total_levels())
    throw std::invalid_argument("one load value per level required");
  const double eps_s = cfg.eps_at(stage);
  auto windows = aggregate_windows(level_load, parent_threads, cfg.k, eps_s);
  const auto prefix = detail::prefix_sum(level_load);
  auto part = detail::split_windows(windows, prefix, cfg.k);
  return detail::groups_from(part, windows, ls.level_ptr, stage, eps_s);
}

/// Rebalances the boundaries of an aggregated stage; thread counts stay.
inline std::vector<LevelGroup> balance(const std::vector<LevelGroup>& groups, const LevelSet& ls,
                                       std::span<const double> level_load, const RaceConfig& cfg,
                                       BalanceTrace* trace = nullptr) {
  const auto prefix = detail::prefix_sum(level_load);
  auto part = balance_partition(detail::partition_of(groups), prefix, cfg.k, trace);
  auto out = groups;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].level_begin = part.t_ptr[i];
    out[i].level_end = part.t_ptr[i + 1];
    out[i].begin = ls.level_ptr[static_cast<std::size_t>(out[i].level_begin)];
    out[i].end = ls.level_ptr[static_cast<std::size_t>(out[i].level_end)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

class TreeEngine {
 public:
  /// Stage 0 only: levels of the whole graph, aggregated and balanced.
  static ScheduleTree stage0(const CsrMatrix& A, const RaceConfig& cfg) {
    cfg.validate();
    detail::require_square(A, "RACE");
    ScheduleTree t;
    t.k_ = cfg.k;
    t.nthreads_ = cfg.nthreads;
    const auto n = A.nrows();
    TreeNode root;
    root.id = 0;
    root.stage = -1;
    root.begin = 0;
    root.end = n;
    root.threads = cfg.nthreads;
    t.nodes_.push_back(root);
    if (n == 0) {
      t.perm_ = Permutation::identity(0);
      effective_rows(t);
      return t;
    }
    const index_t r = cfg.root ? *cfg.root : choose_root(A);
    auto ls = build_levels(A, r);
    t.perm_ = ls.perm;
    auto G = permute_symmetric(A, ls.perm);
    LevelSet local{Permutation::identity(n), ls.level_ptr};
    auto load = level_loads(local, G, cfg.balance_by);
    auto groups = aggregate(local, load, cfg, cfg.nthreads, 0);
    groups = balance(groups, local, load, cfg);
    t.nodes_[0].level_begin = 0;
    t.nodes_[0].level_end = ls.total_levels();
    attach(t, 0, groups, 0);
    effective_rows(t);
    return t;
  }

  /// Refines every leaf with more than one thread until all leaves are
  /// single-threaded or cannot be split further.
  static ScheduleTree recurse(ScheduleTree t, const CsrMatrix& A, const RaceConfig& cfg) {
    cfg.validate();
    if (t.nodes_.empty()) return t;
    std::vector<int> pending;
    for (auto id : t.leaves())
      if (t.nodes_[static_cast<std::size_t>(id)].threads > 1 && !t.nodes_[static_cast<std::size_t>(id)].unresolved)
        pending.push_back(id);
    if (pending.empty()) {
      effective_rows(t);
      return t;
    }
    const auto n = t.nrows();
    auto G = permute_symmetric(A, t.perm_);
    detail::BfsWorkspace ws(n);
    std::vector<char> in_sub(static_cast<std::size_t>(n), 0), owned_mask(static_cast<std::size_t>(n), 0);
    while (!pending.empty()) {
      std::vector<index_t> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), index_t{0});
      std::vector<int> next;
      for (auto id : pending) {
        auto node = t.nodes_[static_cast<std::size_t>(id)];
        const int stage = node.stage + 1;
        if (stage >= cfg.max_stages || node.rows() < 2) {
          t.nodes_[static_cast<std::size_t>(id)].unresolved = true;
          continue;
        }
        auto ext = extend_subgraph(node.begin, node.end, G, cfg.k);
        std::vector<index_t> owned(static_cast<std::size_t>(node.rows()));
        std::iota(owned.begin(), owned.end(), node.begin);
        for (auto v : ext) in_sub[static_cast<std::size_t>(v)] = 1;
        for (auto v : owned) owned_mask[static_cast<std::size_t>(v)] = 1;
        auto sl = detail::subgraph_levels(G, owned, in_sub, owned_mask, node.begin, ws);
        for (auto v : ext) in_sub[static_cast<std::size_t>(v)] = 0;
        for (auto v : owned) owned_mask[static_cast<std::size_t>(v)] = 0;

        // local level set expressed in new positions of this node
        LevelSet local;
        local.perm = Permutation::identity(0);
        local.level_ptr = sl.level_ptr;
        for (auto& p : local.level_ptr) p += node.begin;
        std::vector<double> load(static_cast<std::size_t>(local.total_levels()), 0.0);
        for (index_t l = 0; l < local.total_levels(); ++l)
          for (auto j = sl.level_ptr[static_cast<std::size_t>(l)]; j < sl.level_ptr[static_cast<std::size_t>(l) + 1]; ++j)
            load[static_cast<std::size_t>(l)] +=
                cfg.balance_by == BalanceBy::rows ? 1.0 : static_cast<double>(G.row_nnz(sl.order[static_cast<std::size_t>(j)]));

        auto groups = aggregate(local, load, cfg, node.threads, stage);
        groups = balance(groups, local, load, cfg);
        index_t nonempty = 0;
        for (auto& g : groups)
          if (g.rows() > 0) ++nonempty;
        if (nonempty < 2) {
          t.nodes_[static_cast<std::size_t>(id)].unresolved = true;
          continue;
        }
        for (std::size_t j = 0; j < sl.order.size(); ++j)
          order[static_cast<std::size_t>(node.begin) + j] = sl.order[j];
        attach(t, id, groups, stage);
        for (auto c : t.nodes_[static_cast<std::size_t>(id)].children)
          if (t.nodes_[static_cast<std::size_t>(c)].threads > 1) next.push_back(c);
      }
      auto step = Permutation::from_order(order);
      t.perm_ = t.perm_.then(step);
      if (!next.empty()) G = permute_symmetric(G, step);
      pending.swap(next);
    }
    effective_rows(t);
    return t;
  }

  static index_t fill_effective_rows(ScheduleTree& t, int id) {
    auto& n = t.nodes_[static_cast<std::size_t>(id)];
    if (n.leaf()) {
      n.nrows_eff = n.rows();
      return n.nrows_eff;
    }
    index_t best[2] = {0, 0};
    const auto children = n.children;
    for (std::size_t i = 0; i < children.size(); ++i)
      best[i % 2] = std::max(best[i % 2], fill_effective_rows(t, children[i]));
    t.nodes_[static_cast<std::size_t>(id)].nrows_eff = best[0] + best[1];
    return best[0] + best[1];
  }

 private:
  static void attach(ScheduleTree& t, int parent, const std::vector<LevelGroup>& groups, int stage) {
    int tb = t.nodes_[static_cast<std::size_t>(parent)].thread_begin;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      const auto& g = groups[i];
      TreeNode c;
      c.id = static_cast<int>(t.nodes_.size());
      c.parent = parent;
      c.stage = stage;
      c.color = g.color;
      c.level_begin = g.level_begin;
      c.level_end = g.level_end;
      c.begin = g.begin;
      c.end = g.end;
      c.threads = g.threads;
      c.thread_begin = tb;
      if (i % 2 == 1) tb += g.threads;
      c.window_weight = g.window_weight;
      c.window_threads = g.window_threads;
      c.window_eps = g.window_eps;
      c.eps_threshold = g.eps_threshold;
      c.window_accepted = g.window_accepted;
      t.nodes_[static_cast<std::size_t>(parent)].children.push_back(c.id);
      t.nodes_.push_back(c);
    }
  }
};

inline index_t effective_rows(ScheduleTree& tree) {
  if (tree.nodes().empty()) return 0;
  return TreeEngine::fill_effective_rows(tree, 0);
}

/// Full pipeline: stage 0 followed by recursion.
inline ScheduleTree build_schedule_tree(const CsrMatrix& A, const RaceConfig& cfg) {
  return TreeEngine::recurse(TreeEngine::stage0(A, cfg), A, cfg);
}

inline ScheduleTree recurse(ScheduleTree tree, const CsrMatrix& A, const RaceConfig& cfg) {
  return TreeEngine::recurse(std::move(tree), A, cfg);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct Violation {
  index_t u = 0;  ///< schedule-order vertex ids
  index_t v = 0;
  int leaf_u = 0;
  int leaf_v = 0;
  int distance = 0;
};

struct ValidationReport {
  std::vector<Violation> violations;  ///< capped at max_reported
  std::size_t total = 0;
  bool checked = true;

  bool ok() const noexcept { return checked && total == 0; }
  std::string summary() const {
    if (!checked) return "not checked (matrix above row cap)";
    if (total == 0) return "no violations";
    const auto& f = violations.front();
    return std::to_string(total) + " violation(s); first: vertices " + std::to_string(f.u) + " and " +
           std::to_string(f.v) + " (leaves " + std::to_string(f.leaf_u) + ", " + std::to_string(f.leaf_v) +
           ") at distance " + std::to_string(f.distance);
  }
};

namespace detail {

/// Leaves may run concurrently iff the children of their lowest common
/// ancestor that contain them have the same color.
inline std::vector<char> leaf_concurrency(const ScheduleTree& t, const std::vector<int>& leaves) {
  const auto m = leaves.size();
  std::vector<std::vector<int>> path(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (int id = leaves[i]; id >= 0; id = t.node(id).parent) path[i].push_back(id);
    std::reverse(path[i].begin(), path[i].end());
  }
  std::vector<char> conc(m * m, 0);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      std::size_t d = 0;
      while (d < path[a].size() && d < path[b].size() && path[a][d] == path[b][d]) ++d;
      const auto& ca = t.node(path[a][d]);
      const auto& cb = t.node(path[b][d]);
      const bool c = ca.color == cb.color;
      conc[a * m + b] = conc[b * m + a] = c;
    }
  return conc;
}

}  // namespace detail

/// Checks that every pair of vertices in leaves that may run concurrently
/// is more than k edges apart. `A` is in the numbering the tree was built
/// from. Cost is one depth-k BFS per vertex.
inline ValidationReport validate_schedule(const ScheduleTree& tree, const CsrMatrix& A, int k,
                                          index_t max_rows = 1 << 22, std::size_t max_reported = 64) {
  ValidationReport rep;
  const auto n = tree.nrows();
  if (A.nrows() != n) throw std::invalid_argument("matrix does not match schedule tree");
  if (n > max_rows) {
    rep.checked = false;
    return rep;
  }
  const auto G = permute_symmetric(A, tree.perm());
  const auto leaves = tree.leaves();
  std::vector<int> leaf_of(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto& l = tree.node(leaves[i]);
    for (auto v = l.begin; v < l.end; ++v) leaf_of[static_cast<std::size_t>(v)] = static_cast<int>(i);
  }
  const auto conc = detail::leaf_concurrency(tree, leaves);
  const auto m = leaves.size();
  std::vector<int> dist(static_cast<std::size_t>(n), -1);
  std::vector<index_t> touched, frontier, next;
  for (index_t u = 0; u < n; ++u) {
    const auto lu = leaf_of[static_cast<std::size_t>(u)];
    touched.assign(1, u);
    frontier.assign(1, u);
    dist[static_cast<std::size_t>(u)] = 0;
    for (int d = 1; d <= k && !frontier.empty(); ++d) {
      next.clear();
      for (auto v : frontier)
        for (auto w : G.row_cols(v)) {
          if (dist[static_cast<std::size_t>(w)] != -1) continue;
          dist[static_cast<std::size_t>(w)] = d;
          touched.push_back(w);
          next.push_back(w);
          const auto lw = leaf_of[static_cast<std::size_t>(w)];
          if (w > u && lw != lu && conc[static_cast<std::size_t>(lu) * m + static_cast<std::size_t>(lw)]) {
            ++rep.total;
            if (rep.violations.size() < max_reported)
              rep.violations.push_back({u, w, leaves[static_cast<std::size_t>(lu)], leaves[static_cast<std::size_t>(lw)], d});
          }
        }
      frontier.swap(next);
    }
    for (auto v : touched) dist[static_cast<std::size_t>(v)] = -1;
  }
  return rep;
}

inline ValidationReport validate_schedule(const ScheduleTree& tree, const CsrMatrix& A) {
  return validate_schedule(tree, A, tree.k());
}

}  // namespace race
