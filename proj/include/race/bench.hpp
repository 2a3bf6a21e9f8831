#pragma once

/// \file race/bench.hpp
/// \brief Benchmark driver: ring-buffered timing of SpMV, RACE SymmSpMV and
/// the colored baselines, with roofline bounds and CSV/table reports.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "race/baselines.hpp"
#include "race/executor.hpp"
#include "race/kernels.hpp"
#include "race/levels.hpp"
#include "race/perfmodel.hpp"
#include "race/race.hpp"
#include "race/sparsemat.hpp"

namespace race::bench {

inline constexpr const char* csv_version_line = "# race-bench-csv v1";

enum class Method { spmv, race, mc, abmc };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::spmv: return "spmv";
    case Method::race: return "race";
    case Method::mc: return "mc";
    case Method::abmc: return "abmc";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "spmv") return Method::spmv;
  if (s == "race") return Method::race;
  if (s == "mc") return Method::mc;
  if (s == "abmc") return Method::abmc;
  throw std::invalid_argument("unknown method '" + s + "' (expected spmv, race, mc or abmc)");
}

struct StencilSpec {
  index_t nx = 0;
  index_t ny = 0;
  StencilPattern pattern = StencilPattern::five_point;
};

/// "NX,NY,PATTERN" with PATTERN one of 5, 9, 5pt, 9pt.
inline StencilSpec parse_stencil_spec(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ',');) parts.push_back(p);
  if (parts.size() != 3) throw std::invalid_argument("stencil spec must be NX,NY,PATTERN");
  StencilSpec spec;
  try {
    spec.nx = static_cast<index_t>(std::stol(parts[0]));
    spec.ny = static_cast<index_t>(std::stol(parts[1]));
  } catch (const std::exception&) {
    throw std::invalid_argument("stencil dimensions must be integers: " + s);
  }
  spec.pattern = parse_stencil_pattern(parts[2]);
  if (spec.nx < 1 || spec.ny < 1) throw std::invalid_argument("stencil dimensions must be >= 1");
  return spec;
}

struct BenchConfig {
  std::string matrix_path;
  std::optional<StencilSpec> stencil;
  std::vector<Method> methods{Method::spmv, Method::race};
  int k = 2;
  int threads = 1;
  std::vector<double> eps{0.8, 0.8};
  double eps_tail = 0.5;
  int reps = 100;
  std::optional<perf::MachineModel> machine;
  /// Assumed alpha for the roofline; optimal alpha when empty.
  std::optional<double> alpha;
  bool validate = false;
  index_t validate_max_rows = 500;
  std::optional<std::pair<index_t, index_t>> scan_blocksize;
  index_t block_size = 16;
  std::uint64_t seed = 1;
  bool pin = false;
  bool rcm = true;
  double ring_mb = 50.0;
  std::optional<index_t> root;
};

struct ResultRow {
  std::string matrix;
  index_t nrows = 0;
  offset_t nnz = 0;
  double nnzr = 0.0;
  index_t bw = 0;
  index_t bw_rcm = 0;
  Method method = Method::spmv;
  int threads = 1;
  std::optional<double> eta;
  std::optional<int> colors;
  std::optional<index_t> block_size;
  double gflops_mean = 0.0;
  double gflops_min = 0.0;
  double gflops_max = 0.0;
  bool spread_flag = false;
  std::optional<double> roofline_lo;
  std::optional<double> roofline_hi;
  std::optional<double> speedup_vs_spmv;
  double preprocess_s = 0.0;
  int reps = 0;
  std::optional<double> validation_error;
};

struct Timing {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  bool spread = false;
};

/// Per-invocation GF/s statistics; spread is flagged above 5% of the mean.
inline Timing summarize(const std::vector<double>& gflops) {
  Timing t;
  if (gflops.empty()) return t;
  double s = 0.0;
  for (auto g : gflops) s += g;
  t.mean = s / static_cast<double>(gflops.size());
  t.min = *std::min_element(gflops.begin(), gflops.end());
  t.max = *std::max_element(gflops.begin(), gflops.end());
  t.spread = t.mean > 0.0 && (t.max - t.min) / t.mean > 0.05;
  return t;
}

/// Two rings (x and b) of equally sized vectors, each ring at least
/// `min_bytes` and at least two vectors.
class RingBuffers {
 public:
  RingBuffers(index_t n, double min_bytes, std::uint64_t seed) : n_(static_cast<std::size_t>(n)) {
    const double vec_bytes = std::max<double>(8.0 * static_cast<double>(n_), 8.0);
    nvec_ = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(std::max(min_bytes, 2.0 * vec_bytes) / vec_bytes)));
    x_.resize(nvec_ * n_);
    b_.assign(nvec_ * n_, 0.0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : x_) v = u(rng);
  }

  std::size_t slots() const noexcept { return nvec_; }
  std::span<double> x(std::size_t i) { return {x_.data() + (i % nvec_) * n_, n_}; }
  std::span<double> b(std::size_t i) { return {b_.data() + (i % nvec_) * n_, n_}; }

 private:
  std::size_t n_;
  std::size_t nvec_ = 2;
  std::vector<double> x_, b_;
};

/// Times `reps` invocations of op(x, b) rotating through the rings after one
/// warm-up call.
template <class Op>
std::vector<double> time_kernel(Op&& op, RingBuffers& ring, double flops, int reps) {
  using clock = std::chrono::steady_clock;
  op(ring.x(0), ring.b(0));
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto s = static_cast<std::size_t>(i) + 1;
    auto x = ring.x(s);
    auto b = ring.b(s);
    const auto t0 = clock::now();
    op(x, b);
    const double dt = std::chrono::duration<double>(clock::now() - t0).count();
    g.push_back(dt > 0.0 ? flops / dt * 1e-9 : 0.0);
  }
  return g;
}

inline double relative_l2(std::span<const double> a, std::span<const double> ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - ref[i];
    num += d * d;
    den += ref[i] * ref[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Loaded {
  std::string name;
  CsrMatrix A;  ///< after optional RCM
  index_t bw = 0;
  index_t bw_rcm = 0;
};

inline Loaded load_input(const BenchConfig& cfg) {
  Loaded in;
  if (cfg.stencil) {
    const auto& s = *cfg.stencil;
    in.A = generate_stencil(s.nx, s.ny, s.pattern);
    in.name = "stencil-" + std::to_string(s.nx) + "x" + std::to_string(s.ny) +
              (s.pattern == StencilPattern::five_point ? "-5pt" : "-9pt");
  } else if (!cfg.matrix_path.empty()) {
    in.A = load_matrix(cfg.matrix_path);
    in.name = std::filesystem::path(cfg.matrix_path).stem().string();
  } else {
    throw std::invalid_argument("either a matrix path or a stencil spec is required");
  }
  if (!in.A.square()) throw std::invalid_argument("matrix must be square");
  if (!is_structurally_symmetric(in.A)) throw std::invalid_argument("matrix must be structurally symmetric");
  in.bw = bandwidth(in.A);
  if (cfg.rcm) in.A = permute_symmetric(in.A, rcm_order(in.A));
  in.bw_rcm = bandwidth(in.A);
  return in;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Runs every configured method on one matrix. `log` receives progress
/// notes; validation failures throw ValidationError.
inline std::vector<ResultRow> run_benchmark(const BenchConfig& cfg, std::ostream* log = nullptr) {
  if (cfg.reps < 1) throw std::invalid_argument("reps must be >= 1");
  if (cfg.threads < 1) throw std::invalid_argument("threads must be >= 1");
  auto in = load_input(cfg);
  const auto& A = in.A;
  const auto n = A.nrows();
  const double flops = spmv_flops(A);
  const bool need_upper = std::any_of(cfg.methods.begin(), cfg.methods.end(), [](Method m) { return m != Method::spmv; });
  std::optional<CsrMatrix> upper_check;
  if (need_upper) upper_check = extract_upper(A);  // reports a missing diagonal up front

  RingBuffers ring(n, cfg.ring_mb * 1024.0 * 1024.0, cfg.seed);
  const bool validate = cfg.validate && n <= cfg.validate_max_rows;
  if (cfg.validate && !validate && log)
    *log << "validation skipped: " << n << " rows exceeds cap " << cfg.validate_max_rows << '\n';
  std::vector<double> reference;
  if (validate) reference = spmv(A, std::span<const double>(ring.x(0).data(), ring.x(0).size()));

  auto base_row = [&](Method m) {
    ResultRow r;
    r.matrix = in.name;
    r.nrows = n;
    r.nnz = A.nnz();
    r.nnzr = A.nnzr();
    r.bw = in.bw;
    r.bw_rcm = in.bw_rcm;
    r.method = m;
    r.threads = cfg.threads;
    r.reps = cfg.reps;
    if (cfg.machine && n > 0) {
      const double nnzr = std::max(1.0, A.nnzr());
      const double I = m == Method::spmv
                           ? perf::intensity_spmv(nnzr, cfg.alpha.value_or(perf::optimal_alpha(nnzr, perf::Kernel::spmv).alpha))
                           : perf::intensity_symmspmv(nnzr, cfg.alpha.value_or(perf::optimal_alpha(nnzr, perf::Kernel::symmspmv).alpha));
      const auto iv = perf::roofline(I, *cfg.machine);
      r.roofline_lo = iv.lo * 1e-9;
      r.roofline_hi = iv.hi * 1e-9;
    }
    return r;
  };
  auto check = [&](ResultRow& r, std::span<const double> got) {
    if (!validate) return;
    const double err = relative_l2(got, reference);
    r.validation_error = err;
    if (!(err <= 1e-13))
      throw ValidationError(std::string(to_string(r.method)) + ": result deviates from the SpMV oracle (relative L2 " +
                            std::to_string(err) + ")");
  };
  auto apply_timing = [&](ResultRow& r, const std::vector<double>& g) {
    const auto t = summarize(g);
    r.gflops_mean = t.mean;
    r.gflops_min = t.min;
    r.gflops_max = t.max;
    r.spread_flag = t.spread;
  };

  std::vector<ResultRow> rows;
  ThreadPool pool(cfg.threads, cfg.pin);
  for (auto m : cfg.methods) {
    auto r = base_row(m);
    if (m == Method::spmv) {
      const auto t0 = std::chrono::steady_clock::now();
      ParallelSpmv op(A, pool);
      r.preprocess_s = seconds_since(t0);
      if (validate) {
        std::vector<double> b(static_cast<std::size_t>(n));
        op.apply(ring.x(0), b);
        check(r, b);
      }
      apply_timing(r, time_kernel([&](auto x, auto b) { op.apply(x, b); }, ring, flops, cfg.reps));
    } else if (m == Method::race) {
      if (cfg.k < 2) throw std::invalid_argument("race SymmSpMV needs k >= 2");
      RaceConfig rc;
      rc.k = cfg.k;
      rc.nthreads = cfg.threads;
      rc.eps = cfg.eps;
      rc.eps_tail = cfg.eps_tail;
      rc.root = cfg.root;
      const auto t0 = std::chrono::steady_clock::now();
      auto plan = make_race_plan(A, rc);
      Executor ex(plan.schedule, ExecutorOptions{cfg.pin, false});
      r.preprocess_s = seconds_since(t0);
      r.eta = efficiency(plan.tree);
      if (validate) {
        const auto rep = validate_schedule(plan.tree, A, cfg.k);
        if (!rep.ok()) throw ValidationError("race schedule: " + rep.summary());
        {
          const auto xp = plan.perm().apply(std::span<const double>(ring.x(0).data(), ring.x(0).size()));
          std::vector<double> bp(xp.size());
          symmspmv_race(plan.upper, xp, bp, ex);
          check(r, plan.perm().unapply(std::span<const double>(bp)));
        }
      }
      // ring vectors are used as given; the permutation only relabels entries
      apply_timing(r, time_kernel([&](auto x, auto b) { symmspmv_race(plan.upper, x, b, ex); }, ring, flops, cfg.reps));
    } else {
      const int ck = std::max(cfg.k, 2);
      auto run_colored = [&](const Coloring& col, int reps, ResultRow* out_row) {
        const auto t0 = std::chrono::steady_clock::now();
        auto plan = make_colored_plan(A, col, cfg.threads);
        ColoredSymmSpmv op(plan, pool);
        const double pre = seconds_since(t0);
        if (out_row && validate) {
          const auto rep = validate_coloring(A, col, ck);
          if (!rep.ok())
            throw ValidationError(std::string(to_string(out_row->method)) + " coloring has " + std::to_string(rep.violations) +
                                  " conflicts");
          check(*out_row, op(std::span<const double>(ring.x(0).data(), ring.x(0).size())));
        }
        auto g = time_kernel([&](auto x, auto b) { op.apply_permuted(x, b); }, ring, flops, reps);
        return std::make_pair(pre, g);
      };
      const auto t0 = std::chrono::steady_clock::now();
      Coloring col;
      if (m == Method::mc) {
        col = multicolor(A, ck);
      } else {
        index_t bs = cfg.block_size;
        if (cfg.scan_blocksize) {
          const auto [lo, hi] = *cfg.scan_blocksize;
          double best = -1.0;
          const int scan_reps = std::max(3, cfg.reps / 10);
          for (index_t s = std::max<index_t>(1, lo); s <= hi; s *= 2) {
            auto c = abmc(A, ck, s);
            const auto t = summarize(run_colored(c, scan_reps, nullptr).second);
            if (log) *log << "abmc block size " << s << ": " << c.ncolors << " colors, " << t.mean << " GF/s\n";
            if (t.mean > best) {
              best = t.mean;
              bs = s;
            }
          }
          if (log) *log << "abmc best block size " << bs << '\n';
        }
        col = abmc(A, ck, bs);
        r.block_size = bs;
      }
      const double color_s = seconds_since(t0);
      r.colors = col.ncolors;
      auto [pre, g] = run_colored(col, cfg.reps, &r);
      r.preprocess_s = color_s + pre;
      apply_timing(r, g);
    }
    rows.push_back(r);
  }
  const auto base = std::find_if(rows.begin(), rows.end(), [](const ResultRow& r) { return r.method == Method::spmv; });
  if (base != rows.end() && base->gflops_mean > 0.0)
    for (auto& r : rows) r.speedup_vs_spmv = r.gflops_mean / base->gflops_mean;
  return rows;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "matrix",     "nrows",       "nnz",         "nnzr",        "bw",          "bw_rcm",          "method",
      "threads",    "eta",         "colors",      "block_size",  "gflops_mean", "gflops_min",      "gflops_max",
      "spread_flag", "roofline_lo", "roofline_hi", "speedup_vs_spmv", "preprocess_s", "reps"};
  return cols;
}

namespace detail {

inline std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

template <class T>
std::string opt(const std::optional<T>& v) {
  if (!v) return {};
  if constexpr (std::is_floating_point_v<T>)
    return fmt(*v);
  else
    return std::to_string(*v);
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

inline std::vector<std::string> fields(const ResultRow& r) {
  return {csv_quote(r.matrix),
          std::to_string(r.nrows),
          std::to_string(r.nnz),
          fmt(r.nnzr),
          std::to_string(r.bw),
          std::to_string(r.bw_rcm),
          to_string(r.method),
          std::to_string(r.threads),
          opt(r.eta),
          opt(r.colors),
          opt(r.block_size),
          fmt(r.gflops_mean),
          fmt(r.gflops_min),
          fmt(r.gflops_max),
          r.spread_flag ? "1" : "0",
          opt(r.roofline_lo),
          opt(r.roofline_hi),
          opt(r.speedup_vs_spmv),
          fmt(r.preprocess_s),
          std::to_string(r.reps)};
}

}  // namespace detail

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << csv_version_line << '\n';
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  for (const auto& r : rows) {
    const auto f = detail::fields(r);
    for (std::size_t i = 0; i < f.size(); ++i) os << (i ? "," : "") << f[i];
    os << '\n';
  }
}

/// Aligned text table with the same columns as the CSV.
inline std::string format_table(const std::vector<ResultRow>& rows) {
  const auto& cols = csv_columns();
  std::vector<std::vector<std::string>> cells;
  cells.push_back(cols);
  for (const auto& r : rows) cells.push_back(detail::fields(r));
  std::vector<std::size_t> width(cols.size(), 0);
  for (auto& row : cells)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  std::ostringstream os;
  for (auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << "  ";
      os << std::setw(static_cast<int>(width[i])) << (i == 0 ? std::left : std::right) << row[i];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace race::bench
