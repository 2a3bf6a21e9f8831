#pragma once

/// \file race/sparsemat.hpp
/// \brief CSR storage, MatrixMarket / binary ingestion, symmetric permutation
/// and structural metrics.

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace race {

using index_t = std::int32_t;
using offset_t = std::int64_t;

/// Thrown for malformed or unsupported input files.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Coordinate entry used to assemble a CsrMatrix.
struct Triplet {
  index_t row;
  index_t col;
  double val;
};

/// Compressed row storage. Rows are kept in canonical form: columns strictly
/// increasing within each row.
class CsrMatrix {
 public:
  CsrMatrix() : row_ptr_(1, 0) {}

  /// Takes ownership of CSR arrays and validates every invariant.
  CsrMatrix(index_t nrows, index_t ncols, std::vector<offset_t> row_ptr,
            std::vector<index_t> col, std::vector<double> val)
      : nrows_(nrows),
        ncols_(ncols),
        row_ptr_(std::move(row_ptr)),
        col_(std::move(col)),
        val_(std::move(val)) {
    validate();
  }

  /// Builds a canonical matrix from unordered triplets; duplicates are summed.
  static CsrMatrix from_triplets(index_t nrows, index_t ncols,
                                 std::vector<Triplet> entries) {
    if (nrows < 0 || ncols < 0) throw std::invalid_argument("negative matrix dimension");
    for (const auto& t : entries) {
      if (t.row < 0 || t.row >= nrows || t.col < 0 || t.col >= ncols)
        throw std::out_of_range("triplet (" + std::to_string(t.row) + "," +
                                std::to_string(t.col) + ") outside " +
                                std::to_string(nrows) + "x" + std::to_string(ncols));
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
    std::vector<offset_t> rp(static_cast<std::size_t>(nrows) + 1, 0);
    std::vector<index_t> col;
    std::vector<double> val;
    col.reserve(entries.size());
    val.reserve(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& t = entries[i];
      if (!col.empty() && i > 0 && entries[i - 1].row == t.row && entries[i - 1].col == t.col) {
        val.back() += t.val;
        continue;
      }
      col.push_back(t.col);
      val.push_back(t.val);
      ++rp[static_cast<std::size_t>(t.row) + 1];
    }
    std::partial_sum(rp.begin(), rp.end(), rp.begin());
    return CsrMatrix(nrows, ncols, std::move(rp), std::move(col), std::move(val));
  }

  index_t nrows() const noexcept { return nrows_; }
  index_t ncols() const noexcept { return ncols_; }
  offset_t nnz() const noexcept { return static_cast<offset_t>(col_.size()); }
  bool square() const noexcept { return nrows_ == ncols_; }

  /// Average nonzeros per row.
  double nnzr() const noexcept {
    return nrows_ == 0 ? 0.0 : static_cast<double>(nnz()) / static_cast<double>(nrows_);
  }

  std::span<const offset_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const index_t> col() const noexcept { return col_; }
  std::span<const double> val() const noexcept { return val_; }

  offset_t row_begin(index_t r) const noexcept { return row_ptr_[static_cast<std::size_t>(r)]; }
  offset_t row_end(index_t r) const noexcept { return row_ptr_[static_cast<std::size_t>(r) + 1]; }
  index_t row_nnz(index_t r) const noexcept {
    return static_cast<index_t>(row_end(r) - row_begin(r));
  }
  std::span<const index_t> row_cols(index_t r) const noexcept {
    return std::span<const index_t>(col_).subspan(static_cast<std::size_t>(row_begin(r)),
                                                   static_cast<std::size_t>(row_nnz(r)));
  }
  std::span<const double> row_vals(index_t r) const noexcept {
    return std::span<const double>(val_).subspan(static_cast<std::size_t>(row_begin(r)),
                                                  static_cast<std::size_t>(row_nnz(r)));
  }

  /// Value at (r, c) or 0 when not stored.
  double at(index_t r, index_t c) const {
    auto cols = row_cols(r);
    auto it = std::lower_bound(cols.begin(), cols.end(), c);
    if (it == cols.end() || *it != c) return 0.0;
    return val_[static_cast<std::size_t>(row_begin(r) + (it - cols.begin()))];
  }

  bool has_entry(index_t r, index_t c) const {
    auto cols = row_cols(r);
    return std::binary_search(cols.begin(), cols.end(), c);
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> out;
    out.reserve(col_.size());
    for (index_t r = 0; r < nrows_; ++r)
      for (offset_t i = row_begin(r); i < row_end(r); ++i)
        out.push_back({r, col_[static_cast<std::size_t>(i)], val_[static_cast<std::size_t>(i)]});
    return out;
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

 private:
  void validate() const {
    if (nrows_ < 0 || ncols_ < 0) throw std::invalid_argument("negative matrix dimension");
    if (row_ptr_.size() != static_cast<std::size_t>(nrows_) + 1)
      throw std::invalid_argument("rowPtr length must be nrows+1");
    if (row_ptr_.front() != 0) throw std::invalid_argument("rowPtr[0] must be 0");
    if (row_ptr_.back() != static_cast<offset_t>(col_.size()))
      throw std::invalid_argument("rowPtr[nrows] must equal nnz");
    if (val_.size() != col_.size()) throw std::invalid_argument("col/val length mismatch");
    for (index_t r = 0; r < nrows_; ++r) {
      const auto b = row_ptr_[static_cast<std::size_t>(r)];
      const auto e = row_ptr_[static_cast<std::size_t>(r) + 1];
      if (e < b) throw std::invalid_argument("rowPtr must be nondecreasing");
      for (offset_t i = b; i < e; ++i) {
        const auto c = col_[static_cast<std::size_t>(i)];
        if (c < 0 || c >= ncols_)
          throw std::invalid_argument("column index out of range in row " + std::to_string(r));
        if (i > b && col_[static_cast<std::size_t>(i) - 1] >= c)
          throw std::invalid_argument("columns not strictly increasing in row " +
                                      std::to_string(r));
      }
    }
  }

  index_t nrows_ = 0;
  index_t ncols_ = 0;
  std::vector<offset_t> row_ptr_;
  std::vector<index_t> col_;
  std::vector<double> val_;
};

/// Bijection on [0, n): perm maps old index to new, inv maps new to old.
class Permutation {
 public:
  Permutation() = default;

  static Permutation identity(index_t n) {
    std::vector<index_t> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), index_t{0});
    return Permutation(std::move(p));
  }

  /// From old-to-new mapping.
  explicit Permutation(std::vector<index_t> old_to_new) : perm_(std::move(old_to_new)) {
    inv_.assign(perm_.size(), -1);
    const auto n = static_cast<index_t>(perm_.size());
    for (index_t i = 0; i < n; ++i) {
      const auto p = perm_[static_cast<std::size_t>(i)];
      if (p < 0 || p >= n || inv_[static_cast<std::size_t>(p)] != -1)
        throw std::invalid_argument("not a permutation");
      inv_[static_cast<std::size_t>(p)] = i;
    }
  }

  /// From new-to-old mapping (an ordering: position -> original index).
  static Permutation from_order(std::span<const index_t> new_to_old) {
    std::vector<index_t> p(new_to_old.size(), -1);
    const auto n = static_cast<index_t>(new_to_old.size());
    for (index_t i = 0; i < n; ++i) {
      const auto o = new_to_old[static_cast<std::size_t>(i)];
      if (o < 0 || o >= n || p[static_cast<std::size_t>(o)] != -1)
        throw std::invalid_argument("ordering is not a permutation");
      p[static_cast<std::size_t>(o)] = i;
    }
    return Permutation(std::move(p));
  }

  index_t size() const noexcept { return static_cast<index_t>(perm_.size()); }
  std::span<const index_t> perm() const noexcept { return perm_; }
  std::span<const index_t> inv() const noexcept { return inv_; }
  index_t operator()(index_t old_index) const { return perm_[static_cast<std::size_t>(old_index)]; }

  Permutation inverse() const { return Permutation(inv_); }

  /// Apply `this` first, then `next`.
  Permutation then(const Permutation& next) const {
    if (next.size() != size()) throw std::invalid_argument("permutation size mismatch");
    std::vector<index_t> p(perm_.size());
    for (std::size_t i = 0; i < perm_.size(); ++i)
      p[i] = next.perm_[static_cast<std::size_t>(perm_[i])];
    return Permutation(std::move(p));
  }

  /// y[perm[i]] = x[i]
  template <class T>
  std::vector<T> apply(std::span<const T> x) const {
    if (x.size() != perm_.size()) throw std::invalid_argument("vector length mismatch");
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[static_cast<std::size_t>(perm_[i])] = x[i];
    return y;
  }

  /// y[i] = x[perm[i]]
  template <class T>
  std::vector<T> unapply(std::span<const T> x) const {
    if (x.size() != perm_.size()) throw std::invalid_argument("vector length mismatch");
    std::vector<T> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[static_cast<std::size_t>(perm_[i])];
    return y;
  }

  template <class T>
  std::vector<T> apply(const std::vector<T>& x) const {
    return apply(std::span<const T>(x));
  }
  template <class T>
  std::vector<T> unapply(const std::vector<T>& x) const {
    return unapply(std::span<const T>(x));
  }

  friend bool operator==(const Permutation& a, const Permutation& b) { return a.perm_ == b.perm_; }

 private:
  std::vector<index_t> perm_;
  std::vector<index_t> inv_;
};

// ---------------------------------------------------------------------------
// MatrixMarket
// ---------------------------------------------------------------------------

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Reads a MatrixMarket coordinate file (real/integer/pattern,
/// general/symmetric) into canonical CSR with 0-based indices.
inline CsrMatrix parse_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty MatrixMarket stream");
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket") throw ParseError("missing %%MatrixMarket banner");
  object = detail::lower(object);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (object != "matrix") throw ParseError("unsupported MatrixMarket object '" + object + "'");
  if (format != "coordinate") throw ParseError("only coordinate format is supported, got '" + format + "'");
  if (field == "complex") throw ParseError("complex-valued matrices are not supported");
  if (field != "real" && field != "integer" && field != "pattern" && field != "double")
    throw ParseError("unsupported field '" + field + "'");
  if (symmetry != "general" && symmetry != "symmetric")
    throw ParseError("unsupported symmetry '" + symmetry + "'");
  const bool pattern = field == "pattern";
  const bool symmetric = symmetry == "symmetric";

  long long nr = -1, nc = -1, ne = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    std::istringstream sz(line);
    if (!(sz >> nr >> nc >> ne) || nr < 0 || nc < 0 || ne < 0)
      throw ParseError("malformed size line: '" + line + "'");
    break;
  }
  if (nr < 0) throw ParseError("missing size line");
  if (nr > INT32_MAX || nc > INT32_MAX) throw ParseError("matrix dimension exceeds index range");

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(symmetric ? 2 * ne : ne));
  long long read = 0;
  while (read < ne && std::getline(in, line)) {
    if (line.empty() || line[0] == '%') continue;
    const char* p = line.c_str();
    char* end = nullptr;
    const long long i = std::strtoll(p, &end, 10);
    if (end == p) throw ParseError("malformed entry line: '" + line + "'");
    p = end;
    const long long j = std::strtoll(p, &end, 10);
    if (end == p) throw ParseError("malformed entry line: '" + line + "'");
    p = end;
    double v = 1.0;
    if (!pattern) {
      v = std::strtod(p, &end);
      if (end == p) throw ParseError("missing value in entry line: '" + line + "'");
    }
    if (i < 1 || i > nr || j < 1 || j > nc)
      throw ParseError("coordinate (" + std::to_string(i) + "," + std::to_string(j) +
                       ") out of range");
    const auto r = static_cast<index_t>(i - 1);
    const auto c = static_cast<index_t>(j - 1);
    entries.push_back({r, c, v});
    if (symmetric && r != c) entries.push_back({c, r, v});
    ++read;
  }
  if (read < ne)
    throw ParseError("expected " + std::to_string(ne) + " entries, found " + std::to_string(read));
  return CsrMatrix::from_triplets(static_cast<index_t>(nr), static_cast<index_t>(nc),
                                  std::move(entries));
}

inline CsrMatrix parse_matrix_market(const std::string& text_or_path, bool is_path) {
  if (is_path) {
    std::ifstream f(text_or_path);
    if (!f) throw ParseError("cannot open '" + text_or_path + "'");
    return parse_matrix_market(f);
  }
  std::istringstream s(text_or_path);
  return parse_matrix_market(s);
}

/// Writes `general real` coordinate format with full precision.
inline void write_matrix_market(std::ostream& out, const CsrMatrix& A) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << A.nrows() << ' ' << A.ncols() << ' ' << A.nnz() << '\n';
  out.precision(17);
  for (index_t r = 0; r < A.nrows(); ++r) {
    auto cols = A.row_cols(r);
    auto vals = A.row_vals(r);
    for (std::size_t i = 0; i < cols.size(); ++i)
      out << r + 1 << ' ' << cols[i] + 1 << ' ' << vals[i] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Binary CSR dump: little-endian nrows, ncols, nnz (int64), rowPtr[nrows+1]
// (int64), col[nnz] (int64), val[nnz] (float64).
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

template <class T>
void put(std::ostream& out, T v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated CSR binary stream");
  return to_little(v);
}

}  // namespace detail

inline void write_csr_binary(std::ostream& out, const CsrMatrix& A) {
  detail::put<std::int64_t>(out, A.nrows());
  detail::put<std::int64_t>(out, A.ncols());
  detail::put<std::int64_t>(out, A.nnz());
  for (auto v : A.row_ptr()) detail::put<std::int64_t>(out, v);
  for (auto v : A.col()) detail::put<std::int64_t>(out, v);
  for (auto v : A.val()) detail::put<double>(out, v);
}

inline CsrMatrix read_csr_binary(std::istream& in) {
  const auto nr = detail::get<std::int64_t>(in);
  const auto nc = detail::get<std::int64_t>(in);
  const auto nz = detail::get<std::int64_t>(in);
  if (nr < 0 || nc < 0 || nz < 0 || nr > INT32_MAX || nc > INT32_MAX)
    throw ParseError("invalid CSR binary header");
  std::vector<offset_t> rp(static_cast<std::size_t>(nr) + 1);
  for (auto& v : rp) v = detail::get<std::int64_t>(in);
  std::vector<index_t> col(static_cast<std::size_t>(nz));
  for (auto& v : col) {
    const auto c = detail::get<std::int64_t>(in);
    if (c < 0 || c >= nc) throw ParseError("column index out of range in CSR binary stream");
    v = static_cast<index_t>(c);
  }
  std::vector<double> val(static_cast<std::size_t>(nz));
  for (auto& v : val) v = detail::get<double>(in);
  try {
    return CsrMatrix(static_cast<index_t>(nr), static_cast<index_t>(nc), std::move(rp),
                     std::move(col), std::move(val));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid CSR binary stream: ") + e.what());
  }
}

/// Loads `.bin`/`.csr` binary dumps or MatrixMarket text by extension.
inline CsrMatrix load_matrix(const std::string& path) {
  auto ends_with = [&](const std::string& suf) {
    return path.size() >= suf.size() && path.compare(path.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (ends_with(".bin") || ends_with(".csr")) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError("cannot open '" + path + "'");
    return read_csr_binary(f);
  }
  return parse_matrix_market(path, true);
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

/// True when (i,j) stored implies (j,i) stored.
inline bool is_structurally_symmetric(const CsrMatrix& A) {
  if (!A.square()) return false;
  for (index_t r = 0; r < A.nrows(); ++r)
    for (auto c : A.row_cols(r))
      if (!A.has_entry(c, r)) return false;
  return true;
}

/// Adds explicit zero diagonal entries where missing.
inline CsrMatrix insert_missing_diagonal(const CsrMatrix& A) {
  if (!A.square()) throw std::invalid_argument("insert_missing_diagonal requires a square matrix");
  auto t = A.triplets();
  for (index_t r = 0; r < A.nrows(); ++r)
    if (!A.has_entry(r, r)) t.push_back({r, r, 0.0});
  return CsrMatrix::from_triplets(A.nrows(), A.ncols(), std::move(t));
}

struct ExtractUpperOptions {
  /// Also require A(i,j) == A(j,i) numerically.
  bool strict_values = false;
};

/// Upper triangle including the diagonal. Each output row stores its diagonal
/// entry first followed by the remaining columns ascending, which is the
/// layout the SymmSpMV kernel relies on; since the diagonal is the smallest
/// column of an upper-triangular row, the result stays canonical.
inline CsrMatrix extract_upper(const CsrMatrix& A, ExtractUpperOptions opt = {}) {
  if (!A.square()) throw std::invalid_argument("extract_upper requires a square matrix");
  const auto n = A.nrows();
  std::vector<offset_t> rp(static_cast<std::size_t>(n) + 1, 0);
  std::vector<index_t> col;
  std::vector<double> val;
  col.reserve(static_cast<std::size_t>((A.nnz() + n) / 2));
  val.reserve(col.capacity());
  for (index_t r = 0; r < n; ++r) {
    auto cols = A.row_cols(r);
    auto vals = A.row_vals(r);
    auto it = std::lower_bound(cols.begin(), cols.end(), r);
    if (it == cols.end() || *it != r)
      throw std::invalid_argument("missing diagonal entry in row " + std::to_string(r));
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto c = cols[i];
      if (!A.has_entry(c, r))
        throw std::invalid_argument("structurally asymmetric entry (" + std::to_string(r) + "," +
                                    std::to_string(c) + ")");
      if (opt.strict_values && c > r && A.at(c, r) != vals[i])
        throw std::invalid_argument("numerically asymmetric entry (" + std::to_string(r) + "," +
                                    std::to_string(c) + ")");
    }
    // cols ascending and the diagonal is the smallest upper column
    for (std::size_t i = static_cast<std::size_t>(it - cols.begin()); i < cols.size(); ++i) {
      col.push_back(cols[i]);
      val.push_back(vals[i]);
    }
    rp[static_cast<std::size_t>(r) + 1] = static_cast<offset_t>(col.size());
  }
  return CsrMatrix(n, n, std::move(rp), std::move(col), std::move(val));
}

/// Full symmetric matrix from an upper triangle (inverse of extract_upper).
inline CsrMatrix mirror_upper(const CsrMatrix& U) {
  if (!U.square()) throw std::invalid_argument("mirror_upper requires a square matrix");
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(2 * U.nnz()));
  for (index_t r = 0; r < U.nrows(); ++r) {
    auto cols = U.row_cols(r);
    auto vals = U.row_vals(r);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] < r) throw std::invalid_argument("mirror_upper: entry below the diagonal in row " + std::to_string(r));
      t.push_back({r, cols[i], vals[i]});
      if (cols[i] != r) t.push_back({cols[i], r, vals[i]});
    }
  }
  return CsrMatrix::from_triplets(U.nrows(), U.ncols(), std::move(t));
}

/// B[i][j] = A[inv(i)][inv(j)], canonical order restored.
inline CsrMatrix permute_symmetric(const CsrMatrix& A, const Permutation& P) {
  if (!A.square()) throw std::invalid_argument("permute_symmetric requires a square matrix");
  if (P.size() != A.nrows())
    throw std::invalid_argument("permutation size " + std::to_string(P.size()) +
                                " does not match matrix dimension " + std::to_string(A.nrows()));
  const auto n = A.nrows();
  const auto inv = P.inv();
  const auto perm = P.perm();
  std::vector<offset_t> rp(static_cast<std::size_t>(n) + 1, 0);
  for (index_t i = 0; i < n; ++i)
    rp[static_cast<std::size_t>(i) + 1] = rp[static_cast<std::size_t>(i)] + A.row_nnz(inv[static_cast<std::size_t>(i)]);
  std::vector<index_t> col(static_cast<std::size_t>(A.nnz()));
  std::vector<double> val(static_cast<std::size_t>(A.nnz()));
  std::vector<std::pair<index_t, double>> row;
  for (index_t i = 0; i < n; ++i) {
    const auto old = inv[static_cast<std::size_t>(i)];
    auto cols = A.row_cols(old);
    auto vals = A.row_vals(old);
    row.clear();
    for (std::size_t j = 0; j < cols.size(); ++j)
      row.emplace_back(perm[static_cast<std::size_t>(cols[j])], vals[j]);
    std::sort(row.begin(), row.end(), [](auto& a, auto& b) { return a.first < b.first; });
    auto base = static_cast<std::size_t>(rp[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < row.size(); ++j) {
      col[base + j] = row[j].first;
      val[base + j] = row[j].second;
    }
  }
  return CsrMatrix(n, n, std::move(rp), std::move(col), std::move(val));
}

/// max |i - col| over stored entries.
inline index_t bandwidth(const CsrMatrix& A) {
  index_t bw = 0;
  for (index_t r = 0; r < A.nrows(); ++r)
    for (auto c : A.row_cols(r)) bw = std::max(bw, static_cast<index_t>(std::abs(r - c)));
  return bw;
}

enum class StencilPattern { five_point, nine_point };

inline StencilPattern parse_stencil_pattern(const std::string& s) {
  const auto l = detail::lower(s);
  if (l == "5" || l == "5pt" || l == "5-point" || l == "five_point") return StencilPattern::five_point;
  if (l == "9" || l == "9pt" || l == "9-point" || l == "nine_point") return StencilPattern::nine_point;
  throw std::invalid_argument("unknown stencil pattern '" + s + "'");
}

/// Laplacian-like stencil on an nx*ny grid, row-major numbering, Dirichlet
/// boundary (connections leaving the grid are dropped).
inline CsrMatrix generate_stencil(index_t nx, index_t ny, StencilPattern pattern) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("stencil dimensions must be >= 1");
  const bool nine = pattern == StencilPattern::nine_point;
  const auto n = static_cast<offset_t>(nx) * ny;
  if (n > INT32_MAX) throw std::invalid_argument("stencil too large");
  std::vector<offset_t> rp(static_cast<std::size_t>(n) + 1, 0);
  std::vector<index_t> col;
  std::vector<double> val;
  col.reserve(static_cast<std::size_t>(n * (nine ? 9 : 5)));
  val.reserve(col.capacity());
  index_t row = 0;
  for (index_t y = 0; y < ny; ++y) {
    for (index_t x = 0; x < nx; ++x, ++row) {
      for (index_t dy = -1; dy <= 1; ++dy) {
        for (index_t dx = -1; dx <= 1; ++dx) {
          if (!nine && dx != 0 && dy != 0) continue;
          const auto xx = x + dx, yy = y + dy;
          if (xx < 0 || xx >= nx || yy < 0 || yy >= ny) continue;
          col.push_back(yy * nx + xx);
          val.push_back(dx == 0 && dy == 0 ? (nine ? 8.0 : 4.0) : -1.0);
        }
      }
      rp[static_cast<std::size_t>(row) + 1] = static_cast<offset_t>(col.size());
    }
  }
  return CsrMatrix(static_cast<index_t>(n), static_cast<index_t>(n), std::move(rp),
                   std::move(col), std::move(val));
}

}  // namespace race
