#pragma once

/// \file race/perfmodel.hpp
/// \brief Roofline model for CRS SpMV and upper-triangle SymmSpMV with
/// double-precision values and 32-bit indices.

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace race::perf {

/// Bytes per nonzero and per row assumed by the model.
inline constexpr double value_bytes = 8.0;
inline constexpr double index_bytes = 4.0;
/// SpMV per-row traffic: LHS write-allocate plus store (16) and rowPtr (4).
inline constexpr double spmv_row_bytes = 20.0;
/// SymmSpMV per-row traffic: rowPtr only (vectors are in the alpha term).
inline constexpr double symm_row_bytes = 4.0;

struct MachineModel {
  std::string name;
  double bs_load = 0.0;  ///< bytes/s, load-only
  double bs_copy = 0.0;  ///< bytes/s, copy

  void validate() const {
    if (!(bs_load > 0.0) || !(bs_copy > 0.0)) throw std::invalid_argument("machine bandwidths must be positive");
    if (bs_copy > bs_load) throw std::invalid_argument("copy bandwidth exceeds load bandwidth");
  }
};

/// Key-value file: `name = X`, `bs_load = GB/s`, `bs_copy = GB/s`; '#'
/// starts a comment.
inline MachineModel parse_machine_model(std::istream& in) {
  MachineModel m;
  std::string line;
  int lineno = 0;
  bool have_load = false, have_copy = false;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string{};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) eq = line.find(':');
    if (eq == std::string::npos) throw std::runtime_error("machine file line " + std::to_string(lineno) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    auto number = [&] {
      try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
      } catch (const std::exception&) {
        throw std::runtime_error("machine file line " + std::to_string(lineno) + ": bad number '" + value + "'");
      }
    };
    if (key == "name") {
      m.name = value;
    } else if (key == "bs_load" || key == "bsLoad" || key == "load") {
      m.bs_load = number() * 1e9;
      have_load = true;
    } else if (key == "bs_copy" || key == "bsCopy" || key == "copy") {
      m.bs_copy = number() * 1e9;
      have_copy = true;
    } else {
      throw std::runtime_error("machine file line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!have_load || !have_copy) throw std::runtime_error("machine file needs bs_load and bs_copy");
  m.validate();
  return m;
}

inline MachineModel load_machine_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open machine file " + path);
  return parse_machine_model(f);
}

enum class Provenance { optimal, measured, assumed };

inline const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::optimal: return "optimal";
    case Provenance::measured: return "measured";
    case Provenance::assumed: return "assumed";
  }
  return "?";
}

struct AlphaValue {
  double alpha = 0.0;
  Provenance provenance = Provenance::assumed;
  /// Set when a measured value fell below the optimal floor.
  bool below_optimal = false;

  /// Value raised to `floor` when below it.
  AlphaValue clamped(double floor) const {
    AlphaValue a = *this;
    if (a.alpha < floor) {
      a.alpha = floor;
      a.below_optimal = true;
    }
    return a;
  }
};

enum class Kernel { spmv, symmspmv };

inline double symm_nnzr(double nnzr) {
  if (!(nnzr >= 1.0)) throw std::invalid_argument("nnzr must be >= 1");
  return (nnzr - 1.0) / 2.0 + 1.0;
}

/// Bytes per nonzero of CRS SpMV.
inline double spmv_bytes_per_nnz(double nnzr, double alpha) {
  return value_bytes + index_bytes + value_bytes * alpha + spmv_row_bytes / nnzr;
}

/// Bytes per stored nonzero of SymmSpMV; x read and b read+written give 24
/// bytes per alpha unit.
inline double symmspmv_bytes_per_nnz(double nnzr, double alpha) {
  return value_bytes + index_bytes + 3.0 * value_bytes * alpha + symm_row_bytes / symm_nnzr(nnzr);
}

inline double intensity_spmv(double nnzr, double alpha) {
  if (!(nnzr > 0.0)) throw std::invalid_argument("nnzr must be positive");
  return 2.0 / spmv_bytes_per_nnz(nnzr, alpha);
}

inline double intensity_spmv(double nnzr, const AlphaValue& a) { return intensity_spmv(nnzr, a.alpha); }

inline double intensity_symmspmv(double nnzr, double alpha) { return 4.0 / symmspmv_bytes_per_nnz(nnzr, alpha); }

inline double intensity_symmspmv(double nnzr, const AlphaValue& a) { return intensity_symmspmv(nnzr, a.alpha); }

inline AlphaValue optimal_alpha(double nnzr, Kernel k) {
  const double v = k == Kernel::spmv ? 1.0 / nnzr : 1.0 / symm_nnzr(nnzr);
  return {v, Provenance::optimal, false};
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// flop/s bounds [I * bs_copy, I * bs_load].
inline Interval roofline(double intensity, const MachineModel& m) {
  return {intensity * m.bs_copy, intensity * m.bs_load};
}

/// Inverts the traffic model for a measured byte count per nonzero. Returns
/// the raw value; errors when it is negative. Use clamped() for a floor.
inline AlphaValue alpha_from_traffic(double bytes_per_nnz, double nnzr, Kernel k) {
  if (!(bytes_per_nnz >= value_bytes + index_bytes))
    throw std::invalid_argument("bytes per nonzero below the matrix-data minimum of 12");
  const double a = k == Kernel::spmv
                       ? (bytes_per_nnz - value_bytes - index_bytes - spmv_row_bytes / nnzr) / value_bytes
                       : (bytes_per_nnz - value_bytes - index_bytes - symm_row_bytes / symm_nnzr(nnzr)) /
                             (3.0 * value_bytes);
  // tolerate rounding right at the floor
  const double tol = 1e-12 * std::max(1.0, bytes_per_nnz);
  if (a < -tol)
    throw std::invalid_argument("measured traffic is below the alpha = 0 floor (inconsistent measurement)");
  AlphaValue out{std::max(a, 0.0), Provenance::measured, false};
  const auto opt = optimal_alpha(nnzr, k).alpha;
  if (out.alpha < opt) out.below_optimal = true;
  return out;
}

}  // namespace race::perf
