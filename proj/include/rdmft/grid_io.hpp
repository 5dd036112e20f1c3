#pragma once

// Text serialization for grids, fiber samples, and direction statistics.
// All numbers are written with 17 significant digits and a '.' decimal
// separator, lines end with LF, and infinities appear as the literal "inf":
// identical data serializes to identical bytes on every platform, and every
// finite value round-trips exactly.  Files are written atomically (temp file
// plus rename) so readers never observe a half-written grid.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdmft/convexity.hpp"
#include "rdmft/geometry.hpp"

namespace rdmft {

/// Locale-independent, shortest-exact decimal form; "inf"/"-inf"/"nan" for
/// the non-finite values.
inline std::string format_value(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", x);
  return buffer;
}

inline double parse_value(const std::string& token) {
  if (token == "inf") return std::numeric_limits<double>::infinity();
  if (token == "-inf") return -std::numeric_limits<double>::infinity();
  if (token == "nan") return std::numeric_limits<double>::quiet_NaN();
  errno = 0;
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE) {
    throw std::runtime_error("parse_value: not a number: '" + token + "'");
  }
  return value;
}

/// Write content to path via a sibling temp file and an atomic rename.
inline void write_text_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  const std::filesystem::path temp = path.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot open for writing: " + temp.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      throw std::runtime_error("write failed: " + temp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    throw std::runtime_error("rename to " + path.string() +
                             " failed: " + ec.message());
  }
}

/// CSV payload of a functional grid: row-major over (g11, g12) with the
/// literal axis node values, so re-serializing a read grid reproduces the
/// file byte for byte.
inline std::string functional_grid_csv(const FunctionalGrid& grid) {
  std::string out = "g11,g12,value,finite_flag\n";
  for (int i = 0; i < grid.axis1().count; ++i) {
    for (int j = 0; j < grid.axis2().count; ++j) {
      out += format_value(grid.axis1().points[i]);
      out += ',';
      out += format_value(grid.axis2().points[j]);
      out += ',';
      out += format_value(grid.value_or_infinity(i, j));
      out += ',';
      out += grid.finite_at(i, j) ? '1' : '0';
      out += '\n';
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace detail

/// Parse a functional-grid CSV written by functional_grid_csv (or any
/// complete row-major rectangular lattice with the same four columns).
inline FunctionalGrid read_functional_grid_csv(std::istream& in,
                                               std::string units = "energy") {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("grid csv: empty input");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "g11,g12,value,finite_flag") {
    throw std::runtime_error("grid csv: unexpected header '" + line + "'");
  }

  std::vector<double> xs, ys, values;
  std::vector<char> flags;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != 4) {
      throw std::runtime_error("grid csv: malformed row '" + line + "'");
    }
    xs.push_back(parse_value(fields[0]));
    ys.push_back(parse_value(fields[1]));
    values.push_back(parse_value(fields[2]));
    if (fields[3] != "0" && fields[3] != "1") {
      throw std::runtime_error("grid csv: finite_flag must be 0 or 1");
    }
    flags.push_back(fields[3] == "1");
  }
  if (xs.empty()) {
    throw std::runtime_error("grid csv: no data rows");
  }

  std::size_t count2 = 1;
  while (count2 < xs.size() && xs[count2] == xs[0]) ++count2;
  if (count2 < 2 || xs.size() % count2 != 0) {
    throw std::runtime_error("grid csv: rows do not form a lattice");
  }
  const std::size_t count1 = xs.size() / count2;
  if (count1 < 2) {
    throw std::runtime_error("grid csv: need at least two rows per axis");
  }

  GridAxis axis1(xs.front(), xs.back(), static_cast<int>(count1));
  GridAxis axis2(ys.front(), ys[count2 - 1], static_cast<int>(count2));
  const double tol1 = 1e-6 * axis1.spacing();
  const double tol2 = 1e-6 * axis2.spacing();
  FunctionalGrid grid(axis1, axis2, std::move(units));
  for (std::size_t i = 0; i < count1; ++i) {
    for (std::size_t j = 0; j < count2; ++j) {
      const std::size_t row = i * count2 + j;
      if (std::abs(xs[row] - axis1.points[i]) > tol1 ||
          std::abs(ys[row] - axis2.points[j]) > tol2) {
        throw std::runtime_error("grid csv: row " + std::to_string(row + 2) +
                                 " is off the uniform lattice");
      }
      if (flags[row]) {
        grid.set(static_cast<int>(i), static_cast<int>(j), values[row]);
      } else {
        grid.set_infinite(static_cast<int>(i), static_cast<int>(j));
      }
    }
  }
  return grid;
}

inline FunctionalGrid read_functional_grid_csv(
    const std::filesystem::path& path, std::string units = "energy") {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open grid csv: " + path.string());
  }
  return read_functional_grid_csv(in, std::move(units));
}

/// CSV payload of a fiber sample (one row per retained state).
inline std::string fiber_sample_csv(const FiberSample& sample) {
  std::string out = "G11,G12,G13,purity,boundary\n";
  for (const auto& pt : sample.points) {
    out += format_value(pt.coords[0]);
    out += ',';
    out += format_value(pt.coords[1]);
    out += ',';
    out += format_value(pt.coords[2]);
    out += ',';
    out += format_value(pt.purity);
    out += ',';
    out += pt.boundary ? '1' : '0';
    out += '\n';
  }
  return out;
}

/// CSV payload of direction statistics (one row per direction, the
/// direction matrix spelled out through its upper triangle).
inline std::string direction_stats_csv(const DirectionStats& stats) {
  std::string out =
      "index,v00,v01,v02,v11,v12,v22,value,purity,pure,unique,converged,"
      "min_G11,min_G12,min_G13\n";
  for (std::size_t r = 0; r < stats.records.size(); ++r) {
    const auto& record = stats.records[r];
    out += std::to_string(r);
    for (const auto& [i, j] :
         {std::pair{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}) {
      out += ',';
      out += format_value(record.direction(i, j));
    }
    out += ',';
    out += format_value(record.value);
    out += ',';
    out += format_value(record.purity);
    out += ',';
    out += record.pure ? '1' : '0';
    out += ',';
    out += record.unique ? '1' : '0';
    out += ',';
    out += record.converged ? '1' : '0';
    for (int k = 0; k < 3; ++k) {
      out += ',';
      out += format_value(record.minimizer[k]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace rdmft
