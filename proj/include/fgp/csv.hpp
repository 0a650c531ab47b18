#ifndef FGP_CSV_HPP_
#define FGP_CSV_HPP_

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fgp/error.hpp"
#include "fgp/types.hpp"

namespace fgp {

/// 17 significant digits; nan and inf spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One row per location: id, coordinates, latent value (nan if unknown),
/// observation, and whether the observation is used.
struct DataTable {
  std::vector<long long> id;
  Locations locations;
  Vector y_true;
  Vector z;
  std::vector<bool> observed;

  Index size() const { return locations.rows(); }
  int dimension() const { return static_cast<int>(locations.cols()); }

  std::vector<Index> observed_rows() const {
    std::vector<Index> out;
    for (Index i = 0; i < size(); ++i) {
      if (observed[i]) {
        out.push_back(i);
      }
    }
    return out;
  }
};

namespace csv_detail {

inline std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

inline double parse_double(const std::string &s, const std::string &where) {
  if (s == "nan" || s == "NaN") {
    return std::nan("");
  }
  errno = 0;
  char *end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw DataError(where + ": cannot parse number '" + s + "'");
  }
  return v;
}

inline long long parse_int(const std::string &s, const std::string &where) {
  errno = 0;
  char *end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw DataError(where + ": cannot parse integer '" + s + "'");
  }
  return v;
}

/// Non-comment lines with their 1-based line numbers.
inline std::vector<std::pair<int, std::string>> read_lines(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open '" + path + "'");
  }
  std::vector<std::pair<int, std::string>> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') {
      continue;
    }
    out.emplace_back(number, line);
  }
  return out;
}

inline int coordinate_count(const std::vector<std::string> &header, const std::string &where) {
  if (header.size() >= 3 && header[1] == "coord1" && header[2] == "coord2") {
    return 2;
  }
  if (header.size() >= 2 && header[1] == "coord1") {
    return 1;
  }
  throw DataError(where + ": header must start with id,coord1[,coord2]");
}

} // namespace csv_detail

inline void write_data_csv(const std::string &path, const DataTable &t,
                           const std::vector<std::string> &comments = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write '" + path + "'");
  }
  for (const auto &c : comments) {
    out << "# " << c << '\n';
  }
  out << "id,coord1";
  if (t.dimension() == 2) {
    out << ",coord2";
  }
  out << ",y_true,z,observed\n";
  for (Index i = 0; i < t.size(); ++i) {
    out << t.id[i];
    for (int d = 0; d < t.dimension(); ++d) {
      out << ',' << format_double(t.locations(i, d));
    }
    out << ',' << format_double(t.y_true[i]) << ',' << format_double(t.z[i]) << ','
        << (t.observed[i] ? 1 : 0) << '\n';
  }
  if (!out) {
    throw IoError("error while writing '" + path + "'");
  }
}

inline DataTable read_data_csv(const std::string &path) {
  using namespace csv_detail;
  const auto lines = read_lines(path);
  if (lines.empty()) {
    throw DataError(path + ": no header line");
  }
  const auto header = split(lines[0].second);
  const std::string hwhere = path + ":" + std::to_string(lines[0].first);
  const int dim = coordinate_count(header, hwhere);
  const std::size_t cols = static_cast<std::size_t>(dim) + 4;
  if (header.size() != cols || header[cols - 3] != "y_true" || header[cols - 2] != "z" ||
      header[cols - 1] != "observed") {
    throw DataError(hwhere + ": expected header id,coord1" + std::string(dim == 2 ? ",coord2" : "") +
                    ",y_true,z,observed");
  }
  const Index n = static_cast<Index>(lines.size()) - 1;
  DataTable t;
  t.id.resize(static_cast<std::size_t>(n));
  t.locations.resize(n, dim);
  t.y_true.resize(n);
  t.z.resize(n);
  t.observed.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto &[number, line] = lines[static_cast<std::size_t>(i) + 1];
    const std::string where = path + ":" + std::to_string(number);
    const auto cells = split(line);
    if (cells.size() != cols) {
      throw DataError(where + ": expected " + std::to_string(cols) + " fields, found " +
                      std::to_string(cells.size()));
    }
    t.id[i] = parse_int(cells[0], where);
    for (int d = 0; d < dim; ++d) {
      t.locations(i, d) = parse_double(cells[1 + d], where);
    }
    t.y_true[i] = parse_double(cells[cols - 3], where);
    t.z[i] = parse_double(cells[cols - 2], where);
    const long long obs = parse_int(cells[cols - 1], where);
    if (obs != 0 && obs != 1) {
      throw DataError(where + ": observed must be 0 or 1");
    }
    t.observed[i] = obs == 1;
    if (t.observed[i] && !std::isfinite(t.z[i])) {
      throw DataError(where + ": observed value is not finite");
    }
  }
  return t;
}

/// Locations file: header id,coord1[,coord2] followed by any further columns,
/// which are ignored.
inline std::pair<std::vector<long long>, Locations> read_locations_csv(const std::string &path) {
  using namespace csv_detail;
  const auto lines = read_lines(path);
  if (lines.empty()) {
    throw DataError(path + ": no header line");
  }
  const auto header = split(lines[0].second);
  const int dim = coordinate_count(header, path + ":" + std::to_string(lines[0].first));
  const Index n = static_cast<Index>(lines.size()) - 1;
  std::vector<long long> ids(static_cast<std::size_t>(n));
  Locations locs(n, dim);
  for (Index i = 0; i < n; ++i) {
    const auto &[number, line] = lines[static_cast<std::size_t>(i) + 1];
    const std::string where = path + ":" + std::to_string(number);
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields");
    }
    ids[i] = parse_int(cells[0], where);
    for (int d = 0; d < dim; ++d) {
      locs(i, d) = parse_double(cells[1 + d], where);
    }
  }
  return {std::move(ids), std::move(locs)};
}

inline void write_predictions_csv(const std::string &path, const std::vector<long long> &ids,
                                  const Locations &locs, const Vector &mean, const Vector &std) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write '" + path + "'");
  }
  out << "id,coord1";
  if (locs.cols() == 2) {
    out << ",coord2";
  }
  out << ",mean";
  if (std.size() > 0) {
    out << ",std";
  }
  out << '\n';
  for (Index i = 0; i < locs.rows(); ++i) {
    out << ids[i];
    for (Index d = 0; d < locs.cols(); ++d) {
      out << ',' << format_double(locs(i, d));
    }
    out << ',' << format_double(mean[i]);
    if (std.size() > 0) {
      out << ',' << format_double(std[i]);
    }
    out << '\n';
  }
  if (!out) {
    throw IoError("error while writing '" + path + "'");
  }
}

} // namespace fgp

#endif // FGP_CSV_HPP_
