#ifndef FGP_BASIS_HPP_
#define FGP_BASIS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fgp/error.hpp"
#include "fgp/types.hpp"

namespace fgp {

/// Compactly supported bisquare {1 - (d/radius)^2}^2 for d < radius, else 0.
inline double bisquare(double distance, double radius) {
  if (distance >= radius) {
    return 0.0;
  }
  const double u = distance / radius;
  const double w = 1.0 - u * u;
  return w * w;
}

/// Multi-resolution set of bisquare basis functions.
struct BisquareSet {
  Matrix centers;               // r x d
  std::vector<double> radii;    // one per resolution level
  std::vector<int> level_of;    // per center, levels numbered from 1

  Index size() const { return centers.rows(); }
  int dimension() const { return static_cast<int>(centers.cols()); }
  double radius_of(Index j) const { return radii[level_of[j] - 1]; }

  void validate() const {
    if (static_cast<Index>(level_of.size()) != centers.rows()) {
      throw DimensionMismatch("bisquare level map does not match centers");
    }
    for (double r : radii) {
      if (!(r > 0.0) || !std::isfinite(r)) {
        throw DataError("bisquare radius must be positive and finite");
      }
    }
    for (int level : level_of) {
      if (level < 1 || level > static_cast<int>(radii.size())) {
        throw DataError("bisquare level out of range");
      }
    }
    if (!centers.allFinite()) {
      throw DataError("bisquare centers must be finite");
    }
  }
};

/// Evaluates every basis function at every location (n x r, sparse).
inline SparseMatrix bisquare_matrix(const BisquareSet &bs, const Locations &locations) {
  const Index n = locations.rows();
  const Index r = bs.size();
  SparseMatrix out(n, r);
  if (r == 0 || n == 0) {
    return out;
  }
  if (bs.dimension() != locations.cols()) {
    throw DimensionMismatch("basis and location dimensions differ");
  }
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(n) * 8);
  for (Index j = 0; j < r; ++j) {
    const double radius = bs.radius_of(j);
    for (Index i = 0; i < n; ++i) {
      const double dist = (locations.row(i) - bs.centers.row(j)).norm();
      const double v = bisquare(dist, radius);
      if (v > 0.0) {
        entries.emplace_back(i, j, v);
      }
    }
  }
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

/// Equally spaced centers per level over [lo, hi]; level k with c centers
/// uses spacing (hi - lo) / c, centers at the midpoints of that partition and
/// radius 1.5 x spacing.
inline BisquareSet multiresolution_centers_1d(double lo, double hi,
                                              std::span<const int> counts) {
  if (!(hi > lo)) {
    throw EmptyDomain("basis domain [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "] is empty");
  }
  if (counts.empty()) {
    throw DataError("at least one resolution level is required");
  }
  BisquareSet bs;
  Index total = 0;
  for (int c : counts) {
    if (c < 1) {
      throw DataError("each resolution level needs at least one center");
    }
    total += c;
  }
  bs.centers.resize(total, 1);
  Index row = 0;
  for (std::size_t level = 0; level < counts.size(); ++level) {
    const double spacing = (hi - lo) / counts[level];
    bs.radii.push_back(1.5 * spacing);
    for (int k = 0; k < counts[level]; ++k) {
      bs.centers(row++, 0) = lo + (k + 0.5) * spacing;
      bs.level_of.push_back(static_cast<int>(level) + 1);
    }
  }
  return bs;
}

/// Non-overlapping cells hosting the graphical-model component.
///
/// A 1-D lattice is a sequence of segments [e_i, e_{i+1}]; a 2-D lattice is a
/// regular rectangular grid, optionally with inactive cells. Cells are
/// numbered in natural order (left to right; row-major for grids, x fastest).
/// A location on a shared boundary belongs to the lower-numbered cell.
class Lattice {
public:
  static Lattice segments(std::vector<double> edges) {
    if (edges.size() < 2) {
      throw EmptyDomain("a 1-D lattice needs at least one segment");
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (!(edges[i] > edges[i - 1])) {
        throw DataError("lattice edges must be strictly increasing");
      }
    }
    Lattice lat;
    lat.dim_ = 1;
    lat.edges_[0] = std::move(edges);
    const Index m = static_cast<Index>(lat.edges_[0].size()) - 1;
    lat.centers_.resize(m, 1);
    for (Index i = 0; i < m; ++i) {
      lat.centers_(i, 0) = 0.5 * (lat.edges_[0][i] + lat.edges_[0][i + 1]);
    }
    lat.grid_ = {m, 1};
    return lat;
  }

  static Lattice uniform_1d(double lo, double hi, Index m) {
    if (!(hi > lo) || m < 1) {
      throw EmptyDomain("uniform lattice needs hi > lo and at least one cell");
    }
    std::vector<double> edges(static_cast<std::size_t>(m) + 1);
    for (Index i = 0; i <= m; ++i) {
      edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m);
    }
    edges.back() = hi;
    return segments(std::move(edges));
  }

  /// Segments whose interior boundaries are midpoints between consecutive
  /// sorted points; the outer boundaries are lo and hi. Cell centers are the
  /// points themselves.
  static Lattice around_points_1d(std::vector<double> points, double lo, double hi) {
    if (points.empty()) {
      throw EmptyDomain("no points to build a lattice around");
    }
    std::sort(points.begin(), points.end());
    if (points.front() < lo || points.back() > hi) {
      throw DataError("points fall outside the lattice domain");
    }
    std::vector<double> edges;
    edges.reserve(points.size() + 1);
    edges.push_back(lo);
    for (std::size_t i = 1; i < points.size(); ++i) {
      edges.push_back(0.5 * (points[i - 1] + points[i]));
    }
    edges.push_back(hi);
    Lattice lat = segments(std::move(edges));
    for (std::size_t i = 0; i < points.size(); ++i) {
      lat.centers_(static_cast<Index>(i), 0) = points[i];
    }
    return lat;
  }

  static Lattice grid_2d(std::array<double, 2> lo, std::array<double, 2> hi,
                         Index nx, Index ny, std::vector<bool> active = {}) {
    if (nx < 1 || ny < 1 || !(hi[0] > lo[0]) || !(hi[1] > lo[1])) {
      throw EmptyDomain("2-D lattice needs positive extent and cell counts");
    }
    if (!active.empty() && static_cast<Index>(active.size()) != nx * ny) {
      throw DimensionMismatch("active mask must have nx * ny entries");
    }
    Lattice lat;
    lat.dim_ = 2;
    lat.grid_ = {nx, ny};
    for (int axis = 0; axis < 2; ++axis) {
      const Index cells = axis == 0 ? nx : ny;
      auto &e = lat.edges_[axis];
      e.resize(static_cast<std::size_t>(cells) + 1);
      for (Index i = 0; i <= cells; ++i) {
        e[i] = lo[axis] + (hi[axis] - lo[axis]) * static_cast<double>(i) /
                              static_cast<double>(cells);
      }
      e.back() = hi[axis];
    }
    lat.grid_to_cell_.assign(static_cast<std::size_t>(nx * ny), -1);
    std::vector<std::array<double, 2>> centers;
    for (Index iy = 0; iy < ny; ++iy) {
      for (Index ix = 0; ix < nx; ++ix) {
        const Index g = iy * nx + ix;
        if (!active.empty() && !active[g]) {
          continue;
        }
        lat.grid_to_cell_[g] = static_cast<Index>(centers.size());
        lat.cell_to_grid_.push_back(g);
        centers.push_back({0.5 * (lat.edges_[0][ix] + lat.edges_[0][ix + 1]),
                           0.5 * (lat.edges_[1][iy] + lat.edges_[1][iy + 1])});
      }
    }
    if (centers.empty()) {
      throw EmptyDomain("2-D lattice has no active cells");
    }
    lat.centers_.resize(static_cast<Index>(centers.size()), 2);
    for (std::size_t i = 0; i < centers.size(); ++i) {
      lat.centers_(static_cast<Index>(i), 0) = centers[i][0];
      lat.centers_(static_cast<Index>(i), 1) = centers[i][1];
    }
    return lat;
  }

  Index size() const { return centers_.rows(); }
  int dimension() const { return dim_; }
  const Matrix &centers() const { return centers_; }
  const std::vector<double> &edges(int axis = 0) const { return edges_[axis]; }
  std::array<Index, 2> grid_shape() const { return grid_; }
  bool is_full_grid() const { return dim_ == 1 || cell_to_grid_.size() == grid_to_cell_.size(); }

  std::array<double, 2> lower() const {
    return {edges_[0].front(), dim_ == 2 ? edges_[1].front() : 0.0};
  }
  std::array<double, 2> upper() const {
    return {edges_[0].back(), dim_ == 2 ? edges_[1].back() : 0.0};
  }

  /// Containing cell, or -1 when the location lies outside every active cell.
  Index cell_of(const Eigen::Ref<const Eigen::RowVectorXd> &loc) const {
    if (loc.size() != dim_) {
      throw DimensionMismatch("location dimension does not match lattice");
    }
    const Index ix = axis_index(0, loc[0]);
    if (ix < 0) {
      return -1;
    }
    if (dim_ == 1) {
      return ix;
    }
    const Index iy = axis_index(1, loc[1]);
    if (iy < 0) {
      return -1;
    }
    return grid_to_cell_[iy * grid_[0] + ix];
  }

  /// Throws LocationOutsideLattice naming the first offending row.
  std::vector<Index> cells_of(const Locations &locations) const {
    std::vector<Index> out(static_cast<std::size_t>(locations.rows()));
    for (Index i = 0; i < locations.rows(); ++i) {
      const Index c = cell_of(locations.row(i));
      if (c < 0) {
        throw LocationOutsideLattice(i);
      }
      out[i] = c;
    }
    return out;
  }

  /// Euclidean distance from a point to the closed cell (0 inside).
  double distance_to_cell(Index cell, const Eigen::Ref<const Eigen::RowVectorXd> &p) const {
    const Index g = dim_ == 1 ? cell : cell_to_grid_[cell];
    const Index ix = g % grid_[0];
    const Index iy = g / grid_[0];
    double d2 = 0.0;
    for (int axis = 0; axis < dim_; ++axis) {
      const Index k = axis == 0 ? ix : iy;
      const double lo = edges_[axis][k];
      const double hi = edges_[axis][k + 1];
      const double gap = p[axis] < lo ? lo - p[axis] : (p[axis] > hi ? p[axis] - hi : 0.0);
      d2 += gap * gap;
    }
    return std::sqrt(d2);
  }

  /// Edges of the first-order neighborhood graph (chain / rook), i < j.
  std::vector<std::pair<Index, Index>> first_order_edges() const {
    std::vector<std::pair<Index, Index>> out;
    if (dim_ == 1) {
      for (Index i = 0; i + 1 < size(); ++i) {
        out.emplace_back(i, i + 1);
      }
      return out;
    }
    const Index nx = grid_[0];
    const Index ny = grid_[1];
    for (Index iy = 0; iy < ny; ++iy) {
      for (Index ix = 0; ix < nx; ++ix) {
        const Index c = grid_to_cell_[iy * nx + ix];
        if (c < 0) {
          continue;
        }
        if (ix + 1 < nx) {
          const Index right = grid_to_cell_[iy * nx + ix + 1];
          if (right >= 0) {
            out.emplace_back(c, right);
          }
        }
        if (iy + 1 < ny) {
          const Index up = grid_to_cell_[(iy + 1) * nx + ix];
          if (up >= 0) {
            out.emplace_back(c, up);
          }
        }
      }
    }
    return out;
  }

private:
  Lattice() = default;

  Index axis_index(int axis, double x) const {
    const auto &e = edges_[axis];
    if (!(x >= e.front()) || !(x <= e.back())) {
      return -1;
    }
    // Smallest i with x <= e[i + 1]: boundary points go to the lower cell.
    const auto it = std::lower_bound(e.begin() + 1, e.end(), x);
    return static_cast<Index>(it - (e.begin() + 1));
  }

  int dim_ = 1;
  std::array<std::vector<double>, 2> edges_;
  std::array<Index, 2> grid_{0, 0};
  std::vector<Index> grid_to_cell_;
  std::vector<Index> cell_to_grid_;
  Matrix centers_;
};

/// Regular grid of centers per level over the lattice bounding box. Level k
/// with (cx, cy) centers uses the midpoints of a cx x cy partition and radius
/// 1.5 x the larger axis spacing. Centers whose support misses every active
/// cell are dropped.
inline BisquareSet multiresolution_centers_2d(const Lattice &lattice,
                                              std::span<const std::array<int, 2>> counts) {
  if (lattice.dimension() != 2) {
    throw DimensionMismatch("2-D basis requires a 2-D lattice");
  }
  if (counts.empty()) {
    throw DataError("at least one resolution level is required");
  }
  const auto lo = lattice.lower();
  const auto hi = lattice.upper();
  std::vector<std::array<double, 2>> kept;
  BisquareSet bs;
  for (std::size_t level = 0; level < counts.size(); ++level) {
    const int cx = counts[level][0];
    const int cy = counts[level][1];
    if (cx < 1 || cy < 1) {
      throw DataError("each resolution level needs at least one center per axis");
    }
    const double sx = (hi[0] - lo[0]) / cx;
    const double sy = (hi[1] - lo[1]) / cy;
    const double radius = 1.5 * std::max(sx, sy);
    bs.radii.push_back(radius);
    for (int iy = 0; iy < cy; ++iy) {
      for (int ix = 0; ix < cx; ++ix) {
        Eigen::RowVector2d c(lo[0] + (ix + 0.5) * sx, lo[1] + (iy + 0.5) * sy);
        bool touches = lattice.is_full_grid();
        for (Index cell = 0; !touches && cell < lattice.size(); ++cell) {
          touches = lattice.distance_to_cell(cell, c) < radius;
        }
        if (touches) {
          kept.push_back({c[0], c[1]});
          bs.level_of.push_back(static_cast<int>(level) + 1);
        }
      }
    }
  }
  bs.centers.resize(static_cast<Index>(kept.size()), 2);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    bs.centers(static_cast<Index>(i), 0) = kept[i][0];
    bs.centers(static_cast<Index>(i), 1) = kept[i][1];
  }
  return bs;
}

/// n x M indicator: row i has a single 1 in the column of its cell.
inline SparseMatrix incidence_matrix(const Lattice &lattice, const Locations &locations) {
  const auto cells = lattice.cells_of(locations);
  SparseMatrix out(locations.rows(), lattice.size());
  std::vector<Triplet> entries;
  entries.reserve(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    entries.emplace_back(static_cast<Index>(i), cells[i], 1.0);
  }
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

} // namespace fgp

#endif // FGP_BASIS_HPP_
