#ifndef FGP_CAR_HPP_
#define FGP_CAR_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "fgp/basis.hpp"
#include "fgp/error.hpp"
#include "fgp/types.hpp"

namespace fgp {

/// 0/1 proximity with H_ij = 1 iff 0 < |s_i - s_j| <= d.
inline SparseMatrix proximity_threshold(const Locations &locations, double d) {
  if (!(d > 0.0)) {
    throw DataError("proximity threshold must be positive");
  }
  const Index n = locations.rows();
  // Sweep along the first coordinate; only pairs within d on that axis can
  // be within d overall.
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return locations(a, 0) < locations(b, 0);
  });
  std::vector<Triplet> entries;
  for (Index a = 0; a < n; ++a) {
    const Index i = order[a];
    for (Index b = a + 1; b < n; ++b) {
      const Index j = order[b];
      if (locations(j, 0) - locations(i, 0) > d) {
        break;
      }
      if ((locations.row(i) - locations.row(j)).norm() <= d) {
        entries.emplace_back(i, j, 1.0);
        entries.emplace_back(j, i, 1.0);
      }
    }
  }
  SparseMatrix h(n, n);
  h.setFromTriplets(entries.begin(), entries.end());
  return h;
}

/// 0/1 adjacency of the lattice graph: left/right in 1-D, rook in 2-D.
inline SparseMatrix proximity_first_order(const Lattice &lattice) {
  std::vector<Triplet> entries;
  for (const auto &[i, j] : lattice.first_order_edges()) {
    entries.emplace_back(i, j, 1.0);
    entries.emplace_back(j, i, 1.0);
  }
  SparseMatrix h(lattice.size(), lattice.size());
  h.setFromTriplets(entries.begin(), entries.end());
  return h;
}

/// Admissible open interval (1/lambda_min, 1/lambda_max) for gamma.
struct GammaBounds {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double gamma) const { return gamma > lo && gamma < hi; }
  double margin() const { return 1e-6 * (hi - lo); }
  /// Closed box used by optimizers.
  double box_lo() const { return lo + margin(); }
  double box_hi() const { return hi - margin(); }
  double midpoint() const { return 0.5 * (box_lo() + box_hi()); }
};

namespace detail {

inline double max_row_abs_sum(const SparseMatrix &h) {
  Vector sums = Vector::Zero(h.rows());
  for (Index k = 0; k < h.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(h, k); it; ++it) {
      sums[it.row()] += std::abs(it.value());
    }
  }
  return sums.size() == 0 ? 0.0 : sums.maxCoeff();
}

// Extreme eigenvalues of a symmetric sparse matrix by the Lanczos recurrence
// without reorthogonalization (extreme Ritz values are unaffected by the
// resulting ghost copies). Deterministic start vector.
inline std::pair<double, double> lanczos_extremes(const SparseMatrix &h, double rel_tol,
                                                  Index max_steps) {
  const Index n = h.rows();
  Vector v(n);
  for (Index i = 0; i < n; ++i) {
    v[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + 0.3);
  }
  v.normalize();
  Vector v_prev = Vector::Zero(n);
  std::vector<double> alpha, beta;
  double beta_prev = 0.0;
  double lmin = 0.0, lmax = 0.0;
  double last_min = 0.0, last_max = 0.0;
  const Index steps = std::min(max_steps, n);
  for (Index k = 0; k < steps; ++k) {
    Vector w = h * v - beta_prev * v_prev;
    const double a = w.dot(v);
    w -= a * v;
    alpha.push_back(a);
    const double b = w.norm();
    const bool last = (k + 1 == steps) || b < 1e-14;
    if ((k + 1) % 25 == 0 || last) {
      const Index m = static_cast<Index>(alpha.size());
      Vector diag = Eigen::Map<Vector>(alpha.data(), m);
      Vector sub = m > 1 ? Vector(Eigen::Map<Vector>(beta.data(), m - 1)) : Vector();
      Eigen::SelfAdjointEigenSolver<Matrix> tri;
      tri.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
      lmin = tri.eigenvalues()[0];
      lmax = tri.eigenvalues()[m - 1];
      const double scale = std::max(std::abs(lmin), std::abs(lmax));
      if (k >= 49 && std::abs(lmin - last_min) <= rel_tol * scale &&
          std::abs(lmax - last_max) <= rel_tol * scale) {
        break;
      }
      last_min = lmin;
      last_max = lmax;
    }
    if (last) {
      break;
    }
    beta.push_back(b);
    v_prev = v;
    v = w / b;
    beta_prev = b;
  }
  return {lmin, lmax};
}

} // namespace detail

/// Matrices up to this size get an exact dense eigendecomposition.
inline constexpr Index kDenseEigenLimit = 1000;

/// Reciprocals of the extreme eigenvalues of a symmetric H.
///
/// Exact for M <= kDenseEigenLimit. Larger graphs use a Lanczos estimate
/// (relative tolerance 1e-8) clipped to the Gershgorin bound; the final
/// word on admissibility at scale is the precision factorization itself.
inline GammaBounds gamma_bounds(const SparseMatrix &h) {
  if (h.nonZeros() == 0 || detail::max_row_abs_sum(h) == 0.0) {
    throw ZeroMatrix();
  }
  double lmin = 0.0, lmax = 0.0;
  if (h.rows() <= kDenseEigenLimit) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Matrix(h), Eigen::EigenvaluesOnly);
    lmin = eig.eigenvalues()[0];
    lmax = eig.eigenvalues()[h.rows() - 1];
  } else {
    std::tie(lmin, lmax) = detail::lanczos_extremes(h, 1e-8, 3000);
    const double gersh = detail::max_row_abs_sum(h);
    lmin = std::max(lmin, -gersh);
    lmax = std::min(lmax, gersh);
  }
  if (!(lmin < 0.0) || !(lmax > 0.0)) {
    throw ZeroMatrix();
  }
  return {1.0 / lmin, 1.0 / lmax};
}

/// Closed-form bounds for the first-order graph of a full lattice: a path of
/// m nodes has extreme eigenvalues +-2cos(pi/(m+1)); a rook grid is the
/// Cartesian product of two paths.
inline GammaBounds gamma_bounds_first_order(const Lattice &lattice) {
  if (!lattice.is_full_grid()) {
    return gamma_bounds(proximity_first_order(lattice));
  }
  const auto shape = lattice.grid_shape();
  const double pi = 3.14159265358979323846;
  auto path = [&](Index m) { return m > 1 ? 2.0 * std::cos(pi / static_cast<double>(m + 1)) : 0.0; };
  const double lmax = lattice.dimension() == 1 ? path(shape[0]) : path(shape[0]) + path(shape[1]);
  if (lmax == 0.0) {
    throw ZeroMatrix();
  }
  return {-1.0 / lmax, 1.0 / lmax};
}

/// Fixed part of a CAR model: proximity H, conditional-variance weights
/// Delta, and the admissible gamma interval. An H without edges is legal; the
/// precision then reduces to Delta^{-1} / tau^2 for any gamma.
class CarStructure {
public:
  CarStructure() = default;

  static CarStructure make(SparseMatrix h, Vector delta = Vector(),
                           std::optional<GammaBounds> known_bounds = std::nullopt) {
    CarStructure car;
    const Index m = h.rows();
    if (h.cols() != m) {
      throw DimensionMismatch("proximity matrix must be square");
    }
    if (delta.size() == 0) {
      delta = Vector::Ones(m);
    }
    if (delta.size() != m) {
      throw DimensionMismatch("Delta length must equal the number of cells");
    }
    if (!(delta.array() > 0.0).all()) {
      throw DataError("Delta entries must be positive");
    }
    h.prune(0.0);
    h.makeCompressed();
    // Delta^{-1} H must be symmetric.
    SparseMatrix scaled = delta.cwiseInverse().asDiagonal() * h;
    SparseMatrix diff = scaled - SparseMatrix(scaled.transpose());
    for (Index k = 0; k < diff.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
        if (std::abs(it.value()) > 1e-12 * std::max(1.0, std::abs(scaled.coeff(it.row(), it.col())))) {
          throw AsymmetricPrecision("h_ij / Delta_i != h_ji / Delta_j at (" +
                                    std::to_string(it.row()) + ", " +
                                    std::to_string(it.col()) + ")");
        }
      }
    }
    for (Index k = 0; k < h.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(h, k); it; ++it) {
        if (it.row() == it.col()) {
          throw DataError("proximity matrix must have a zero diagonal");
        }
      }
    }
    car.h_ = std::move(h);
    car.delta_ = std::move(delta);
    if (car.h_.nonZeros() > 0) {
      if (known_bounds) {
        car.bounds_ = *known_bounds;
      } else {
        // Eigenvalues of H equal those of Delta^{-1/2} H Delta^{1/2}, which is
        // symmetric under the invariant above.
        const Vector s = car.delta_.cwiseSqrt();
        SparseMatrix sym = s.cwiseInverse().asDiagonal() * car.h_ * s.asDiagonal();
        car.bounds_ = gamma_bounds(sym);
      }
    }
    return car;
  }

  Index size() const { return h_.rows(); }
  const SparseMatrix &proximity() const { return h_; }
  const Vector &delta() const { return delta_; }
  bool has_edges() const { return bounds_.has_value(); }
  /// Empty when H has no edges.
  const std::optional<GammaBounds> &bounds() const { return bounds_; }

  bool admissible(double gamma) const { return !bounds_ || bounds_->contains(gamma); }

private:
  SparseMatrix h_;
  Vector delta_;
  std::optional<GammaBounds> bounds_;
};

/// Q = Delta^{-1} (I - gamma H) / tau^2, with the sparsity of H plus the
/// diagonal (entries kept even when gamma = 0 so the pattern is stable).
inline SparseMatrix car_precision(const CarStructure &car, double tau2, double gamma);

namespace detail {

// Assembly without the admissibility check.
inline SparseMatrix assemble_car_precision(const CarStructure &car, double tau2, double gamma) {
  const Index m = car.size();
  const SparseMatrix &h = car.proximity();
  const Vector &delta = car.delta();
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(h.nonZeros() + m));
  for (Index i = 0; i < m; ++i) {
    entries.emplace_back(i, i, 1.0 / (tau2 * delta[i]));
  }
  for (Index k = 0; k < h.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(h, k); it; ++it) {
      entries.emplace_back(it.row(), it.col(),
                           -gamma * it.value() / (tau2 * delta[it.row()]));
    }
  }
  SparseMatrix q(m, m);
  q.setFromTriplets(entries.begin(), entries.end());
  return q;
}

} // namespace detail

inline SparseMatrix car_precision(const CarStructure &car, double tau2, double gamma) {
  if (!(tau2 > 0.0) || !std::isfinite(tau2)) {
    throw DataError("tau^2 must be positive and finite");
  }
  if (!car.admissible(gamma)) {
    throw GammaOutOfRange(gamma, car.bounds()->lo, car.bounds()->hi);
  }
  return detail::assemble_car_precision(car, tau2, gamma);
}

} // namespace fgp

#endif // FGP_CAR_HPP_
