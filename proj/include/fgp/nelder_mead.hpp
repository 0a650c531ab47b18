#ifndef FGP_NELDER_MEAD_HPP_
#define FGP_NELDER_MEAD_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "fgp/error.hpp"
#include "fgp/types.hpp"

namespace fgp {

struct NelderMeadOptions {
  int max_evals = 200;
  double ftol = 1e-10; // absolute + relative spread of simplex values
  double xtol = 1e-8;  // simplex diameter, per coordinate
  Vector step;         // initial simplex edge per coordinate; defaults to 10% of the box
};

struct NelderMeadResult {
  Vector x;
  double value = std::numeric_limits<double>::infinity();
  int evals = 0;
  bool converged = false;
};

/// Nelder-Mead restricted to the box [lo, hi]: every trial point is projected
/// onto the box. Non-finite objective values count as +infinity. The start
/// point is always evaluated, so the result is never worse than x0.
inline NelderMeadResult nelder_mead(const std::function<double(const Vector &)> &f, Vector x0,
                                    const Vector &lo, const Vector &hi,
                                    const NelderMeadOptions &opt = {}) {
  const Index d = x0.size();
  if (lo.size() != d || hi.size() != d) {
    throw DimensionMismatch("nelder_mead: bounds must match the start point");
  }
  if (!(lo.array() <= hi.array()).all()) {
    throw DataError("nelder_mead: lower bound exceeds upper bound");
  }
  NelderMeadResult res;
  auto project = [&](Vector x) { return Vector(x.cwiseMax(lo).cwiseMin(hi)); };
  auto eval = [&](const Vector &x) {
    ++res.evals;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  x0 = project(std::move(x0));
  if (d == 0) {
    res.x = x0;
    res.value = eval(x0);
    res.converged = true;
    return res;
  }

  Vector step = opt.step.size() == d ? opt.step : Vector(0.1 * (hi - lo));
  std::vector<Vector> pts{x0};
  std::vector<double> vals{eval(x0)};
  for (Index k = 0; k < d; ++k) {
    Vector x = x0;
    double h = step[k] == 0.0 ? 1e-4 : step[k];
    // Step away from a bound we are sitting on.
    if (x[k] + h > hi[k]) {
      h = -h;
    }
    x[k] += h;
    x = project(x);
    if (x[k] == x0[k]) {
      x[k] = x0[k] - h;
      x = project(x);
    }
    pts.push_back(x);
    vals.push_back(eval(x));
  }

  std::vector<std::size_t> order(pts.size());
  while (true) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front(), worst = order.back(),
                      second = order[order.size() - 2];

    double diameter = 0.0;
    for (const auto &p : pts) {
      diameter = std::max(diameter, (p - pts[best]).cwiseAbs().maxCoeff());
    }
    const double spread = vals[worst] - vals[best];
    if (std::isfinite(spread) && spread <= opt.ftol * (1.0 + std::abs(vals[best])) &&
        diameter <= opt.xtol) {
      res.converged = true;
      break;
    }
    if (diameter == 0.0 || res.evals >= opt.max_evals) {
      res.converged = diameter == 0.0;
      break;
    }

    Vector centroid = Vector::Zero(d);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != worst) {
        centroid += pts[i];
      }
    }
    centroid /= static_cast<double>(d);

    const Vector xr = project(centroid + (centroid - pts[worst]));
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const Vector xe = project(centroid + 2.0 * (centroid - pts[worst]));
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const Vector xc = outside ? project(centroid + 0.5 * (xr - centroid))
                              : project(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i != best) {
        pts[i] = project(pts[best] + 0.5 * (pts[i] - pts[best]));
        vals[i] = eval(pts[i]);
      }
    }
  }

  const auto it = std::min_element(vals.begin(), vals.end());
  // Ties keep the start point, which sits at index 0.
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.value = *it;
  return res;
}

} // namespace fgp

#endif // FGP_NELDER_MEAD_HPP_
