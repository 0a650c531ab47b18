#ifndef FGP_SIM_HPP_
#define FGP_SIM_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "fgp/error.hpp"
#include "fgp/linalg.hpp"
#include "fgp/nelder_mead.hpp"
#include "fgp/types.hpp"

namespace fgp {

/// All simulation randomness comes from this engine, seeded with one integer.
using Rng = std::mt19937_64;
inline constexpr const char *kRngName = "std::mt19937_64 with std::normal_distribution<double>";

enum class CovFamily { Exponential, Sinusoidal };

inline std::string to_string(CovFamily f) {
  return f == CovFamily::Exponential ? "exponential" : "sinusoidal";
}

struct CovarianceSpec {
  CovFamily family = CovFamily::Exponential;
  double sigma2 = 1.0;
  double phi = 1.0;

  void validate() const {
    if (!(sigma2 > 0.0) || !(phi > 0.0)) {
      throw ConfigError("covariance sigma2 and phi must be positive");
    }
  }
};

/// sigma^2 exp(-h/phi), or sigma^2 sin(h/phi) phi/h with value sigma^2 at 0.
inline double cov_eval(const CovarianceSpec &spec, double h) {
  if (h < 0.0) {
    throw DataError("distance must be nonnegative");
  }
  const double x = h / spec.phi;
  if (spec.family == CovFamily::Exponential) {
    return spec.sigma2 * std::exp(-x);
  }
  if (x < 1e-8) {
    return spec.sigma2 * (1.0 - x * x / 6.0);
  }
  return spec.sigma2 * std::sin(x) / x;
}

inline Matrix distance_matrix(const Locations &a, const Locations &b) {
  if (a.cols() != b.cols()) {
    throw DimensionMismatch("location sets have different dimensions");
  }
  Matrix d(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      d(i, j) = (a.row(i) - b.row(j)).norm();
    }
  }
  return d;
}

inline Matrix covariance_matrix(const CovarianceSpec &spec, const Matrix &dist) {
  return dist.unaryExpr([&](double h) { return cov_eval(spec, h); });
}

inline constexpr Index kMaxSimulationSize = 20000;

struct SimulatedField {
  Vector y;
  Vector z;
};

/// Y ~ N(0, C) by dense Cholesky (diagonal jitter 1e-10 sigma^2, raised
/// tenfold up to 1e-6 sigma^2 if the factorization still fails), then
/// Z = Y + N(0, sigma2_eps). Draws n normals for Y, then n for the noise.
inline SimulatedField simulate_gp(const CovarianceSpec &spec, const Locations &locations,
                                  double sigma2_eps, Rng &rng) {
  spec.validate();
  const Index n = locations.rows();
  if (n > kMaxSimulationSize) {
    throw SimulationTooLarge("dense simulation is limited to " +
                             std::to_string(kMaxSimulationSize) + " locations");
  }
  if (spec.family == CovFamily::Sinusoidal && locations.cols() != 1) {
    throw DataError("the sinusoidal covariance is only valid in one dimension");
  }
  if (sigma2_eps < 0.0) {
    throw DataError("noise variance must be nonnegative");
  }
  const Matrix c = covariance_matrix(spec, distance_matrix(locations, locations));
  Eigen::LLT<Matrix> llt;
  for (double jitter = 1e-10;; jitter *= 10.0) {
    Matrix cj = c;
    cj.diagonal().array() += jitter * spec.sigma2;
    llt.compute(cj);
    if (llt.info() == Eigen::Success) {
      break;
    }
    if (jitter >= 1e-6) {
      throw NotPositiveDefinite(-1);
    }
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector w(n);
  for (Index i = 0; i < n; ++i) {
    w[i] = normal(rng);
  }
  SimulatedField out;
  out.y = llt.matrixL() * w;
  out.z = out.y;
  const double sd = std::sqrt(sigma2_eps);
  for (Index i = 0; i < n; ++i) {
    out.z[i] += sd * normal(rng);
  }
  return out;
}

inline SimulatedField simulate_gp(const CovarianceSpec &spec, const Locations &locations,
                                  double sigma2_eps, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_gp(spec, locations, sigma2_eps, rng);
}

/// k distinct indices from [0, n), ascending (partial Fisher-Yates).
inline std::vector<Index> sample_without_replacement(Index n, Index k, Rng &rng) {
  if (k < 0 || k > n) {
    throw DataError("cannot draw " + std::to_string(k) + " of " + std::to_string(n));
  }
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < k; ++i) {
    std::uniform_int_distribution<Index> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<Index> out(pool.begin(), pool.begin() + k);
  std::sort(out.begin(), out.end());
  return out;
}

/// Mean squared difference over the holdout entries.
inline double mspe(const Vector &truth, const Vector &pred) {
  if (truth.size() != pred.size()) {
    throw DimensionMismatch("truth and predictions differ in length");
  }
  if (truth.size() == 0) {
    throw EmptyHoldout("MSPE over an empty holdout set");
  }
  return (truth - pred).squaredNorm() / static_cast<double>(truth.size());
}

/// Simple (mean 0) or constant-mean (GLS) kriging with a known covariance.
/// sigma2_eps = 0 interpolates the data.
inline Vector krige(const CovarianceSpec &spec, double sigma2_eps, const Locations &obs,
                    const Vector &z, const Locations &pred, bool constant_mean = true) {
  if (z.size() != obs.rows()) {
    throw DimensionMismatch("Z must have one value per observed location");
  }
  Matrix c = covariance_matrix(spec, distance_matrix(obs, obs));
  c.diagonal().array() += sigma2_eps;
  const linalg::DenseCholesky chol(c);
  double beta = 0.0;
  if (constant_mean) {
    const Vector ones = Vector::Ones(obs.rows());
    const Vector ci1 = chol.solve(ones);
    beta = ci1.dot(z) / ci1.dot(ones);
  }
  const Vector w = chol.solve(Vector(z.array() - beta));
  const Matrix c0 = covariance_matrix(spec, distance_matrix(pred, obs));
  return (c0 * w).array() + beta;
}

struct ExponentialFit {
  double sigma2 = 0.0;
  double phi = 0.0;
  double beta = 0.0;
  double neg_log_likelihood = 0.0;
  bool at_bound = false;
  bool converged = false;
};

/// Maximum likelihood for the exponential covariance over (log sigma^2,
/// log phi) with sigma2_eps held fixed and a GLS-profiled constant mean.
inline ExponentialFit fit_exponential_ml(const Locations &obs, const Vector &z, double sigma2_eps,
                                         bool constant_mean = true) {
  const Index n = obs.rows();
  if (n < 10) {
    throw DataError("exponential ML needs at least 10 observations");
  }
  if (z.size() != n) {
    throw DimensionMismatch("Z must have one value per observed location");
  }
  const Matrix dist = distance_matrix(obs, obs);
  const double extent = dist.maxCoeff();
  const double v = (z.array() - z.mean()).square().sum() / static_cast<double>(n - 1);
  if (!(extent > 0.0) || !(v > 0.0)) {
    throw DegenerateData("locations or observations are degenerate");
  }
  const Vector ones = Vector::Ones(n);

  auto profile = [&](double sigma2, double phi, double *beta_out) {
    Matrix c = (-dist.array() / phi).exp() * sigma2;
    c.diagonal().array() += sigma2_eps;
    Eigen::LLT<Matrix> llt(c);
    if (llt.info() != Eigen::Success) {
      return std::numeric_limits<double>::infinity();
    }
    double beta = 0.0;
    if (constant_mean) {
      const Vector ci1 = llt.solve(ones);
      beta = ci1.dot(z) / ci1.dot(ones);
    }
    const Vector resid = z.array() - beta;
    const Vector half = llt.matrixL().solve(resid);
    const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    if (beta_out) {
      *beta_out = beta;
    }
    return 0.5 * (half.squaredNorm() + logdet + static_cast<double>(n) * 1.83787706640934548356);
  };

  Vector lo(2), hi(2), x0(2);
  lo << std::log(1e-3 * v), std::log(1e-3 * extent);
  hi << std::log(1e2 * v), std::log(10.0 * extent);
  x0 << std::log(std::max(v - sigma2_eps, 0.1 * v)), std::log(0.1 * extent);
  auto f = [&](const Vector &x) { return profile(std::exp(x[0]), std::exp(x[1]), nullptr); };
  NelderMeadOptions opt;
  opt.max_evals = 400;
  opt.step = Vector::Constant(2, 0.5);
  NelderMeadResult res = nelder_mead(f, x0, lo, hi, opt);
  opt.step = Vector::Constant(2, 0.05);
  const NelderMeadResult again = nelder_mead(f, res.x, lo, hi, opt);
  if (again.value <= res.value) {
    res = again;
  }

  ExponentialFit out;
  out.sigma2 = std::exp(res.x[0]);
  out.phi = std::exp(res.x[1]);
  out.neg_log_likelihood = profile(out.sigma2, out.phi, &out.beta);
  out.converged = res.converged;
  for (Index k = 0; k < 2; ++k) {
    if (res.x[k] - lo[k] < 1e-3 || hi[k] - res.x[k] < 1e-3) {
      out.at_bound = true;
    }
  }
  return out;
}

} // namespace fgp

#endif // FGP_SIM_HPP_
