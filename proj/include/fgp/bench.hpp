#ifndef FGP_BENCH_HPP_
#define FGP_BENCH_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <new>
#include <optional>
#include <string>
#include <vector>

#include "fgp/basis.hpp"
#include "fgp/block.hpp"
#include "fgp/em.hpp"
#include "fgp/error.hpp"
#include "fgp/model.hpp"
#include "fgp/parallel.hpp"
#include "fgp/predict.hpp"
#include "fgp/sim.hpp"
#include "fgp/types.hpp"

namespace fgp {

/// How an FGP model is laid over a dataset.
struct StructureConfig {
  std::vector<int> basis_levels{2, 4, 8};              // 1-D centers per level
  std::vector<std::array<int, 2>> basis_levels_2d;     // 2-D grid per level
  bool use_basis = true;
  bool use_lattice = true;
  ProximityRule proximity = ProximityRule::Threshold;
  double threshold = 0.3;
  Trend trend = Trend::Constant;
  Index blocks = 1;
  /// 2-D lattice grid; 1-D lattices are built around the data locations.
  std::array<Index, 2> grid{0, 0};
};

/// 1-D: segments around `points` on [lo, hi]. 2-D: cfg.grid over [lo, hi]^2.
inline SpatialModel build_model(const StructureConfig &cfg, const Locations &points,
                                std::array<double, 2> lo, std::array<double, 2> hi,
                                double noise_var) {
  const int dim = static_cast<int>(points.cols());
  std::optional<Lattice> lattice;
  if (dim == 1) {
    std::vector<double> pts(points.data(), points.data() + points.rows());
    lattice = Lattice::around_points_1d(std::move(pts), lo[0], hi[0]);
  } else if (dim == 2) {
    if (cfg.grid[0] < 1 || cfg.grid[1] < 1) {
      throw ConfigError("structure.grid is required for 2-D data");
    }
    lattice = Lattice::grid_2d(lo, hi, cfg.grid[0], cfg.grid[1]);
  } else {
    throw DimensionMismatch("locations must be 1-D or 2-D");
  }
  std::optional<BisquareSet> basis;
  if (cfg.use_basis) {
    if (dim == 1) {
      basis = multiresolution_centers_1d(lo[0], hi[0], cfg.basis_levels);
    } else {
      if (cfg.basis_levels_2d.empty()) {
        throw ConfigError("structure.basis_levels_2d is required for 2-D data");
      }
      basis = multiresolution_centers_2d(*lattice, cfg.basis_levels_2d);
    }
  }
  SpatialModel::Options opt;
  opt.proximity = cfg.proximity;
  opt.threshold = cfg.threshold;
  opt.trend = cfg.trend;
  opt.noise_var = noise_var;
  opt.use_lattice = cfg.use_lattice;
  opt.blocks = cfg.blocks;
  return SpatialModel(std::move(*lattice), std::move(basis), opt);
}

struct ScenarioConfig {
  int dimension = 1;
  double lo = 0.0;
  double hi = 100.0;
  Index M = 450;                    // 1-D: equally spaced points including both ends
  std::array<Index, 2> grid{0, 0};  // 2-D: points at the cell centers of this grid
  double holdout_fraction = 0.1;
  double noise_var = 4.0;
  CovarianceSpec covariance{CovFamily::Exponential, 16.0, 10.0};
  int replicates = 50;
  std::uint64_t seed = 1;
  std::vector<std::string> methods{"EK", "MK", "FGP"};
  /// Score predictions against the held-out observations Z, or against the
  /// latent Y when false.
  bool score_observations = true;
  StructureConfig structure;
  EmConfig em;

  Index size() const { return dimension == 1 ? M : grid[0] * grid[1]; }
  Index holdout_count() const {
    return static_cast<Index>(std::llround(holdout_fraction * static_cast<double>(size())));
  }

  void validate() const {
    if (dimension != 1 && dimension != 2) {
      throw ConfigError("scenario.dimension must be 1 or 2");
    }
    if (!(hi > lo)) {
      throw ConfigError("scenario domain needs hi > lo");
    }
    if (dimension == 1 && M < 2) {
      throw ConfigError("scenario.M must be at least 2");
    }
    if (dimension == 2 && (grid[0] < 1 || grid[1] < 1)) {
      throw ConfigError("scenario.grid must be positive for 2-D scenarios");
    }
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
      throw ConfigError("scenario.holdout_fraction must lie in (0, 1)");
    }
    if (holdout_count() < 1 || holdout_count() >= size()) {
      throw ConfigError("holdout would be empty or cover every location");
    }
    if (!(noise_var > 0.0)) {
      throw ConfigError("scenario.noise_var must be positive");
    }
    if (replicates < 1) {
      throw ConfigError("scenario.replicates must be at least 1");
    }
    covariance.validate();
    for (const auto &m : methods) {
      if (m != "EK" && m != "MK" && m != "FGP" && m != "FRK" && m != "CAR") {
        throw ConfigError("unknown method '" + m + "' (expected EK, MK, FGP, FRK or CAR)");
      }
    }
    if (methods.empty()) {
      throw ConfigError("scenario.methods must not be empty");
    }
    em.validate();
  }
};

inline Locations scenario_locations(const ScenarioConfig &cfg) {
  if (cfg.dimension == 1) {
    Locations locs(cfg.M, 1);
    for (Index i = 0; i < cfg.M; ++i) {
      locs(i, 0) = cfg.lo + (cfg.hi - cfg.lo) * static_cast<double>(i) /
                                static_cast<double>(cfg.M - 1);
    }
    locs(cfg.M - 1, 0) = cfg.hi;
    return locs;
  }
  const Index nx = cfg.grid[0], ny = cfg.grid[1];
  Locations locs(nx * ny, 2);
  const double wx = (cfg.hi - cfg.lo) / static_cast<double>(nx);
  const double wy = (cfg.hi - cfg.lo) / static_cast<double>(ny);
  for (Index iy = 0; iy < ny; ++iy) {
    for (Index ix = 0; ix < nx; ++ix) {
      locs(iy * nx + ix, 0) = cfg.lo + (static_cast<double>(ix) + 0.5) * wx;
      locs(iy * nx + ix, 1) = cfg.lo + (static_cast<double>(iy) + 0.5) * wy;
    }
  }
  return locs;
}

/// One simulated replicate: all locations, the latent field, the noisy
/// data, and which locations are observed.
struct ScenarioData {
  Locations locations;
  Vector y;
  Vector z;
  std::vector<bool> observed;
  std::vector<Index> observed_idx;
  std::vector<Index> holdout_idx;
};

/// Replicate k uses the generator seeded with seed + k: the holdout set is
/// drawn first, then the field and the noise.
inline ScenarioData simulate_scenario(const ScenarioConfig &cfg, int replicate) {
  Rng rng(cfg.seed + static_cast<std::uint64_t>(replicate));
  ScenarioData d;
  d.locations = scenario_locations(cfg);
  const Index n = d.locations.rows();
  d.holdout_idx = sample_without_replacement(n, cfg.holdout_count(), rng);
  const SimulatedField field = simulate_gp(cfg.covariance, d.locations, cfg.noise_var, rng);
  d.y = field.y;
  d.z = field.z;
  d.observed.assign(static_cast<std::size_t>(n), true);
  for (const Index i : d.holdout_idx) {
    d.observed[i] = false;
  }
  for (Index i = 0; i < n; ++i) {
    if (d.observed[i]) {
      d.observed_idx.push_back(i);
    }
  }
  return d;
}

inline Locations select_rows(const Locations &locs, const std::vector<Index> &idx) {
  Locations out(static_cast<Index>(idx.size()), locs.cols());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.row(static_cast<Index>(k)) = locs.row(idx[k]);
  }
  return out;
}

inline Vector select_entries(const Vector &v, const std::vector<Index> &idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out[static_cast<Index>(k)] = v[idx[k]];
  }
  return out;
}

/// Fit the FGP variant named by `method` on the observed data and predict the
/// latent field at `pred`.
inline Vector fgp_predict(const StructureConfig &structure, const EmConfig &em,
                          const std::string &method, const Locations &all, const Locations &obs,
                          const Vector &z, const Locations &pred, std::array<double, 2> lo,
                          std::array<double, 2> hi, double noise_var) {
  StructureConfig cfg = structure;
  if (method == "FRK") {
    cfg.use_lattice = false;
  } else if (method == "CAR") {
    cfg.use_basis = false;
  }
  const SpatialModel model = build_model(cfg, all, lo, hi, noise_var);
  const FgpStructure st = model.structure(obs);
  const FitReport fit = fit_em(st, z, em);
  const FgpWorkspace ws(st, fit.params);
  PredictionRequest req;
  req.want_std = false;
  return predict(ws, fit.params.beta, z, model.design(pred), req).mean;
}

struct MethodResult {
  std::string name;
  std::vector<double> mspe; // per successful replicate
  double ave = 0.0;
  double std = 0.0;
  double rel_efficiency = std::numeric_limits<double>::quiet_NaN();
};

struct BenchResult {
  std::vector<MethodResult> methods;
  std::vector<int> failed_replicates;
  std::vector<std::string> failures; // one message per failed replicate
  int replicates = 0;
};

/// MSPE of every configured method on one replicate, in method order.
inline std::vector<double> run_replicate(const ScenarioConfig &cfg, int replicate) {
  const ScenarioData d = simulate_scenario(cfg, replicate);
  const Locations obs = select_rows(d.locations, d.observed_idx);
  const Locations hold = select_rows(d.locations, d.holdout_idx);
  const Vector z = select_entries(d.z, d.observed_idx);
  const Vector truth = select_entries(cfg.score_observations ? d.z : d.y, d.holdout_idx);
  const std::array<double, 2> lo{cfg.lo, cfg.lo}, hi{cfg.hi, cfg.hi};
  std::vector<double> out;
  for (const auto &m : cfg.methods) {
    Vector pred;
    if (m == "EK") {
      pred = krige(cfg.covariance, cfg.noise_var, obs, z, hold);
    } else if (m == "MK") {
      const ExponentialFit fit = fit_exponential_ml(obs, z, cfg.noise_var);
      const CovarianceSpec spec{CovFamily::Exponential, fit.sigma2, fit.phi};
      pred = krige(spec, cfg.noise_var, obs, z, hold);
    } else {
      pred = fgp_predict(cfg.structure, cfg.em, m, d.locations, obs, z, hold, lo, hi,
                         cfg.noise_var);
    }
    out.push_back(mspe(truth, pred));
  }
  return out;
}

/// Runs all replicates (concurrently when workers > 1) and aggregates in
/// replicate order, so the result does not depend on the worker count. A
/// replicate that fails for any method is excluded from every method.
inline BenchResult run_scenario(const ScenarioConfig &cfg, int workers = 1) {
  cfg.validate();
  const auto L = static_cast<std::size_t>(cfg.replicates);
  std::vector<std::vector<double>> per_rep(L);
  std::vector<std::string> errors(L);
  parallel_for(L, workers, [&](std::size_t k) {
    try {
      per_rep[k] = run_replicate(cfg, static_cast<int>(k));
    } catch (const std::bad_alloc &) {
      errors[k] = "out of memory";
    } catch (const std::exception &e) {
      errors[k] = e.what();
    }
  });

  BenchResult res;
  res.replicates = cfg.replicates;
  for (const auto &m : cfg.methods) {
    res.methods.push_back(MethodResult{m, {}, 0.0, 0.0});
  }
  for (std::size_t k = 0; k < L; ++k) {
    if (!errors[k].empty()) {
      res.failed_replicates.push_back(static_cast<int>(k));
      res.failures.push_back("replicate " + std::to_string(k) + ": " + errors[k]);
      continue;
    }
    for (std::size_t j = 0; j < res.methods.size(); ++j) {
      res.methods[j].mspe.push_back(per_rep[k][j]);
    }
  }
  double ek_ave = std::numeric_limits<double>::quiet_NaN();
  for (auto &m : res.methods) {
    const double n = static_cast<double>(m.mspe.size());
    if (m.mspe.empty()) {
      m.ave = m.std = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    double sum = 0.0;
    for (const double v : m.mspe) {
      sum += v;
    }
    m.ave = sum / n;
    double ss = 0.0;
    for (const double v : m.mspe) {
      ss += (v - m.ave) * (v - m.ave);
    }
    m.std = m.mspe.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    if (m.name == "EK") {
      ek_ave = m.ave;
    }
  }
  for (auto &m : res.methods) {
    m.rel_efficiency = ek_ave / m.ave;
  }
  return res;
}

} // namespace fgp

#endif // FGP_BENCH_HPP_
