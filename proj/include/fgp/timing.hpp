#ifndef FGP_TIMING_HPP_
#define FGP_TIMING_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <new>
#include <optional>
#include <random>
#include <vector>

#include "fgp/basis.hpp"
#include "fgp/block.hpp"
#include "fgp/car.hpp"
#include "fgp/error.hpp"
#include "fgp/likelihood.hpp"
#include "fgp/sim.hpp"
#include "fgp/types.hpp"

namespace fgp {

struct TimingConfig {
  std::vector<Index> sizes{10000, 100000, 400000};
  std::vector<Index> blocks{1, 8};
  double lo = 0.0;
  double hi = 2000.0;
  std::vector<int> basis_levels{16, 64, 256};
  double tau2 = 1.0;
  /// gamma as a fraction of the upper admissible bound.
  double gamma_fraction = 0.9;
  double noise_var = 1.0;
  int repeats = 1;
  std::uint64_t seed = 1;

  void validate() const {
    if (sizes.empty() || blocks.empty()) {
      throw ConfigError("timing.sizes and timing.blocks must not be empty");
    }
    if (!std::is_sorted(sizes.begin(), sizes.end()) || sizes.front() < 2) {
      throw ConfigError("timing.sizes must be ascending and at least 2");
    }
    for (const Index j : blocks) {
      if (j < 1) {
        throw ConfigError("timing.blocks entries must be positive");
      }
    }
    if (!(gamma_fraction > -1.0 && gamma_fraction < 1.0)) {
      throw ConfigError("timing.gamma_fraction must lie in (-1, 1)");
    }
    if (!(tau2 > 0.0) || !(noise_var > 0.0) || repeats < 1 || !(hi > lo)) {
      throw ConfigError("timing: tau2, noise_var, repeats and the domain must be positive");
    }
  }
};

struct TimingRow {
  Index M = 0;
  Index J = 1;
  double seconds = std::numeric_limits<double>::quiet_NaN();
  bool out_of_memory = false;
};

/// FGP structure on a uniform 1-D lattice with one observation per cell at
/// its center (A = I) and white-noise data.
struct TimingProblem {
  FgpStructure structure;
  FgpParams params;
  Vector z;
};

inline TimingProblem make_timing_problem(const TimingConfig &cfg, Index m) {
  const Lattice lattice = Lattice::uniform_1d(cfg.lo, cfg.hi, m);
  const Locations locs = lattice.centers();
  const BisquareSet basis = multiresolution_centers_1d(cfg.lo, cfg.hi, cfg.basis_levels);
  CarStructure car = CarStructure::make(proximity_first_order(lattice), Vector(),
                                        gamma_bounds_first_order(lattice));
  TimingProblem out;
  out.structure = FgpStructure::make(Matrix::Ones(m, 1), bisquare_matrix(basis, locs),
                                     incidence_matrix(lattice, locs), std::move(car),
                                     Vector::Constant(m, cfg.noise_var));
  out.params.beta = Vector::Zero(1);
  out.params.K = Matrix::Identity(basis.size(), basis.size());
  out.params.tau2 = cfg.tau2;
  out.params.gamma = cfg.gamma_fraction * out.structure.car().bounds()->hi;
  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  out.z.resize(m);
  for (Index i = 0; i < m; ++i) {
    out.z[i] = normal(rng);
  }
  return out;
}

/// Wall time of one likelihood evaluation (factorizations included, structure
/// construction excluded); the minimum over cfg.repeats runs. J = 1 uses the
/// unblocked path.
inline std::vector<TimingRow> timing_benchmark(const TimingConfig &cfg, int workers) {
  cfg.validate();
  std::vector<TimingRow> rows;
  for (const Index m : cfg.sizes) {
    std::optional<TimingProblem> prob;
    try {
      prob = make_timing_problem(cfg, m);
    } catch (const std::bad_alloc &) {
      for (const Index J : cfg.blocks) {
        rows.push_back({m, J, std::numeric_limits<double>::quiet_NaN(), true});
      }
      continue;
    }
    for (const Index J : cfg.blocks) {
      TimingRow row{m, J};
      try {
        std::optional<BlockFgp> blocked;
        if (J > 1) {
          blocked = BlockFgp::make(prob->structure, partition_cells(m, J));
        }
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < cfg.repeats; ++rep) {
          const auto t0 = std::chrono::steady_clock::now();
          double value = 0.0;
          if (J > 1) {
            value = block_neg_log_likelihood(*blocked, prob->params, prob->z, workers);
          } else {
            const FgpWorkspace ws(prob->structure, prob->params);
            value = neg_log_likelihood(ws, prob->params.beta, prob->z);
          }
          const auto t1 = std::chrono::steady_clock::now();
          if (!std::isfinite(value)) {
            throw NumericalError("non-finite likelihood in timing run");
          }
          best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
        }
        row.seconds = best;
      } catch (const std::bad_alloc &) {
        row.out_of_memory = true;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

} // namespace fgp

#endif // FGP_TIMING_HPP_
