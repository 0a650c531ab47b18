#ifndef FGP_MODEL_HPP_
#define FGP_MODEL_HPP_

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fgp/basis.hpp"
#include "fgp/block.hpp"
#include "fgp/car.hpp"
#include "fgp/error.hpp"
#include "fgp/likelihood.hpp"
#include "fgp/predict.hpp"
#include "fgp/types.hpp"

namespace fgp {

enum class Trend { None, Constant, Linear };

/// Covariate matrix for a trend: nothing, a column of ones, or ones plus the
/// coordinates.
inline Matrix trend_matrix(Trend trend, const Locations &locations) {
  const Index n = locations.rows();
  switch (trend) {
  case Trend::None:
    return Matrix(n, 0);
  case Trend::Constant:
    return Matrix::Ones(n, 1);
  case Trend::Linear: {
    Matrix x(n, 1 + locations.cols());
    x << Matrix::Ones(n, 1), locations;
    return x;
  }
  }
  return Matrix(n, 0);
}

enum class ProximityRule { Threshold, FirstOrder };

/// Lattice, basis and CAR template from which per-dataset structures and
/// prediction designs are built. With use_lattice false the model has no
/// lattice term (A has zero columns); with no basis it has no low-rank term.
class SpatialModel {
public:
  struct Options {
    ProximityRule proximity = ProximityRule::FirstOrder;
    double threshold = 0.0;
    Trend trend = Trend::Constant;
    double noise_var = 1.0;
    bool use_lattice = true;
    Index blocks = 1; // > 1 drops the CAR edges between blocks
  };

  SpatialModel(Lattice lattice, std::optional<BisquareSet> basis, const Options &opt)
      : lattice_(std::move(lattice)), basis_(std::move(basis)), opt_(opt) {
    if (!(opt.noise_var > 0.0)) {
      throw ConfigError("noise variance must be positive");
    }
    if (basis_) {
      basis_->validate();
      if (basis_->dimension() != lattice_.dimension()) {
        throw ConfigError("basis and lattice dimensions differ");
      }
    }
    if (opt_.use_lattice) {
      SparseMatrix h;
      std::optional<GammaBounds> known;
      if (opt.proximity == ProximityRule::Threshold) {
        h = proximity_threshold(lattice_.centers(), opt.threshold);
      } else {
        h = proximity_first_order(lattice_);
        if (h.nonZeros() > 0 && opt.blocks <= 1) {
          known = gamma_bounds_first_order(lattice_);
        }
      }
      if (opt.blocks > 1) {
        const BlockPartition part = partition_lattice(lattice_, opt.blocks);
        h = prune_cross_edges(h, part);
      }
      car_ = CarStructure::make(std::move(h), Vector(), known);
    } else {
      car_ = CarStructure::make(SparseMatrix(0, 0));
    }
  }

  const Lattice &lattice() const { return lattice_; }
  const std::optional<BisquareSet> &basis() const { return basis_; }
  const CarStructure &car() const { return car_; }
  const Options &options() const { return opt_; }
  Index r() const { return basis_ ? basis_->size() : 0; }

  SparseMatrix basis_matrix(const Locations &locations) const {
    if (!basis_) {
      return SparseMatrix(locations.rows(), 0);
    }
    return bisquare_matrix(*basis_, locations);
  }

  FgpStructure structure(const Locations &locations) const {
    check_dimension(locations);
    SparseMatrix a = opt_.use_lattice ? incidence_matrix(lattice_, locations)
                                      : SparseMatrix(locations.rows(), 0);
    return FgpStructure::make(trend_matrix(opt_.trend, locations), basis_matrix(locations),
                              std::move(a), car_,
                              Vector::Constant(locations.rows(), opt_.noise_var));
  }

  PredictionDesign design(const Locations &locations) const {
    check_dimension(locations);
    PredictionDesign d;
    d.X = trend_matrix(opt_.trend, locations);
    d.S = basis_matrix(locations);
    if (opt_.use_lattice) {
      d.cells = lattice_.cells_of(locations);
    } else {
      d.cells.assign(static_cast<std::size_t>(locations.rows()), -1);
    }
    return d;
  }

private:
  void check_dimension(const Locations &locations) const {
    if (locations.cols() != lattice_.dimension()) {
      throw DimensionMismatch("locations have " + std::to_string(locations.cols()) +
                              " coordinates, the lattice has " +
                              std::to_string(lattice_.dimension()));
    }
  }

  Lattice lattice_;
  std::optional<BisquareSet> basis_;
  Options opt_;
  CarStructure car_;
};

} // namespace fgp

#endif // FGP_MODEL_HPP_
