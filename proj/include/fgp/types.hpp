#ifndef FGP_TYPES_HPP_
#define FGP_TYPES_HPP_

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace fgp {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// One row per point, one column per spatial dimension.
using Locations = Eigen::MatrixXd;

} // namespace fgp

#endif // FGP_TYPES_HPP_
