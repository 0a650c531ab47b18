#include <cmath>

#include <gtest/gtest.h>

#include "fgp/likelihood.hpp"
#include "oracle.hpp"

namespace fgp {
namespace {

using testing::build_oracle;
using testing::OracleOptions;

SparseMatrix sparse_identity(Index n) {
  SparseMatrix id(n, n);
  id.setIdentity();
  return id;
}

// n = M, A = I, Q = I (no edges, tau^2 = 1), V = I.
FgpStructure identity_structure(Index n, Index r) {
  SparseMatrix s = r > 0 ? SparseMatrix(Matrix::Ones(n, r).sparseView()) : SparseMatrix(n, 0);
  return FgpStructure::make(Matrix::Ones(n, 1), s, sparse_identity(n),
                            CarStructure::make(SparseMatrix(n, n)), Vector::Ones(n));
}

FgpParams unit_params(Index r) {
  FgpParams p;
  p.beta = Vector::Zero(1);
  p.K = Matrix::Identity(r, r);
  p.tau2 = 1.0;
  p.gamma = 0.0;
  return p;
}

TEST(ApplyD, EmptyIncidenceIsNoiseInverse) {
  Vector noise(4);
  noise << 1, 2, 4, 8;
  const FgpStructure st = FgpStructure::make(Matrix::Ones(4, 1), SparseMatrix(4, 0),
                                             SparseMatrix(4, 0), CarStructure::make(SparseMatrix(0, 0)),
                                             noise);
  const FgpWorkspace ws(st, unit_params(0));
  const Matrix b = Matrix::Ones(4, 2);
  EXPECT_TRUE(ws.apply_D(b).isApprox(noise.cwiseInverse().asDiagonal() * b));
}

TEST(ApplyD, IdentityModelHalves) {
  const FgpStructure st = identity_structure(5, 0);
  const FgpWorkspace ws(st, unit_params(0));
  testing::Rng64 rng(1);
  const Matrix b = testing::random_matrix(rng, 5, 3);
  EXPECT_LE((ws.apply_D(b) - 0.5 * b).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ApplyD, RandomInstanceMatchesDense) {
  OracleOptions opt;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto o = build_oracle(seed, opt);
    const FgpWorkspace ws(o.structure, o.params);
    testing::Rng64 rng(seed);
    const Matrix b = testing::random_matrix(rng, o.n, 3);
    const Matrix expect = testing::dense_D(o) * b;
    EXPECT_LE((ws.apply_D(b) - expect).norm() / expect.norm(), 1e-9) << "seed " << seed;
  }
}

TEST(ApplyD, WrongRowsThrow) {
  const FgpStructure st = identity_structure(3, 0);
  const FgpWorkspace ws(st, unit_params(0));
  EXPECT_THROW(ws.apply_D(Matrix::Ones(4, 1)), DimensionMismatch);
}

TEST(ApplyCInverse, NoBasisEqualsD) {
  const auto o = build_oracle(3, {.r_max = 0});
  ASSERT_EQ(o.r, 0);
  const FgpWorkspace ws(o.structure, o.params);
  const Vector b = Vector::LinSpaced(o.n, -1.0, 1.0);
  EXPECT_EQ(ws.apply_C_inverse(b), ws.apply_D(b));
}

TEST(ApplyCInverse, ThreeByThreeClosedForm) {
  const FgpStructure st = identity_structure(3, 1);
  const FgpWorkspace ws(st, unit_params(1));
  const Matrix c = Matrix::Ones(3, 3) + 2.0 * Matrix::Identity(3, 3);
  const Matrix expect = c.inverse();
  EXPECT_LE((ws.apply_C_inverse(Matrix::Identity(3, 3)) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ApplyCInverse, RandomResidual) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto o = build_oracle(seed + 1000);
    testing::Rng64 rng(seed);
    EXPECT_LE(testing::inverse_residual(o, testing::random_vector(rng, o.n)), 1e-8)
        << "seed " << seed;
  }
}

TEST(LogDetC, IdentityModelIsNLog2) {
  const FgpStructure st = identity_structure(7, 0);
  const FgpWorkspace ws(st, unit_params(0));
  EXPECT_NEAR(ws.log_det_C(), 7.0 * std::log(2.0), 1e-12);
}

TEST(LogDetC, RandomMatchesDense) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto o = build_oracle(seed + 2000);
    const FgpWorkspace ws(o.structure, o.params);
    const double ld = testing::dense_logdet(o.C);
    EXPECT_NEAR(ws.log_det_C(), ld, 1e-8 * std::max(1.0, std::abs(ld))) << "seed " << seed;
  }
}

TEST(NegLogLikelihood, ScalarGaussian) {
  // n = 1, A = 1, Q = 1/tau^2, V = 0.5, no basis: C = tau^2 + 0.5.
  const FgpStructure st =
      FgpStructure::make(Matrix::Ones(1, 1), SparseMatrix(1, 0), sparse_identity(1),
                         CarStructure::make(SparseMatrix(1, 1)), Vector::Constant(1, 0.5));
  FgpParams p = unit_params(0);
  p.tau2 = 1.5;
  p.beta[0] = 0.25;
  const Vector z = Vector::Constant(1, 1.75);
  const double c = 2.0, e = 1.5;
  const double expect = 0.5 * (e * e / c + std::log(c)) + 0.5 * std::log(2.0 * M_PI);
  EXPECT_NEAR(neg_log_likelihood(st, p, z), expect, 1e-14);
}

TEST(NegLogLikelihood, RandomMatchesDense) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto o = build_oracle(seed + 3000);
    const double expect = testing::dense_nll(o);
    EXPECT_NEAR(neg_log_likelihood(o.structure, o.params, o.z), expect,
                1e-8 * std::max(1.0, std::abs(expect)))
        << "seed " << seed;
  }
}

TEST(NegLogLikelihood, WrongLengthThrows) {
  const auto o = build_oracle(4);
  EXPECT_THROW(neg_log_likelihood(o.structure, o.params, Vector::Zero(o.n + 1)),
               DimensionMismatch);
}

TEST(FgpStructure, DimensionChecks) {
  EXPECT_THROW(FgpStructure::make(Matrix::Ones(3, 1), SparseMatrix(2, 0), sparse_identity(3),
                                  CarStructure::make(SparseMatrix(3, 3)), Vector::Ones(3)),
               DimensionMismatch);
  EXPECT_THROW(FgpStructure::make(Matrix::Ones(3, 1), SparseMatrix(3, 0), sparse_identity(3),
                                  CarStructure::make(SparseMatrix(4, 4)), Vector::Ones(3)),
               DimensionMismatch);
  EXPECT_THROW(FgpStructure::make(Matrix::Ones(3, 1), SparseMatrix(3, 0), sparse_identity(3),
                                  CarStructure::make(SparseMatrix(3, 3)), Vector::Zero(3)),
               DataError);
}

TEST(FgpWorkspace, WrongParameterShapes) {
  const auto o = build_oracle(5);
  FgpParams p = o.params;
  p.beta = Vector::Zero(o.p + 1);
  EXPECT_THROW(FgpWorkspace(o.structure, p), DimensionMismatch);
  p = o.params;
  p.K = Matrix::Identity(o.r + 1, o.r + 1);
  EXPECT_THROW(FgpWorkspace(o.structure, p), DimensionMismatch);
}

TEST(FgpWorkspace, InadmissibleGamma) {
  const auto o = build_oracle(6);
  FgpParams p = o.params;
  p.gamma = o.structure.car().bounds()->hi + 0.01;
  EXPECT_THROW(FgpWorkspace(o.structure, p), GammaOutOfRange);
}

TEST(FgpWorkspace, SingularKGetsJitter) {
  auto o = build_oracle(7, {.r_max = 6});
  while (o.r < 2) {
    o = build_oracle(o.seed + 1, {.r_max = 6});
  }
  FgpParams p = o.params;
  const Vector v = Vector::Ones(o.r);
  p.K = v * v.transpose(); // rank one
  EXPECT_NO_THROW(FgpWorkspace(o.structure, p));
}

TEST(GgmFactor, ExplicitPrecisionMatchesCar) {
  const auto o = build_oracle(8);
  const GgmFactor a = GgmFactor::for_car(o.structure, o.params.tau2, o.params.gamma);
  const SparseMatrix q = car_precision(o.structure.car(), o.params.tau2, o.params.gamma);
  const GgmFactor b(o.structure, q);
  EXPECT_NEAR(a.logdet_Dinv(), b.logdet_Dinv(), 1e-10 * std::abs(b.logdet_Dinv()));
  EXPECT_LE((a.StDS() - b.StDS()).cwiseAbs().maxCoeff(), 1e-10);
}

// Large enough M k to take the batched-solve path for G.
TEST(GgmFactor, BatchedAndSinglePathAgree) {
  const Index m = 40000, r = 110;
  const Lattice lat = Lattice::uniform_1d(0.0, 1.0, m);
  const std::array<int, 2> counts{10, 100};
  const BisquareSet bs = multiresolution_centers_1d(0.0, 1.0, counts);
  const SparseMatrix s = bisquare_matrix(bs, lat.centers());
  ASSERT_EQ(s.cols(), r);
  ASSERT_GT(m * r, kDenseSolveLimit);
  const FgpStructure st = FgpStructure::make(Matrix::Ones(m, 1), s, incidence_matrix(lat, lat.centers()),
                                             CarStructure::make(proximity_first_order(lat)),
                                             Vector::Constant(m, 2.0));
  const GgmFactor f = GgmFactor::for_car(st, 1.0, 0.3);
  // Reference via the Woodbury form of G directly.
  const Matrix w = Matrix(st.W());
  const Matrix pw = f.capacitance_factor().solve(w);
  const Matrix expect = st.StVinvS() - w.transpose() * pw;
  EXPECT_LE((f.StDS() - expect).cwiseAbs().maxCoeff(), 1e-9 * expect.cwiseAbs().maxCoeff());
}

// Every finite-dimensional covariance C is PSD.
TEST(Covariance, PropertyPositiveSemidefinite) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto o = build_oracle(seed + 4000);
    testing::Rng64 rng(seed);
    const double bound = 1e-10 * o.C.trace() / static_cast<double>(o.n);
    for (int k = 0; k < 5; ++k) {
      const Vector v = testing::random_vector(rng, o.n);
      EXPECT_GE(v.dot(o.C * v), -bound * v.squaredNorm());
    }
    EXPECT_GE(testing::dense_eigenvalues(o.C)[0], 0.0);
  }
}

} // namespace
} // namespace fgp
