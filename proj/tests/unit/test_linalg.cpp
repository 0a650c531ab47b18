#include <cmath>

#include <gtest/gtest.h>

#include "fgp/linalg.hpp"
#include "oracle.hpp"

namespace fgp {
namespace {

using testing::Rng64;

SparseMatrix tridiagonal(Index n, double diag, double off) {
  std::vector<Triplet> t;
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, diag);
    if (i + 1 < n) {
      t.emplace_back(i + 1, i, off);
      t.emplace_back(i, i + 1, off);
    }
  }
  SparseMatrix m(n, n);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

TEST(DenseCholesky, IdentityHasUnitFactorAndZeroLogdet) {
  const linalg::DenseCholesky f(Matrix::Identity(3, 3));
  EXPECT_TRUE(f.matrixL().isApprox(Matrix::Identity(3, 3)));
  EXPECT_DOUBLE_EQ(f.logdet(), 0.0);
}

TEST(DenseCholesky, DiagonalLogdet) {
  Matrix m(2, 2);
  m << 4, 0, 0, 9;
  EXPECT_NEAR(linalg::DenseCholesky(m).logdet(), std::log(36.0), 1e-14);
}

TEST(DenseCholesky, RandomLogdetMatchesEigenvalues) {
  Rng64 rng(11);
  const Matrix g = testing::random_matrix(rng, 8, 8);
  Matrix b = g * g.transpose();
  b.diagonal().array() += 8.0;
  EXPECT_NEAR(linalg::DenseCholesky(b).logdet(), testing::dense_logdet(b), 1e-10);
}

TEST(DenseCholesky, DiagonalSolve) {
  Matrix m(2, 2);
  m << 4, 0, 0, 9;
  Vector b(2);
  b << 8, 27;
  const Vector x = linalg::DenseCholesky(m).solve(b);
  EXPECT_NEAR(x[0], 2.0, 1e-15);
  EXPECT_NEAR(x[1], 3.0, 1e-15);
}

TEST(DenseCholesky, RandomSolveResidual) {
  Rng64 rng(12);
  const Matrix m = testing::random_spd(rng, 12, 1.0);
  const Vector b = testing::random_vector(rng, 12);
  const Vector x = linalg::DenseCholesky(m).solve(b);
  EXPECT_LE((m * x - b).norm() / b.norm(), 1e-10);
}

TEST(DenseCholesky, ReportsFailingPivot) {
  Matrix m = Matrix::Identity(4, 4);
  m(2, 2) = -1.0;
  try {
    linalg::DenseCholesky f(m);
    FAIL() << "expected NotPositiveDefinite";
  } catch (const NotPositiveDefinite &e) {
    EXPECT_EQ(e.pivot(), 2);
  }
}

TEST(DenseCholesky, PivotBelowRelativeFloorFails) {
  Matrix m = Matrix::Identity(3, 3);
  m(1, 1) = 1e-13;
  EXPECT_THROW(linalg::DenseCholesky f(m), NotPositiveDefinite);
  m(1, 1) = 1e-11;
  EXPECT_NO_THROW(linalg::DenseCholesky f(m));
}

TEST(DenseCholesky, SolveRejectsWrongRows) {
  const linalg::DenseCholesky f(Matrix::Identity(3, 3));
  EXPECT_THROW(f.solve(Vector::Ones(4)), DimensionMismatch);
}

TEST(SparseCholesky, TridiagonalLogdetMatchesDense) {
  const SparseMatrix m = tridiagonal(5, 2.0, -0.5);
  EXPECT_NEAR(linalg::SparseCholesky(m).logdet(), linalg::DenseCholesky(Matrix(m)).logdet(),
              1e-10);
}

TEST(SparseCholesky, IdentityLogdetIsZero) {
  SparseMatrix id(100, 100);
  id.setIdentity();
  EXPECT_NEAR(linalg::SparseCholesky(id).logdet(), 0.0, 1e-15);
}

TEST(SparseCholesky, IdentitySolveReturnsRhs) {
  SparseMatrix id(7, 7);
  id.setIdentity();
  Rng64 rng(3);
  const Vector b = testing::random_vector(rng, 7);
  EXPECT_EQ(linalg::SparseCholesky(id).solve(b), b);
}

TEST(SparseCholesky, LatticeCarLogdetMatchesDense) {
  const Lattice lat = Lattice::grid_2d({0, 0}, {10, 10}, 10, 10);
  const CarStructure car = CarStructure::make(proximity_first_order(lat));
  const SparseMatrix q = car_precision(car, 1.0, 0.2);
  EXPECT_NEAR(linalg::SparseCholesky(q).logdet(), testing::dense_logdet(Matrix(q)), 1e-8);
}

TEST(SparseCholesky, NotPositiveDefiniteThrows) {
  SparseMatrix m = tridiagonal(6, 1.0, -0.9);
  EXPECT_THROW(linalg::SparseCholesky f(m), NotPositiveDefinite);
}

TEST(SparseCholesky, SolveRejectsWrongRows) {
  const linalg::SparseCholesky f(tridiagonal(4, 2.0, -0.5));
  EXPECT_THROW(f.solve(Vector::Ones(5)), DimensionMismatch);
}

TEST(SparseCholesky, ChainPrefersNaturalOrdering) {
  const auto perm = linalg::SparseCholesky::choose_ordering(tridiagonal(50, 2.0, -0.5));
  for (Index i = 0; i < 50; ++i) {
    EXPECT_EQ(perm.indices()[i], i);
  }
}

// Random sparse SPD: graph Laplacian-like with a positive shift.
SparseMatrix random_sparse_spd(Rng64 &rng, Index n) {
  SparseMatrix h = testing::random_graph(rng, n, 0.05);
  const Vector degree = h * Vector::Ones(n);
  SparseMatrix m = -h;
  for (Index i = 0; i < n; ++i) {
    m.coeffRef(i, i) = degree[i] + testing::uniform(rng, 0.1, 1.0);
  }
  return m;
}

TEST(SparseCholesky, PropertySolveRoundTripAndLogdet) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng64 rng(seed);
    const Index n = testing::uniform_int(rng, 2, 200);
    const SparseMatrix m = random_sparse_spd(rng, n);
    const linalg::SparseCholesky f(m);
    const Vector x = testing::random_vector(rng, n);
    const Vector back = f.solve(Vector(m * x));
    EXPECT_LE((back - x).norm() / x.norm(), 1e-8) << "seed " << seed;
    EXPECT_NEAR(f.logdet(), linalg::DenseCholesky(Matrix(m)).logdet(), 1e-8) << "seed " << seed;
  }
}

TEST(SparseCholesky, PropertyOrderingInvariance) {
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    Rng64 rng(seed);
    const Index n = testing::uniform_int(rng, 2, 120);
    const SparseMatrix m = random_sparse_spd(rng, n);
    const linalg::SparseCholesky amd(m, linalg::Ordering::Amd);
    const linalg::SparseCholesky nat(m, linalg::Ordering::Natural);
    const Vector b = testing::random_vector(rng, n);
    EXPECT_NEAR(amd.logdet(), nat.logdet(), 1e-10 * std::max(1.0, std::abs(nat.logdet())));
    const Vector xa = amd.solve(b), xn = nat.solve(b);
    EXPECT_LE((xa - xn).norm() / xn.norm(), 1e-10);
  }
}

TEST(SparseCholesky, PropertyReconstruction) {
  Rng64 rng(5);
  const SparseMatrix m = random_sparse_spd(rng, 60);
  const linalg::SparseCholesky f(m);
  const Matrix l = Matrix(f.matrixL());
  const Matrix llt = l * l.transpose();
  const Matrix rec = f.permutation().transpose() * llt * f.permutation();
  EXPECT_LE((rec - Matrix(m)).norm() / Matrix(m).norm(), 1e-12);
}

TEST(SparseCholesky, HalfSolveGivesQuadraticForm) {
  Rng64 rng(9);
  const SparseMatrix m = random_sparse_spd(rng, 40);
  const linalg::SparseCholesky f(m);
  const Vector b = testing::random_vector(rng, 40);
  EXPECT_NEAR(f.half_solve(b).squaredNorm(), b.dot(f.solve(b)), 1e-10);
}

} // namespace
} // namespace fgp
