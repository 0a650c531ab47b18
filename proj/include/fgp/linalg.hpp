#ifndef FGP_LINALG_HPP_
#define FGP_LINALG_HPP_

#include <cmath>
#include <string>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include "fgp/error.hpp"
#include "fgp/types.hpp"

namespace fgp::linalg {

// A pivot at or below this fraction of the largest diagonal entry is treated
// as a loss of positive definiteness.
inline constexpr double kPivotTolerance = 1e-12;

namespace detail {

inline double max_abs_diagonal(const Matrix &m) {
  return m.rows() == 0 ? 0.0 : m.diagonal().cwiseAbs().maxCoeff();
}

inline double max_abs_diagonal(const SparseMatrix &m) {
  double out = 0.0;
  for (Index k = 0; k < m.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      if (it.row() == it.col()) {
        out = std::max(out, std::abs(it.value()));
      }
    }
  }
  return out;
}

// Unblocked Cholesky used only to locate the first failing pivot.
inline Index first_failing_pivot(const Matrix &m, double floor) {
  const Index n = m.rows();
  Matrix l = m.triangularView<Eigen::Lower>();
  for (Index k = 0; k < n; ++k) {
    double pivot = l(k, k);
    for (Index j = 0; j < k; ++j) {
      pivot -= l(k, j) * l(k, j);
    }
    if (!(pivot > floor)) {
      return k;
    }
    const double lkk = std::sqrt(pivot);
    l(k, k) = lkk;
    for (Index i = k + 1; i < n; ++i) {
      double v = l(i, k);
      for (Index j = 0; j < k; ++j) {
        v -= l(i, j) * l(k, j);
      }
      l(i, k) = v / lkk;
    }
  }
  return -1;
}

inline void check_rows(Index expected, Index got) {
  if (expected != got) {
    throw DimensionMismatch("right-hand side has " + std::to_string(got) +
                            " rows, factor has dimension " +
                            std::to_string(expected));
  }
}

} // namespace detail

/// Cholesky factor of a dense symmetric positive definite matrix.
///
/// Only the lower triangle of the input is read. Construction throws
/// NotPositiveDefinite carrying the index of the first pivot that falls at or
/// below kPivotTolerance times the largest diagonal entry.
class DenseCholesky {
public:
  DenseCholesky() = default;

  explicit DenseCholesky(const Matrix &m) {
    if (m.rows() != m.cols()) {
      throw DimensionMismatch("Cholesky input must be square");
    }
    const double floor = kPivotTolerance * detail::max_abs_diagonal(m);
    llt_.compute(m);
    bool ok = llt_.info() == Eigen::Success;
    logdet_ = 0.0;
    if (ok) {
      const auto diag = llt_.matrixLLT().diagonal();
      for (Index k = 0; k < diag.size(); ++k) {
        const double pivot = diag[k] * diag[k];
        if (!(pivot > floor) || !std::isfinite(diag[k])) {
          throw NotPositiveDefinite(k);
        }
        logdet_ += std::log(diag[k]);
      }
      logdet_ *= 2.0;
    } else {
      throw NotPositiveDefinite(detail::first_failing_pivot(m, floor));
    }
  }

  Index dim() const { return llt_.rows(); }
  double logdet() const { return logdet_; }
  Matrix matrixL() const { return llt_.matrixL(); }

  template <typename Derived>
  Matrix solve(const Eigen::MatrixBase<Derived> &b) const {
    detail::check_rows(dim(), b.rows());
    if (dim() == 0) {
      return Matrix::Zero(0, b.cols());
    }
    return llt_.solve(b);
  }

  /// L^{-1} b.
  template <typename Derived>
  Matrix half_solve(const Eigen::MatrixBase<Derived> &b) const {
    detail::check_rows(dim(), b.rows());
    Matrix out = b;
    if (dim() > 0) {
      llt_.matrixL().solveInPlace(out);
    }
    return out;
  }

  Matrix inverse() const { return solve(Matrix::Identity(dim(), dim())); }

private:
  Eigen::LLT<Matrix> llt_;
  double logdet_ = 0.0;
};

enum class Ordering { Amd, Natural };

/// Fill-reducing sparse Cholesky: P M P' = L L'.
///
/// The factor is immutable after construction and may be shared across
/// concurrent solves.
class SparseCholesky {
public:
  using Permutation = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

  SparseCholesky() = default;

  explicit SparseCholesky(const SparseMatrix &m, Ordering ordering = Ordering::Amd) {
    if (m.rows() != m.cols()) {
      throw DimensionMismatch("Cholesky input must be square");
    }
    Permutation perm;
    if (ordering == Ordering::Amd) {
      perm = amd_ordering(m);
    } else {
      perm.setIdentity(m.rows());
    }
    factor(m, perm);
  }

  /// Factor with a precomputed ordering (e.g. one AMD ordering reused for
  /// every matrix with the same pattern).
  SparseCholesky(const SparseMatrix &m, const Permutation &perm) {
    if (m.rows() != m.cols() || perm.size() != m.rows()) {
      throw DimensionMismatch("Cholesky input must be square and match the ordering");
    }
    factor(m, perm);
  }

  /// Fill-reducing ordering of the symmetric pattern of m (lower triangle read).
  static Permutation amd_ordering(const SparseMatrix &m) {
    Permutation perm;
    perm.setIdentity(m.rows());
    if (m.rows() == 0) {
      return perm;
    }
    // AMD wants the full symmetric pattern.
    SparseMatrix full = m.selfadjointView<Eigen::Lower>();
    Permutation pinv;
    Eigen::AMDOrdering<int> amd;
    amd(full, pinv);
    return pinv.inverse();
  }

  /// Natural order when it fills no worse than AMD (chains, narrow bands),
  /// AMD otherwise.
  static Permutation choose_ordering(const SparseMatrix &pattern) {
    const Index n = pattern.rows();
    Permutation natural;
    natural.setIdentity(n);
    if (n == 0) {
      return natural;
    }
    // A diagonally dominant matrix on the pattern, only to count fill.
    SparseMatrix probe = pattern;
    for (Index k = 0; k < probe.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(probe, k); it; ++it) {
        it.valueRef() = it.row() == it.col() ? 0.0 : -1.0;
      }
    }
    const Vector degree = probe.cwiseAbs() * Vector::Ones(n);
    for (Index i = 0; i < n; ++i) {
      probe.coeffRef(i, i) = degree[i] + 1.0;
    }
    const Permutation amd = amd_ordering(probe);
    const Index fill_natural = SparseCholesky(probe, natural).nonzeros();
    const Index fill_amd = SparseCholesky(probe, amd).nonzeros();
    return fill_natural <= fill_amd ? natural : amd;
  }

  Index dim() const { return perm_.size(); }
  double logdet() const { return logdet_; }
  const Permutation &permutation() const { return perm_; }
  const SparseMatrix &matrixL() const { return l_; }
  Index nonzeros() const { return l_.nonZeros(); }

  template <typename Derived>
  Matrix solve(const Eigen::MatrixBase<Derived> &b) const {
    Matrix x = half_solve(b);
    if (dim() > 0) {
      l_.transpose().triangularView<Eigen::Upper>().solveInPlace(x);
    }
    return perm_.transpose() * x;
  }

  Vector solve(const Vector &b) const {
    Matrix x = solve(Matrix(b));
    return x.col(0);
  }

  /// L^{-1} P b, so that b' M^{-1} b = |half_solve(b)|^2.
  template <typename Derived>
  Matrix half_solve(const Eigen::MatrixBase<Derived> &b) const {
    detail::check_rows(dim(), b.rows());
    Matrix x = perm_ * b;
    if (dim() > 0) {
      l_.triangularView<Eigen::Lower>().solveInPlace(x);
    }
    return x;
  }

private:
  void factor(const SparseMatrix &m, const Permutation &perm) {
    const Index n = m.rows();
    perm_ = perm;
    if (n == 0) {
      return;
    }
    const double floor = kPivotTolerance * detail::max_abs_diagonal(m);
    bool identity = true;
    for (Index i = 0; i < n && identity; ++i) {
      identity = perm_.indices()[i] == i;
    }
    Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> llt;
    if (identity) {
      llt.compute(m);
    } else {
      SparseMatrix permuted(n, n);
      permuted.selfadjointView<Eigen::Lower>() =
          m.selfadjointView<Eigen::Lower>().twistedBy(perm_);
      llt.compute(permuted);
    }
    if (llt.info() != Eigen::Success) {
      throw NotPositiveDefinite(-1);
    }
    l_ = llt.matrixL();
    l_.makeCompressed();

    logdet_ = 0.0;
    for (Index k = 0; k < n; ++k) {
      // Diagonal entry is stored first in each column of a sorted lower factor.
      SparseMatrix::InnerIterator it(l_, k);
      const double lkk = (it && it.row() == k) ? it.value() : 0.0;
      if (!(lkk * lkk > floor) || !std::isfinite(lkk)) {
        throw NotPositiveDefinite(original_index(k));
      }
      logdet_ += std::log(lkk);
    }
    logdet_ *= 2.0;
  }

  Index original_index(Index permuted) const {
    for (Index i = 0; i < perm_.size(); ++i) {
      if (perm_.indices()[i] == permuted) {
        return i;
      }
    }
    return -1;
  }

  Permutation perm_;
  SparseMatrix l_;
  double logdet_ = 0.0;
};

inline DenseCholesky dense_cholesky(const Matrix &m) { return DenseCholesky(m); }

inline SparseCholesky sparse_cholesky(const SparseMatrix &m,
                                      Ordering ordering = Ordering::Amd) {
  return SparseCholesky(m, ordering);
}

template <typename Factor, typename Derived>
Matrix solve(const Factor &f, const Eigen::MatrixBase<Derived> &b) {
  return f.solve(b);
}

} // namespace fgp::linalg

#endif // FGP_LINALG_HPP_
