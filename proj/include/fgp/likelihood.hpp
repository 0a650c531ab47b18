#ifndef FGP_LIKELIHOOD_HPP_
#define FGP_LIKELIHOOD_HPP_

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fgp/car.hpp"
#include "fgp/error.hpp"
#include "fgp/linalg.hpp"
#include "fgp/types.hpp"

namespace fgp {

/// Fixed design of Z = X beta + S eta + A xi + eps.
///
/// Build with make(); it validates dimensions and caches the products that
/// do not depend on parameters (V^{-1}, A'V^{-1}A, W = A'V^{-1}S, S'V^{-1}S).
/// M = 0 (no lattice term) and r = 0 (no low-rank term) are both legal.
class FgpStructure {
public:
  FgpStructure() = default;

  static FgpStructure make(Matrix x, SparseMatrix s, SparseMatrix a, CarStructure car,
                           Vector noise_var) {
    const Index n = x.rows();
    if (s.rows() != n || a.rows() != n || noise_var.size() != n) {
      throw DimensionMismatch("X, S, A and V_eps must have the same number of rows");
    }
    if (a.cols() != car.size()) {
      throw DimensionMismatch("A has " + std::to_string(a.cols()) +
                              " columns but the CAR model has " +
                              std::to_string(car.size()) + " cells");
    }
    if (!(noise_var.array() > 0.0).all() || !noise_var.allFinite()) {
      throw DataError("noise variances must be positive and finite");
    }
    FgpStructure st;
    st.x_ = std::move(x);
    st.s_ = std::move(s);
    st.s_.makeCompressed();
    st.a_ = std::move(a);
    st.a_.makeCompressed();
    st.car_ = std::move(car);
    st.noise_ = std::move(noise_var);
    st.vinv_ = st.noise_.cwiseInverse();
    st.logdet_v_ = st.noise_.array().log().sum();
    st.at_vinv_a_ = SparseMatrix(st.a_.transpose() * st.vinv_.asDiagonal() * st.a_);
    st.w_ = SparseMatrix(st.a_.transpose() * st.vinv_.asDiagonal() * st.s_);
    st.w_.makeCompressed();
    st.st_vinv_s_ = Matrix(st.s_.transpose() * st.vinv_.asDiagonal() * st.s_);
    for (Index j = 0; j < st.w_.outerSize(); ++j) {
      if (st.w_.col(j).nonZeros() > 0) {
        st.w_active_.push_back(j);
      }
    }
    std::vector<Triplet> entries;
    for (std::size_t c = 0; c < st.w_active_.size(); ++c) {
      for (SparseMatrix::InnerIterator it(st.w_, st.w_active_[c]); it; ++it) {
        entries.emplace_back(it.row(), static_cast<Index>(c), it.value());
      }
    }
    st.w_act_.resize(st.M(), static_cast<Index>(st.w_active_.size()));
    st.w_act_.setFromTriplets(entries.begin(), entries.end());
    st.w_act_t_ = st.w_act_.transpose();
    // Q = (E + gamma F) / tau^2 and P = Q + A'V^{-1}A on one shared pattern,
    // so both are formed by arithmetic on value arrays.
    const Index m = st.M();
    const SparseMatrix &h = st.car_.proximity();
    const Vector &delta = st.car_.delta();
    std::vector<Triplet> pe, pf;
    for (Index i = 0; i < m; ++i) {
      pe.emplace_back(i, i, 1.0 / delta[i]);
    }
    for (Index k = 0; k < h.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(h, k); it; ++it) {
        pf.emplace_back(it.row(), it.col(), -it.value() / delta[it.row()]);
      }
    }
    SparseMatrix e(m, m), f(m, m);
    e.setFromTriplets(pe.begin(), pe.end());
    f.setFromTriplets(pf.begin(), pf.end());
    st.pattern_ = SparseMatrix(e.cwiseAbs() + f.cwiseAbs() + st.at_vinv_a_.cwiseAbs());
    st.pattern_.makeCompressed();
    st.e_vals_ = values_on(st.pattern_, e);
    st.f_vals_ = values_on(st.pattern_, f);
    st.g_vals_ = values_on(st.pattern_, st.at_vinv_a_);
    st.ordering_ = linalg::SparseCholesky::choose_ordering(st.pattern_);
    return st;
  }

  Index n() const { return x_.rows(); }
  Index p() const { return x_.cols(); }
  Index r() const { return s_.cols(); }
  Index M() const { return a_.cols(); }

  const Matrix &X() const { return x_; }
  const SparseMatrix &S() const { return s_; }
  const SparseMatrix &A() const { return a_; }
  const CarStructure &car() const { return car_; }
  const Vector &noise_var() const { return noise_; }

  const Vector &noise_inverse() const { return vinv_; }
  double logdet_noise() const { return logdet_v_; }
  const SparseMatrix &AtVinvA() const { return at_vinv_a_; }
  /// A'V^{-1}S (M x r).
  const SparseMatrix &W() const { return w_; }
  const Matrix &StVinvS() const { return st_vinv_s_; }
  /// Columns of W with at least one nonzero.
  const std::vector<Index> &active_basis() const { return w_active_; }
  /// Those columns of W, packed, and their transpose.
  const SparseMatrix &W_active() const { return w_act_; }
  const SparseMatrix &W_active_t() const { return w_act_t_; }
  /// Fill-reducing ordering shared by Q and Q + A'V^{-1}A.
  const linalg::SparseCholesky::Permutation &ordering() const { return ordering_; }

  /// CAR precision and capacitance matrix at (tau^2, gamma), without the
  /// admissibility check.
  std::pair<SparseMatrix, SparseMatrix> precision_pair(double tau2, double gamma) const {
    SparseMatrix q = pattern_, p = pattern_;
    const Index nnz = pattern_.nonZeros();
    Eigen::Map<Vector> qv(q.valuePtr(), nnz), pv(p.valuePtr(), nnz);
    qv = (e_vals_ + gamma * f_vals_) / tau2;
    pv = qv + g_vals_;
    return {std::move(q), std::move(p)};
  }

private:
  Matrix x_;
  SparseMatrix s_, a_;
  CarStructure car_;
  Vector noise_, vinv_;
  double logdet_v_ = 0.0;
  SparseMatrix at_vinv_a_, w_;
  Matrix st_vinv_s_;
  std::vector<Index> w_active_;
  SparseMatrix w_act_, w_act_t_;
  linalg::SparseCholesky::Permutation ordering_;
  SparseMatrix pattern_;
  Vector e_vals_, f_vals_, g_vals_;

  // Values of x laid out on the (superset) pattern of `pattern`.
  static Vector values_on(const SparseMatrix &pattern, const SparseMatrix &x) {
    Vector out = Vector::Zero(pattern.nonZeros());
    Index pos = 0;
    for (Index k = 0; k < pattern.outerSize(); ++k) {
      SparseMatrix::InnerIterator xi(x, k);
      for (SparseMatrix::InnerIterator it(pattern, k); it; ++it, ++pos) {
        while (xi && xi.row() < it.row()) {
          ++xi;
        }
        if (xi && xi.row() == it.row()) {
          out[pos] = xi.value();
        }
      }
    }
    return out;
  }
};

/// theta = {beta, K, tau^2, gamma}.
struct FgpParams {
  Vector beta;
  Matrix K;
  double tau2 = 1.0;
  double gamma = 0.0;
};

inline void check_params(const FgpStructure &st, const FgpParams &params) {
  if (params.beta.size() != st.p()) {
    throw DimensionMismatch("beta has length " + std::to_string(params.beta.size()) +
                            ", expected " + std::to_string(st.p()));
  }
  if (params.K.rows() != st.r() || params.K.cols() != st.r()) {
    throw DimensionMismatch("K must be r x r with r = " + std::to_string(st.r()));
  }
}

/// Columns of W are pushed through P^{-1} in batches of this many once
/// M times their count exceeds kDenseSolveLimit.
inline constexpr Index kSolveBatch = 32;
inline constexpr Index kDenseSolveLimit = Index{1} << 22;

/// The graphical-model half of the Woodbury machinery for one precision Q.
///
/// Holds factors of Q and of the capacitance matrix P = Q + A'V^{-1}A, which
/// give D = (AQ^{-1}A' + V)^{-1} = V^{-1} - V^{-1}A P^{-1} A'V^{-1} as an
/// operator, log|D^{-1}| = log|P| - log|Q| + log|V|, and G = S'DS. Depends
/// only on (tau^2, gamma), not on beta or K. The structure must outlive it.
class GgmFactor {
public:
  GgmFactor(const FgpStructure &st, const SparseMatrix &q) : st_(&st) {
    if (q.rows() != st.M() || q.cols() != st.M()) {
      throw DimensionMismatch("precision matrix must be M x M");
    }
    init(q, SparseMatrix(q + st.AtVinvA()));
  }

  static GgmFactor for_car(const FgpStructure &st, double tau2, double gamma) {
    if (!(tau2 > 0.0) || !std::isfinite(tau2)) {
      throw DataError("tau^2 must be positive and finite");
    }
    const CarStructure &car = st.car();
    if (!car.admissible(gamma)) {
      throw GammaOutOfRange(gamma, car.bounds()->lo, car.bounds()->hi);
    }
    GgmFactor out;
    out.st_ = &st;
    const auto [q, p] = st.precision_pair(tau2, gamma);
    out.init(q, p);
    return out;
  }

  const FgpStructure &structure() const { return *st_; }

  /// D B without forming any n x n matrix.
  template <typename Derived>
  Matrix apply_D(const Eigen::MatrixBase<Derived> &b) const {
    if (b.rows() != st_->n()) {
      throw DimensionMismatch("apply_D: right-hand side must have n rows");
    }
    Matrix vb = st_->noise_inverse().asDiagonal() * b;
    if (st_->M() == 0) {
      return vb;
    }
    const Matrix t = p_.solve(Matrix(st_->A().transpose() * vb));
    return vb - st_->noise_inverse().asDiagonal() * (st_->A() * t);
  }

  double logdet_Dinv() const { return logdet_dinv_; }
  /// S'DS (r x r).
  const Matrix &StDS() const { return g_; }
  const linalg::SparseCholesky &precision_factor() const { return q_; }
  const linalg::SparseCholesky &capacitance_factor() const { return p_; }

private:
  GgmFactor() = default;

  void init(const SparseMatrix &q, const SparseMatrix &p) {
    const FgpStructure &st = *st_;
    logdet_dinv_ = st.logdet_noise();
    if (st.M() > 0) {
      q_ = linalg::SparseCholesky(q, st.ordering());
      p_ = linalg::SparseCholesky(p, st.ordering());
      logdet_dinv_ += p_.logdet() - q_.logdet();
    }
    g_ = st.StVinvS();
    const auto &active = st.active_basis();
    const Index k = static_cast<Index>(active.size());
    if (st.M() == 0 || k == 0) {
      return;
    }
    // G = S'V^{-1}S - W'P^{-1}W over the columns of W that are nonzero.
    const SparseMatrix &w_act = st.W_active();
    Matrix corr(k, k);
    if (st.M() * k <= kDenseSolveLimit) {
      const Matrix y = p_.half_solve(Matrix(w_act));
      corr.noalias() = y.transpose() * y;
    } else {
      for (Index c0 = 0; c0 < k; c0 += kSolveBatch) {
        const Index b = std::min(kSolveBatch, k - c0);
        const Matrix sol = p_.solve(Matrix(w_act.middleCols(c0, b)));
        corr.middleCols(c0, b) = st.W_active_t() * sol;
      }
      corr = 0.5 * (corr + corr.transpose()).eval();
    }
    for (Index i = 0; i < k; ++i) {
      for (Index j = 0; j < k; ++j) {
        g_(active[i], active[j]) -= corr(i, j);
      }
    }
    g_ = 0.5 * (g_ + g_.transpose()).eval();
  }

  const FgpStructure *st_ = nullptr;
  linalg::SparseCholesky q_, p_;
  double logdet_dinv_ = 0.0;
  Matrix g_;
};

/// Cholesky of K; on failure retries once with 1e-10 trace(K)/r on the
/// diagonal (EM updates are PSD but can be numerically rank deficient).
inline linalg::DenseCholesky factor_covariance(const Matrix &k) {
  try {
    return linalg::DenseCholesky(k);
  } catch (const NotPositiveDefinite &) {
    const double jitter = 1e-10 * k.trace() / static_cast<double>(k.rows());
    Matrix kj = k;
    kj.diagonal().array() += std::max(jitter, 0.0);
    return linalg::DenseCholesky(kj);
  }
}

/// Everything needed to apply C^{-1} and evaluate log|C| for one parameter
/// value, where C = SKS' + AQ^{-1}A' + V. Not shareable across parameter
/// values; the GGM half may be shared across K values.
class FgpWorkspace {
public:
  FgpWorkspace(const FgpStructure &st, const FgpParams &params)
      : FgpWorkspace(std::make_shared<const GgmFactor>(
                         GgmFactor::for_car(st, params.tau2, params.gamma)),
                     params.K) {
    check_params(st, params);
  }

  FgpWorkspace(std::shared_ptr<const GgmFactor> ggm, const Matrix &k)
      : ggm_(std::move(ggm)) {
    const Index r = ggm_->structure().r();
    if (k.rows() != r || k.cols() != r) {
      throw DimensionMismatch("K must be r x r");
    }
    if (r > 0) {
      k_chol_ = factor_covariance(k);
      k_ = k;
      kinv_ = k_chol_.inverse();
      kinv_ = 0.5 * (kinv_ + kinv_.transpose()).eval();
      inner_ = linalg::DenseCholesky(Matrix(kinv_ + ggm_->StDS()));
    }
  }

  const FgpStructure &structure() const { return ggm_->structure(); }
  const GgmFactor &ggm() const { return *ggm_; }
  std::shared_ptr<const GgmFactor> ggm_ptr() const { return ggm_; }
  const Matrix &K() const { return k_; }
  const Matrix &K_inverse() const { return kinv_; }
  /// Factor of K^{-1} + S'DS.
  const linalg::DenseCholesky &inner_factor() const { return inner_; }

  template <typename Derived>
  Matrix apply_D(const Eigen::MatrixBase<Derived> &b) const {
    return ggm_->apply_D(b);
  }

  /// C^{-1} b = D b - D S (K^{-1} + S'DS)^{-1} S'D b.
  template <typename Derived>
  Matrix apply_C_inverse(const Eigen::MatrixBase<Derived> &b) const {
    Matrix db = ggm_->apply_D(b);
    const Index r = structure().r();
    if (r == 0) {
      return db;
    }
    const Matrix t = inner_.solve(Matrix(structure().S().transpose() * db));
    db -= ggm_->apply_D(Matrix(structure().S() * t));
    return db;
  }

  /// log|C| = log|K^{-1} + S'DS| + log|K| + log|D^{-1}|.
  double log_det_C() const {
    double out = ggm_->logdet_Dinv();
    if (structure().r() > 0) {
      out += inner_.logdet() + k_chol_.logdet();
    }
    return out;
  }

  /// z'C^{-1}z using a single application of D.
  double quadratic_form(const Vector &z) const {
    const Vector dz = ggm_->apply_D(z);
    double out = z.dot(dz);
    if (structure().r() > 0) {
      const Vector sdz = structure().S().transpose() * dz;
      const Matrix h = inner_.half_solve(sdz);
      out -= h.squaredNorm();
    }
    return out;
  }

private:
  std::shared_ptr<const GgmFactor> ggm_;
  linalg::DenseCholesky k_chol_, inner_;
  Matrix k_, kinv_;
};

template <typename Derived>
Matrix apply_D(const FgpWorkspace &ws, const Eigen::MatrixBase<Derived> &b) {
  return ws.apply_D(b);
}

template <typename Derived>
Matrix apply_C_inverse(const FgpWorkspace &ws, const Eigen::MatrixBase<Derived> &b) {
  return ws.apply_C_inverse(b);
}

inline double log_det_C(const FgpWorkspace &ws) { return ws.log_det_C(); }

inline constexpr double kLog2Pi = 1.83787706640934548356;

/// Exact negative log-density of Z (the (n/2) log 2 pi constant included).
inline double neg_log_likelihood(const FgpWorkspace &ws, const Vector &beta, const Vector &z) {
  const FgpStructure &st = ws.structure();
  if (z.size() != st.n()) {
    throw DimensionMismatch("Z must have n entries");
  }
  const Vector resid = z - st.X() * beta;
  return 0.5 * (ws.quadratic_form(resid) + ws.log_det_C() +
                static_cast<double>(st.n()) * kLog2Pi);
}

inline double neg_log_likelihood(const FgpStructure &st, const FgpParams &params,
                                 const Vector &z) {
  const FgpWorkspace ws(st, params);
  return neg_log_likelihood(ws, params.beta, z);
}

} // namespace fgp

#endif // FGP_LIKELIHOOD_HPP_
