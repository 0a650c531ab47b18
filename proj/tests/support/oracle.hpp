#ifndef FGP_TEST_ORACLE_HPP_
#define FGP_TEST_ORACLE_HPP_

// Seeded random FGP instances and their densified counterparts. Everything
// here is deliberately naive: dense matrices, Eigen's own decompositions and
// the textbook Gaussian formulas, so that the library's Woodbury machinery is
// checked against an independent computation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "fgp/fgp.hpp"

namespace fgp::testing {

using Rng64 = std::mt19937_64;

inline double uniform(Rng64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Index uniform_int(Rng64 &rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

inline Matrix random_matrix(Rng64 &rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      m(i, j) = normal(rng);
    }
  }
  return m;
}

inline Vector random_vector(Rng64 &rng, Index n) { return random_matrix(rng, n, 1).col(0); }

// G G' / k + shift I.
inline Matrix random_spd(Rng64 &rng, Index k, double shift = 0.5) {
  const Matrix g = random_matrix(rng, k, k);
  Matrix out = g * g.transpose() / static_cast<double>(std::max<Index>(k, 1));
  out.diagonal().array() += shift;
  return out;
}

// Symmetric 0/1 graph with zero diagonal and at least one edge.
inline SparseMatrix random_graph(Rng64 &rng, Index m, double density) {
  std::vector<Triplet> entries;
  for (Index j = 0; j < m; ++j) {
    for (Index i = j + 1; i < m; ++i) {
      if (uniform(rng, 0.0, 1.0) < density) {
        entries.emplace_back(i, j, 1.0);
        entries.emplace_back(j, i, 1.0);
      }
    }
  }
  if (entries.empty() && m > 1) {
    entries.emplace_back(0, 1, 1.0);
    entries.emplace_back(1, 0, 1.0);
  }
  SparseMatrix h(m, m);
  h.setFromTriplets(entries.begin(), entries.end());
  return h;
}

inline Vector dense_eigenvalues(const Matrix &m) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues();
}

inline double dense_logdet(const Matrix &m) {
  const Vector ev = dense_eigenvalues(m);
  return ev.array().log().sum();
}

struct OracleOptions {
  Index n_max = 60;
  Index M_max = 80;
  Index r_max = 6;
  double noise_scale = 1.0;    // multiplies V_eps
  double gamma_fraction = -1;  // < 0: random inside the interval
  bool general_delta = true;
};

/// One random model with parameters, data and dense matrices.
struct OracleInstance {
  std::uint64_t seed = 0;
  Index n = 0, M = 0, r = 0, p = 0;
  Matrix X, S, A, H, Q, K, V, C;
  Vector delta, z;
  FgpStructure structure;
  FgpParams params;

  Vector resid() const { return z - X * params.beta; }
};

inline OracleInstance build_oracle(std::uint64_t seed, const OracleOptions &opt = {}) {
  Rng64 rng(seed);
  OracleInstance o;
  o.seed = seed;
  o.n = uniform_int(rng, 5, opt.n_max);
  o.M = uniform_int(rng, 3, opt.M_max);
  o.r = uniform_int(rng, 0, opt.r_max);
  o.p = uniform_int(rng, 0, 2);

  // Cells: each observation in one random cell; some cells stay empty.
  std::vector<Triplet> a_entries;
  for (Index i = 0; i < o.n; ++i) {
    a_entries.emplace_back(i, uniform_int(rng, 0, o.M - 1), 1.0);
  }
  SparseMatrix a(o.n, o.M);
  a.setFromTriplets(a_entries.begin(), a_entries.end());

  // Sparse-ish basis values in [0, 1].
  std::vector<Triplet> s_entries;
  for (Index j = 0; j < o.r; ++j) {
    for (Index i = 0; i < o.n; ++i) {
      if (uniform(rng, 0.0, 1.0) < 0.6) {
        s_entries.emplace_back(i, j, uniform(rng, 0.0, 1.0));
      }
    }
  }
  SparseMatrix s(o.n, o.r);
  s.setFromTriplets(s_entries.begin(), s_entries.end());

  o.X = Matrix::Ones(o.n, o.p);
  if (o.p == 2) {
    o.X.col(1) = random_vector(rng, o.n);
  }

  // H_ij = w_ij * delta_i with w symmetric keeps Delta^{-1} H symmetric.
  const SparseMatrix w = random_graph(rng, o.M, uniform(rng, 0.02, 0.15));
  o.delta = Vector::Ones(o.M);
  if (opt.general_delta && uniform(rng, 0.0, 1.0) < 0.5) {
    for (Index i = 0; i < o.M; ++i) {
      o.delta[i] = uniform(rng, 0.5, 2.0);
    }
  }
  SparseMatrix h = o.delta.asDiagonal() * w;
  const CarStructure car = CarStructure::make(h, o.delta);

  Vector noise(o.n);
  for (Index i = 0; i < o.n; ++i) {
    noise[i] = opt.noise_scale * uniform(rng, 0.3, 2.0);
  }
  o.structure = FgpStructure::make(o.X, s, a, car, noise);

  o.params.beta = random_vector(rng, o.p);
  o.params.K = random_spd(rng, o.r);
  o.params.tau2 = uniform(rng, 0.5, 2.0);
  const GammaBounds b = *car.bounds();
  o.params.gamma = opt.gamma_fraction >= 0.0
                       ? opt.gamma_fraction * b.hi
                       : b.lo + (b.hi - b.lo) * uniform(rng, 0.1, 0.9);

  o.S = Matrix(s);
  o.A = Matrix(a);
  o.H = Matrix(h);
  o.V = noise.asDiagonal();
  o.Q = (o.delta.cwiseInverse().asDiagonal() *
         (Matrix::Identity(o.M, o.M) - o.params.gamma * o.H)) /
        o.params.tau2;
  o.Q = 0.5 * (o.Q + o.Q.transpose()).eval();
  const Matrix qinv = o.Q.inverse();
  o.C = o.S * o.params.K * o.S.transpose() + o.A * qinv * o.A.transpose() + o.V;
  o.C = 0.5 * (o.C + o.C.transpose()).eval();

  const Matrix l = Eigen::LLT<Matrix>(o.C).matrixL();
  o.z = o.X * o.params.beta + l * random_vector(rng, o.n);
  return o;
}

/// Dense D = (A Q^{-1} A' + V)^{-1}.
inline Matrix dense_D(const OracleInstance &o) {
  const Matrix qinv = o.Q.inverse();
  const Matrix dinv = o.A * qinv * o.A.transpose() + o.V;
  return dinv.inverse();
}

inline double dense_nll(const OracleInstance &o) {
  const Vector e = o.resid();
  const Eigen::LLT<Matrix> llt(o.C);
  const double quad = e.dot(llt.solve(e));
  return 0.5 * (quad + dense_logdet(o.C) + static_cast<double>(o.n) * std::log(2.0 * M_PI));
}

/// Dense conditional moments of eta given Z.
inline void dense_e_step(const OracleInstance &o, Vector &mu, Matrix &sigma) {
  const Matrix cinv = o.C.inverse();
  const Matrix ks = o.params.K * o.S.transpose();
  mu = ks * cinv * o.resid();
  sigma = o.params.K - ks * cinv * ks.transpose();
}

/// Dense predictive mean and variance of Y = X beta + S eta + A xi at rows
/// (xp, sp, ap) by conditioning the joint Gaussian of (Y_pred, Z).
inline void dense_predict(const OracleInstance &o, const Matrix &xp, const Matrix &sp,
                          const Matrix &ap, Vector &mean, Vector &var) {
  const Matrix qinv = o.Q.inverse();
  const Matrix cross = sp * o.params.K * o.S.transpose() + ap * qinv * o.A.transpose();
  const Matrix prior = sp * o.params.K * sp.transpose() + ap * qinv * ap.transpose();
  const Matrix cinv = o.C.inverse();
  mean = xp * o.params.beta + cross * cinv * o.resid();
  var = (prior - cross * cinv * cross.transpose()).diagonal();
}

/// Relative residual |C x - b| / |b| with the library's C^{-1}.
inline double inverse_residual(const OracleInstance &o, const Vector &b) {
  const FgpWorkspace ws(o.structure, o.params);
  const Vector x = ws.apply_C_inverse(b);
  return (o.C * x - b).norm() / b.norm();
}

struct IdentityReport {
  double inverse = 0.0;   // relative residual of C C^{-1} b
  double logdet = 0.0;    // |log|C| - dense|
  double nll = 0.0;       // |nll - dense nll|
  double e_step = 0.0;    // max abs deviation of mu and Sigma
  double predict = 0.0;   // max abs deviation of predictive mean and variance

  double worst() const { return std::max({inverse, logdet, nll, e_step, predict}); }
};

/// All Woodbury-side identities of one instance against the dense oracle.
/// Deviations are relative to the magnitude of the dense value (floored at 1).
inline IdentityReport check_identities(const OracleInstance &o, std::uint64_t probe_seed = 7) {
  IdentityReport rep;
  Rng64 rng(probe_seed ^ o.seed);
  const FgpWorkspace ws(o.structure, o.params);
  const Vector b = random_vector(rng, o.n);
  rep.inverse = (o.C * ws.apply_C_inverse(b) - b).norm() / b.norm();

  const double ld = dense_logdet(o.C);
  rep.logdet = std::abs(ws.log_det_C() - ld) / std::max(1.0, std::abs(ld));
  const double nll = dense_nll(o);
  rep.nll = std::abs(neg_log_likelihood(ws, o.params.beta, o.z) - nll) / std::max(1.0, std::abs(nll));

  if (o.r > 0) {
    Vector mu;
    Matrix sigma;
    dense_e_step(o, mu, sigma);
    const EStep e = e_step(ws, o.params.beta, o.z);
    const double scale = std::max(1.0, o.params.K.cwiseAbs().maxCoeff());
    rep.e_step = std::max((e.mu - mu).cwiseAbs().maxCoeff(),
                          (e.sigma - sigma).cwiseAbs().maxCoeff()) / scale;
  }

  // Predict at a handful of random cells with random basis rows.
  const Index m = std::min<Index>(10, o.M);
  PredictionDesign design;
  design.X = Matrix::Ones(m, o.p);
  if (o.p == 2) {
    design.X.col(1) = random_vector(rng, m);
  }
  Matrix sp = Matrix::Zero(m, o.r);
  Matrix ap = Matrix::Zero(m, o.M);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < o.r; ++j) {
      sp(i, j) = uniform(rng, 0.0, 1.0);
    }
    const Index c = uniform_int(rng, 0, o.M - 1);
    ap(i, c) = 1.0;
    design.cells.push_back(c);
  }
  design.S = sp.sparseView();
  Vector mean, var;
  dense_predict(o, design.X, sp, ap, mean, var);
  PredictionRequest req;
  req.batch_size = 3;
  const PredictionResult pr = predict(ws, o.params.beta, o.z, design, req);
  const double scale = std::max(1.0, var.cwiseAbs().maxCoeff());
  rep.predict = std::max((pr.mean - mean).cwiseAbs().maxCoeff(),
                         (pr.std.array().square().matrix() - var).cwiseAbs().maxCoeff()) /
                scale;
  return rep;
}

} // namespace fgp::testing

#endif // FGP_TEST_ORACLE_HPP_
