#ifndef FGP_PREDICT_HPP_
#define FGP_PREDICT_HPP_

#include <algorithm>
#include <string>
#include <vector>

#include "fgp/em.hpp"
#include "fgp/error.hpp"
#include "fgp/likelihood.hpp"
#include "fgp/parallel.hpp"
#include "fgp/types.hpp"

namespace fgp {

/// Rows of the prediction design: covariates, basis values and the lattice
/// cell of each prediction location (-1 when the model has no lattice).
struct PredictionDesign {
  Matrix X;
  SparseMatrix S;
  std::vector<Index> cells;
};

struct PredictionRequest {
  bool want_std = true;
  Index batch_size = 256;
  int workers = 1;
};

struct PredictionResult {
  Vector mean;
  Vector std; // empty unless requested
  std::vector<Index> cells;
};

/// mu_xi = Q^{-1} A'C^{-1}(Z - X beta).
inline Vector posterior_xi_mean(const FgpWorkspace &ws, const Vector &beta, const Vector &z) {
  const FgpStructure &st = ws.structure();
  if (st.M() == 0) {
    return Vector(0);
  }
  const Vector c = ws.apply_C_inverse(Vector(z - st.X() * beta));
  return ws.ggm().precision_factor().solve(Vector(st.A().transpose() * c));
}

/// Predictive mean and standard error of Y at new locations.
///
/// The variance uses the joint posterior of (eta, xi): for a location with
/// basis row s and cell c,
///   var = (s - w_c)' Sigma_eta (s - w_c) + [P^{-1}]_cc,  w_c = W'P^{-1} e_c,
/// with P = Q + A'V^{-1}A and W = A'V^{-1}S. Columns of P^{-1} are obtained
/// in batches of unique cells.
inline PredictionResult predict(const FgpWorkspace &ws, const Vector &beta, const Vector &z,
                                const PredictionDesign &design,
                                const PredictionRequest &req = {}) {
  const FgpStructure &st = ws.structure();
  const Index m = design.X.rows();
  const Index r = st.r();
  const Index M = st.M();
  if (design.X.cols() != st.p() || design.S.cols() != r || design.S.rows() != m ||
      static_cast<Index>(design.cells.size()) != m) {
    throw DimensionMismatch("prediction design does not match the fitted structure");
  }
  if (beta.size() != st.p() || z.size() != st.n()) {
    throw DimensionMismatch("beta or Z has the wrong length");
  }
  for (Index i = 0; i < m; ++i) {
    const Index c = design.cells[i];
    if (M > 0 && (c < 0 || c >= M)) {
      throw LocationOutsideLattice(i);
    }
  }

  PredictionResult out;
  out.cells = design.cells;
  const Vector resid = z - st.X() * beta;
  const Vector cinv = ws.apply_C_inverse(resid);
  out.mean = design.X * beta;
  if (r > 0) {
    const Vector mu_eta = ws.K() * (st.S().transpose() * cinv);
    out.mean += design.S * mu_eta;
  }
  if (M > 0) {
    const Vector mu_xi =
        ws.ggm().precision_factor().solve(Vector(st.A().transpose() * cinv));
    for (Index i = 0; i < m; ++i) {
      out.mean[i] += mu_xi[design.cells[i]];
    }
  }
  if (!req.want_std) {
    return out;
  }

  const Matrix sigma = r > 0 ? e_step(ws, beta, z).sigma : Matrix(0, 0);
  const Eigen::SparseMatrix<double, Eigen::RowMajor> sp = design.S;
  Vector var = Vector::Zero(m);

  auto basis_row = [&](Index i) {
    Vector s = Vector::Zero(r);
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(sp, i); it; ++it) {
      s[it.col()] = it.value();
    }
    return s;
  };

  if (M == 0) {
    parallel_for(static_cast<std::size_t>(m), req.workers, [&](std::size_t i) {
      const Vector s = basis_row(static_cast<Index>(i));
      var[static_cast<Index>(i)] = s.dot(sigma * s);
    });
  } else {
    // Group locations by cell.
    std::vector<Index> unique(design.cells);
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    std::vector<Index> slot(static_cast<std::size_t>(M), -1);
    for (std::size_t k = 0; k < unique.size(); ++k) {
      slot[unique[k]] = static_cast<Index>(k);
    }
    std::vector<std::vector<Index>> members(unique.size());
    for (Index i = 0; i < m; ++i) {
      members[slot[design.cells[i]]].push_back(i);
    }

    const Index batch = std::max<Index>(1, req.batch_size);
    const Index nunique = static_cast<Index>(unique.size());
    const std::size_t nbatches = static_cast<std::size_t>((nunique + batch - 1) / batch);
    const SparseMatrix wt = st.W().transpose();
    parallel_for(nbatches, req.workers, [&](std::size_t bi) {
      const Index b0 = static_cast<Index>(bi) * batch;
      const Index b = std::min(batch, nunique - b0);
      Matrix rhs = Matrix::Zero(M, b);
      for (Index k = 0; k < b; ++k) {
        rhs(unique[b0 + k], k) = 1.0;
      }
      const Matrix cols = ws.ggm().capacitance_factor().solve(rhs);
      const Matrix wc = r > 0 ? Matrix(wt * cols) : Matrix(0, b);
      for (Index k = 0; k < b; ++k) {
        const double pcc = cols(unique[b0 + k], k);
        for (const Index i : members[b0 + k]) {
          double v = pcc;
          if (r > 0) {
            const Vector d = basis_row(i) - wc.col(k);
            v += d.dot(sigma * d);
          }
          var[i] = v;
        }
      }
    });
  }
  out.std = var.cwiseMax(0.0).cwiseSqrt();
  return out;
}

} // namespace fgp

#endif // FGP_PREDICT_HPP_
