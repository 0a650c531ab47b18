#ifndef FGP_BLOCK_HPP_
#define FGP_BLOCK_HPP_

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fgp/basis.hpp"
#include "fgp/car.hpp"
#include "fgp/error.hpp"
#include "fgp/likelihood.hpp"
#include "fgp/parallel.hpp"
#include "fgp/types.hpp"

namespace fgp {

/// Assignment of the M lattice cells to J contiguous blocks.
struct BlockPartition {
  Index J = 1;
  std::vector<Index> block_of;            // cell -> block
  std::vector<std::vector<Index>> cells;  // block -> ascending cells
};

/// Blocks of consecutive cells in natural order; sizes differ by at most one
/// and the first M mod J blocks take the extra cell.
inline BlockPartition partition_cells(Index m, Index J) {
  if (J < 1 || J > m) {
    throw ConfigError("block count must lie in [1, " + std::to_string(m) + "], got " +
                      std::to_string(J));
  }
  BlockPartition part;
  part.J = J;
  part.block_of.resize(static_cast<std::size_t>(m));
  part.cells.resize(static_cast<std::size_t>(J));
  const Index base = m / J, extra = m % J;
  Index cell = 0;
  for (Index j = 0; j < J; ++j) {
    const Index size = base + (j < extra ? 1 : 0);
    for (Index k = 0; k < size; ++k, ++cell) {
      part.block_of[cell] = j;
      part.cells[j].push_back(cell);
    }
  }
  return part;
}

/// 1-D: intervals; 2-D: row bands (cells are numbered row-major).
inline BlockPartition partition_lattice(const Lattice &lattice, Index J) {
  return partition_cells(lattice.size(), J);
}

/// H with every edge between different blocks removed.
inline SparseMatrix prune_cross_edges(const SparseMatrix &h, const BlockPartition &part) {
  std::vector<Triplet> entries;
  for (Index k = 0; k < h.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(h, k); it; ++it) {
      if (part.block_of[it.row()] == part.block_of[it.col()]) {
        entries.emplace_back(it.row(), it.col(), it.value());
      }
    }
  }
  SparseMatrix out(h.rows(), h.cols());
  out.setFromTriplets(entries.begin(), entries.end());
  return out;
}

/// What block j sends to the coordinator.
struct BlockSummary {
  double a = 0.0; // Z~_j' D_j Z~_j
  Vector b;       // S_j' D_j Z~_j
  Matrix G;       // S_j' D_j S_j
  double ld = 0.0; // log|D_j^{-1}|
};

/// Optional per-block (tau^2, gamma); empty vectors mean "use the shared value".
struct BlockOverrides {
  std::vector<double> tau2;
  std::vector<double> gamma;
};

/// FGP with a block-diagonal CAR precision.
class BlockFgp {
public:
  /// Splits `full` along `part`. Block CAR models inherit the admissible
  /// gamma interval of the full graph (valid for every subgraph) unless
  /// exact_block_bounds is set.
  static BlockFgp make(const FgpStructure &full, BlockPartition part,
                       bool exact_block_bounds = false) {
    const Index m = full.M();
    if (m == 0) {
      throw DataError("Block-FGP needs a lattice component");
    }
    if (static_cast<Index>(part.block_of.size()) != m) {
      throw DimensionMismatch("partition does not cover the lattice");
    }
    BlockFgp out;
    out.part_ = std::move(part);
    const Index J = out.part_.J;
    const SparseMatrix pruned = prune_cross_edges(full.car().proximity(), out.part_);
    out.pruned_car_ = CarStructure::make(pruned, full.car().delta(), full.car().bounds());

    // Rows of each block, by the cell of each observation.
    std::vector<Index> row_cell(static_cast<std::size_t>(full.n()), -1);
    for (Index k = 0; k < full.A().outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(full.A(), k); it; ++it) {
        if (row_cell[it.row()] >= 0) {
          throw DataError("each observation must belong to exactly one cell");
        }
        row_cell[it.row()] = it.col();
      }
    }
    out.rows_.resize(static_cast<std::size_t>(J));
    for (Index i = 0; i < full.n(); ++i) {
      if (row_cell[i] < 0) {
        throw LocationOutsideLattice(i);
      }
      out.rows_[out.part_.block_of[row_cell[i]]].push_back(i);
    }

    std::vector<Index> local(static_cast<std::size_t>(m));
    for (Index j = 0; j < J; ++j) {
      const auto &cells = out.part_.cells[j];
      for (std::size_t k = 0; k < cells.size(); ++k) {
        local[cells[k]] = static_cast<Index>(k);
      }
    }

    const Eigen::SparseMatrix<double, Eigen::RowMajor> s_rows = full.S();
    out.blocks_.resize(static_cast<std::size_t>(J));
    for (Index j = 0; j < J; ++j) {
      const auto &cells = out.part_.cells[j];
      const auto &rows = out.rows_[j];
      const Index mj = static_cast<Index>(cells.size());
      const Index nj = static_cast<Index>(rows.size());

      std::vector<Triplet> h_entries;
      for (const Index c : cells) {
        for (SparseMatrix::InnerIterator it(pruned, c); it; ++it) {
          h_entries.emplace_back(local[it.row()], local[c], it.value());
        }
      }
      SparseMatrix hj(mj, mj);
      hj.setFromTriplets(h_entries.begin(), h_entries.end());
      Vector dj(mj);
      for (Index k = 0; k < mj; ++k) {
        dj[k] = full.car().delta()[cells[k]];
      }
      CarStructure carj = exact_block_bounds || !full.car().bounds()
                              ? CarStructure::make(hj, dj)
                              : CarStructure::make(hj, dj, full.car().bounds());

      Matrix xj(nj, full.p());
      Vector vj(nj);
      std::vector<Triplet> s_entries, a_entries;
      for (Index k = 0; k < nj; ++k) {
        const Index i = rows[k];
        xj.row(k) = full.X().row(i);
        vj[k] = full.noise_var()[i];
        a_entries.emplace_back(k, local[row_cell[i]], 1.0);
      }
      SparseMatrix sj(nj, full.r());
      for (Index k = 0; k < nj; ++k) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(s_rows, rows[k]); it;
             ++it) {
          s_entries.emplace_back(k, it.col(), it.value());
        }
      }
      sj.setFromTriplets(s_entries.begin(), s_entries.end());
      SparseMatrix aj(nj, mj);
      aj.setFromTriplets(a_entries.begin(), a_entries.end());
      out.blocks_[j] = std::make_shared<const FgpStructure>(
          FgpStructure::make(std::move(xj), std::move(sj), std::move(aj), std::move(carj),
                             std::move(vj)));
    }
    out.n_ = full.n();
    out.r_ = full.r();
    out.p_ = full.p();
    return out;
  }

  Index J() const { return part_.J; }
  Index n() const { return n_; }
  Index r() const { return r_; }
  const BlockPartition &partition() const { return part_; }
  const FgpStructure &block(Index j) const { return *blocks_[j]; }
  /// Observation rows (into the full data) of block j, ascending.
  const std::vector<Index> &rows(Index j) const { return rows_[j]; }
  /// Full-size CAR model with the cross-block edges removed.
  const CarStructure &pruned_car() const { return pruned_car_; }

  double tau2_of(Index j, const FgpParams &p, const BlockOverrides *ov) const {
    return ov && !ov->tau2.empty() ? ov->tau2.at(j) : p.tau2;
  }
  double gamma_of(Index j, const FgpParams &p, const BlockOverrides *ov) const {
    return ov && !ov->gamma.empty() ? ov->gamma.at(j) : p.gamma;
  }

  void check_overrides(const BlockOverrides *ov) const {
    if (!ov) {
      return;
    }
    if ((!ov->tau2.empty() && static_cast<Index>(ov->tau2.size()) != J()) ||
        (!ov->gamma.empty() && static_cast<Index>(ov->gamma.size()) != J())) {
      throw DimensionMismatch("per-block overrides need one value per block");
    }
  }

  GgmFactor block_factor(Index j, const FgpParams &p, const BlockOverrides *ov) const {
    return GgmFactor::for_car(block(j), tau2_of(j, p, ov), gamma_of(j, p, ov));
  }

  template <typename Derived>
  Vector gather(Index j, const Eigen::MatrixBase<Derived> &v) const {
    const auto &rows = rows_[j];
    Vector out(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out[static_cast<Index>(k)] = v[rows[k]];
    }
    return out;
  }

private:
  BlockPartition part_;
  CarStructure pruned_car_;
  std::vector<std::vector<Index>> rows_;
  std::vector<std::shared_ptr<const FgpStructure>> blocks_;
  Index n_ = 0, r_ = 0, p_ = 0;
};

/// a_j, b_j, G_j, ld_j from block-local data only. A block without
/// observations contributes zeros.
inline BlockSummary block_summary(const BlockFgp &model, Index j, const FgpParams &params,
                                  const Vector &z, const BlockOverrides *ov = nullptr) {
  const FgpStructure &st = model.block(j);
  const GgmFactor ggm = model.block_factor(j, params, ov);
  BlockSummary out;
  const Vector zt = model.gather(j, z) - st.X() * params.beta;
  const Vector dz = ggm.apply_D(zt);
  out.a = zt.dot(dz);
  out.b = st.S().transpose() * dz;
  out.G = ggm.StDS();
  out.ld = ggm.logdet_Dinv();
  return out;
}

inline std::vector<BlockSummary> block_summaries(const BlockFgp &model, const FgpParams &params,
                                                 const Vector &z, int workers,
                                                 const BlockOverrides *ov = nullptr) {
  if (z.size() != model.n()) {
    throw DimensionMismatch("Z must have n entries");
  }
  model.check_overrides(ov);
  std::vector<BlockSummary> out(static_cast<std::size_t>(model.J()));
  parallel_for(out.size(), workers, [&](std::size_t j) {
    out[j] = block_summary(model, static_cast<Index>(j), params, z, ov);
  });
  return out;
}

/// Folds summaries in ascending block order and evaluates the likelihood,
/// including the (n/2) log 2 pi constant.
inline double block_neg_log_likelihood(const BlockFgp &model, const FgpParams &params,
                                       const Vector &z, int workers = 1,
                                       const BlockOverrides *ov = nullptr) {
  const Index r = model.r();
  if (params.K.rows() != r || params.K.cols() != r) {
    throw DimensionMismatch("K must be r x r");
  }
  const auto summaries = block_summaries(model, params, z, workers, ov);
  double a = 0.0, ld = 0.0;
  Vector b = Vector::Zero(r);
  Matrix g = Matrix::Zero(r, r);
  for (const auto &s : summaries) {
    a += s.a;
    ld += s.ld;
    b += s.b;
    g += s.G;
  }
  double total = a + ld + static_cast<double>(model.n()) * kLog2Pi;
  if (r > 0) {
    const linalg::DenseCholesky kc = factor_covariance(params.K);
    Matrix kinv = kc.inverse();
    kinv = 0.5 * (kinv + kinv.transpose()).eval();
    const linalg::DenseCholesky inner(Matrix(kinv + g));
    total += -inner.half_solve(b).squaredNorm() + inner.logdet() + kc.logdet();
  }
  return 0.5 * total;
}

/// C^{-1} b with C^{-1} = blockdiag(D_j) - D S (K^{-1} + sum G_j)^{-1} S'D.
inline Vector block_apply_C_inverse(const BlockFgp &model, const FgpParams &params,
                                    const Vector &b, int workers = 1,
                                    const BlockOverrides *ov = nullptr) {
  if (b.size() != model.n()) {
    throw DimensionMismatch("right-hand side must have n entries");
  }
  model.check_overrides(ov);
  const Index J = model.J();
  const Index r = model.r();
  std::vector<std::unique_ptr<GgmFactor>> factors(static_cast<std::size_t>(J));
  std::vector<Vector> db(static_cast<std::size_t>(J));
  parallel_for(static_cast<std::size_t>(J), workers, [&](std::size_t j) {
    const Index jj = static_cast<Index>(j);
    factors[j] = std::make_unique<GgmFactor>(model.block_factor(jj, params, ov));
    db[j] = factors[j]->apply_D(model.gather(jj, b));
  });
  Vector out(model.n());
  for (Index j = 0; j < J; ++j) {
    const auto &rows = model.rows(j);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out[rows[k]] = db[j][static_cast<Index>(k)];
    }
  }
  if (r == 0) {
    return out;
  }
  Vector sdb = Vector::Zero(r);
  Matrix g = Matrix::Zero(r, r);
  for (Index j = 0; j < J; ++j) {
    sdb += model.block(j).S().transpose() * db[j];
    g += factors[j]->StDS();
  }
  const linalg::DenseCholesky kc = factor_covariance(params.K);
  Matrix kinv = kc.inverse();
  kinv = 0.5 * (kinv + kinv.transpose()).eval();
  const Vector t = linalg::DenseCholesky(Matrix(kinv + g)).solve(sdb);
  for (Index j = 0; j < J; ++j) {
    const Vector corr = factors[j]->apply_D(Vector(model.block(j).S() * t));
    const auto &rows = model.rows(j);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out[rows[k]] -= corr[static_cast<Index>(k)];
    }
  }
  return out;
}

/// blockdiag(Q_1, ..., Q_J) in the full cell numbering.
inline SparseMatrix assemble_block_precision(const BlockFgp &model, const FgpParams &params,
                                             const BlockOverrides *ov = nullptr) {
  model.check_overrides(ov);
  const auto &part = model.partition();
  std::vector<Triplet> entries;
  for (Index j = 0; j < model.J(); ++j) {
    const SparseMatrix qj =
        car_precision(model.block(j).car(), model.tau2_of(j, params, ov), model.gamma_of(j, params, ov));
    const auto &cells = part.cells[j];
    for (Index k = 0; k < qj.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(qj, k); it; ++it) {
        entries.emplace_back(cells[it.row()], cells[it.col()], it.value());
      }
    }
  }
  const Index m = static_cast<Index>(part.block_of.size());
  SparseMatrix q(m, m);
  q.setFromTriplets(entries.begin(), entries.end());
  return q;
}

} // namespace fgp

#endif // FGP_BLOCK_HPP_
