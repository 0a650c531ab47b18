#ifndef FGP_EM_HPP_
#define FGP_EM_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "fgp/error.hpp"
#include "fgp/likelihood.hpp"
#include "fgp/nelder_mead.hpp"
#include "fgp/types.hpp"

namespace fgp {

struct EmConfig {
  int max_iters = 500;
  /// Stopping threshold on the change of theta; 0 selects 1e-6 * max(r^2, 1).
  double zeta = 0.0;
  /// Objective evaluations per inner (tau^2, gamma) search.
  int inner_evals = 200;

  double zeta_for(Index r) const {
    if (zeta > 0.0) {
      return zeta;
    }
    const double rr = static_cast<double>(r);
    return 1e-6 * std::max(rr * rr, 1.0);
  }
  void validate() const {
    if (max_iters < 1) {
      throw ConfigError("em.max_iters must be at least 1");
    }
    if (zeta < 0.0) {
      throw ConfigError("em.zeta must be positive");
    }
    if (inner_evals < 1) {
      throw ConfigError("em.inner_evals must be at least 1");
    }
  }
};

struct FitReport {
  FgpParams params;
  std::vector<double> trace; // entry 0 is the starting value
  int iterations = 0;
  bool converged = false;
  double seconds = 0.0;
};

/// Conditional moments of eta given Z.
struct EStep {
  Vector mu;
  Matrix sigma;
};

/// mu = K S'C^{-1}(Z - X beta) and Sigma = K - K S'C^{-1}S K, evaluated as
/// Sigma = (K^{-1} + S'DS)^{-1} and mu = Sigma S'D(Z - X beta).
inline EStep e_step(const FgpWorkspace &ws, const Vector &beta, const Vector &z) {
  const FgpStructure &st = ws.structure();
  const Index r = st.r();
  EStep out;
  if (r == 0) {
    out.mu = Vector(0);
    out.sigma = Matrix(0, 0);
    return out;
  }
  out.sigma = ws.inner_factor().inverse();
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
  const Vector resid = z - st.X() * beta;
  const Vector sd = st.S().transpose() * ws.apply_D(resid);
  out.mu = out.sigma * sd;
  return out;
}

/// (X'DX)^{-1} X'D y, the GLS estimator under covariance D^{-1}.
inline Vector gls_beta(const GgmFactor &ggm, const Vector &y) {
  const FgpStructure &st = ggm.structure();
  const Index p = st.p();
  if (p == 0) {
    return Vector(0);
  }
  Matrix rhs(st.n(), p + 1);
  rhs << st.X(), y;
  const Matrix d = ggm.apply_D(rhs);
  const Matrix xtdx = st.X().transpose() * d.leftCols(p);
  const Vector xtdy = st.X().transpose() * d.col(p);
  try {
    return linalg::DenseCholesky(xtdx).solve(xtdy);
  } catch (const NotPositiveDefinite &) {
    throw SingularGram("X'DX is singular; covariates are collinear");
  }
}

struct MStep {
  Vector beta;
  Matrix K;
};

/// Closed-form part of the M-step at fixed (tau^2, gamma).
inline MStep m_step_closed(const GgmFactor &ggm, const Vector &z, const EStep &e) {
  const FgpStructure &st = ggm.structure();
  MStep out;
  Vector target = z;
  if (st.r() > 0) {
    target -= st.S() * e.mu;
  }
  out.beta = gls_beta(ggm, target);
  out.K = e.sigma + e.mu * e.mu.transpose();
  return out;
}

/// f(tau^2, gamma) = log|D^{-1}| + u'Du + tr(S'DS Sigma), with
/// u = Z - X beta_hat - S mu. Expanding u'Du gives the familiar
/// Z~'DZ~ - 2 Z~'DS mu + mu'S'DS mu form.
class ProfileObjective {
public:
  struct Evaluation {
    double value = std::numeric_limits<double>::infinity();
    double tau2 = 0.0;
    double gamma = 0.0;
    Vector beta;
    std::shared_ptr<const GgmFactor> ggm;
  };

  ProfileObjective(const FgpStructure &st, Vector z, EStep e)
      : st_(&st), z_(std::move(z)), e_(std::move(e)) {}

  Evaluation evaluate(double tau2, double gamma) const {
    Evaluation ev;
    ev.tau2 = tau2;
    ev.gamma = gamma;
    ev.ggm = std::make_shared<const GgmFactor>(GgmFactor::for_car(*st_, tau2, gamma));
    Vector target = z_;
    if (st_->r() > 0) {
      target -= st_->S() * e_.mu;
    }
    ev.beta = gls_beta(*ev.ggm, target);
    const Vector u = target - st_->X() * ev.beta;
    double value = ev.ggm->logdet_Dinv() + u.dot(Vector(ev.ggm->apply_D(u)));
    if (st_->r() > 0) {
      value += (ev.ggm->StDS().cwiseProduct(e_.sigma)).sum();
    }
    ev.value = value;
    return ev;
  }

  /// Inadmissible or numerically failing points map to +infinity.
  double operator()(double tau2, double gamma) const {
    try {
      return evaluate(tau2, gamma).value;
    } catch (const NumericalError &) {
      return std::numeric_limits<double>::infinity();
    } catch (const DataError &) {
      return std::numeric_limits<double>::infinity();
    }
  }

private:
  const FgpStructure *st_;
  Vector z_;
  EStep e_;
};

namespace detail {

inline double sample_variance(const Vector &z) {
  const double n = static_cast<double>(z.size());
  const double mean = z.mean();
  return (z.array() - mean).square().sum() / (n - 1.0);
}

inline Vector theta_vector(const FgpParams &p) {
  const Index r = p.K.rows();
  Vector out(p.beta.size() + r * (r + 1) / 2 + 2);
  Index k = 0;
  for (Index i = 0; i < p.beta.size(); ++i) {
    out[k++] = p.beta[i];
  }
  for (Index j = 0; j < r; ++j) {
    for (Index i = 0; i <= j; ++i) {
      out[k++] = p.K(i, j);
    }
  }
  out[k++] = p.tau2;
  out[k++] = p.gamma;
  return out;
}

} // namespace detail

/// tau^2 = 0.1 var(Z), K = 0.9 var(Z) I, gamma at the middle of the shrunk
/// admissible interval, beta by ordinary least squares.
inline FgpParams initial_params(const FgpStructure &st, const Vector &z) {
  if (z.size() != st.n()) {
    throw DimensionMismatch("Z must have n entries");
  }
  if (st.n() < 2) {
    throw DegenerateData("at least two observations are required");
  }
  const double v = detail::sample_variance(z);
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw DegenerateData("observations have zero variance");
  }
  FgpParams p;
  p.tau2 = 0.1 * v;
  p.K = 0.9 * v * Matrix::Identity(st.r(), st.r());
  const auto &bounds = st.car().bounds();
  p.gamma = bounds ? bounds->midpoint() : 0.0;
  if (st.p() > 0) {
    try {
      const linalg::DenseCholesky xtx(Matrix(st.X().transpose() * st.X()));
      p.beta = xtx.solve(Vector(st.X().transpose() * z));
    } catch (const NotPositiveDefinite &) {
      throw SingularGram("X'X is singular; covariates are collinear");
    }
  } else {
    p.beta = Vector(0);
  }
  return p;
}

/// EM with eta as missing data. Every iterate keeps or lowers the negative
/// log-likelihood: the inner search starts at the current (tau^2, gamma) and
/// never returns a worse point.
inline FitReport fit_em(const FgpStructure &st, const Vector &z, const EmConfig &cfg = {},
                        std::optional<FgpParams> init = std::nullopt) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  if (z.size() != st.n()) {
    throw DimensionMismatch("Z must have n entries");
  }
  if (!z.allFinite()) {
    throw DataError("observations must be finite");
  }
  const FgpParams init_default = initial_params(st, z);
  FgpParams params = init ? *init : init_default;
  check_params(st, params);

  const double v = detail::sample_variance(z);
  const double zeta = cfg.zeta_for(st.r());
  const auto &bounds = st.car().bounds();
  const bool search_tau = st.M() > 0;
  const bool search_gamma = search_tau && bounds.has_value();

  double log_tau_lo = std::log(1e-6 * v), log_tau_hi = std::log(1e3 * v);
  log_tau_lo = std::min(log_tau_lo, std::log(params.tau2));
  log_tau_hi = std::max(log_tau_hi, std::log(params.tau2));

  auto ggm = std::make_shared<const GgmFactor>(GgmFactor::for_car(st, params.tau2, params.gamma));
  auto ws = std::make_unique<FgpWorkspace>(ggm, params.K);

  FitReport report;
  report.trace.push_back(neg_log_likelihood(*ws, params.beta, z));
  double best_nll = report.trace.back();
  FgpParams best = params;

  // Inner simplex size follows the size of the previous move.
  double move_tau = 0.2, move_gamma = search_gamma ? 0.05 * (bounds->box_hi() - bounds->box_lo()) : 0.0;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const EStep e = e_step(*ws, params.beta, z);
    const ProfileObjective objective(st, z, e);

    ProfileObjective::Evaluation chosen = objective.evaluate(params.tau2, params.gamma);
    if (search_tau) {
      const Index dim = search_gamma ? 2 : 1;
      Vector x0(dim), lo(dim), hi(dim), step(dim);
      x0[0] = std::log(params.tau2);
      lo[0] = log_tau_lo;
      hi[0] = log_tau_hi;
      step[0] = std::clamp(move_tau, 1e-4, 0.2);
      if (search_gamma) {
        x0[1] = params.gamma;
        lo[1] = bounds->box_lo();
        hi[1] = bounds->box_hi();
        const double width = hi[1] - lo[1];
        step[1] = std::clamp(move_gamma, 1e-4 * width, 0.05 * width);
      }
      auto f = [&](const Vector &x) {
        return objective(std::exp(x[0]), search_gamma ? x[1] : params.gamma);
      };
      NelderMeadOptions opt;
      opt.max_evals = cfg.inner_evals;
      opt.step = step;
      opt.xtol = 1e-7;
      NelderMeadResult nm = nelder_mead(f, x0, lo, hi, opt);
      if (!nm.converged) {
        // One restart from the best point found.
        opt.step = 0.1 * step;
        const NelderMeadResult again = nelder_mead(f, nm.x, lo, hi, opt);
        if (again.value <= nm.value) {
          nm = again;
        }
      }
      if (nm.value < chosen.value) {
        chosen = objective.evaluate(std::exp(nm.x[0]), search_gamma ? nm.x[1] : params.gamma);
      }
    }

    move_tau = 4.0 * std::abs(std::log(chosen.tau2) - std::log(params.tau2));
    move_gamma = 4.0 * std::abs(chosen.gamma - params.gamma);

    FgpParams next;
    next.beta = chosen.beta;
    next.K = e.sigma + e.mu * e.mu.transpose();
    next.tau2 = chosen.tau2;
    next.gamma = chosen.gamma;

    ws = std::make_unique<FgpWorkspace>(chosen.ggm, next.K);
    const double nll = neg_log_likelihood(*ws, next.beta, z);
    const double delta = (detail::theta_vector(next) - detail::theta_vector(params)).norm();
    report.trace.push_back(nll);
    report.iterations = it;
    params = std::move(next);
    if (nll <= best_nll) {
      best_nll = nll;
      best = params;
    }
    if (delta < zeta) {
      report.converged = true;
      break;
    }
  }

  report.params = best;
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

} // namespace fgp

#endif // FGP_EM_HPP_
