#pragma once

#include "blockea/grouped_design.hpp"

#include <optional>

namespace blockea {

/// Converged solution of the penalized program together with the subgradient
/// of the block norm, the active groups and convergence diagnostics.
struct BlockLassoFit {
  Vector beta;
  Vector S;
  double lambda = 0.0;
  double alpha = 2.0;
  IndexList active;   // sorted group indices with nonzero blocks
  Vector gamma;       // block norms ||beta_(j)||_alpha, one per group
  double kkt_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
};

struct SolverOptions {
  int max_iter = 200000;
  double kkt_tol_factor = 1e-9;   // tol = factor * (1 + ||X^T y / n||_inf)
  double activity_tol = 1e-10;    // gamma below this is zeroed exactly
  std::optional<Vector> init;
  std::vector<double>* objective_trace = nullptr;
};

namespace detail {

inline double penalty_value(const GroupedDesign& d, const Vector& beta,
                            double lambda) {
  double s = 0.0;
  for (int j = 0; j < d.J(); ++j)
    s += d.weight(j) * d.block_norm(beta, j, d.alpha);
  return lambda * s;
}

// prox of t * sum_j w_j ||.||_alpha for alpha in {1, 2}.
inline void prox_block_penalty(const GroupedDesign& d, Vector& v, double t) {
  if (d.alpha == 1.0) {
    for (int k = 0; k < d.p; ++k) {
      const double thr = t * d.w_coord[k];
      v[k] = v[k] > thr ? v[k] - thr : (v[k] < -thr ? v[k] + thr : 0.0);
    }
    return;
  }
  for (int j = 0; j < d.J(); ++j) {
    const auto& g = d.group(j);
    double nrm2 = 0.0;
    for (int k : g) nrm2 += v[k] * v[k];
    const double nrm = std::sqrt(nrm2);
    const double thr = t * d.weight(j);
    const double scale = nrm > thr ? 1.0 - thr / nrm : 0.0;
    for (int k : g) v[k] *= scale;
  }
}

}  // namespace detail

/// Stationarity violation at beta: the norm-of-block mismatch between the
/// correlation X^T (y - X beta)/n and a valid subgradient scaled by
/// lambda W. Zero exactly at a solution.
inline double kkt_residual_value(const GroupedDesign& d, const Vector& grad_corr,
                                 const Vector& beta, double lambda,
                                 double activity_tol = 1e-10) {
  double worst = 0.0;
  for (int j = 0; j < d.J(); ++j) {
    const auto& g = d.group(j);
    const double lw = lambda * d.weight(j);
    Vector b = gather(beta, g);
    Vector c = gather(grad_corr, g);
    const double gamma = lp_norm(b, d.alpha);
    if (gamma <= activity_tol) {
      worst = std::max(worst, std::max(0.0, lp_norm(c, d.alpha_star) - lw));
      continue;
    }
    if (d.alpha == 1.0) {
      for (int i = 0; i < b.size(); ++i) {
        if (b[i] != 0.0)
          worst = std::max(worst, std::abs(c[i] - lw * (b[i] > 0 ? 1.0 : -1.0)));
        else
          worst = std::max(worst, std::max(0.0, std::abs(c[i]) - lw));
      }
    } else {
      Vector ideal = eta_inv(b / gamma, d.rho());
      worst = std::max(worst, (c - lw * ideal).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

/// The unique subgradient S = (n lambda W)^{-1} X^T (y - X beta).
inline Vector extract_subgradient(const GroupedDesign& d, const Vector& y,
                                  const Vector& beta, double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("extract_subgradient: lambda <= 0");
  Vector corr = d.X.transpose() * (y - d.X * beta) / double(d.n);
  return corr.cwiseQuotient(d.w_coord) / lambda;
}

/// Minimizes ||y - X beta||^2 / (2n) + lambda sum_j w_j ||beta_(j)||_alpha
/// for alpha in {1, 2} by accelerated proximal gradient with a monotone
/// fallback step, converging on the KKT residual.
inline BlockLassoFit solve_block_lasso(const GroupedDesign& d, const Vector& y,
                                       double lambda,
                                       const SolverOptions& opts = {}) {
  if (!(lambda > 0)) throw std::invalid_argument("solver: lambda must be positive");
  if (d.alpha != 1.0 && d.alpha != 2.0)
    throw std::invalid_argument("solver: only alpha in {1, 2} is supported");
  if (!y.allFinite()) throw std::invalid_argument("solver: y has non-finite entries");

  const Vector Xty = d.X.transpose() * y / double(d.n);
  const double yty2n = y.squaredNorm() / (2.0 * double(d.n));
  const double kkt_tol = opts.kkt_tol_factor * (1.0 + Xty.cwiseAbs().maxCoeff());
  const double L = std::max(d.lipschitz, 1e-300);

  Vector beta = opts.init ? *opts.init : Vector::Zero(d.p);
  Vector psi_beta = d.Psi * beta;
  auto objective = [&](const Vector& b, const Vector& psi_b) {
    return yty2n - b.dot(Xty) + 0.5 * b.dot(psi_b) +
           detail::penalty_value(d, b, lambda);
  };
  double obj = objective(beta, psi_beta);
  if (opts.objective_trace) opts.objective_trace->push_back(obj);

  Vector beta_prev = beta, psi_beta_prev = psi_beta;
  double t = 1.0;
  double kkt = kkt_residual_value(d, Xty - psi_beta, beta, lambda, opts.activity_tol);
  int iter = 0;

  Vector cand, psi_cand, z, psi_z;
  while (kkt >= kkt_tol && iter < opts.max_iter) {
    ++iter;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double c = (t - 1.0) / t_next;
    z = beta + c * (beta - beta_prev);
    psi_z.noalias() = psi_beta + c * (psi_beta - psi_beta_prev);

    cand = z - (psi_z - Xty) / L;
    detail::prox_block_penalty(d, cand, lambda / L);
    psi_cand.noalias() = d.Psi * cand;
    double obj_cand = objective(cand, psi_cand);

    if (obj_cand > obj + 1e-12 * (1.0 + std::abs(obj))) {
      // momentum overshoot: take a plain descent step and restart
      cand = beta - (psi_beta - Xty) / L;
      detail::prox_block_penalty(d, cand, lambda / L);
      psi_cand.noalias() = d.Psi * cand;
      obj_cand = objective(cand, psi_cand);
      t = 1.0;
    } else {
      t = t_next;
    }

    beta_prev.swap(beta);
    psi_beta_prev.swap(psi_beta);
    beta = cand;
    psi_beta = psi_cand;
    obj = std::min(obj, obj_cand);
    if (opts.objective_trace) opts.objective_trace->push_back(obj_cand);
    kkt = kkt_residual_value(d, Xty - psi_beta, beta, lambda, opts.activity_tol);
  }
  if (kkt >= kkt_tol)
    throw ConvergenceError("solver: KKT residual " + std::to_string(kkt) +
                               " above tolerance after " +
                               std::to_string(iter) + " iterations",
                           kkt);

  BlockLassoFit fit;
  fit.lambda = lambda;
  fit.alpha = d.alpha;
  fit.gamma.resize(d.J());
  for (int j = 0; j < d.J(); ++j) {
    double gj = d.block_norm(beta, j, d.alpha);
    if (gj <= opts.activity_tol) {
      for (int k : d.group(j)) beta[k] = 0.0;
      gj = 0.0;
    }
    fit.gamma[j] = gj;
    if (gj > 0.0) fit.active.push_back(j);
  }
  fit.beta = beta;
  fit.S = extract_subgradient(d, y, beta, lambda);
  fit.iterations = iter;
  psi_beta.noalias() = d.Psi * fit.beta;
  fit.kkt_residual =
      kkt_residual_value(d, Xty - psi_beta, fit.beta, lambda, opts.activity_tol);
  fit.objective = objective(fit.beta, psi_beta);
  return fit;
}

/// Largest lambda with a nonzero solution: max_j ||X_(j)^T y||_{alpha*}/(n w_j).
inline double lambda_max(const GroupedDesign& d, const Vector& y) {
  Vector Xty = d.X.transpose() * y / double(d.n);
  double m = 0.0;
  for (int j = 0; j < d.J(); ++j)
    m = std::max(m, lp_norm(gather(Xty, d.group(j)), d.alpha_star) / d.weight(j));
  return m;
}

/// Largest lambda at which exactly k groups are active, located by bisection
/// from the all-zero threshold downwards. Throws if the active count jumps
/// past k, reporting the bracketing counts.
inline double select_lambda_by_active_groups(const GroupedDesign& d,
                                             const Vector& y, int k) {
  if (k < 1 || k > d.J())
    throw std::invalid_argument("select_lambda: k must be in 1..J");
  const double lmax = lambda_max(d, y);
  if (!(lmax > 0))
    throw std::runtime_error("select_lambda: X^T y = 0, no lambda activates any group");

  SolverOptions opts;
  auto count_at = [&](double lam) {
    auto fit = solve_block_lasso(d, y, lam, opts);
    opts.init = fit.beta;  // warm start along the path
    return static_cast<int>(fit.active.size());
  };

  double hi = lmax, lo = lmax;
  int hi_count = count_at(hi);
  if (hi_count >= k)
    throw std::runtime_error(
        "select_lambda: already " + std::to_string(hi_count) +
        " active groups at the all-zero threshold; cannot bracket k = " +
        std::to_string(k));
  int lo_count = hi_count;
  for (int t = 0; t < 60 && lo_count < k; ++t) {
    lo *= 0.5;
    lo_count = count_at(lo);
  }
  if (lo_count < k)
    throw std::runtime_error("select_lambda: no lambda in range reaches " +
                             std::to_string(k) + " active groups (max found " +
                             std::to_string(lo_count) + ")");

  for (int it = 0; it < 60 && (hi - lo) > 1e-4 * hi; ++it) {
    const double mid = 0.5 * (hi + lo);
    if (count_at(mid) >= k)
      lo = mid;
    else
      hi = mid;
  }
  lo_count = count_at(lo);
  if (lo_count != k)
    throw std::runtime_error(
        "select_lambda: active-group count jumps from " +
        std::to_string(count_at(hi)) + " to " + std::to_string(lo_count) +
        " across the bracket; no lambda gives exactly " + std::to_string(k));
  return lo;
}

}  // namespace blockea
