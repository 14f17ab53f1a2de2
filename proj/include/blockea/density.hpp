#pragma once

#include "blockea/chart.hpp"
#include "blockea/rng.hpp"

#include <functional>

namespace blockea {

/// Distribution of the noise vector. The density used throughout is the one
/// of eps/sqrt(n); Gaussian errors give N(0, sigma^2/n I_n).
struct NoiseModel {
  bool is_gaussian = true;
  double sigma2 = 1.0;
  // custom case: joint log density of eps/sqrt(n) and a sampler for eps
  std::function<double(const Vector&)> custom_log_density;
  std::function<Vector(std::mt19937_64&, int)> custom_sampler;

  static NoiseModel gaussian(double sigma2) {
    if (!(sigma2 > 0)) throw std::invalid_argument("noise: sigma2 must be positive");
    NoiseModel m;
    m.is_gaussian = true;
    m.sigma2 = sigma2;
    return m;
  }

  static NoiseModel custom(std::function<double(const Vector&)> log_density,
                           std::function<Vector(std::mt19937_64&, int)> sampler) {
    NoiseModel m;
    m.is_gaussian = false;
    m.custom_log_density = std::move(log_density);
    m.custom_sampler = std::move(sampler);
    return m;
  }

  /// log g_n(v) for v = eps/sqrt(n) of length n.
  double log_gn(const Vector& v) const {
    const int n = static_cast<int>(v.size());
    if (is_gaussian)
      return -0.5 * n * std::log(2.0 * M_PI * sigma2 / n) -
             0.5 * n * v.squaredNorm() / sigma2;
    return custom_log_density(v);
  }

  Vector sample_eps(std::mt19937_64& gen, int n) const {
    if (is_gaussian)
      return std::sqrt(sigma2) * standard_normal_vector(gen, n);
    return custom_sampler(gen, n);
  }
};

/// log of the N(0, c I_n) density at v.
inline double log_phi(const Vector& v, double c) {
  return -0.5 * v.size() * std::log(2.0 * M_PI * c) - 0.5 * v.squaredNorm() / c;
}

/// The differential matrix of the restricted mapping: columns
/// [ (Psi o eta)_A | {(r o Psi) D + lambda W} T ], a p x n (or p x p when
/// p < n) matrix.
inline Matrix build_M(const AugmentedPoint& pt, const Chart& ch,
                      const GroupedDesign& d, double lambda) {
  const int na = static_cast<int>(pt.A.size());
  const int nf = static_cast<int>(ch.F.size());
  Matrix M(d.p, na + nf);
  for (int i = 0; i < na; ++i) {
    const int j = pt.A[i];
    M.col(i) = gather_cols(d.Psi, d.group(j)) * eta_block(d, d.block(pt.s, j));
  }
  if (nf > 0) {
    Matrix right = lambda * d.w_coord.asDiagonal() * ch.T;
    if (d.alpha != 1.0) {
      // (r o Psi) D = Psi diag(c) with c_k = r_j eta'(s_k) on active groups
      const double rho = d.rho();
      Vector c = Vector::Zero(d.p);
      for (int i = 0; i < na; ++i)
        for (int k : d.group(pt.A[i])) c[k] = pt.r[i] * eta_prime(pt.s[k], rho);
      right.noalias() += d.Psi * (c.asDiagonal() * ch.T);
    }
    M.rightCols(nf) = right;
  }
  return M;
}

/// Signed Jacobian of the mapping to noise coordinates: det of sqrt(n)(X^T)^+ M
/// (p >= n) or of M itself (p < n).
inline double jacobian(const AugmentedPoint& pt, const Chart& ch,
                       const GroupedDesign& d, double lambda) {
  Matrix M = build_M(pt, ch, d, lambda);
  if (d.p >= d.n) return (d.B * M).determinant();
  return M.determinant();
}

/// H(r_A, s, A; beta0, lambda) = Psi b + lambda W s - Psi beta0.
inline Vector h_map(const AugmentedPoint& pt, const GroupedDesign& d,
                    const Vector& beta0, double lambda) {
  Vector b = reconstruct_beta(pt, d);
  return d.Psi * (b - beta0) + lambda * d.w_coord.cwiseProduct(pt.s);
}

/// Coordinates of H in noise space: equals eps/sqrt(n) at a point obtained
/// from a fit of y = X beta0 + eps. For p < n returns H itself, whose law is
/// that of X^T eps / n.
inline Vector htilde(const AugmentedPoint& pt, const GroupedDesign& d,
                     const Vector& beta0, double lambda) {
  Vector H = h_map(pt, d, beta0, lambda);
  if (d.p >= d.n) return d.B * H;
  return H;
}

struct DensityValue {
  double value = 0.0;
  double log_value = -kInf;
  double jac = 0.0;  // signed Jacobian
  Chart chart;
};

namespace detail {

inline void check_interior(const AugmentedPoint& pt, const GroupedDesign& d,
                           double boundary_tol) {
  for (int j = 0; j < d.J(); ++j) {
    if (pt.is_active(j)) continue;
    const double nrm = lp_norm(d.block(pt.s, j), d.alpha_star);
    if (nrm >= 1.0 - boundary_tol)
      throw BoundaryError("density: inactive block " + std::to_string(j) +
                          " sits on the unit sphere (boundary point)");
  }
  for (size_t i = 0; i < pt.A.size(); ++i)
    if (!(pt.r[static_cast<int>(i)] > 0))
      throw BoundaryError("density: r must be positive on active groups");
}

// log density of U = X^T eps / n ~ N(0, (sigma2/n) Psi) for p < n Gaussian
inline double log_g_nx(const Vector& H, const GroupedDesign& d, double sigma2) {
  const double quad = H.dot(d.psi_llt.solve(H)) * d.n / sigma2;
  return -0.5 * d.p * std::log(2.0 * M_PI * sigma2 / d.n) - 0.5 * d.psi_logdet -
         0.5 * quad;
}

}  // namespace detail

/// Joint density of the augmented estimator at the point, with respect to
/// d r_A ^ d s_F for the supplied chart (the canonical one if absent). The
/// value is chart-dependent; integrals over regions are not.
inline DensityValue density(const AugmentedPoint& pt, const GroupedDesign& d,
                            const Vector& beta0, double lambda,
                            const NoiseModel& noise,
                            std::optional<Chart> chart = std::nullopt,
                            double boundary_tol = 1e-9) {
  detail::check_interior(pt, d, boundary_tol);
  DensityValue out;
  out.chart = chart ? std::move(*chart) : make_chart(pt, d);
  out.jac = jacobian(pt, out.chart, d, lambda);

  double log_noise;
  if (d.p >= d.n) {
    log_noise = noise.log_gn(d.B * h_map(pt, d, beta0, lambda));
  } else {
    if (!noise.is_gaussian)
      throw std::invalid_argument(
          "density: the p < n path needs the law of X^T eps / n, only "
          "available for Gaussian errors");
    log_noise = detail::log_g_nx(h_map(pt, d, beta0, lambda), d, noise.sigma2);
  }
  out.log_value = log_noise + std::log(std::abs(out.jac));
  out.value = std::exp(out.log_value);
  return out;
}

/// Density specialization for singleton groups, assembled from the
/// [Psi_A | lambda W_B T_Bo] form directly (the sphere constraints reduce to
/// d s_j = 0 on active coordinates, so the tangent solve only involves the
/// inactive block of the row-space rows).
inline DensityValue lasso_density(const AugmentedPoint& pt,
                                  const GroupedDesign& d, const Vector& beta0,
                                  double lambda, const NoiseModel& noise,
                                  double boundary_tol = 1e-9) {
  for (int j = 0; j < d.J(); ++j)
    if (d.partition.group_size(j) != 1)
      throw std::invalid_argument("lasso_density: all groups must be singletons");
  detail::check_interior(pt, d, boundary_tol);

  // active coordinates (== active groups for singletons)
  IndexList act;
  for (int j : pt.A) act.push_back(d.group(j)[0]);
  std::vector<bool> is_active_coord(d.p, false);
  for (int k : act) is_active_coord[k] = true;

  // free/dependent split of the inactive coordinates from the Q rows alone
  IndexList inactive;
  for (int k = 0; k < d.p; ++k)
    if (!is_active_coord[k]) inactive.push_back(k);
  const int n_dep = static_cast<int>(d.Q.cols());
  Matrix QB = Matrix::Zero(n_dep, static_cast<int>(inactive.size()));
  if (n_dep > 0) {
    Matrix Qt = d.Q.transpose();
    QB = gather_cols(Qt, inactive);
  }
  std::vector<bool> dep(inactive.size(), false);
  if (n_dep > 0) detail::pivot_dependent_columns(QB, dep, n_dep);

  IndexList F, Dloc;
  for (size_t i = 0; i < inactive.size(); ++i)
    (dep[i] ? Dloc : F).push_back(static_cast<int>(i));
  Matrix T_B = Matrix::Zero(static_cast<int>(inactive.size()),
                            static_cast<int>(F.size()));
  for (size_t i = 0; i < F.size(); ++i) T_B(F[i], static_cast<int>(i)) = 1.0;
  if (n_dep > 0) {
    Eigen::FullPivLU<Matrix> lu(gather_cols(QB, Dloc));
    lu.setThreshold(1e-10);
    if (!lu.isInvertible())
      throw BoundaryError("lasso_density: degenerate row-space block");
    Matrix TD = -lu.solve(gather_cols(QB, F));
    for (size_t i = 0; i < Dloc.size(); ++i)
      T_B.row(Dloc[i]) = TD.row(static_cast<int>(i));
  }

  // M = [Psi_A | lambda W_B T_Bo] embedded with zero rows on A
  Matrix M = Matrix::Zero(d.p, static_cast<int>(act.size() + F.size()));
  for (size_t i = 0; i < act.size(); ++i)
    M.col(static_cast<int>(i)) = d.Psi.col(act[i]);
  for (size_t c = 0; c < F.size(); ++c)
    for (size_t rI = 0; rI < inactive.size(); ++rI) {
      const int k = inactive[rI];
      M(k, static_cast<int>(act.size() + c)) =
          lambda * d.w_coord[k] * T_B(static_cast<int>(rI), static_cast<int>(c));
    }

  DensityValue out;
  out.chart.A = pt.A;
  out.chart.C = detail::constraint_matrix(d, pt.A, pt.s);
  for (int k : act) out.chart.D.push_back(k);
  for (size_t i = 0; i < inactive.size(); ++i)
    (dep[i] ? out.chart.D : out.chart.F).push_back(inactive[i]);
  std::sort(out.chart.D.begin(), out.chart.D.end());
  out.chart.T = Matrix::Zero(d.p, static_cast<int>(F.size()));
  for (size_t rI = 0; rI < inactive.size(); ++rI)
    out.chart.T.row(inactive[rI]) = T_B.row(static_cast<int>(rI));
  out.jac = d.p >= d.n ? (d.B * M).determinant() : M.determinant();

  // H uses b_k = r_j s_k on the active coordinates
  Vector b = Vector::Zero(d.p);
  for (size_t i = 0; i < pt.A.size(); ++i)
    b[act[i]] = pt.r[static_cast<int>(i)] * pt.s[act[i]];
  Vector H = d.Psi * (b - beta0) + lambda * d.w_coord.cwiseProduct(pt.s);
  double log_noise;
  if (d.p >= d.n) {
    log_noise = noise.log_gn(d.B * H);
  } else {
    if (!noise.is_gaussian)
      throw std::invalid_argument("lasso_density: p < n path requires Gaussian errors");
    log_noise = detail::log_g_nx(H, d, noise.sigma2);
  }
  out.log_value = log_noise + std::log(std::abs(out.jac));
  out.value = std::exp(out.log_value);
  return out;
}

}  // namespace blockea
