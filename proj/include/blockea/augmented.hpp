#pragma once

#include "blockea/solver.hpp"

namespace blockea {

/// A point of the stratified sample space: active set A, the positive block
/// norms r_A, and the full subgradient value s. Together with the group
/// structure this is an equivalent representation of (beta_hat, S).
struct AugmentedPoint {
  IndexList A;  // sorted
  Vector r;     // aligned with A
  Vector s;     // p-vector

  bool is_active(int j) const {
    return std::find(A.begin(), A.end(), j) != A.end();
  }
};

/// eta applied to a subgradient block under the design's alpha, using the
/// limit form on |x| = 1 when alpha = 1.
inline Vector eta_block(const GroupedDesign& d, const Eigen::Ref<const Vector>& sj) {
  return d.alpha == 1.0 ? eta_alpha1(sj) : eta(sj, d.rho());
}

/// beta value encoded by the point: b_(j) = r_j eta(s_(j)) on active groups.
inline Vector reconstruct_beta(const AugmentedPoint& pt, const GroupedDesign& d) {
  Vector b = Vector::Zero(d.p);
  for (size_t i = 0; i < pt.A.size(); ++i) {
    const int j = pt.A[i];
    scatter(b, d.group(j), pt.r[static_cast<int>(i)] * eta_block(d, d.block(pt.s, j)));
  }
  return b;
}

struct AugmentTolerances {
  double sphere = 1e-6;       // | ||s_(j)||_{alpha*} - 1 | on active groups
  double rowspace = 1e-8;     // ||Q^T s||_inf
  double reconstruct = 1e-8;  // ||b(r, s, A) - beta_hat||_inf
};

/// Converts a converged fit into its manifold representation, verifying the
/// membership constraints. A violation indicates solver failure.
inline AugmentedPoint augment(const BlockLassoFit& fit, const GroupedDesign& d,
                              const AugmentTolerances& tol = {}) {
  if (d.alpha == 1.0)
    for (int j = 0; j < d.J(); ++j)
      if (d.partition.group_size(j) != 1)
        throw std::invalid_argument(
            "augment: alpha = 1 requires singleton groups; the block norms do "
            "not determine beta within a larger group");

  AugmentedPoint pt;
  pt.A = fit.active;
  pt.r.resize(static_cast<int>(pt.A.size()));
  for (size_t i = 0; i < pt.A.size(); ++i)
    pt.r[static_cast<int>(i)] = fit.gamma[pt.A[i]];
  pt.s = fit.S;

  if (static_cast<int>(pt.A.size()) > d.n)
    throw std::runtime_error("augment: more than n active groups");
  for (int j = 0; j < d.J(); ++j) {
    const double nrm = lp_norm(d.block(pt.s, j), d.alpha_star);
    const bool active = fit.gamma[j] > 0.0;
    if (active && std::abs(nrm - 1.0) > tol.sphere)
      throw std::runtime_error("augment: active block " + std::to_string(j) +
                               " has ||s||_{alpha*} = " + std::to_string(nrm));
    if (!active && nrm > 1.0 + tol.sphere)
      throw std::runtime_error("augment: inactive block " + std::to_string(j) +
                               " has ||s||_{alpha*} = " + std::to_string(nrm) +
                               " > 1");
  }
  if (d.Q.cols() > 0) {
    const double viol = (d.Q.transpose() * pt.s).cwiseAbs().maxCoeff();
    if (viol > tol.rowspace)
      throw std::runtime_error("augment: s is off the row space by " +
                               std::to_string(viol));
  }
  const double recon_err =
      (reconstruct_beta(pt, d) - fit.beta).cwiseAbs().maxCoeff();
  if (recon_err > tol.reconstruct)
    throw std::runtime_error("augment: reconstruction error " +
                             std::to_string(recon_err));
  return pt;
}

}  // namespace blockea
