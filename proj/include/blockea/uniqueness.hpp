#pragma once

#include "blockea/solver.hpp"

namespace blockea {

/// Outcome of the solution-uniqueness check: the equicorrelation blocks E,
/// the matrix Z of their fitted directions, and whether Z has a trivial
/// null space (which certifies a unique solution).
struct UniquenessReport {
  IndexList E;          // equicorrelation blocks (coordinates when alpha = 1)
  Matrix Z;             // n x |E|, Z_j = X_(j) eta(S_(j))
  int rank_Z = 0;
  bool certified = false;
  bool active_bound_ok = false;  // |active| <= min(n, J)
  double smin_ratio = 0.0;       // smallest/largest singular value of Z
};

/// Certifies uniqueness of a converged fit via the null space of Z. For
/// alpha = 1 the blocks degenerate to single coordinates.
inline UniquenessReport uniqueness_certificate(const GroupedDesign& d,
                                               const BlockLassoFit& fit,
                                               double equicor_tol = 1e-7,
                                               double rank_tol = 1e-8) {
  UniquenessReport rep;
  std::vector<Vector> cols;

  if (d.alpha == 1.0) {
    for (int k = 0; k < d.p; ++k) {
      if (std::abs(fit.S[k]) >= 1.0 - equicor_tol) {
        rep.E.push_back(k);
        cols.push_back(d.X.col(k) * (fit.S[k] > 0 ? 1.0 : -1.0));
      }
    }
  } else {
    const double rho = d.rho();
    for (int j = 0; j < d.J(); ++j) {
      Vector sj = d.block(fit.S, j);
      if (lp_norm(sj, d.alpha_star) >= 1.0 - equicor_tol) {
        rep.E.push_back(j);
        cols.push_back(gather_cols(d.X, d.group(j)) * eta(sj, rho));
      }
    }
  }

  rep.Z.resize(d.n, static_cast<int>(cols.size()));
  for (int c = 0; c < rep.Z.cols(); ++c) rep.Z.col(c) = cols[c];

  if (rep.Z.cols() == 0) {
    rep.rank_Z = 0;
    rep.certified = true;
    rep.smin_ratio = 1.0;
  } else {
    Eigen::BDCSVD<Matrix> svd(rep.Z);
    const auto& sv = svd.singularValues();
    rep.smin_ratio = sv[0] > 0 ? sv[sv.size() - 1] / sv[0] : 0.0;
    for (int i = 0; i < sv.size(); ++i)
      if (sv[i] > rank_tol * sv[0]) ++rep.rank_Z;
    rep.certified =
        (rep.Z.cols() <= d.n) && (rep.rank_Z == rep.Z.cols()) &&
        rep.smin_ratio > rank_tol;
  }
  rep.active_bound_ok =
      static_cast<int>(fit.active.size()) <= std::min(d.n, d.J());
  return rep;
}

}  // namespace blockea
