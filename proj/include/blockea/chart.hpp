#pragma once

#include "blockea/augmented.hpp"

#include <optional>

namespace blockea {

/// Local parameterization of a stratum at a point: the free subgradient
/// coordinates F, the dependent ones D, the stacked constraint rows C
/// (row-space rows Q^T, then one sphere row per active group), and the
/// tangent matrix T with C T = 0 and T_F = I.
struct Chart {
  IndexList A;
  IndexList F;  // |F| = n - |A| when p >= n, p - |A| when p < n
  IndexList D;
  Matrix C;     // (p - dim(V) + |A|) x p
  Matrix T;     // p x |F|
};

namespace detail {

inline Matrix constraint_matrix(const GroupedDesign& d, const IndexList& A,
                                const Vector& s) {
  const int nrows_q = static_cast<int>(d.Q.cols());
  Matrix C = Matrix::Zero(nrows_q + static_cast<int>(A.size()), d.p);
  if (nrows_q > 0) C.topRows(nrows_q) = d.Q.transpose();
  for (size_t i = 0; i < A.size(); ++i) {
    const int j = A[i];
    Vector row = eta_block(d, d.block(s, j));
    const auto& g = d.group(j);
    for (size_t k = 0; k < g.size(); ++k)
      C(nrows_q + static_cast<int>(i), g[k]) = row[static_cast<int>(k)];
  }
  return C;
}

// Greedy column-pivoted selection of `count` additional dependent columns,
// orthogonalizing against the already-chosen ones. Near-ties go to the
// larger index so the free set stays lexicographically small.
inline void pivot_dependent_columns(const Matrix& C, std::vector<bool>& dep,
                                    int count) {
  const int p = static_cast<int>(C.cols());
  std::vector<Vector> basis;
  auto orthogonalize = [&](Vector v) {
    for (const auto& b : basis) v -= b.dot(v) * b;
    for (const auto& b : basis) v -= b.dot(v) * b;  // second pass for stability
    return v;
  };
  for (int k = 0; k < p; ++k) {
    if (!dep[k]) continue;
    Vector r = orthogonalize(C.col(k));
    const double nrm = r.norm();
    if (nrm > 0) basis.push_back(r / nrm);
  }
  for (int pick = 0; pick < count; ++pick) {
    double best = -1.0;
    std::vector<double> nrm(p, -1.0);
    for (int k = 0; k < p; ++k) {
      if (dep[k]) continue;
      nrm[k] = orthogonalize(C.col(k)).norm();
      best = std::max(best, nrm[k]);
    }
    if (!(best > 1e-12))
      throw BoundaryError("chart: constraint matrix is rank-deficient at this point");
    int chosen = -1;
    for (int k = 0; k < p; ++k)
      if (!dep[k] && nrm[k] >= best * (1.0 - 1e-9)) chosen = k;
    dep[chosen] = true;
    Vector r = orthogonalize(C.col(chosen));
    basis.push_back(r / r.norm());
  }
}

}  // namespace detail

/// Builds the chart at a point. When `free_set` is absent the canonical rule
/// applies: drop the largest-|s| coordinate of each active group, then fill
/// the remaining dependent slots by column-pivoted elimination of C.
inline Chart make_chart(const AugmentedPoint& pt, const GroupedDesign& d,
                        std::optional<IndexList> free_set = std::nullopt) {
  Chart ch;
  ch.A = pt.A;
  ch.C = detail::constraint_matrix(d, pt.A, pt.s);
  const int n_constraints = static_cast<int>(ch.C.rows());
  const int n_free = d.p - n_constraints;
  if (n_free < 0)
    throw std::invalid_argument("chart: more constraints than coordinates");

  std::vector<bool> dep(d.p, false);
  if (free_set) {
    if (static_cast<int>(free_set->size()) != n_free)
      throw std::invalid_argument("chart: free set must have " +
                                  std::to_string(n_free) + " coordinates");
    for (int k = 0; k < d.p; ++k) dep[k] = true;
    for (int k : *free_set) dep[k] = false;
  } else {
    for (int j : pt.A) {
      int kmax = -1;
      double vmax = -1.0;
      for (int k : d.group(j))
        if (std::abs(pt.s[k]) > vmax) vmax = std::abs(pt.s[k]), kmax = k;
      dep[kmax] = true;
    }
    detail::pivot_dependent_columns(ch.C, dep,
                                    n_constraints - static_cast<int>(pt.A.size()));
  }
  for (int k = 0; k < d.p; ++k) (dep[k] ? ch.D : ch.F).push_back(k);

  // T_D solves C_D T_D = -C_F; rows of T indexed by F are the identity.
  Matrix CD = gather_cols(ch.C, ch.D);
  Matrix CF = gather_cols(ch.C, ch.F);
  Eigen::FullPivLU<Matrix> lu(CD);
  lu.setThreshold(1e-10);
  if (!lu.isInvertible())
    throw BoundaryError("chart: dependent block of the constraint matrix is singular");
  Matrix TD = -lu.solve(CF);
  ch.T = Matrix::Zero(d.p, n_free);
  for (size_t i = 0; i < ch.F.size(); ++i)
    ch.T(ch.F[i], static_cast<int>(i)) = 1.0;
  for (size_t i = 0; i < ch.D.size(); ++i)
    ch.T.row(ch.D[i]) = TD.row(static_cast<int>(i));
  return ch;
}

/// Solves the dependent coordinates from given free values by Newton on the
/// manifold constraints, seeded from `s_seed` (which fixes the sphere
/// branch). Throws when the solve does not converge or leaves the patch.
inline Vector complete_subgradient(const GroupedDesign& d, const IndexList& A,
                                   const IndexList& F, const Vector& s_seed,
                                   const Vector& free_values,
                                   double tol = 1e-12, int max_iter = 100) {
  Vector s = s_seed;
  for (size_t i = 0; i < F.size(); ++i) s[F[i]] = free_values[static_cast<int>(i)];
  IndexList D;
  {
    std::vector<bool> is_free(d.p, false);
    for (int k : F) is_free[k] = true;
    for (int k = 0; k < d.p; ++k)
      if (!is_free[k]) D.push_back(k);
  }
  const int n_eq = static_cast<int>(d.Q.cols() + A.size());
  if (static_cast<int>(D.size()) != n_eq)
    throw std::invalid_argument("complete_subgradient: |D| must match constraint count");
  if (n_eq == 0) return s;

  Vector g(n_eq);
  Matrix Jg(n_eq, n_eq);
  for (int it = 0; it < max_iter; ++it) {
    const int nq = static_cast<int>(d.Q.cols());
    if (nq > 0) g.head(nq) = d.Q.transpose() * s;
    for (size_t i = 0; i < A.size(); ++i) {
      const Vector sj = d.block(s, A[i]);
      g[nq + static_cast<int>(i)] =
          d.alpha == 1.0
              ? lp_norm(sj, 1.0) - 1.0
              : std::pow(lp_norm(sj, d.alpha_star), d.alpha_star) - 1.0;
    }
    if (g.cwiseAbs().maxCoeff() < tol) return s;

    // gradient of the sphere rows is alpha* eta(s) (sign pattern for alpha = 1);
    // Q rows are constant
    Matrix C = Matrix::Zero(n_eq, d.p);
    if (nq > 0) C.topRows(nq) = d.Q.transpose();
    for (size_t i = 0; i < A.size(); ++i) {
      const auto& grp = d.group(A[i]);
      for (int k : grp) {
        if (s[k] == 0.0) continue;
        C(nq + static_cast<int>(i), k) =
            d.alpha == 1.0 ? (s[k] > 0 ? 1.0 : -1.0)
                           : d.alpha_star * eta_scalar(s[k], d.rho());
      }
    }
    Jg = gather_cols(C, D);
    Eigen::FullPivLU<Matrix> lu(Jg);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible())
      throw BoundaryError("complete_subgradient: singular constraint Jacobian (patch boundary)");
    Vector delta = lu.solve(g);
    for (size_t i = 0; i < D.size(); ++i) s[D[i]] -= delta[static_cast<int>(i)];
  }
  throw ConvergenceError("complete_subgradient: Newton did not converge",
                         g.cwiseAbs().maxCoeff());
}

}  // namespace blockea
