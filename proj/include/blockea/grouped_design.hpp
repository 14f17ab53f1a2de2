#pragma once

#include "blockea/common.hpp"
#include "blockea/eta.hpp"

#include <algorithm>
#include <numeric>

namespace blockea {

/// Disjoint partition of the p coordinates into J groups with positive
/// per-group penalty weights.
struct GroupPartition {
  std::vector<IndexList> groups;  // 0-based coordinate indices
  Vector weights;                 // one per group

  int size() const { return static_cast<int>(groups.size()); }
  int group_size(int j) const { return static_cast<int>(groups[j].size()); }

  int dimension() const {
    int p = 0;
    for (const auto& g : groups) p += static_cast<int>(g.size());
    return p;
  }

  /// group index of every coordinate; throws if the groups are not a
  /// disjoint cover of {0..p-1} or a weight is not positive.
  std::vector<int> coordinate_groups() const {
    const int p = dimension();
    std::vector<int> owner(p, -1);
    for (int j = 0; j < size(); ++j) {
      if (groups[j].empty())
        throw std::invalid_argument("partition: empty group");
      for (int k : groups[j]) {
        if (k < 0 || k >= p || owner[k] != -1)
          throw std::invalid_argument("partition: groups must disjointly cover 0..p-1");
        owner[k] = j;
      }
    }
    if (weights.size() != size())
      throw std::invalid_argument("partition: need one weight per group");
    for (int j = 0; j < size(); ++j)
      if (!(weights[j] > 0))
        throw std::invalid_argument("partition: weights must be positive");
    return owner;
  }

  /// Contiguous groups from a list of sizes.
  static GroupPartition from_sizes(const std::vector<int>& sizes,
                                   const Vector& weights) {
    GroupPartition part;
    int k = 0;
    for (int sz : sizes) {
      IndexList g(sz);
      std::iota(g.begin(), g.end(), k);
      k += sz;
      part.groups.push_back(std::move(g));
    }
    part.weights = weights;
    return part;
  }

  static GroupPartition from_sizes(const std::vector<int>& sizes) {
    Vector w(sizes.size());
    for (size_t j = 0; j < sizes.size(); ++j) w[j] = std::sqrt(double(sizes[j]));
    return from_sizes(sizes, w);
  }

  static GroupPartition singletons(int p) {
    return from_sizes(std::vector<int>(p, 1), Vector::Ones(p));
  }
};

inline Vector gather(const Eigen::Ref<const Vector>& v, const IndexList& idx) {
  Vector out(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out[static_cast<int>(i)] = v[idx[i]];
  return out;
}

inline void scatter(Vector& v, const IndexList& idx,
                    const Eigen::Ref<const Vector>& vals) {
  for (size_t i = 0; i < idx.size(); ++i) v[idx[i]] = vals[static_cast<int>(i)];
}

inline Matrix gather_cols(const Matrix& m, const IndexList& idx) {
  Matrix out(m.rows(), idx.size());
  for (size_t i = 0; i < idx.size(); ++i) out.col(static_cast<int>(i)) = m.col(idx[i]);
  return out;
}

/// Design matrix with its group structure and the linear-algebra factors
/// shared by every downstream computation. Immutable once built; safe to
/// share across threads.
struct GroupedDesign {
  Matrix X;                 // n x p
  int n = 0, p = 0;
  GroupPartition partition;
  double alpha = 2.0;       // block-norm index
  double alpha_star = 2.0;  // conjugate exponent
  std::vector<int> coord_group;   // coordinate -> group
  Vector w_coord;                 // coordinate -> group weight

  Matrix Psi;         // X^T X / n
  Matrix B;           // sqrt(n) (X^T)^+, n x p, only when p >= n
  Matrix Q;           // orthonormal basis of nul(X W^-1), p x (p - n)
  double lipschitz = 0.0;       // largest eigenvalue of Psi
  Eigen::LLT<Matrix> psi_llt;   // only when p < n (Psi invertible)
  double psi_logdet = 0.0;      // log det(Psi), p < n path

  int J() const { return partition.size(); }
  const IndexList& group(int j) const { return partition.groups[j]; }
  double weight(int j) const { return partition.weights[j]; }
  double rho() const { return rho_for_alpha(alpha); }

  Vector block(const Eigen::Ref<const Vector>& v, int j) const {
    return gather(v, group(j));
  }
  double block_norm(const Eigen::Ref<const Vector>& v, int j, double ord) const {
    return lp_norm(block(v, j), ord);
  }
};

/// Builds the design, verifying rank and caching Psi, B, Q and the gradient
/// Lipschitz constant. Throws if X has rank below min(n, p).
inline GroupedDesign build_design(const Matrix& X, GroupPartition partition,
                                  double alpha) {
  if (!X.allFinite()) throw std::invalid_argument("design: X has non-finite entries");
  if (!(alpha >= 1.0)) throw std::invalid_argument("design: alpha must be >= 1");

  GroupedDesign d;
  d.X = X;
  d.n = static_cast<int>(X.rows());
  d.p = static_cast<int>(X.cols());
  d.partition = std::move(partition);
  d.alpha = alpha;
  d.alpha_star = dual_exponent(alpha);
  d.coord_group = d.partition.coordinate_groups();
  if (d.partition.dimension() != d.p)
    throw std::invalid_argument("design: partition covers a different dimension than X");
  d.w_coord.resize(d.p);
  for (int k = 0; k < d.p; ++k) d.w_coord[k] = d.partition.weights[d.coord_group[k]];

  d.Psi = (X.transpose() * X) / double(d.n);

  Eigen::BDCSVD<Matrix> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() ? sv[0] : 0.0;
  const int full_rank = std::min(d.n, d.p);
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-10 * smax) ++rank;
  if (rank < full_rank)
    throw std::invalid_argument(
        "design: X is rank-deficient (rank " + std::to_string(rank) + " < " +
        std::to_string(full_rank) +
        "); every min(n,p) columns must be linearly independent");
  d.lipschitz = smax * smax / double(d.n);

  if (d.p >= d.n) {
    // (X^T)^+ = V diag(1/s) U^T from the thin SVD of X^T (equivalently of X).
    d.B = std::sqrt(double(d.n)) *
          (svd.matrixU() * sv.head(rank).cwiseInverse().asDiagonal() *
           svd.matrixV().leftCols(rank).transpose());
  } else {
    d.psi_llt.compute(d.Psi);
    if (d.psi_llt.info() != Eigen::Success)
      throw std::runtime_error("design: Cholesky of Psi failed despite rank check");
    d.psi_logdet = 2.0 * d.psi_llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  }

  if (d.p > d.n) {
    // nul(X W^-1) = orthogonal complement of row(X W^-1): trailing left
    // singular vectors of (X W^-1)^T.
    Matrix XWinv_t = d.w_coord.cwiseInverse().asDiagonal() * X.transpose();
    Eigen::BDCSVD<Matrix> nsvd(XWinv_t, Eigen::ComputeFullU);
    const auto& nsv = nsvd.singularValues();
    int nrank = 0;
    for (int i = 0; i < nsv.size(); ++i)
      if (nsv[i] > 1e-10 * nsv[0]) ++nrank;
    d.Q = nsvd.matrixU().rightCols(d.p - nrank);
  } else {
    d.Q = Matrix(d.p, 0);
  }
  return d;
}

inline GroupedDesign build_design(const Matrix& X, const std::vector<int>& sizes,
                                  double alpha) {
  return build_design(X, GroupPartition::from_sizes(sizes), alpha);
}

}  // namespace blockea
