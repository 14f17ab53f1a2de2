#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace blockea {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexList = std::vector<int>;

/// Evaluating a quantity at a point where it is not defined (e.g. a
/// derivative that blows up at zero).
struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A point on (or numerically indistinguishable from) the boundary of a
/// stratum, where the density is not defined.
struct BoundaryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Iterative routine exhausted its budget; carries the last residual.
struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), last_residual(residual) {}
  double last_residual;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

/// l_alpha norm with alpha in [1, inf].
inline double lp_norm(const Eigen::Ref<const Vector>& v, double alpha) {
  if (v.size() == 0) return 0.0;
  if (std::isinf(alpha)) return v.cwiseAbs().maxCoeff();
  if (alpha == 1.0) return v.cwiseAbs().sum();
  if (alpha == 2.0) return v.norm();
  return std::pow(v.cwiseAbs().array().pow(alpha).sum(), 1.0 / alpha);
}

/// Conjugate exponent: 1/alpha + 1/alpha* = 1.
inline double dual_exponent(double alpha) {
  if (alpha == 1.0) return kInf;
  if (std::isinf(alpha)) return 1.0;
  return alpha / (alpha - 1.0);
}

inline bool all_finite(const Eigen::Ref<const Vector>& v) {
  return v.allFinite();
}

}  // namespace blockea
