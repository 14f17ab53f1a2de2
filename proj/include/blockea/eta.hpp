#pragma once

#include "blockea/common.hpp"

namespace blockea {

// The power map eta(x; rho) = sgn(x)|x|^rho with rho = alpha*/alpha carries
// the unit l_{alpha*} sphere onto the unit l_alpha sphere; its inverse uses
// exponent 1/rho. For alpha = 2 both are the identity.

inline double rho_for_alpha(double alpha) {
  if (alpha <= 1.0 || std::isinf(alpha))
    throw std::invalid_argument("rho_for_alpha: alpha must be in (1, inf)");
  return dual_exponent(alpha) / alpha;
}

inline double eta_scalar(double x, double rho) {
  if (!std::isfinite(x)) throw std::invalid_argument("eta: non-finite input");
  if (x == 0.0) return 0.0;
  if (rho == 1.0) return x;
  return x < 0 ? -std::pow(-x, rho) : std::pow(x, rho);
}

inline Vector eta(const Eigen::Ref<const Vector>& v, double rho) {
  Vector out(v.size());
  for (int i = 0; i < v.size(); ++i) out[i] = eta_scalar(v[i], rho);
  return out;
}

inline Vector eta_inv(const Eigen::Ref<const Vector>& v, double rho) {
  return eta(v, 1.0 / rho);
}

/// Derivative rho * |x|^(rho-1); singular at x = 0 when rho < 1.
inline double eta_prime(double x, double rho) {
  if (!std::isfinite(x))
    throw std::invalid_argument("eta_prime: non-finite input");
  if (rho == 1.0) return 1.0;
  if (x == 0.0) {
    if (rho < 1.0)
      throw SingularityError("eta_prime: |x|^(rho-1) diverges at x = 0");
    return 0.0;
  }
  return rho * std::pow(std::abs(x), rho - 1.0);
}

/// Limit form used for alpha = 1: eta(x) = x on |x| = 1 and 0 inside the
/// interval, up to the given tolerance on |x| = 1.
inline Vector eta_alpha1(const Eigen::Ref<const Vector>& v,
                         double boundary_tol = 1e-9) {
  Vector out = Vector::Zero(v.size());
  for (int i = 0; i < v.size(); ++i)
    if (std::abs(std::abs(v[i]) - 1.0) <= boundary_tol) out[i] = v[i];
  return out;
}

}  // namespace blockea
