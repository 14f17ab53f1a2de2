#pragma once

#include "blockea/density.hpp"

#include <queue>

namespace blockea {

namespace quad {

// Gauss-Kronrod 15(7) nodes and weights on [-1, 1].
inline constexpr double kGK15Nodes[15] = {
    -0.991455371120813, -0.949107912342759, -0.864864423359769,
    -0.741531185599394, -0.586087235467691, -0.405845151377397,
    -0.207784955007898, 0.0,
    0.207784955007898,  0.405845151377397,  0.586087235467691,
    0.741531185599394,  0.864864423359769,  0.949107912342759,
    0.991455371120813};
inline constexpr double kGK15Weights[15] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250,
    0.140653259715525, 0.169004726639267, 0.190350578064785,
    0.204432940075298, 0.209482141084728,
    0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979,
    0.022935322010529};
inline constexpr double kG7Weights[7] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119,
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870};

template <class F>
std::pair<double, double> gk15(const F& f, double a, double b) {
  const double h = 0.5 * (b - a), c = 0.5 * (a + b);
  double i15 = 0.0, i7 = 0.0;
  for (int k = 0; k < 15; ++k) {
    const double v = f(c + h * kGK15Nodes[k]);
    i15 += kGK15Weights[k] * v;
    if (k % 2 == 1) i7 += kG7Weights[k / 2] * v;
  }
  return {i15 * h, std::abs(i15 - i7) * std::abs(h)};
}

/// Globally adaptive 1-D integration: repeatedly bisects the interval with
/// the largest error estimate. Handles integrable endpoint singularities.
template <class F>
double integrate_1d(const F& f, double a, double b, double abs_tol,
                    int max_intervals = 200000, int initial_panels = 1) {
  struct Piece {
    double a, b, value, error;
    bool operator<(const Piece& o) const { return error < o.error; }
  };
  auto make_piece = [&](double lo, double hi) {
    auto [v, e] = gk15(f, lo, hi);
    return Piece{lo, hi, v, e};
  };
  // a fine initial partition guards against support slivers that would fall
  // between the nodes of a single panel and read as zero
  initial_panels = std::max(1, initial_panels);
  std::priority_queue<Piece> heap;
  double total = 0.0, total_err = 0.0;
  for (int i = 0; i < initial_panels; ++i) {
    const double lo = a + (b - a) * i / initial_panels;
    const double hi = a + (b - a) * (i + 1) / initial_panels;
    Piece piece = make_piece(lo, hi);
    total += piece.value;
    total_err += piece.error;
    heap.push(piece);
  }
  int count = initial_panels;
  while (total_err > abs_tol && count < max_intervals) {
    Piece worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {  // cannot split further
      heap.push(worst);
      break;
    }
    Piece left = make_piece(worst.a, mid), right = make_piece(mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++count;
  }
  return total;
}

}  // namespace quad

/// A box in the chart coordinates theta = (r_A, s_F) of one stratum, plus an
/// interior anchor that fixes the sphere branch for the dependent solve.
/// Upper bounds on r may be infinite. Absent free_set means the canonical
/// chart of the anchor.
struct StratumRegion {
  AugmentedPoint anchor;
  std::optional<IndexList> free_set;
  Vector r_lo, r_hi;
  Vector sF_lo, sF_hi;
  // initial panel count for the innermost dimension; raise it when the
  // integrand is clipped inside the box (support thinner than a panel's
  // node spacing would otherwise be missed)
  int initial_panels = 1;
};

/// Integrates the joint density over the region. Points where the completed
/// subgradient leaves the stratum closure contribute zero (the region may
/// overhang the curved boundary); a failed dependent solve means the region
/// crosses the chart's patch and raises an error. Desk-scale oracle: the
/// chart dimension must be at most 3.
inline double event_probability_quadrature(const GroupedDesign& d,
                                           const Vector& beta0, double lambda,
                                           const NoiseModel& noise,
                                           const IndexList& A,
                                           const StratumRegion& region,
                                           double abs_tol = 1e-6) {
  if (region.anchor.A != A)
    throw std::invalid_argument("quadrature: anchor is not on stratum A");
  const int dim_manifold = d.p >= d.n ? d.n : d.p;
  if (dim_manifold > 3)
    throw std::invalid_argument("quadrature: supported only for n (or p) <= 3");

  const IndexList F =
      region.free_set ? *region.free_set : make_chart(region.anchor, d).F;
  const int na = static_cast<int>(A.size());
  const int nf = static_cast<int>(F.size());
  if (region.r_lo.size() != na || region.r_hi.size() != na ||
      region.sF_lo.size() != nf || region.sF_hi.size() != nf)
    throw std::invalid_argument("quadrature: region bounds have wrong dimensions");

  Vector seed = region.anchor.s;  // continuation seed for the Newton solve

  auto eval_point = [&](const Vector& theta) -> double {
    AugmentedPoint pt;
    pt.A = A;
    pt.r = theta.head(na);
    Vector s;
    try {
      s = complete_subgradient(d, A, F, seed, theta.tail(nf));
    } catch (const ConvergenceError&) {
      throw BoundaryError("quadrature: region crosses the chart boundary");
    }
    seed = s;
    pt.s = s;
    for (int j = 0; j < d.J(); ++j) {
      if (pt.is_active(j)) continue;
      if (lp_norm(d.block(s, j), d.alpha_star) >= 1.0 - 1e-12)
        return 0.0;  // outside (or on the edge of) the stratum
    }
    Chart ch = make_chart(pt, d, F);
    return density(pt, d, beta0, lambda, noise, std::move(ch), 1e-13).value;
  };

  // iterated adaptive quadrature, innermost dimension last
  const int dims = na + nf;
  Vector theta(dims);
  std::function<double(int, double)> level = [&](int k, double tol) -> double {
    const bool is_r = k < na;
    double lo = is_r ? region.r_lo[k] : region.sF_lo[k - na];
    double hi = is_r ? region.r_hi[k] : region.sF_hi[k - na];
    auto inner = [&](double x) {
      theta[k] = x;
      return k + 1 == dims ? eval_point(theta) : level(k + 1, tol * 0.05);
    };
    const int panels = k + 1 == dims ? region.initial_panels : 1;
    if (std::isinf(hi)) {
      // map [lo, inf) to [0, 1)
      auto mapped = [&](double u) {
        const double om = 1.0 - u;
        return inner(lo + u / om) / (om * om);
      };
      return quad::integrate_1d(mapped, 0.0, 1.0 - 1e-14, tol, 200000, panels);
    }
    return quad::integrate_1d(inner, lo, hi, tol, 200000, panels);
  };
  return level(0, abs_tol);
}

}  // namespace blockea
