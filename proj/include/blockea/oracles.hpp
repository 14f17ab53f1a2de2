#pragma once

#include "blockea/io.hpp"
#include "blockea/quadrature.hpp"
#include "blockea/uniqueness.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>

#include <functional>

namespace blockea {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// ---------------------------------------------------------------------------
// Closed forms for the 2 x 3 worked design: X/sqrt(2) = [[1,0,1],[0,1,1]],
// groups {0,1} and {2}, alpha = 2, unit weights, beta0 = 0.
// ---------------------------------------------------------------------------

struct Example1 {
  double sigma2 = 1.0;
  double lambda = 1.0;

  static Matrix design_matrix() {
    Matrix X(2, 3);
    X << 1, 0, 1, 0, 1, 1;
    return std::sqrt(2.0) * X;
  }

  static GroupedDesign design() {
    return build_design(design_matrix(),
                        GroupPartition::from_sizes({2, 1}, Vector::Ones(2)), 2.0);
  }

  double tau() const { return std::sqrt(2.0) * lambda / std::sqrt(sigma2); }

  /// Density of (r_A, s_F) on stratum A in the charts used by the worked
  /// derivation: (s1, s2) on the empty stratum, (r, s1) on the one-active
  /// strata, (r1, r2) when both groups are active. `s` is the full 3-vector
  /// with s3 = s1 + s2; `r` is aligned with A.
  double density_value(const IndexList& A, const Vector& r, const Vector& s) const {
    const double s1 = s[0], s2 = s[1], s3 = s[2];
    if (std::abs(s3 - (s1 + s2)) > 1e-9)
      throw std::invalid_argument("example1: s is off the row space");
    const double ip = 1.0 / (M_PI * sigma2);
    const double ss = s1 * s1 + s2 * s2;

    if (A.empty()) {
      require(ss < 1.0 && std::abs(s3) < 1.0, "interior of the empty stratum");
      return lambda * lambda * ip * std::exp(-lambda * lambda * ss / sigma2);
    }
    if (A == IndexList{0}) {
      require(std::abs(ss - 1.0) < 1e-9 && std::abs(s3) < 1.0 && r[0] > 0,
              "stratum with the first group active");
      const double a = r[0] + lambda;
      return ip * std::exp(-a * a / sigma2) * a / std::abs(s2);
    }
    if (A == IndexList{1}) {
      require(std::abs(std::abs(s3) - 1.0) < 1e-9 && ss < 1.0 && r[0] > 0,
              "stratum with the second group active");
      return 2.0 * lambda * ip * std::exp(-2.0 * r[0] * (r[0] + lambda) / sigma2) *
             std::exp(-lambda * lambda * ss / sigma2);
    }
    if (A == IndexList{0, 1}) {
      require(std::abs(ss - 1.0) < 1e-9 && std::abs(std::abs(s3) - 1.0) < 1e-9 &&
                  r[0] > 0 && r[1] > 0,
              "stratum with both groups active");
      const double a = r[0] + r[1] + lambda;
      return ip * std::exp(-(a * a + r[1] * r[1]) / sigma2);
    }
    throw std::invalid_argument("example1: unknown stratum");
  }

  /// P(active set = A), via the closed form for {0} and 1-D normal
  /// quadrature of the bivariate-normal regions otherwise.
  double stratum_probability(const IndexList& A) const {
    const double t = tau();
    if (A == IndexList{0}) return 0.5 * std::exp(-lambda * lambda / sigma2);
    if (A.empty()) {
      // ||z|| <= tau and |z1 + z2| <= tau; rotate 45 degrees
      const double c = t / std::sqrt(2.0);
      auto f = [&](double u) {
        const double w = std::sqrt(std::max(0.0, t * t - u * u));
        return normal_pdf(u) * (2.0 * normal_cdf(w) - 1.0);
      };
      return quad::integrate_1d(f, -c, c, 1e-10);
    }
    if (A == IndexList{1}) {
      // 2 P(z1 + z2 >= tau, |z1 - z2| <= tau): factorizes after rotation
      const double c = t / std::sqrt(2.0);
      return 2.0 * (1.0 - normal_cdf(c)) * (2.0 * normal_cdf(c) - 1.0);
    }
    if (A == IndexList{0, 1}) {
      // 4 P(z1 >= 0, z2 - z1 >= tau)
      auto f = [&](double z) { return normal_pdf(z) * (1.0 - normal_cdf(z + t)); };
      return 4.0 * quad::integrate_1d(f, 0.0, 40.0, 1e-10);
    }
    throw std::invalid_argument("example1: unknown stratum");
  }

  /// Chart patches covering stratum A, for quadrature of the general
  /// density: the curved arcs split at the coordinate axes, the segments at
  /// the sign of s3, the two-active stratum into its four corner points.
  static std::vector<StratumRegion> stratum_regions(const IndexList& A) {
    auto point = [](IndexList act, std::initializer_list<double> rv,
                    double s1, double s2) {
      AugmentedPoint pt;
      pt.A = std::move(act);
      pt.r = Vector(rv.size());
      int i = 0;
      for (double v : rv) pt.r[i++] = v;
      pt.s = Vector(3);
      pt.s << s1, s2, s1 + s2;
      return pt;
    };
    auto region = [](AugmentedPoint anchor, IndexList F, Vector r_lo, Vector r_hi,
                     Vector s_lo, Vector s_hi) {
      StratumRegion reg;
      reg.anchor = std::move(anchor);
      reg.free_set = std::move(F);
      reg.r_lo = std::move(r_lo);
      reg.r_hi = std::move(r_hi);
      reg.sF_lo = std::move(s_lo);
      reg.sF_hi = std::move(s_hi);
      return reg;
    };
    const Vector none(0);
    auto one = [](double v) { return Vector::Constant(1, v); };

    if (A.empty()) {
      StratumRegion reg = region(point({}, {}, 0.0, 0.0), {0, 1}, none, none,
                                 parse2(-1.0, -1.0), parse2(1.0, 1.0));
      reg.initial_panels = 64;  // the support is clipped inside the box
      return {reg};
    }
    if (A == IndexList{0})
      return {region(point({0}, {1.0}, -0.6, 0.8), {0}, one(0), one(kInf),
                     one(-1.0), one(0.0)),
              region(point({0}, {1.0}, 0.6, -0.8), {0}, one(0), one(kInf),
                     one(0.0), one(1.0))};
    if (A == IndexList{1})
      return {region(point({1}, {1.0}, 0.5, 0.5), {0}, one(0), one(kInf),
                     one(0.0), one(1.0)),
              region(point({1}, {1.0}, -0.5, -0.5), {0}, one(0), one(kInf),
                     one(-1.0), one(0.0))};
    if (A == IndexList{0, 1}) {
      std::vector<StratumRegion> regions;
      const double corners[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
      for (auto& c : corners)
        regions.push_back(region(point({0, 1}, {1.0, 1.0}, c[0], c[1]), {},
                                 parse2(0.0, 0.0), parse2(kInf, kInf), none,
                                 none));
      return regions;
    }
    throw std::invalid_argument("example1: unknown stratum");
  }

  /// P(active set = A) by adaptive quadrature of the implemented density.
  double stratum_quadrature(const GroupedDesign& d, const IndexList& A,
                            double abs_tol = 1e-7) const {
    const NoiseModel noise = NoiseModel::gaussian(sigma2);
    const Vector beta0 = Vector::Zero(3);
    auto regions = stratum_regions(A);
    double total = 0.0;
    for (const auto& reg : regions)
      total += event_probability_quadrature(
          d, beta0, lambda, noise, A, reg,
          abs_tol / static_cast<double>(regions.size()));
    return total;
  }

 private:
  static Vector parse2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
  }
  static void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("example1: point outside the " + what);
  }
};

// ---------------------------------------------------------------------------
// Orthogonal design (Psi = I, p = n = m J, W = sqrt(m) I): the exact law of
// the block norms through (noncentral) chi-square tails.
// ---------------------------------------------------------------------------

struct OrthogonalOracle {
  int m = 5;
  int J = 10;
  double sigma2 = 1.0;
  double lambda = 0.5;

  int n() const { return m * J; }

  /// P(group j is zeroed) for true block beta0j.
  double p_zero(const Vector& beta0j) const {
    const double x = n() * lambda * lambda * m / sigma2;
    return chi2_cdf(beta0j, x);
  }

  /// P(||beta_hat_(j)|| > t), t >= 0.
  double tail_prob(const Vector& beta0j, double t) const {
    const double c = t + lambda * std::sqrt(double(m));
    return 1.0 - chi2_cdf(beta0j, n() * c * c / sigma2);
  }

  /// Marginal density of the block norm for a null group (beta0j = 0).
  double marginal_density_r(double r) const {
    if (r <= 0) return 0.0;
    const double a = r + lambda * std::sqrt(double(m));
    const double half_m = 0.5 * m;
    return std::pow(double(n()) / sigma2, half_m) /
           (std::pow(2.0, half_m - 1.0) * std::tgamma(half_m)) *
           std::pow(a, m - 1) * std::exp(-0.5 * n() * a * a / sigma2);
  }

 private:
  double chi2_cdf(const Vector& beta0j, double x) const {
    const double ncp = n() * beta0j.squaredNorm() / sigma2;
    if (ncp < 1e-14)
      return boost::math::cdf(boost::math::chi_squared(double(m)), x);
    return boost::math::cdf(boost::math::non_central_chi_squared(double(m), ncp), x);
  }
};

/// Builds an orthonormal-design instance: X = sqrt(n) * (Haar rotation),
/// so that Psi = I exactly up to factorization error.
inline GroupedDesign orthogonal_design(int m, int J, std::uint64_t seed) {
  const int n = m * J;
  auto gen = make_stream(seed, 0, 0);
  Matrix G(n, n);
  for (int i = 0; i < n; ++i) G.row(i) = standard_normal_vector(gen, n).transpose();
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix X = std::sqrt(double(n)) * Matrix(qr.householderQ());
  return build_design(
      X, GroupPartition::from_sizes(std::vector<int>(J, m),
                                    Vector::Constant(J, std::sqrt(double(m)))),
      2.0);
}

// ---------------------------------------------------------------------------
// Direct-simulation oracle.
// ---------------------------------------------------------------------------

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_err = 0.0;
  long n = 0;
};

/// Plain Monte Carlo frequency of an event of the fit, with binomial SE.
inline MonteCarloEstimate brute_force_event_probability(
    const GroupedDesign& d, const Vector& beta0, double sigma2, double lambda,
    const std::function<bool(const BlockLassoFit&)>& event, long N,
    std::uint64_t seed) {
  const Vector mean = d.X * beta0;
  long hits = 0;
  SolverOptions opts;
  for (long t = 0; t < N; ++t) {
    auto gen = make_stream(seed, 0, static_cast<std::uint64_t>(t));
    Vector y = mean + std::sqrt(sigma2) * standard_normal_vector(gen, d.n);
    if (event(solve_block_lasso(d, y, lambda, opts))) ++hits;
  }
  MonteCarloEstimate out;
  out.n = N;
  out.estimate = double(hits) / double(N);
  out.std_err = std::sqrt(out.estimate * (1.0 - out.estimate) / double(N));
  return out;
}

// ---------------------------------------------------------------------------
// Triple-agreement suite: closed forms vs quadrature of the implemented
// density vs direct simulation, plus the orthogonal-design law.
// ---------------------------------------------------------------------------

struct OracleCheckReport {
  struct Row {
    std::string name;
    double lhs = 0.0, rhs = 0.0, tol = 0.0;
    bool pass = false;
  };
  std::vector<Row> rows;
  bool all_pass = true;

  void add(const std::string& name, double lhs, double rhs, double tol) {
    Row row{name, lhs, rhs, tol, std::abs(lhs - rhs) <= tol};
    all_pass = all_pass && row.pass;
    rows.push_back(std::move(row));
  }
};

inline OracleCheckReport run_oracle_check(long n_mc, long n_orth,
                                          std::uint64_t seed) {
  OracleCheckReport rep;

  Example1 ex;
  ex.sigma2 = 1.0;
  ex.lambda = 1.0;
  GroupedDesign d = Example1::design();
  const std::vector<std::pair<std::string, IndexList>> strata = {
      {"A={}", {}}, {"A={0}", {0}}, {"A={1}", {1}}, {"A={0,1}", {0, 1}}};

  double closed_sum = 0.0;
  for (const auto& [name, A] : strata) {
    const double closed = ex.stratum_probability(A);
    closed_sum += closed;
    const double quad = ex.stratum_quadrature(d, A, 1e-7);
    rep.add("quadrature vs closed form, " + name, quad, closed, 1e-6);
  }
  rep.add("sum of stratum probabilities", closed_sum, 1.0, 1e-7);

  for (const auto& [name, A] : strata) {
    auto mc = brute_force_event_probability(
        d, Vector::Zero(3), ex.sigma2, ex.lambda,
        [&](const BlockLassoFit& fit) { return fit.active == A; }, n_mc, seed);
    rep.add("simulation vs closed form, " + name, mc.estimate,
            ex.stratum_probability(A), 3.0 * mc.std_err + 1e-12);
  }

  // orthogonal design: solver draws against the chi-square law
  OrthogonalOracle orth;
  orth.m = 5;
  orth.J = 10;
  orth.sigma2 = 1.0;
  orth.lambda = 0.13;
  GroupedDesign od = orthogonal_design(orth.m, orth.J, seed + 1);
  const Vector beta0 = Vector::Zero(od.p);
  const Vector beta0j = Vector::Zero(orth.m);
  const std::vector<double> ts = {0.0, 0.1};
  std::vector<long> tail_hits(ts.size(), 0);
  long zero_hits = 0;
  for (long t = 0; t < n_orth; ++t) {
    auto gen = make_stream(seed + 2, 0, static_cast<std::uint64_t>(t));
    Vector y = std::sqrt(orth.sigma2) * standard_normal_vector(gen, od.n);
    auto fit = solve_block_lasso(od, y, orth.lambda);
    if (fit.gamma[0] == 0.0) ++zero_hits;
    for (size_t i = 0; i < ts.size(); ++i)
      if (fit.gamma[0] > ts[i]) ++tail_hits[i];
  }
  auto se = [&](double p) { return std::sqrt(p * (1 - p) / double(n_orth)); };
  const double pz = double(zero_hits) / double(n_orth);
  rep.add("orthogonal P(block = 0) vs chi-square", pz, orth.p_zero(beta0j),
          3.0 * se(pz) + 1e-12);
  for (size_t i = 0; i < ts.size(); ++i) {
    const double pt = double(tail_hits[i]) / double(n_orth);
    rep.add("orthogonal tail t=" + format_double(ts[i]) + " vs chi-square", pt,
            orth.tail_prob(beta0j, ts[i]), 3.0 * se(pt) + 1e-12);
  }
  return rep;
}

inline void print_oracle_check(const OracleCheckReport& rep, std::ostream& out) {
  for (const auto& row : rep.rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "[%s] %-46s  %.8g vs %.8g (tol %.3g)",
                  row.pass ? "PASS" : "FAIL", row.name.c_str(), row.lhs,
                  row.rhs, row.tol);
    out << buf << "\n";
  }
  out << (rep.all_pass ? "all oracle checks passed" : "ORACLE CHECK FAILURES")
      << "\n";
}

}  // namespace blockea
