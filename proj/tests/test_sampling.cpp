#include <catch2/catch_amalgamated.hpp>

#include "blockea/oracles.hpp"
#include "blockea/sampling.hpp"

using namespace blockea;

namespace {

GroupedDesign random_design(int n, int p, const std::vector<int>& sizes,
                            std::uint64_t seed) {
  auto gen = make_stream(seed, 0, 0);
  Matrix X(n, p);
  for (int i = 0; i < n; ++i) X.row(i) = standard_normal_vector(gen, p).transpose();
  return build_design(X, sizes, 2.0);
}

}  // namespace

TEST_CASE("de-biased estimator") {
  SECTION("inverse Gram recovers least squares when p < n") {
    GroupedDesign d = random_design(12, 5, {3, 2}, 80);
    auto gen = make_stream(81, 0, 0);
    Vector y = standard_normal_vector(gen, 12);
    BlockLassoFit fit = solve_block_lasso(d, y, 0.2);
    Vector b = debias(fit, d.Psi.inverse(), 0.2, d);
    Vector ls = (d.X.transpose() * d.X).ldlt().solve(d.X.transpose() * y);
    CHECK((b - ls).cwiseAbs().maxCoeff() < 1e-8);
  }
  SECTION("a vanishing penalty leaves the fit unchanged") {
    GroupedDesign d = random_design(8, 12, {4, 4, 4}, 82);
    auto gen = make_stream(83, 0, 0);
    Vector y = standard_normal_vector(gen, 8);
    BlockLassoFit fit = solve_block_lasso(d, y, 0.15);
    Matrix theta = Matrix::Identity(12, 12);
    Vector b = debias(fit, theta, 1e-13, d);
    // lambda -> 0 limit with the fit held fixed
    CHECK((b - fit.beta).cwiseAbs().maxCoeff() < 1e-10);
  }
  SECTION("the two algebraic forms coincide") {
    GroupedDesign d = random_design(10, 18, {6, 6, 6}, 84);
    auto gen = make_stream(85, 0, 0);
    for (int trial = 0; trial < 10; ++trial) {
      Vector y = standard_normal_vector(gen, 10);
      BlockLassoFit fit = solve_block_lasso(d, y, 0.18);
      Matrix theta(18, 18);
      for (int i = 0; i < 18; ++i)
        theta.col(i) = standard_normal_vector(gen, 18);
      Vector via_S = debias(fit, theta, 0.18, d);
      Vector via_resid =
          fit.beta + theta * (d.X.transpose() * (y - d.X * fit.beta)) / 10.0;
      CHECK((via_S - via_resid).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
  SECTION("dimension mismatch is rejected") {
    GroupedDesign d = random_design(6, 8, {4, 4}, 86);
    BlockLassoFit fit = solve_block_lasso(d, Vector::Zero(6), 0.3);
    CHECK_THROWS_AS(debias(fit, Matrix::Identity(3, 3), 0.3, d),
                    std::invalid_argument);
  }
}

TEST_CASE("bootstrap draws land on the expected strata") {
  SECTION("a dominating penalty leaves almost every draw empty") {
    GroupedDesign d = random_design(6, 9, {3, 3, 3}, 87);
    TestSpec test;
    auto samples = parametric_bootstrap(d, Vector::Zero(9), 0.01, 1.0, 200, 88, test);
    long empty = 0;
    for (const auto& r : samples.records)
      if (r.active_count == 0) ++empty;
    CHECK(empty == 200);
    CHECK(samples.ess == Catch::Approx(200.0));
  }
  SECTION("worked-design stratum frequency within 3 SE") {
    GroupedDesign d = Example1::design();
    Example1 ex;
    ex.sigma2 = 1.0;
    ex.lambda = 1.0;
    TestSpec test;
    SamplerOptions opts;
    opts.keep_draws = true;
    const long N = 20000;
    auto samples = parametric_bootstrap(d, Vector::Zero(3), ex.sigma2, ex.lambda,
                                        N, 89, test, opts);
    long hits = 0;
    for (const auto& draw : samples.retained) {
      int active = 0;
      bool first_active = false;
      if (draw.beta.head(2).cwiseAbs().maxCoeff() > 0) {
        ++active;
        first_active = true;
      }
      if (std::abs(draw.beta[2]) > 0) ++active;
      if (active == 1 && first_active) ++hits;
    }
    const double phat = double(hits) / double(N);
    const double truth = ex.stratum_probability({0});
    CHECK(std::abs(phat - truth) <= 3.0 * std::sqrt(truth * (1 - truth) / N));
  }
  SECTION("orthogonal zero-block frequency matches the noncentral tail") {
    OrthogonalOracle orth;
    orth.m = 4;
    orth.J = 5;
    orth.sigma2 = 1.0;
    orth.lambda = 0.15;
    GroupedDesign d = orthogonal_design(orth.m, orth.J, 90);
    Vector beta_tilde = Vector::Zero(d.p);
    beta_tilde.segment(0, orth.m).setConstant(0.12);
    TestSpec test;
    test.kind = TestSpec::Kind::BlockNorm;
    test.group = 0;
    const long N = 20000;
    auto samples =
        parametric_bootstrap(d, beta_tilde, orth.sigma2, orth.lambda, N, 91, test);
    long zero = 0;
    for (const auto& r : samples.records)
      if (r.stat == Catch::Approx(beta_tilde.head(orth.m).norm()).margin(1e-12))
        ++zero;  // block norm of (0 - beta_tilde block)
    const double phat = double(zero) / double(N);
    const double truth = orth.p_zero(beta_tilde.segment(0, orth.m));
    CHECK(std::abs(phat - truth) <=
          3.0 * std::sqrt(truth * (1 - truth) / N) + 1e-12);
  }
}

TEST_CASE("importance weights") {
  GroupedDesign d = Example1::design();
  const double sigma2 = 1.0, lambda = 0.9;

  SECTION("proposal equal to target gives unit weights") {
    TestSpec test;
    auto samples = importance_sample(d, Vector::Zero(3), sigma2,
                                     ProposalMixture::single(Vector::Zero(3), 1.0),
                                     lambda, 100, 92, test);
    for (const auto& r : samples.records) CHECK(r.log_weight == 0.0);
    CHECK(samples.ess == Catch::Approx(100.0));
  }

  SECTION("weights recompute from the stored draws by both noise routes") {
    TestSpec test;
    SamplerOptions opts;
    opts.keep_draws = true;
    ProposalMixture mix;
    Vector shift = Vector::Zero(3);
    shift[0] = 0.4;
    mix.components = {{0.6, Vector::Zero(3), 5.0}, {0.4, shift, 2.0}};
    auto samples =
        importance_sample(d, Vector::Zero(3), sigma2, mix, lambda, 50, 93, test, opts);
    for (int t = 0; t < 50; ++t) {
      const auto& draw = samples.retained[t];
      // route 1: noise coordinates straight from the stored response
      auto log_phi_at = [&](const Vector& center, double var) {
        Vector v = (draw.y - d.X * center) / std::sqrt(2.0);
        return log_phi(v, var / 2.0);
      };
      double num = log_phi_at(Vector::Zero(3), sigma2);
      std::vector<double> den;
      for (const auto& c : mix.components)
        den.push_back(std::log(c.a) + log_phi_at(c.beta_dagger, c.M * sigma2));
      double m = std::max(den[0], den[1]);
      const double lw1 = num - (m + std::log(std::exp(den[0] - m) + std::exp(den[1] - m)));
      CHECK(samples.records[t].log_weight == Catch::Approx(lw1).margin(1e-10));

      // route 2: through the augmented representation and the pseudo-inverse
      BlockLassoFit fit;
      fit.beta = draw.beta;
      fit.S = draw.S;
      fit.lambda = lambda;
      fit.alpha = 2.0;
      fit.gamma.resize(d.J());
      for (int j = 0; j < d.J(); ++j) {
        fit.gamma[j] = d.block_norm(draw.beta, j, 2.0);
        if (fit.gamma[j] > 0) fit.active.push_back(j);
      }
      AugmentedPoint pt = augment(fit, d);
      auto log_phi_ht = [&](const Vector& center, double var) {
        return log_phi(htilde(pt, d, center, lambda), var / 2.0);
      };
      double num2 = log_phi_ht(Vector::Zero(3), sigma2);
      std::vector<double> den2;
      for (const auto& c : mix.components)
        den2.push_back(std::log(c.a) + log_phi_ht(c.beta_dagger, c.M * sigma2));
      double m2 = std::max(den2[0], den2[1]);
      const double lw2 =
          num2 - (m2 + std::log(std::exp(den2[0] - m2) + std::exp(den2[1] - m2)));
      CHECK(samples.records[t].log_weight == Catch::Approx(lw2).margin(1e-9));
    }
  }

  SECTION("inflated-proposal estimate agrees with plain bootstrap") {
    TestSpec test;
    test.kind = TestSpec::Kind::SumBlockNorms;
    const long N = 20000;
    auto pb = parametric_bootstrap(d, Vector::Zero(3), sigma2, lambda, N, 94, test);
    std::vector<double> stats;
    for (const auto& r : pb.records) stats.push_back(r.stat);
    std::nth_element(stats.begin(), stats.begin() + N / 4, stats.end());
    test.observed = stats[N / 4];  // an event of moderate probability
    auto pv_pb = estimate_pvalue(pb, test);
    auto is = importance_sample(d, Vector::Zero(3), sigma2,
                                ProposalMixture::single(Vector::Zero(3), 5.0),
                                lambda, N, 95, test);
    auto pv_is = estimate_pvalue(is, test);
    const double combined =
        std::sqrt(pv_pb.std_err * pv_pb.std_err + pv_is.std_err * pv_is.std_err);
    CHECK(std::abs(pv_pb.p_hat - pv_is.p_hat) <= 3.0 * combined);
  }
}

TEST_CASE("p-value estimation edge cases") {
  GroupedDesign d = Example1::design();
  TestSpec test;
  auto samples = parametric_bootstrap(d, Vector::Zero(3), 1.0, 0.9, 500, 96, test);

  SECTION("zero observed value of a nonnegative statistic") {
    TestSpec t0 = test;
    t0.observed = 0.0;
    auto pv = estimate_pvalue(samples, t0);
    CHECK(pv.p_hat == 1.0);
  }
  SECTION("observed beyond every draw") {
    TestSpec tinf = test;
    tinf.observed = 1e100;
    auto pv = estimate_pvalue(samples, tinf);
    CHECK(pv.p_hat == 0.0);
    CHECK(pv.std_err == 0.0);
    CHECK(pv.low_tail_ess);
  }
  SECTION("empty sample is rejected") {
    WeightedSampleSet empty;
    TestSpec t = test;
    t.observed = 1.0;
    CHECK_THROWS_AS(estimate_pvalue(empty, t), std::invalid_argument);
  }
}

TEST_CASE("confidence regions") {
  SECTION("delta = 1 returns the smallest draw") {
    GroupedDesign d = Example1::design();
    TestSpec test;
    test.kind = TestSpec::Kind::SumBlockNorms;
    auto samples = parametric_bootstrap(d, Vector::Zero(3), 1.0, 0.9, 200, 97, test);
    double mn = kInf;
    for (const auto& r : samples.records) mn = std::min(mn, r.stat);
    auto region = confidence_region(samples, test, d, Vector::Zero(2), 1.0);
    CHECK(region.threshold == mn);
  }
  SECTION("unit weights match the order statistic") {
    GroupedDesign d = Example1::design();
    TestSpec test;
    test.kind = TestSpec::Kind::SumBlockNorms;
    auto samples = parametric_bootstrap(d, Vector::Zero(3), 1.0, 0.9, 400, 98, test);
    std::vector<double> stats;
    for (const auto& r : samples.records) stats.push_back(r.stat);
    std::sort(stats.begin(), stats.end());
    const double delta = 0.25;
    auto region = confidence_region(samples, test, d, Vector::Zero(2), delta);
    const int idx = static_cast<int>(std::ceil((1.0 - delta) * 400)) - 1;
    CHECK(region.threshold == stats[idx]);
  }
  SECTION("coverage on the orthogonal design matches the exact law") {
    OrthogonalOracle orth;
    orth.m = 4;
    orth.J = 4;
    orth.sigma2 = 1.0;
    orth.lambda = 0.12;
    GroupedDesign d = orthogonal_design(orth.m, orth.J, 99);
    const double delta = 0.2;
    TestSpec test;
    test.kind = TestSpec::Kind::BlockNorm;
    test.group = 0;
    // threshold from bootstrap draws at the true (null) parameter
    auto samples =
        parametric_bootstrap(d, Vector::Zero(d.p), orth.sigma2, orth.lambda,
                             4000, 100, test);
    auto region =
        confidence_region(samples, test, d, Vector::Zero(orth.m), delta);
    // closed-form coverage given the threshold
    const double exact_coverage =
        1.0 - orth.tail_prob(Vector::Zero(orth.m), region.threshold);
    CHECK(std::abs(exact_coverage - (1.0 - delta)) < 0.04);
    // fresh replications: count how often the region covers the truth
    int covered = 0;
    const int reps = 500;
    for (int rep = 0; rep < reps; ++rep) {
      auto gen = make_stream(101, 7, static_cast<std::uint64_t>(rep));
      Vector y = std::sqrt(orth.sigma2) * standard_normal_vector(gen, d.n);
      BlockLassoFit fit = solve_block_lasso(d, y, orth.lambda);
      ConfidenceRegion r2 = region;
      r2.center_block = gather(fit.beta, d.group(0));
      if (r2.contains(d, Vector::Zero(orth.m))) ++covered;
    }
    const double cov = double(covered) / reps;
    const double se = std::sqrt(exact_coverage * (1 - exact_coverage) / reps);
    CHECK(std::abs(cov - exact_coverage) <= 3.0 * se);
  }
}

TEST_CASE("replicate dispersion report") {
  SECTION("identical replicates have zero cv") {
    auto rep = cv_report({0.2, 0.2, 0.2}, 1000);
    CHECK(rep.cv == 0.0);
    CHECK(rep.qbar == Catch::Approx(0.2));
  }
  SECTION("benchmark values") {
    auto a = cv_report({0.5, 0.5}, 100000);
    CHECK(a.cv_pb_theoretical == Catch::Approx(0.0031623).margin(1e-6));
    auto b = cv_report({1e-8, 1e-8}, 100000);
    CHECK(b.cv_pb_theoretical == Catch::Approx(31.6228).margin(1e-3));
  }
  SECTION("zero mean is flagged undefined") {
    auto rep = cv_report({0.0, 0.0, 0.0}, 1000);
    CHECK_FALSE(rep.cv_defined);
  }
}

TEST_CASE("estimator variance halves when the sample doubles") {
  GroupedDesign d = Example1::design();
  Example1 ex;
  ex.sigma2 = 1.0;
  ex.lambda = 1.0;
  TestSpec test;
  test.kind = TestSpec::Kind::SumBlockNorms;
  test.observed = 0.35;  // moderate tail under the null target

  const std::vector<long> sizes = {500, 5000, 50000};
  const int reps = 40;
  std::vector<double> log_var;
  for (size_t i = 0; i < sizes.size(); ++i) {
    std::vector<double> phats(reps);
    for (int r = 0; r < reps; ++r) {
      SamplerOptions opts;
      opts.replicate = static_cast<std::uint64_t>(r);
      auto s = importance_sample(d, Vector::Zero(3), ex.sigma2,
                                 ProposalMixture::single(Vector::Zero(3), 5.0),
                                 ex.lambda, sizes[i], 102 + (std::uint64_t)i,
                                 test, opts);
      phats[r] = estimate_pvalue(s, test).p_hat;
    }
    double mean = 0.0;
    for (double p : phats) mean += p;
    mean /= reps;
    double var = 0.0;
    for (double p : phats) var += (p - mean) * (p - mean);
    var /= (reps - 1);
    log_var.push_back(std::log(var));
  }
  // least-squares slope of log Var against log N
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < sizes.size(); ++i) {
    const double x = std::log(double(sizes[i]));
    sx += x;
    sy += log_var[i];
    sxx += x * x;
    sxy += x * log_var[i];
  }
  const double k = double(sizes.size());
  const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  CHECK(slope == Catch::Approx(-1.0).margin(0.15));
}
