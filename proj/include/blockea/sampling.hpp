#pragma once

#include "blockea/augmented.hpp"
#include "blockea/density.hpp"
#include "blockea/parallel.hpp"

#include <limits>

namespace blockea {

/// One-step bias correction b = beta_hat + lambda Theta W S, equal by the
/// stationarity identity to beta_hat + Theta X^T (y - X beta_hat)/n.
inline Vector debias(const BlockLassoFit& fit, const Matrix& theta_hat,
                     double lambda, const GroupedDesign& d) {
  if (theta_hat.rows() != d.p || theta_hat.cols() != d.p)
    throw std::invalid_argument("debias: theta_hat must be p x p");
  if (fit.beta.size() != d.p)
    throw std::invalid_argument("debias: fit dimension mismatch");
  return fit.beta + lambda * (theta_hat * d.w_coord.cwiseProduct(fit.S));
}

/// Mixture of bootstrap proposals: component k redraws noise at M_k sigma^2
/// around X beta_dagger_k, all sharing the target lambda.
struct MixtureComponent {
  double a = 1.0;
  Vector beta_dagger;
  double M = 1.0;
};

struct ProposalMixture {
  std::vector<MixtureComponent> components;

  void validate(int p) const {
    if (components.empty())
      throw std::invalid_argument("mixture: needs at least one component");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.a > 0) || !(c.M > 0))
        throw std::invalid_argument("mixture: weights and variance factors must be positive");
      if (c.beta_dagger.size() != p)
        throw std::invalid_argument("mixture: component center has wrong dimension");
      total += c.a;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw std::invalid_argument("mixture: component weights must sum to 1");
  }

  static ProposalMixture single(Vector beta_dagger, double M) {
    return ProposalMixture{{{1.0, std::move(beta_dagger), M}}};
  }
};

/// Statistic evaluated on each draw; `observed` is the value on the data.
struct TestSpec {
  enum class Kind {
    SumBlockNorms,   // sum_j ||beta_(j)||_alpha of the solution itself
    FittedGroupNorm, // ||X_(j)(b_(j) - beta_tilde_(j))|| of the de-biased vector
    BlockNorm,       // ||b_(j) - beta_tilde_(j)|| (de-biased if available)
  };
  Kind kind = Kind::SumBlockNorms;
  int group = 0;
  double observed = std::numeric_limits<double>::quiet_NaN();
};

inline double evaluate_statistic(const TestSpec& test, const GroupedDesign& d,
                                 const BlockLassoFit& fit,
                                 const Vector* b_debiased,
                                 const Vector& beta_tilde) {
  switch (test.kind) {
    case TestSpec::Kind::SumBlockNorms:
      return fit.gamma.sum();
    case TestSpec::Kind::FittedGroupNorm: {
      if (!b_debiased)
        throw std::invalid_argument("statistic: fitted-norm needs a de-biased vector");
      const auto& g = d.group(test.group);
      Vector diff = gather(*b_debiased, g) - gather(beta_tilde, g);
      return (gather_cols(d.X, g) * diff).norm();
    }
    case TestSpec::Kind::BlockNorm: {
      const Vector& b = b_debiased ? *b_debiased : fit.beta;
      const auto& g = d.group(test.group);
      return (gather(b, g) - gather(beta_tilde, g)).norm();
    }
  }
  throw std::logic_error("statistic: unknown kind");
}

struct DrawRecord {
  int active_count = 0;
  double stat = 0.0;
  double log_weight = 0.0;
};

struct RetainedDraw {
  Vector y;
  Vector beta;
  Vector S;
  Vector b_debiased;  // empty when no theta_hat
};

/// Weighted draws of the augmented estimator targeting
/// (beta_tilde, sigma2, lambda), with per-draw statistic values and
/// importance weights (identically 1 under plain bootstrap).
struct WeightedSampleSet {
  std::vector<DrawRecord> records;
  std::vector<RetainedDraw> retained;  // only with keep_draws

  Vector beta_tilde;
  double sigma2 = 1.0;
  double lambda = 0.0;
  ProposalMixture proposal;
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;

  double ess = 0.0;
  bool low_ess_warning = false;

  long size() const { return static_cast<long>(records.size()); }
};

struct SamplerOptions {
  std::uint64_t replicate = 0;  // stream key component for replicate runs
  std::optional<Matrix> theta_hat;  // enables de-biased statistics
  bool keep_draws = false;
  int workers = 1;
  int resample_attempts = 1;  // re-key a failed draw this many times
};

namespace detail {

inline double log_sum_exp(const std::vector<double>& v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// log density of the noise functional used in the weights: for p >= n the
// map to noise coordinates is (y - X beta)/sqrt(n) with law N(0, c I_n);
// for p < n the sufficient statistic X^T(y - X beta)/n with law N(0, c Psi).
inline double log_noise_at(const GroupedDesign& d, const Vector& y,
                           const Vector& beta, double variance) {
  if (d.p >= d.n) {
    Vector v = (y - d.X * beta) / std::sqrt(double(d.n));
    return log_phi(v, variance / double(d.n));
  }
  Vector u = d.X.transpose() * (y - d.X * beta) / double(d.n);
  const double c = variance / double(d.n);
  return -0.5 * d.p * std::log(2.0 * M_PI * c) - 0.5 * d.psi_logdet -
         0.5 * u.dot(d.psi_llt.solve(u)) / c;
}

}  // namespace detail

/// Mixture importance sampler over the bootstrap distribution. Draw t picks
/// a component, redraws y* around its center with inflated variance, solves
/// the penalized program, and weights by the ratio of Gaussian noise
/// densities: with a shared lambda the Jacobians of the estimator map cancel.
/// A single component at (beta_tilde, M = 1) is the parametric bootstrap and
/// yields unit weights.
inline WeightedSampleSet importance_sample(const GroupedDesign& d,
                                           const Vector& beta_tilde,
                                           double sigma2,
                                           const ProposalMixture& mixture,
                                           double lambda, long N,
                                           std::uint64_t seed,
                                           const TestSpec& test,
                                           const SamplerOptions& opts = {}) {
  mixture.validate(d.p);
  if (N < 1) throw std::invalid_argument("sampler: N must be positive");
  const int K = static_cast<int>(mixture.components.size());

  // warm starts: the noiseless fit at each component center
  std::vector<Vector> warm(K);
  for (int k = 0; k < K; ++k)
    warm[k] =
        solve_block_lasso(d, d.X * mixture.components[k].beta_dagger, lambda).beta;

  const bool target_is_proposal =
      K == 1 && mixture.components[0].M == 1.0 &&
      (mixture.components[0].beta_dagger - beta_tilde).norm() == 0.0;

  WeightedSampleSet out;
  out.records.resize(N);
  if (opts.keep_draws) out.retained.resize(N);
  out.beta_tilde = beta_tilde;
  out.sigma2 = sigma2;
  out.lambda = lambda;
  out.proposal = mixture;
  out.seed = seed;
  out.replicate = opts.replicate;

  std::vector<Vector> centers(K);
  for (int k = 0; k < K; ++k)
    centers[k] = d.X * mixture.components[k].beta_dagger;

  auto one_draw = [&](int t) {
    for (int attempt = 0;; ++attempt) {
      const std::uint64_t draw_key =
          static_cast<std::uint64_t>(t) +
          static_cast<std::uint64_t>(attempt) * (static_cast<std::uint64_t>(N) + 1);
      auto gen = make_stream(seed, opts.replicate, draw_key);
      int z = 0;
      if (K > 1) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double u = unif(gen), acc = 0.0;
        for (int k = 0; k < K; ++k) {
          acc += mixture.components[k].a;
          if (u <= acc || k == K - 1) {
            z = k;
            break;
          }
        }
      }
      const auto& comp = mixture.components[z];
      Vector y = centers[z] + std::sqrt(comp.M * sigma2) *
                                  standard_normal_vector(gen, d.n);
      SolverOptions sopts;
      sopts.init = warm[z];
      BlockLassoFit fit;
      try {
        fit = solve_block_lasso(d, y, lambda, sopts);
      } catch (const ConvergenceError&) {
        if (attempt < opts.resample_attempts) continue;
        throw;
      }

      double log_w = 0.0;
      if (!target_is_proposal) {
        const double log_num =
            detail::log_noise_at(d, y, beta_tilde, sigma2);
        std::vector<double> log_den(K);
        for (int k = 0; k < K; ++k)
          log_den[k] = std::log(mixture.components[k].a) +
                       detail::log_noise_at(d, y, mixture.components[k].beta_dagger,
                                            mixture.components[k].M * sigma2);
        log_w = log_num - detail::log_sum_exp(log_den);
      }

      Vector b_debiased;
      const Vector* b_ptr = nullptr;
      if (opts.theta_hat) {
        b_debiased = debias(fit, *opts.theta_hat, lambda, d);
        b_ptr = &b_debiased;
      }
      DrawRecord rec;
      rec.active_count = static_cast<int>(fit.active.size());
      rec.stat = evaluate_statistic(test, d, fit, b_ptr, beta_tilde);
      rec.log_weight = log_w;
      out.records[t] = rec;
      if (opts.keep_draws)
        out.retained[t] = RetainedDraw{y, fit.beta, fit.S, b_debiased};
      return;
    }
  };
  parallel_for(static_cast<int>(N), opts.workers, one_draw);

  std::vector<double> lw(N), lw2(N);
  for (long t = 0; t < N; ++t) {
    lw[t] = out.records[t].log_weight;
    lw2[t] = 2.0 * lw[t];
  }
  const double lse = detail::log_sum_exp(lw);
  if (std::isinf(lse))
    throw std::runtime_error("sampler: total importance weight is zero");
  out.ess = std::exp(2.0 * lse - detail::log_sum_exp(lw2));
  out.low_ess_warning = out.ess < 10.0;
  return out;
}

/// Plain parametric bootstrap: unit-weight draws from the target itself.
inline WeightedSampleSet parametric_bootstrap(const GroupedDesign& d,
                                              const Vector& beta_tilde,
                                              double sigma2, double lambda,
                                              long N, std::uint64_t seed,
                                              const TestSpec& test,
                                              const SamplerOptions& opts = {}) {
  return importance_sample(d, beta_tilde, sigma2,
                           ProposalMixture::single(beta_tilde, 1.0), lambda, N,
                           seed, test, opts);
}

struct PValueEstimate {
  double p_hat = 0.0;
  double std_err = 0.0;
  bool low_tail_ess = false;
};

/// Self-normalized weighted tail frequency P(stat >= observed) with its
/// delta-method standard error.
inline PValueEstimate estimate_pvalue(const WeightedSampleSet& samples,
                                      const TestSpec& test) {
  if (samples.records.empty()) throw std::invalid_argument("pvalue: empty sample");
  if (std::isnan(test.observed))
    throw std::invalid_argument("pvalue: observed statistic not set");
  double max_lw = -kInf;
  for (const auto& r : samples.records) max_lw = std::max(max_lw, r.log_weight);
  double sw = 0.0, sw_tail = 0.0;
  for (const auto& r : samples.records) {
    const double w = std::exp(r.log_weight - max_lw);
    sw += w;
    if (r.stat >= test.observed) sw_tail += w;
  }
  PValueEstimate out;
  out.p_hat = sw_tail / sw;
  double var = 0.0;
  long tail_count = 0;
  for (const auto& r : samples.records) {
    const double w = std::exp(r.log_weight - max_lw);
    const double h = r.stat >= test.observed ? 1.0 : 0.0;
    var += w * w * (h - out.p_hat) * (h - out.p_hat);
    if (h > 0) ++tail_count;
  }
  out.std_err = std::sqrt(var) / sw;
  out.low_tail_ess = tail_count < 5;
  return out;
}

struct ConfidenceRegion {
  TestSpec test;
  Vector center_block;  // de-biased estimate restricted to the group
  IndexList group_coords;
  double threshold = 0.0;
  bool low_ess_warning = false;

  /// Membership of a candidate parameter block theta.
  bool contains(const GroupedDesign& d, const Vector& theta) const {
    Vector diff = center_block - theta;
    if (test.kind == TestSpec::Kind::FittedGroupNorm)
      return (gather_cols(d.X, group_coords) * diff).norm() <= threshold;
    return diff.norm() <= threshold;
  }
};

/// Weighted (1 - delta)-quantile of the sampled statistic; the returned
/// region keeps h_j(b_(j) - theta) below it.
inline ConfidenceRegion confidence_region(const WeightedSampleSet& samples,
                                          const TestSpec& test,
                                          const GroupedDesign& d,
                                          const Vector& center_block,
                                          double delta) {
  if (!(delta > 0.0 && delta <= 1.0))
    throw std::invalid_argument("confidence_region: delta must be in (0, 1]");
  if (samples.records.empty())
    throw std::invalid_argument("confidence_region: empty sample");

  std::vector<std::pair<double, double>> sv;  // (stat, weight)
  sv.reserve(samples.records.size());
  double max_lw = -kInf;
  for (const auto& r : samples.records) max_lw = std::max(max_lw, r.log_weight);
  double sw = 0.0;
  for (const auto& r : samples.records) {
    const double w = std::exp(r.log_weight - max_lw);
    sv.emplace_back(r.stat, w);
    sw += w;
  }
  std::sort(sv.begin(), sv.end());
  const double level = (1.0 - delta) * sw;
  double acc = 0.0, thr = sv.back().first;
  for (const auto& [stat, w] : sv) {
    acc += w;
    if (acc >= level) {
      thr = stat;
      break;
    }
  }
  ConfidenceRegion out;
  out.test = test;
  out.center_block = center_block;
  out.group_coords = d.group(test.group);
  out.threshold = thr;
  out.low_ess_warning = samples.ess * delta < 5.0;
  return out;
}

struct CvReport {
  double qbar = 0.0;
  double cv = 0.0;
  double cv_pb_theoretical = 0.0;
  double log10_ratio = 0.0;
  bool cv_defined = true;
};

/// Spread of replicate estimates versus the binomial benchmark
/// sqrt((1 - qbar) / (N qbar)) of a plain bootstrap with the same N.
inline CvReport cv_report(const std::vector<double>& replicate_estimates, long N) {
  if (replicate_estimates.size() < 2)
    throw std::invalid_argument("cv_report: need at least two replicates");
  const double R = static_cast<double>(replicate_estimates.size());
  double mean = 0.0;
  for (double q : replicate_estimates) mean += q;
  mean /= R;
  const auto [mn, mx] = std::minmax_element(replicate_estimates.begin(),
                                            replicate_estimates.end());
  double ss = 0.0;
  for (double q : replicate_estimates) ss += (q - mean) * (q - mean);
  // identical replicates have zero spread exactly
  const double sd = *mn == *mx ? 0.0 : std::sqrt(ss / (R - 1.0));  // sample sd

  CvReport out;
  out.qbar = mean;
  if (mean == 0.0) {
    out.cv_defined = false;
    out.cv = std::numeric_limits<double>::quiet_NaN();
    out.cv_pb_theoretical = kInf;
    out.log10_ratio = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  out.cv = sd / mean;
  out.cv_pb_theoretical = std::sqrt((1.0 - mean) / (double(N) * mean));
  out.log10_ratio = std::log10(out.cv_pb_theoretical / out.cv);
  return out;
}

}  // namespace blockea
