#pragma once

#include "blockea/grouped_design.hpp"
#include "blockea/sampling.hpp"
#include "blockea/simulate.hpp"

#include <ostream>

namespace blockea {

struct DatasetOutcome {
  int dataset_id = 0;
  bool ok = false;
  std::string note;  // skip reason when !ok
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double stat_obs = std::numeric_limits<double>::quiet_NaN();
  double qbar = std::numeric_limits<double>::quiet_NaN();
  double log10_qbar = std::numeric_limits<double>::quiet_NaN();
  double cv_is = std::numeric_limits<double>::quiet_NaN();
  double cv_pb_theory = std::numeric_limits<double>::quiet_NaN();
  double log10_ratio = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> replicate_phat;
};

struct ExperimentResult {
  std::string kind;  // "group" or "debias"
  std::uint64_t seed = 0;
  long n_draws = 0;
  int replicates = 0;
  std::vector<DatasetOutcome> datasets;
};

namespace detail {

// stream-key offsets separating the sampling phases from dataset simulation
constexpr std::uint64_t kSamplerSalt = 0xD5;

inline std::uint64_t sampler_seed(std::uint64_t seed, int dataset) {
  return mix_key(seed, kSamplerSalt, static_cast<std::uint64_t>(dataset));
}

}  // namespace detail

/// Tests the complete null (all groups zero) with the sum of block norms on
/// each simulated dataset: lambda from the two-active-group rule, then R
/// independent importance-sampling runs (single component at zero, variance
/// inflated 5x) of N draws each against the null target.
inline ExperimentResult run_group_lasso_experiment(const SimulationConfig& cfg,
                                                   long N, int R,
                                                   int workers = 0) {
  ExperimentResult result;
  result.kind = "group";
  result.seed = cfg.seed;
  result.n_draws = N;
  result.replicates = R;
  result.datasets.resize(cfg.dataset_count);

  const Matrix sigma_sqrt = cfg.covariance_sqrt();
  const NoiseModel noise = NoiseModel::gaussian(cfg.sigma2);

  parallel_for(cfg.dataset_count, workers, [&](int i) {
    DatasetOutcome& out = result.datasets[i];
    out.dataset_id = i;
    try {
      SimulatedDataset ds = simulate_dataset(cfg, i, sigma_sqrt);
      GroupedDesign design = build_design(ds.X, cfg.group_sizes(), 2.0);
      out.lambda = select_lambda_by_active_groups(design, ds.y, 2);
      BlockLassoFit fit = solve_block_lasso(design, ds.y, out.lambda);
      TestSpec test;
      test.kind = TestSpec::Kind::SumBlockNorms;
      test.observed = fit.gamma.sum();
      out.stat_obs = test.observed;

      const Vector null_target = Vector::Zero(design.p);
      ProposalMixture proposal = ProposalMixture::single(null_target, 5.0);
      out.replicate_phat.resize(R);
      for (int r = 0; r < R; ++r) {
        SamplerOptions sopts;
        sopts.replicate = static_cast<std::uint64_t>(r);
        auto samples = importance_sample(design, null_target, cfg.sigma2,
                                         proposal, out.lambda, N,
                                         detail::sampler_seed(cfg.seed, i),
                                         test, sopts);
        out.replicate_phat[r] = estimate_pvalue(samples, test).p_hat;
      }
      CvReport cv = cv_report(out.replicate_phat, N);
      out.qbar = cv.qbar;
      out.log10_qbar = std::log10(cv.qbar);
      out.cv_is = cv.cv;
      out.cv_pb_theory = cv.cv_pb_theoretical;
      out.log10_ratio = cv.log10_ratio;
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.note = e.what();
    }
  });
  return result;
}

/// Tests the first group's null with the de-biased solution and the fitted
/// block norm T_1 = ||X_(1) b_(1)||: Theta = Sigma^{-1} (population
/// covariance), plug-in target beta_tilde = beta_hat, two-component mixture
/// (centers beta_hat and beta_hat with its first block halved, variance
/// factors 2 and 4).
inline ExperimentResult run_debiased_experiment(const SimulationConfig& cfg,
                                                long N, int R,
                                                int workers = 0) {
  ExperimentResult result;
  result.kind = "debias";
  result.seed = cfg.seed;
  result.n_draws = N;
  result.replicates = R;
  result.datasets.resize(cfg.dataset_count);

  const Matrix sigma_sqrt = cfg.covariance_sqrt();
  const Matrix theta_hat = cfg.covariance().inverse();

  parallel_for(cfg.dataset_count, workers, [&](int i) {
    DatasetOutcome& out = result.datasets[i];
    out.dataset_id = i;
    try {
      SimulatedDataset ds = simulate_dataset(cfg, i, sigma_sqrt);
      GroupedDesign design = build_design(ds.X, cfg.group_sizes(), 2.0);
      out.lambda = select_lambda_by_active_groups(design, ds.y, 2);
      BlockLassoFit fit = solve_block_lasso(design, ds.y, out.lambda);
      const Vector b_hat = debias(fit, theta_hat, out.lambda, design);
      const Vector beta_tilde = fit.beta;  // plug-in target

      TestSpec test;
      test.kind = TestSpec::Kind::FittedGroupNorm;
      test.group = 0;
      {
        // observed statistic: h_1(b_(1)) itself (null-centered)
        const auto& g = design.group(0);
        test.observed = (gather_cols(design.X, g) * gather(b_hat, g)).norm();
      }
      out.stat_obs = test.observed;

      ProposalMixture mixture;
      Vector half = beta_tilde;
      for (int k : design.group(0)) half[k] *= 0.5;
      mixture.components = {{0.5, beta_tilde, 2.0}, {0.5, half, 4.0}};

      out.replicate_phat.resize(R);
      for (int r = 0; r < R; ++r) {
        SamplerOptions sopts;
        sopts.replicate = static_cast<std::uint64_t>(r);
        sopts.theta_hat = theta_hat;
        auto samples = importance_sample(design, beta_tilde, cfg.sigma2,
                                         mixture, out.lambda, N,
                                         detail::sampler_seed(cfg.seed, i),
                                         test, sopts);
        out.replicate_phat[r] = estimate_pvalue(samples, test).p_hat;
      }
      CvReport cv = cv_report(out.replicate_phat, N);
      out.qbar = cv.qbar;
      out.log10_qbar = std::log10(cv.qbar);
      out.cv_is = cv.cv;
      out.cv_pb_theory = cv.cv_pb_theoretical;
      out.log10_ratio = cv.log10_ratio;
      out.ok = true;
    } catch (const std::exception& e) {
      out.ok = false;
      out.note = e.what();
    }
  });
  return result;
}

/// CSV emission: one row per completed dataset, then a summary block as
/// comment lines. Floats carry 17 significant digits so a reparse is
/// bit-exact.
inline void emit_results(const ExperimentResult& result, std::ostream& out) {
  out << "dataset_id,lambda,stat_obs,log10_qbar,cv_is,cv_pb_theory,log10_ratio\n";
  for (const auto& d : result.datasets) {
    if (!d.ok) continue;
    out << d.dataset_id << ',' << format_double(d.lambda) << ','
        << format_double(d.stat_obs) << ','
        << format_double(d.log10_qbar) << ',' << format_double(d.cv_is)
        << ',' << format_double(d.cv_pb_theory) << ','
        << format_double(d.log10_ratio) << '\n';
  }
  out << "# kind = " << result.kind << '\n';
  out << "# seed = " << result.seed << '\n';
  out << "# n_draws = " << result.n_draws << '\n';
  out << "# replicates = " << result.replicates << '\n';
  int skipped = 0;
  for (const auto& d : result.datasets)
    if (!d.ok) ++skipped;
  out << "# skipped = " << skipped << '\n';
  for (const auto& d : result.datasets)
    if (!d.ok) out << "# skip " << d.dataset_id << ": " << d.note << '\n';
}

inline void emit_results(const ExperimentResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  emit_results(result, out);
}

/// Reparses an emitted CSV (rows and the summary block).
inline ExperimentResult read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  ExperimentResult result;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        std::string val = line.substr(eq + 1);
        auto trim = [](std::string s) {
          auto b = s.find_first_not_of(" \t");
          auto e = s.find_last_not_of(" \t\r");
          return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        key = trim(key);
        val = trim(val);
        if (key == "kind") result.kind = val;
        if (key == "seed") result.seed = std::stoull(val);
        if (key == "n_draws") result.n_draws = std::stol(val);
        if (key == "replicates") result.replicates = std::stoi(val);
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    auto vals = detail::parse_csv_line(line);
    DatasetOutcome d;
    d.dataset_id = static_cast<int>(vals[0]);
    d.lambda = vals[1];
    d.stat_obs = vals[2];
    d.log10_qbar = vals[3];
    d.qbar = std::pow(10.0, vals[3]);
    d.cv_is = vals[4];
    d.cv_pb_theory = vals[5];
    d.log10_ratio = vals[6];
    d.ok = true;
    result.datasets.push_back(std::move(d));
  }
  return result;
}

}  // namespace blockea
