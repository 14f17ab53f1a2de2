#pragma once

#include "blockea/experiments.hpp"
#include "blockea/oracles.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace blockea::cli {

namespace detail {

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stoi(cell));
  return out;
}

inline Vector parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
  Vector v(out.size());
  for (size_t i = 0; i < out.size(); ++i) v[static_cast<int>(i)] = out[i];
  return v;
}

struct DesignArgs {
  std::string x_path;
  std::string groups;
  std::string weights;
  double alpha = 2.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--x", x_path, "design matrix CSV (rows = observations)")
        ->required();
    cmd->add_option("--groups", groups, "comma list of group sizes")->required();
    cmd->add_option("--weights", weights,
                    "comma list of group weights (default sqrt of sizes)");
    cmd->add_option("--alpha", alpha, "block-norm index (1 or 2)");
  }

  GroupedDesign build() const {
    Matrix X = read_matrix_csv(x_path);
    auto sizes = parse_int_list(groups);
    GroupPartition part =
        weights.empty() ? GroupPartition::from_sizes(sizes)
                        : GroupPartition::from_sizes(sizes, parse_double_list(weights));
    return build_design(X, part, alpha);
  }
};

inline TestSpec parse_stat(const std::string& s) {
  TestSpec t;
  auto colon = s.find(':');
  const std::string kind = s.substr(0, colon);
  if (colon != std::string::npos) t.group = std::stoi(s.substr(colon + 1));
  if (kind == "sum-norms")
    t.kind = TestSpec::Kind::SumBlockNorms;
  else if (kind == "fitted-norm")
    t.kind = TestSpec::Kind::FittedGroupNorm;
  else if (kind == "block-norm")
    t.kind = TestSpec::Kind::BlockNorm;
  else
    throw CLI::ValidationError("--stat", "unknown statistic '" + s + "'");
  return t;
}

inline void write_fit_csv(const std::string& path, const GroupedDesign& d,
                          const BlockLassoFit& fit) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int k = 0; k < d.p; ++k) {
    const int j = d.coord_group[k];
    out << format_double(fit.beta[k]) << ',' << format_double(fit.S[k]) << ','
        << format_double(fit.gamma[j]) << ',' << (fit.gamma[j] > 0 ? 1 : 0)
        << '\n';
  }
}

inline AugmentedPoint point_from_csv(const std::string& path,
                                     const GroupedDesign& d,
                                     double activity_tol = 1e-10) {
  Matrix m = read_matrix_csv(path);
  if (m.rows() != d.p || m.cols() < 2)
    throw std::runtime_error("--point: expected p rows with columns beta,S");
  Vector beta = m.col(0), S = m.col(1);
  AugmentedPoint pt;
  pt.s = S;
  std::vector<double> r;
  for (int j = 0; j < d.J(); ++j) {
    const double gj = d.block_norm(beta, j, d.alpha);
    if (gj > activity_tol) {
      pt.A.push_back(j);
      r.push_back(gj);
    }
  }
  pt.r = Eigen::Map<Vector>(r.data(), static_cast<int>(r.size()));
  return pt;
}

inline ProposalMixture mixture_from_config(const std::string& path,
                                           const Vector& beta_tilde) {
  ProposalMixture mix;
  for (const auto& sec : parse_config_file(path)) {
    if (sec.name != "component") continue;
    MixtureComponent c;
    c.a = sec.get_double("a");
    c.M = sec.get_double("m");
    const std::string beta = sec.get_or("beta", "target");
    if (beta == "zero")
      c.beta_dagger = Vector::Zero(beta_tilde.size());
    else if (beta == "target")
      c.beta_dagger = beta_tilde;
    else
      c.beta_dagger = read_vector_csv(beta);
    mix.components.push_back(std::move(c));
  }
  if (mix.components.empty())
    throw std::runtime_error("--mixture: no [component] sections in " + path);
  return mix;
}

inline void write_draws_csv(const std::string& path,
                            const WeightedSampleSet& samples,
                            const std::optional<PValueEstimate>& pv) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "active_count,stat,log_weight\n";
  for (const auto& r : samples.records)
    out << r.active_count << ',' << format_double(r.stat) << ','
        << format_double(r.log_weight) << '\n';
  out << "# summary = {";
  if (pv)
    out << "\"p_hat\": " << format_double(pv->p_hat)
        << ", \"se\": " << format_double(pv->std_err) << ", ";
  out << "\"ess\": " << format_double(samples.ess) << "}\n";
  if (samples.low_ess_warning) out << "# warning = low effective sample size\n";
}

inline SimulationConfig config_from_file(const std::string& path) {
  for (const auto& sec : parse_config_file(path))
    if (sec.name == "simulation" || sec.name.empty())
      return SimulationConfig::from_section(sec);
  throw std::runtime_error("config: no [simulation] section in " + path);
}

}  // namespace detail

inline int run(const std::vector<std::string>& args) {
  CLI::App app{"block-penalized regression with exact augmented-estimator "
               "densities, bootstrap and importance-sampling inference"};
  app.require_subcommand(1);

  // ---- fit ----
  auto* fit_cmd = app.add_subcommand("fit", "solve the penalized program");
  detail::DesignArgs fit_design;
  fit_design.attach(fit_cmd);
  std::string fit_y, fit_out;
  double fit_lambda = 0.0;
  int fit_k = 0;
  fit_cmd->add_option("--y", fit_y, "response CSV")->required();
  auto* lam_opt = fit_cmd->add_option("--lambda", fit_lambda, "penalty level");
  auto* k_opt = fit_cmd->add_option("--active-groups", fit_k,
                                    "choose lambda giving exactly k active groups");
  fit_cmd->add_option("--out", fit_out, "output CSV: beta,S,gamma,active")->required();

  // ---- density ----
  auto* den_cmd = app.add_subcommand("density", "evaluate the joint density at a point");
  detail::DesignArgs den_design;
  den_design.attach(den_cmd);
  std::string den_point, den_beta0;
  double den_sigma2 = 1.0, den_lambda = 0.0;
  den_cmd->add_option("--point", den_point, "fit CSV (beta,S columns)")->required();
  den_cmd->add_option("--beta0", den_beta0, "true coefficient CSV")->required();
  den_cmd->add_option("--sigma2", den_sigma2, "noise variance")->required();
  den_cmd->add_option("--lambda", den_lambda, "penalty level")->required();

  // ---- sample-pb / sample-is ----
  struct SampleArgs {
    detail::DesignArgs design;
    std::string beta_tilde, out, stat = "sum-norms", theta, mixture;
    double sigma2 = 1.0, lambda = 0.0;
    double observed = std::numeric_limits<double>::quiet_NaN();
    long n_draws = 10000;
    std::uint64_t seed = 1;
    int workers = 0;
  };
  auto attach_sample = [](CLI::App* cmd, SampleArgs& a, bool with_mixture) {
    a.design.attach(cmd);
    cmd->add_option("--beta-tilde", a.beta_tilde, "target coefficient CSV")->required();
    cmd->add_option("--sigma2", a.sigma2, "noise variance")->required();
    cmd->add_option("--lambda", a.lambda, "penalty level")->required();
    cmd->add_option("--n-draws", a.n_draws, "number of draws");
    cmd->add_option("--seed", a.seed, "RNG seed");
    cmd->add_option("--stat", a.stat,
                    "statistic: sum-norms | fitted-norm:J | block-norm:J");
    cmd->add_option("--observed", a.observed, "observed statistic for the p-value");
    cmd->add_option("--theta-hat", a.theta, "p x p matrix CSV enabling de-biasing");
    cmd->add_option("--workers", a.workers, "worker threads (0 = auto)");
    cmd->add_option("--out", a.out, "draws CSV")->required();
    if (with_mixture)
      cmd->add_option("--mixture", a.mixture,
                      "mixture config: [component] a=, m=, beta=zero|target|CSV")
          ->required();
  };
  SampleArgs pb_args, is_args;
  auto* pb_cmd = app.add_subcommand("sample-pb", "parametric bootstrap draws");
  attach_sample(pb_cmd, pb_args, false);
  auto* is_cmd = app.add_subcommand("sample-is", "importance-sampling draws");
  attach_sample(is_cmd, is_args, true);

  // ---- simulate ----
  auto* sim_cmd = app.add_subcommand("simulate", "generate a synthetic dataset");
  std::string sim_config, sim_x, sim_y, sim_b0;
  int sim_index = 0;
  sim_cmd->add_option("--config", sim_config, "simulation config file")->required();
  sim_cmd->add_option("--index", sim_index, "dataset index");
  sim_cmd->add_option("--out-x", sim_x, "design CSV")->required();
  sim_cmd->add_option("--out-y", sim_y, "response CSV")->required();
  sim_cmd->add_option("--out-beta0", sim_b0, "true coefficient CSV");

  // ---- experiments ----
  struct ExpArgs {
    std::string config, out;
    long n_draws = 10000;
    int replicates = 10;
    int workers = 0;
  };
  ExpArgs grp_args, dbl_args;
  auto attach_exp = [](CLI::App* cmd, ExpArgs& a) {
    cmd->add_option("--config", a.config, "simulation config file")->required();
    cmd->add_option("--n-draws", a.n_draws, "draws per replicate run");
    cmd->add_option("--replicates", a.replicates, "independent replicate runs");
    cmd->add_option("--workers", a.workers, "worker threads (0 = auto)");
    cmd->add_option("--out", a.out, "results CSV")->required();
  };
  auto* grp_cmd = app.add_subcommand(
      "experiment-group", "complete-null test with the sum of block norms");
  attach_exp(grp_cmd, grp_args);
  auto* dbl_cmd = app.add_subcommand(
      "experiment-debias", "first-group test with the de-biased solution");
  attach_exp(dbl_cmd, dbl_args);

  // ---- oracle-check ----
  auto* ora_cmd = app.add_subcommand(
      "oracle-check", "closed forms vs quadrature vs direct simulation");
  long ora_mc = 200000, ora_orth = 20000;
  std::uint64_t ora_seed = 7;
  ora_cmd->add_option("--n-draws", ora_mc, "simulation draws for the fixed design");
  ora_cmd->add_option("--n-orth", ora_orth, "simulation draws for the orthogonal design");
  ora_cmd->add_option("--seed", ora_seed, "RNG seed");

  std::vector<std::string> argv_copy = args;
  try {
    std::vector<const char*> argv;
    argv.push_back("blockea");
    for (const auto& s : argv_copy) argv.push_back(s.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*fit_cmd) {
      GroupedDesign d = fit_design.build();
      Vector y = read_vector_csv(fit_y);
      double lambda = fit_lambda;
      if (*k_opt)
        lambda = select_lambda_by_active_groups(d, y, fit_k);
      else if (!*lam_opt)
        throw std::runtime_error("fit: need --lambda or --active-groups");
      BlockLassoFit fit = solve_block_lasso(d, y, lambda);
      detail::write_fit_csv(fit_out, d, fit);
      std::cout << "lambda: " << format_double(lambda) << "\n";
      std::cout << "objective: " << format_double(fit.objective) << "\n";
      std::cout << "kkt_residual: " << format_double(fit.kkt_residual) << "\n";
      std::cout << "active:";
      for (int j : fit.active) std::cout << ' ' << j;
      std::cout << "\n";
    } else if (*den_cmd) {
      GroupedDesign d = den_design.build();
      AugmentedPoint pt = detail::point_from_csv(den_point, d);
      Vector beta0 = read_vector_csv(den_beta0);
      auto dv = density(pt, d, beta0, den_lambda,
                        NoiseModel::gaussian(den_sigma2));
      std::cout << "stratum:";
      for (int j : pt.A) std::cout << ' ' << j;
      std::cout << "\nchart_free_coords:";
      for (int k : dv.chart.F) std::cout << ' ' << k;
      std::cout << "\njacobian: " << format_double(dv.jac) << "\n";
      std::cout << "log_density: " << format_double(dv.log_value) << "\n";
      std::cout << "density: " << format_double(dv.value) << "\n";
    } else if (*pb_cmd || *is_cmd) {
      SampleArgs& a = *pb_cmd ? pb_args : is_args;
      GroupedDesign d = a.design.build();
      Vector beta_tilde = read_vector_csv(a.beta_tilde);
      TestSpec test = detail::parse_stat(a.stat);
      test.observed = a.observed;
      SamplerOptions opts;
      opts.workers = a.workers;
      if (!a.theta.empty()) opts.theta_hat = read_matrix_csv(a.theta);
      ProposalMixture mix =
          *is_cmd ? detail::mixture_from_config(a.mixture, beta_tilde)
                  : ProposalMixture::single(beta_tilde, 1.0);
      auto samples = importance_sample(d, beta_tilde, a.sigma2, mix, a.lambda,
                                       a.n_draws, a.seed, test, opts);
      std::optional<PValueEstimate> pv;
      if (!std::isnan(test.observed)) pv = estimate_pvalue(samples, test);
      detail::write_draws_csv(a.out, samples, pv);
      std::cout << "ess: " << format_double(samples.ess) << "\n";
      if (pv)
        std::cout << "p_hat: " << format_double(pv->p_hat)
                  << "\nse: " << format_double(pv->std_err) << "\n";
    } else if (*sim_cmd) {
      SimulationConfig cfg = detail::config_from_file(sim_config);
      SimulatedDataset ds = simulate_dataset(cfg, sim_index);
      write_matrix_csv(sim_x, ds.X);
      write_vector_csv(sim_y, ds.y);
      if (!sim_b0.empty()) write_vector_csv(sim_b0, ds.beta0);
      std::cout << "dataset " << sim_index << ": n = " << cfg.n
                << ", p = " << cfg.p << "\n";
    } else if (*grp_cmd || *dbl_cmd) {
      ExpArgs& a = *grp_cmd ? grp_args : dbl_args;
      SimulationConfig cfg = detail::config_from_file(a.config);
      ExperimentResult result =
          *grp_cmd ? run_group_lasso_experiment(cfg, a.n_draws, a.replicates,
                                                a.workers)
                   : run_debiased_experiment(cfg, a.n_draws, a.replicates,
                                             a.workers);
      emit_results(result, a.out);
      int ok = 0;
      for (const auto& ds : result.datasets) ok += ds.ok ? 1 : 0;
      std::cout << "datasets completed: " << ok << "/"
                << result.datasets.size() << "\n";
    } else if (*ora_cmd) {
      OracleCheckReport report = run_oracle_check(ora_mc, ora_orth, ora_seed);
      print_oracle_check(report, std::cout);
      return report.all_pass ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace blockea::cli
