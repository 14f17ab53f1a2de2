#pragma once

#include "blockea/io.hpp"
#include "blockea/rng.hpp"

namespace blockea {

/// Synthetic-data recipe: rows of X from N(0, Sigma) with equicorrelated
/// blocks, a fixed signed signal pattern on the first two groups, Gaussian
/// noise. Deterministic given (seed, dataset index).
struct SimulationConfig {
  int n = 30;
  int p = 100;
  int group_size = 10;
  double rho1 = 0.0;   // within-group correlation
  double rho2 = 0.0;   // between-group correlation
  double sigma2 = 1.0;
  enum class Pattern { Null, HalfV, FullV };
  Pattern pattern = Pattern::Null;
  int dataset_count = 10;
  std::uint64_t seed = 1;

  int n_groups() const {
    if (p % group_size != 0)
      throw std::invalid_argument("simulation: p must be a multiple of the group size");
    return p / group_size;
  }

  std::vector<int> group_sizes() const {
    return std::vector<int>(n_groups(), group_size);
  }

  /// The signal vector placed on each of the first two groups.
  static Vector pattern_v() {
    Vector v(10);
    v << 1, 1, 1, 1, -1, -1, -1, -1, 0, 0;
    return v;
  }

  Vector beta0() const {
    Vector b = Vector::Zero(p);
    if (pattern == Pattern::Null) return b;
    if (group_size != 10)
      throw std::invalid_argument("simulation: signal patterns require group size 10");
    if (n_groups() < 2)
      throw std::invalid_argument("simulation: signal patterns require at least 2 groups");
    Vector v = pattern_v();
    if (pattern == Pattern::HalfV) v *= 0.5;
    b.segment(0, 10) = v;
    b.segment(10, 10) = v;
    return b;
  }

  Matrix covariance() const {
    Matrix sigma = Matrix::Constant(p, p, rho2);
    for (int j = 0; j < n_groups(); ++j)
      sigma.block(j * group_size, j * group_size, group_size, group_size)
          .setConstant(rho1);
    sigma.diagonal().setOnes();
    return sigma;
  }

  /// Symmetric square root of Sigma; throws if Sigma is not positive
  /// definite. Compute once per config and reuse across datasets.
  Matrix covariance_sqrt() const {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(covariance());
    if (eig.eigenvalues().minCoeff() <= 1e-12)
      throw std::invalid_argument("simulation: Sigma is not positive definite");
    return eig.eigenvectors() *
           eig.eigenvalues().cwiseSqrt().asDiagonal() *
           eig.eigenvectors().transpose();
  }

  static Pattern pattern_from_string(const std::string& s) {
    if (s == "null") return Pattern::Null;
    if (s == "half-v") return Pattern::HalfV;
    if (s == "full-v") return Pattern::FullV;
    throw std::invalid_argument("simulation: unknown pattern '" + s + "'");
  }

  static std::string pattern_to_string(Pattern pat) {
    switch (pat) {
      case Pattern::Null: return "null";
      case Pattern::HalfV: return "half-v";
      case Pattern::FullV: return "full-v";
    }
    return "null";
  }

  static SimulationConfig from_section(const ConfigSection& sec) {
    SimulationConfig c;
    c.n = sec.get_int("n");
    c.p = sec.get_int("p");
    c.group_size = std::stoi(sec.get_or("group_size", "10"));
    c.rho1 = std::stod(sec.get_or("rho1", "0"));
    c.rho2 = std::stod(sec.get_or("rho2", "0"));
    c.sigma2 = std::stod(sec.get_or("sigma2", "1"));
    c.pattern = pattern_from_string(sec.get_or("pattern", "null"));
    c.dataset_count = std::stoi(sec.get_or("datasets", "10"));
    c.seed = std::stoull(sec.get_or("seed", "1"));
    (void)c.n_groups();
    return c;
  }
};

struct SimulatedDataset {
  Matrix X;
  Vector y;
  Vector beta0;
};

/// Dataset `index` of the configuration: X rows from N(0, Sigma), then
/// y = X beta0 + eps with eps ~ N(0, sigma2 I).
inline SimulatedDataset simulate_dataset(const SimulationConfig& cfg, int index,
                                         const Matrix& sigma_sqrt) {
  SimulatedDataset ds;
  ds.beta0 = cfg.beta0();
  ds.X.resize(cfg.n, cfg.p);
  auto gen_x = make_stream(cfg.seed, static_cast<std::uint64_t>(index), 0);
  for (int i = 0; i < cfg.n; ++i)
    ds.X.row(i) = (sigma_sqrt * standard_normal_vector(gen_x, cfg.p)).transpose();
  auto gen_e = make_stream(cfg.seed, static_cast<std::uint64_t>(index), 1);
  ds.y = ds.X * ds.beta0 +
         std::sqrt(cfg.sigma2) * standard_normal_vector(gen_e, cfg.n);
  return ds;
}

inline SimulatedDataset simulate_dataset(const SimulationConfig& cfg, int index) {
  return simulate_dataset(cfg, index, cfg.covariance_sqrt());
}

}  // namespace blockea
