#include <catch2/catch_amalgamated.hpp>

#include "blockea/oracles.hpp"
#include "blockea/solver.hpp"
#include "blockea/uniqueness.hpp"

using namespace blockea;

namespace {

// Test-only oracle: plain (unaccelerated) proximal descent with a small step,
// run to many iterations. Independent of the solver's accelerated path.
double plain_prox_descent_objective(const GroupedDesign& d, const Vector& y,
                                    double lambda, const Vector& start,
                                    int iters) {
  const Vector Xty = d.X.transpose() * y / double(d.n);
  const double step = 0.5 / d.lipschitz;
  Vector beta = start;
  for (int it = 0; it < iters; ++it) {
    Vector z = beta - step * (d.Psi * beta - Xty);
    if (d.alpha == 1.0) {
      for (int k = 0; k < d.p; ++k) {
        const double thr = step * lambda * d.w_coord[k];
        z[k] = z[k] > thr ? z[k] - thr : (z[k] < -thr ? z[k] + thr : 0.0);
      }
    } else {
      for (int j = 0; j < d.J(); ++j) {
        Vector block = gather(z, d.group(j));
        const double nrm = block.norm();
        const double thr = step * lambda * d.weight(j);
        scatter(z, d.group(j), nrm > thr ? Vector((1.0 - thr / nrm) * block)
                                         : Vector(Vector::Zero(block.size())));
      }
    }
    beta = z;
  }
  double pen = 0.0;
  for (int j = 0; j < d.J(); ++j) pen += d.weight(j) * d.block_norm(beta, j, d.alpha);
  return (y - d.X * beta).squaredNorm() / (2.0 * d.n) + lambda * pen;
}

GroupedDesign random_design(int n, int p, const std::vector<int>& sizes,
                            double alpha, std::uint64_t seed) {
  auto gen = make_stream(seed, 0, 0);
  Matrix X(n, p);
  for (int i = 0; i < n; ++i) X.row(i) = standard_normal_vector(gen, p).transpose();
  return build_design(X, sizes, alpha);
}

}  // namespace

TEST_CASE("orthogonal design solves by block soft-thresholding") {
  const int m = 4, J = 5;
  GroupedDesign d = orthogonal_design(m, J, 21);
  auto gen = make_stream(22, 0, 0);
  Vector y = standard_normal_vector(gen, d.n);
  const double lambda = 0.08;
  BlockLassoFit fit = solve_block_lasso(d, y, lambda);
  Vector beta_ls = d.X.transpose() * y / double(d.n);
  for (int j = 0; j < J; ++j) {
    Vector bj = gather(beta_ls, d.group(j));
    const double scale =
        std::max(0.0, 1.0 - lambda * std::sqrt(double(m)) / bj.norm());
    CHECK((gather(fit.beta, d.group(j)) - scale * bj).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("zero response gives the zero solution") {
  GroupedDesign d = random_design(6, 9, {3, 3, 3}, 2.0, 23);
  for (double lambda : {1e-3, 0.5, 10.0}) {
    BlockLassoFit fit = solve_block_lasso(d, Vector::Zero(6), lambda);
    CHECK(fit.beta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(fit.active.empty());
  }
}

TEST_CASE("objective matches a multistart descent oracle") {
  GroupedDesign d = random_design(5, 8, {4, 4}, 2.0, 24);
  auto gen = make_stream(25, 0, 0);
  Vector y = standard_normal_vector(gen, 5);
  const double lambda = 0.23;
  BlockLassoFit fit = solve_block_lasso(d, y, lambda);
  double best = kInf;
  for (int start = 0; start < 50; ++start) {
    Vector init = start == 0 ? Vector(Vector::Zero(8))
                             : Vector(2.0 * standard_normal_vector(gen, 8));
    best = std::min(best, plain_prox_descent_objective(d, y, lambda, init, 30000));
  }
  CHECK(fit.objective <= best + 1e-10);
  CHECK(std::abs(fit.objective - best) < 1e-10);
}

TEST_CASE("alpha = 1 reduces to coordinatewise soft-thresholding") {
  const int n = 6;
  Matrix X = std::sqrt(double(n)) * Matrix::Identity(n, n);
  GroupedDesign d = build_design(X, GroupPartition::from_sizes({3, 3}, Vector::Ones(2)), 1.0);
  auto gen = make_stream(26, 0, 0);
  Vector y = standard_normal_vector(gen, n);
  const double lambda = 0.3;
  BlockLassoFit fit = solve_block_lasso(d, y, lambda);
  Vector bls = d.X.transpose() * y / double(n);
  for (int k = 0; k < n; ++k) {
    const double soft =
        bls[k] > lambda ? bls[k] - lambda : (bls[k] < -lambda ? bls[k] + lambda : 0.0);
    CHECK(fit.beta[k] == Catch::Approx(soft).margin(1e-9));
  }
}

TEST_CASE("subgradient extraction") {
  SECTION("active orthogonal group points along the least-squares block") {
    GroupedDesign d = orthogonal_design(3, 4, 27);
    auto gen = make_stream(28, 0, 0);
    Vector y = 3.0 * standard_normal_vector(gen, d.n);
    const double lambda = 0.05;
    BlockLassoFit fit = solve_block_lasso(d, y, lambda);
    Vector bls = d.X.transpose() * y / double(d.n);
    for (int j : fit.active) {
      Vector bj = gather(bls, d.group(j));
      CHECK((gather(fit.S, d.group(j)) - bj / bj.norm()).cwiseAbs().maxCoeff() < 1e-7);
    }
  }
  SECTION("zero data gives a zero subgradient") {
    GroupedDesign d = random_design(4, 6, {3, 3}, 2.0, 29);
    Vector S = extract_subgradient(d, Vector::Zero(4), Vector::Zero(6), 0.7);
    CHECK(S.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("lambda must be positive") {
    GroupedDesign d = random_design(4, 6, {3, 3}, 2.0, 30);
    CHECK_THROWS_AS(extract_subgradient(d, Vector::Zero(4), Vector::Zero(6), 0.0),
                    std::invalid_argument);
  }
  SECTION("dual norms bounded by one, tight on active groups") {
    GroupedDesign d = random_design(8, 12, {4, 4, 4}, 2.0, 31);
    auto gen = make_stream(32, 0, 0);
    for (int trial = 0; trial < 20; ++trial) {
      Vector y = standard_normal_vector(gen, 8);
      BlockLassoFit fit = solve_block_lasso(d, y, 0.15);
      for (int j = 0; j < d.J(); ++j) {
        const double nrm = lp_norm(gather(fit.S, d.group(j)), d.alpha_star);
        CHECK(nrm <= 1.0 + 1e-8);
        if (fit.gamma[j] > 0) CHECK(nrm == Catch::Approx(1.0).margin(1e-8));
      }
    }
  }
}

TEST_CASE("stationarity residual is tiny on random instances") {
  auto gen = make_stream(33, 0, 0);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 6 + trial % 5, p = 10 + trial % 7;
    GroupedDesign d = random_design(n, p, {p / 2, p - p / 2}, 2.0, 100 + trial);
    Vector y = standard_normal_vector(gen, n);
    BlockLassoFit fit = solve_block_lasso(d, y, 0.1 + 0.05 * (trial % 4));
    const double tol =
        1e-9 * (1.0 + (d.X.transpose() * y / double(n)).cwiseAbs().maxCoeff());
    CHECK(fit.kkt_residual < tol);
  }
}

TEST_CASE("objective never increases along the iterate sequence") {
  GroupedDesign d = random_design(10, 25, {5, 5, 5, 5, 5}, 2.0, 34);
  auto gen = make_stream(35, 0, 0);
  Vector y = standard_normal_vector(gen, 10);
  std::vector<double> trace;
  SolverOptions opts;
  opts.objective_trace = &trace;
  solve_block_lasso(d, y, 0.05, opts);
  REQUIRE(trace.size() > 2);
  for (size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-12 * (1.0 + std::abs(trace[i - 1])));
}

TEST_CASE("fit and subgradient agree across initializations") {
  GroupedDesign d = random_design(12, 30, {10, 10, 10}, 2.0, 36);
  auto gen = make_stream(37, 0, 0);
  for (int trial = 0; trial < 10; ++trial) {
    Vector y = standard_normal_vector(gen, 12);
    SolverOptions cold;
    BlockLassoFit fit1 = solve_block_lasso(d, y, 0.12, cold);
    SolverOptions warm;
    warm.init = 3.0 * standard_normal_vector(gen, 30);
    BlockLassoFit fit2 = solve_block_lasso(d, y, 0.12, warm);
    CHECK((d.X * (fit1.beta - fit2.beta)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((fit1.S - fit2.S).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("lambda selection by active-group count") {
  SECTION("zero response cannot be bracketed") {
    GroupedDesign d = random_design(5, 8, {4, 4}, 2.0, 38);
    CHECK_THROWS_AS(select_lambda_by_active_groups(d, Vector::Zero(5), 1),
                    std::runtime_error);
  }
  SECTION("lambda_max kills every group") {
    GroupedDesign d = random_design(8, 12, {4, 4, 4}, 2.0, 39);
    auto gen = make_stream(40, 0, 0);
    Vector y = standard_normal_vector(gen, 8);
    const double lmax = lambda_max(d, y);
    BlockLassoFit fit = solve_block_lasso(d, y, lmax * 1.01);
    CHECK(fit.active.empty());
    // at-zero stationarity: every block correlation is below lambda w_j
    Vector Xty = d.X.transpose() * y / 8.0;
    for (int j = 0; j < d.J(); ++j)
      CHECK(lp_norm(gather(Xty, d.group(j)), d.alpha_star) <=
            lmax * 1.01 * d.weight(j) + 1e-12);
  }
  SECTION("selected lambda yields exactly k active groups") {
    // dimensions and signal shaped like the simulated-experiment datasets
    auto gen = make_stream(41, 0, 0);
    Matrix X(30, 100);
    for (int i = 0; i < 30; ++i) X.row(i) = standard_normal_vector(gen, 100).transpose();
    GroupedDesign d = build_design(X, std::vector<int>(10, 10), 2.0);
    Vector beta0 = Vector::Zero(100);
    Vector v(10);
    v << 1, 1, 1, 1, -1, -1, -1, -1, 0, 0;
    beta0.segment(0, 10) = 0.5 * v;
    beta0.segment(10, 10) = 0.5 * v;
    Vector y = X * beta0 + standard_normal_vector(gen, 30);
    const double lambda = select_lambda_by_active_groups(d, y, 2);
    CHECK(lambda > 0.0);
    CHECK(lambda < lambda_max(d, y));
    BlockLassoFit fit = solve_block_lasso(d, y, lambda);
    CHECK(fit.active.size() == 2);
    // just above the selected value the count drops below k
    BlockLassoFit above = solve_block_lasso(d, y, lambda * (1.0 + 1e-3));
    CHECK(above.active.size() < 2);
  }
}

TEST_CASE("uniqueness certificate") {
  SECTION("orthogonal designs always certify") {
    GroupedDesign d = orthogonal_design(3, 4, 42);
    auto gen = make_stream(43, 0, 0);
    Vector y = standard_normal_vector(gen, d.n);
    BlockLassoFit fit = solve_block_lasso(d, y, 0.1);
    UniquenessReport rep = uniqueness_certificate(d, fit);
    CHECK(rep.certified);
    CHECK(rep.active_bound_ok);
  }
  SECTION("the worked 2x3 design certifies with at most two blocks") {
    GroupedDesign d = Example1::design();
    auto gen = make_stream(44, 0, 0);
    for (int trial = 0; trial < 20; ++trial) {
      Vector y = standard_normal_vector(gen, 2);
      BlockLassoFit fit = solve_block_lasso(d, y, 0.4);
      UniquenessReport rep = uniqueness_certificate(d, fit);
      CHECK(rep.certified);
      CHECK(rep.E.size() <= 2);
      CHECK(static_cast<int>(fit.active.size()) <= std::min(d.n, d.J()));
    }
  }
  SECTION("duplicated columns fail the certificate when both equicorrelate") {
    // overall rank passes (n = 2), but columns 0 and 1 are identical: the
    // blockwise degeneracy shows up only through nul(Z)
    Vector x(2), z(2);
    x << 1.0, 0.5;
    z << -0.3, 0.9;
    Matrix X(2, 3);
    X.col(0) = x;
    X.col(1) = x;
    X.col(2) = z;
    GroupedDesign d = build_design(X, GroupPartition::singletons(3), 2.0);
    Vector y = x;  // the duplicated pair hits the equicorrelation bound
    BlockLassoFit fit = solve_block_lasso(d, y, 0.05);
    UniquenessReport rep = uniqueness_certificate(d, fit);
    REQUIRE(rep.E.size() >= 2);
    CHECK_FALSE(rep.certified);
  }
}

TEST_CASE("non-convergence raises with the last residual") {
  GroupedDesign d = random_design(6, 9, {3, 3, 3}, 2.0, 46);
  auto gen = make_stream(47, 0, 0);
  Vector y = standard_normal_vector(gen, 6);
  SolverOptions opts;
  opts.max_iter = 1;
  try {
    solve_block_lasso(d, y, 1e-4, opts);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.last_residual > 0.0);
  }
}
