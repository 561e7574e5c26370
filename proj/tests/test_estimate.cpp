#include "test_support.hpp"
#include "tvtp/errors.hpp"
#include "tvtp/estimate.hpp"
#include "tvtp/optimize.hpp"
#include "tvtp/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tvtp;

namespace {

ModelConfig single_regime_config() {
  ModelConfig cfg;
  cfg.n_regimes = 1;
  cfg.variant = Variant::Partial;
  return cfg;
}

// Gaussian AR(1) data.
Dataset ar1_data(int length, double mu, double phi, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Dataset d;
  double y = mu / (1.0 - phi);
  for (int t = 0; t < length; ++t) {
    y = mu + phi * y + sigma * n(rng);
    d.y.push_back(y);
    d.z.push_back(n(rng));
  }
  return d;
}

Objective quadratic(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  return [A, b](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = A * x - b;
    return 0.5 * x.dot(A * x) - b.dot(x);
  };
}

bool is_psd(const Eigen::MatrixXd& M) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() >=
         -1e-12 * M.norm();
}

}  // namespace

TEST_CASE("BFGS minimizes the Rosenbrock function") {
  const Objective rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    if (g) *g = Eigen::Vector2d(-2.0 * a - 400.0 * x[0] * b, 200.0 * b);
    return a * a + 100.0 * b * b;
  };
  const BfgsResult r = bfgs_minimize(rosen, Eigen::Vector2d(-1.2, 1.0));
  CHECK(r.converged);
  CHECK(std::abs(r.x[0] - 1.0) < 1e-6);
  CHECK(std::abs(r.x[1] - 1.0) < 1e-6);
  CHECK(r.grad.norm() <= 1e-8);
}

TEST_CASE("BFGS start invariance on a convex problem") {
  Eigen::MatrixXd M(3, 3);
  M << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Eigen::Vector3d b(1, -2, 0.5);
  const Eigen::VectorXd want = M.ldlt().solve(b);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d x0(u(rng), u(rng), u(rng));
    const BfgsResult r = bfgs_minimize(quadratic(M, b), x0);
    CHECK(r.converged);
    CHECK((r.x - want).norm() < 1e-6);
  }
}

TEST_CASE("BFGS handles infeasible regions and bad starts") {
  // log barrier: f = x - log x, minimum at 1, +inf for x <= 0.
  const Objective barrier = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (x[0] <= 0.0) return std::numeric_limits<double>::infinity();
    if (g) *g = Eigen::VectorXd::Constant(1, 1.0 - 1.0 / x[0]);
    return x[0] - std::log(x[0]);
  };
  const BfgsResult r = bfgs_minimize(barrier, Eigen::VectorXd::Constant(1, 20.0));
  CHECK(r.converged);
  CHECK(std::abs(r.x[0] - 1.0) < 1e-7);
  CHECK_THROWS_AS(bfgs_minimize(barrier, Eigen::VectorXd::Constant(1, -1.0)), NumericError);
}

TEST_CASE("BFGS accepted steps never increase the objective") {
  std::vector<double> values;
  const Objective traced = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const double f = std::pow(x[0] - 2.0, 4) + (x[1] + 1.0) * (x[1] + 1.0) + std::cosh(x[0] * x[1] - 1.0);
    if (g)
      *g = Eigen::Vector2d(4.0 * std::pow(x[0] - 2.0, 3) + x[1] * std::sinh(x[0] * x[1] - 1.0),
                           2.0 * (x[1] + 1.0) + x[0] * std::sinh(x[0] * x[1] - 1.0));
    return f;
  };
  const BfgsResult r = bfgs_minimize(traced, Eigen::Vector2d(0.0, 0.0));
  const double f0 = traced(Eigen::Vector2d(0.0, 0.0), nullptr);
  CHECK(r.f <= f0);
  CHECK(r.grad.norm() < 1e-6);
}

TEST_CASE("Newton refinement finishes a stalled quadratic") {
  Eigen::MatrixXd M(2, 2);
  M << 2, 0.3, 0.3, 1;
  const Eigen::Vector2d b(1, 1);
  BfgsResult start;
  start.x = Eigen::Vector2d(5, -5);
  start.f = quadratic(M, b)(start.x, &start.grad);
  const BfgsResult r = newton_polish(quadratic(M, b), start);
  CHECK(r.converged);
  CHECK((r.x - M.ldlt().solve(b)).norm() < 1e-8);
}

TEST_CASE("numerical Hessians of known functions") {
  Eigen::MatrixXd A(3, 3);
  A << 2, -1, 0.5, -1, 3, 0.2, 0.5, 0.2, 1;
  const Eigen::Vector3d x(0.3, -1.2, 2.0);
  const ScalarFn f = [&](const Eigen::VectorXd& v) { return -0.5 * v.dot(A * v); };
  CHECK((numerical_hessian(f, x, StepRule{1e-4, 1e-4}) + A).cwiseAbs().maxCoeff() < 1e-6);
  const VectorFn g = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return -A * v; };
  CHECK((numerical_hessian_from_gradient(g, x) + A).cwiseAbs().maxCoeff() < 1e-8);
  const ScalarFn flat = [](const Eigen::VectorXd&) { return 3.0; };
  CHECK(numerical_hessian(flat, x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(numerical_gradient(flat, x).cwiseAbs().maxCoeff() == 0.0);
  const ScalarFn bad = [](const Eigen::VectorXd& v) { return v[1] > -1.2 ? NAN : 0.0; };
  CHECK_THROWS_AS(numerical_gradient(bad, x), NumericError);
}

TEST_CASE("single-regime fit equals the closed-form Gaussian AR(1) MLE") {
  const Dataset d = ar1_data(500, 0.4, 0.6, 1.3, 11);
  const ModelConfig cfg = single_regime_config();
  const EstimationResult r = fit(d, cfg);
  REQUIRE(r.converged);

  // OLS on t = 1..T conditional on y_0; sigma^2 = SSR / n.
  const int n = d.last();
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd v(n);
  for (int t = 1; t <= n; ++t) {
    X(t - 1, 0) = 1.0;
    X(t - 1, 1) = d.y[t - 1];
    v[t - 1] = d.y[t];
  }
  const Eigen::VectorXd b = (X.transpose() * X).ldlt().solve(X.transpose() * v);
  const double s2 = (v - X * b).squaredNorm() / n;
  CHECK(r.n_obs == n);
  CHECK(std::abs(r.theta_hat.mu[0] - b[0]) < 1e-6);
  CHECK(std::abs(r.theta_hat.phi[0] - b[1]) < 1e-6);
  CHECK(std::abs(r.theta_hat.sigma[0] - std::sqrt(s2)) < 1e-6);

  // Classical covariance s2 (X'X)^{-1} for the regression coefficients and
  // s2 / (2n) for sigma.
  REQUIRE(r.has_se());
  const Eigen::MatrixXd V = s2 * (X.transpose() * X).inverse();
  CHECK(r.cov_hessian(0, 0) == doctest::Approx(V(0, 0)).epsilon(1e-4));
  CHECK(r.cov_hessian(0, 1) == doctest::Approx(V(0, 1)).epsilon(1e-4));
  CHECK(r.cov_hessian(1, 1) == doctest::Approx(V(1, 1)).epsilon(1e-4));
  CHECK(r.cov_hessian(2, 2) == doctest::Approx(s2 / (2.0 * n)).epsilon(1e-4));
}

TEST_CASE("fit on the simulation design ascends from the truth") {
  const Dataset d = simulate_dgp(paper_dgp(0.8, 400, 5));
  for (Variant v : {Variant::Partial, Variant::Joint}) {
    CAPTURE(static_cast<int>(v));
    const ModelConfig cfg = paper_model_config(v);
    const ParamVector truth = v == Variant::Joint ? paper_dgp_params(0.8) : to_partial(paper_dgp_params(0.8));
    FitOptions opt;
    opt.starts = {truth, moment_anchor(d, cfg)};
    const EstimationResult r = fit(d, cfg, opt);
    CHECK(r.converged);
    CHECK(r.grad_norm <= opt.grad_tol);
    CHECK(r.loglik >= forward_filter(d, truth, cfg).loglik);
    CHECK(r.starts.size() == 2);
    CHECK(r.starts[r.start_index].loglik == doctest::Approx(r.loglik).epsilon(1e-12));
    for (const auto& s : r.starts) CHECK(s.loglik <= r.loglik + 1e-9);
    REQUIRE(r.hessian_pd);
    CHECK((r.hessian - r.hessian.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r.cov_hessian - r.cov_hessian.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r.cov_sandwich - r.cov_sandwich.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(is_psd(r.cov_hessian));
    CHECK(is_psd(r.cov_sandwich));
    CHECK(r.names.size() == static_cast<std::size_t>(r.estimate().size()));
  }
}

TEST_CASE("winner is the highest log-likelihood, ties to the lowest index") {
  const Dataset d = simulate_dgp(paper_dgp(0.0, 300, 8));
  const ModelConfig cfg = paper_model_config(Variant::Partial);
  const ParamVector truth = to_partial(paper_dgp_params(0.0));
  FitOptions opt;
  opt.starts = {truth, truth, truth};
  const EstimationResult r = fit(d, cfg, opt);
  CHECK(r.start_index == 0);
  opt.threads = 3;
  const EstimationResult r3 = fit(d, cfg, opt);
  CHECK(r3.start_index == 0);
  CHECK(r3.loglik == r.loglik);
  CHECK(r3.estimate() == r.estimate());
}

TEST_CASE("default starts") {
  const Dataset d = simulate_dgp(paper_dgp(0.8, 300, 9));
  for (Variant v : {Variant::Partial, Variant::Joint}) {
    const ModelConfig cfg = paper_model_config(v);
    const auto starts = default_starts(d, cfg);
    const int q = ParamLayout(cfg).size();
    CHECK(static_cast<int>(starts.size()) == 2 * q + 1);
    const ParamVector a = moment_anchor(d, cfg);
    CHECK(a.mu[0] > a.mu[1]);
    CHECK(a.trans[0][0].alpha == 2.0);
    CHECK(a.trans[1][0].beta == 0.0);
    const Eigen::VectorXd step = start_grid_step(cfg);
    CHECK(step[ParamLayout(cfg).phi_index(0, 0)] == 0.1);
    CHECK(step[0] == 0.5);
    for (const auto& s : starts) CHECK_NOTHROW(s.validate(cfg));
  }
}

TEST_CASE("per-observation scores sum to the Fisher score") {
  std::mt19937_64 rng(12);
  const ModelConfig cfg = paper_model_config(Variant::Joint);
  const Dataset d = simulate_dgp(paper_dgp(0.5, 200, 12));
  const ParamVector p = testing::random_params(cfg, rng);
  const Eigen::MatrixXd S = per_observation_scores(d, p, cfg);
  CHECK(S.rows() == 200);
  const Eigen::VectorXd total = S.colwise().sum().transpose();
  const Eigen::VectorXd exact = fisher_score(d, p, cfg);
  CHECK((total - exact).cwiseAbs().maxCoeff() / std::max(1.0, exact.cwiseAbs().maxCoeff()) < 1e-5);
}

TEST_CASE("long-run variance and sandwich algebra") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd S(300, 3);
  for (Eigen::Index i = 0; i < S.size(); ++i) S.data()[i] = n01(rng);
  const Eigen::MatrixXd opg = S.transpose() * S / 300.0;
  CHECK((score_long_run_variance(S, HacOptions::none()) - opg).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((score_long_run_variance(S, HacOptions::bartlett(0)) - opg).cwiseAbs().maxCoeff() < 1e-15);

  // Lag-1 Bartlett weight 1/2 on the first autocovariance.
  Eigen::MatrixXd G = S.bottomRows(299).transpose() * S.topRows(299) / 300.0;
  const Eigen::MatrixXd want = opg + 0.5 * (G + G.transpose());
  CHECK((score_long_run_variance(S, HacOptions::bartlett(1)) - want).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(is_psd(score_long_run_variance(S, HacOptions::bartlett(5))));

  Eigen::MatrixXd A(3, 3);
  A << 2, 0.5, 0, 0.5, 1, 0.1, 0, 0.1, 3;
  const Eigen::MatrixXd cov = sandwich_from_parts(A, A, 50);
  CHECK((cov - A.inverse() / 50.0).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::MatrixXd singular = A;
  singular.row(2) = singular.row(1);
  singular.col(2) = singular.col(1);
  CHECK_THROWS_AS(sandwich_from_parts(singular, A, 50), NumericError);

  CHECK(default_bartlett_lag(100) == 4);
  CHECK(default_bartlett_lag(800) == 6);
  CHECK(default_bartlett_lag(3200) == 8);
}

TEST_CASE("sandwich equals the Hessian covariance when B is replaced by A") {
  const Dataset d = simulate_dgp(paper_dgp(0.0, 400, 21));
  const ModelConfig cfg = paper_model_config(Variant::Partial);
  FitOptions opt;
  opt.starts = {to_partial(paper_dgp_params(0.0))};
  const EstimationResult r = fit(d, cfg, opt);
  REQUIRE(r.hessian_pd);
  const Eigen::MatrixXd A = -r.hessian / r.n_obs;
  const Eigen::MatrixXd cov = sandwich_from_parts(A, A, r.n_obs);
  CHECK((cov - r.cov_hessian).cwiseAbs().maxCoeff() / r.cov_hessian.cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXd direct = sandwich_cov(d, cfg, r.theta_hat, HacOptions::none());
  CHECK((direct - r.cov_sandwich).cwiseAbs().maxCoeff() / r.cov_sandwich.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("sandwich and Hessian standard errors agree under a correct iid model") {
  const Dataset d = ar1_data(20000, 0.2, 0.5, 0.8, 17);
  const EstimationResult r = fit(d, single_regime_config());
  REQUIRE(r.has_se());
  for (int j = 0; j < 3; ++j) {
    const double ratio = r.se_sandwich[j] / r.se_hessian[j];
    CAPTURE(j);
    CHECK(ratio >= 0.8);
    CHECK(ratio <= 1.25);
  }
}

TEST_CASE("t statistics") {
  const Dataset d = ar1_data(400, 0.2, 0.5, 0.8, 19);
  const EstimationResult r = fit(d, single_regime_config());
  REQUIRE(r.has_se());
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd t = t_stats(r, zero);
  for (int j = 0; j < 3; ++j) CHECK(t[j] == doctest::Approx(r.estimate()[j] / r.se_hessian[j]));
  const Eigen::VectorXd at_est = t_stats(r, r.estimate(), SeFlavor::Sandwich);
  CHECK(at_est.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(t_stats(r, Eigen::VectorXd::Zero(2)), DomainError);
  EstimationResult no_se = r;
  no_se.se_hessian.resize(0);
  CHECK_THROWS_AS(t_stats(no_se, zero), NumericError);
}

TEST_CASE("fit option validation") {
  const Dataset d = ar1_data(100, 0.2, 0.5, 0.8, 23);
  FitOptions opt;
  opt.grad_tol = 0.0;
  CHECK_THROWS_AS(fit(d, single_regime_config(), opt), DomainError);
  opt = {};
  opt.max_iter = 0;
  CHECK_THROWS_AS(fit(d, single_regime_config(), opt), DomainError);
  opt = {};
  opt.hac = HacOptions::bartlett(-1);
  CHECK_THROWS_AS(fit(d, single_regime_config(), opt), DomainError);
}

TEST_CASE("iteration limit is reported as non-convergence") {
  const Dataset d = simulate_dgp(paper_dgp(0.8, 300, 29));
  FitOptions opt;
  opt.max_iter = 2;
  opt.starts = {moment_anchor(d, paper_model_config(Variant::Joint))};
  const EstimationResult r = fit(d, paper_model_config(Variant::Joint), opt);
  CHECK_FALSE(r.converged);
  CHECK(r.grad_norm > opt.grad_tol);
}
