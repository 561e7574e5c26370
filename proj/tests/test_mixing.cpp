#include "test_support.hpp"
#include "tvtp/errors.hpp"
#include "tvtp/mixing.hpp"
#include "tvtp/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tvtp;

namespace {

ParamVector flat_transitions(double alpha0, double alpha1) {
  ParamVector p = paper_dgp_params(0.0);
  p.trans = {{{alpha0, 0.0}}, {{alpha1, 0.0}}};
  return p;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("product bound") {
  const ParamVector half = flat_transitions(0.0, 0.0);
  const std::vector<double> z = {0.3, -1.0, 2.0};
  CHECK(product_bound(z, half, 2) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(product_bound(std::span<const double>(), half, 2) == 1.0);

  ParamVector single;
  single.mu = {0.0};
  single.phi = {0.5};
  single.sigma = {1.0};
  single.trans = {{}};
  CHECK(product_bound(z, single, 1) == 0.0);

  // One more conditioning step never raises the bound.
  const ParamVector p = paper_dgp_params(0.8);
  const Dataset d = simulate_dgp(paper_dgp(0.8, 50, 3));
  double prev = 1.0;
  for (int n = 1; n <= 40; ++n) {
    const double b = product_bound(std::span<const double>(d.z).first(n), p, 2);
    CHECK(b <= prev);
    prev = b;
  }
}

TEST_CASE("identical transition rows give zero distance") {
  // Stay probability of regime 0 equals the switch probability of regime 1.
  const ParamVector p = flat_transitions(1.3, -1.3);
  const Dataset d = simulate_dgp(paper_dgp(0.0, 30, 4));
  const ModelConfig cfg = paper_model_config(Variant::Joint);
  CHECK(exact_conditional_tv(d, 2, 8, p, cfg) < 1e-15);
  CHECK(dobrushin_coefficient(d, 2, 8, 5, p, cfg) < 1e-15);
}

TEST_CASE("one-step segment is the transition matrix") {
  const ParamVector p = paper_dgp_params(0.8);
  const Dataset d = simulate_dgp(paper_dgp(0.8, 20, 5));
  const ModelConfig cfg = paper_model_config(Variant::Joint);
  const Eigen::MatrixXd K0 = exact_conditional_kernel(d, 4, 4, p, cfg);
  const double s0 = logistic(2.0 - 0.5 * d.z[4]);
  const double s1 = logistic(2.0 + 0.5 * d.z[4]);
  CHECK(K0(0, 0) == doctest::Approx(s0).epsilon(1e-14));
  CHECK(K0(1, 1) == doctest::Approx(s1).epsilon(1e-14));
  CHECK(exact_conditional_tv(d, 4, 4, p, cfg) == doctest::Approx(2.0 * std::abs(s0 + s1 - 1.0)).epsilon(1e-13));
}

TEST_CASE("two-step kernel matches hand enumeration") {
  const ParamVector p = paper_dgp_params(0.5);
  const Dataset d = simulate_dgp(paper_dgp(0.5, 20, 6));
  const ModelConfig cfg = paper_model_config(Variant::Joint);
  const int lo = 7;
  const Eigen::MatrixXd Q0 = transition_matrix(d.z[lo], p, 2);
  const Eigen::MatrixXd Q1 = transition_matrix(d.z[lo + 1], p, 2);
  const Lags lags{std::span<const double>(d.y).subspan(lo, 1), std::span<const double>(d.z).subspan(lo, 1)};
  Eigen::Vector2d e;
  for (int s = 0; s < 2; ++s) e[s] = std::exp(emission_logdensity(d.y[lo + 1], d.z[lo + 1], lags, s, p, cfg));
  const Eigen::MatrixXd unnorm = Q0 * e.asDiagonal() * Q1;
  const Eigen::MatrixXd want = unnorm.array().colwise() / unnorm.rowwise().sum().array();
  const Eigen::MatrixXd got = exact_conditional_kernel(d, lo, lo + 1, p, cfg);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("multi-step kernel is the product of one-step conditional kernels") {
  std::mt19937_64 rng(7);
  for (int K : {2, 3}) {
    ModelConfig cfg = paper_model_config(Variant::Joint);
    cfg.n_regimes = K;
    const ParamVector p = testing::random_params(cfg, rng);
    const Dataset d = testing::random_data(20, rng);
    const int lo = 3, hi = 9;
    Eigen::MatrixXd prod = Eigen::MatrixXd::Identity(K, K);
    for (int l = lo; l <= hi; ++l) {
      const Eigen::MatrixXd M = one_step_conditional_kernel(d, lo, hi, l, p, cfg);
      CHECK((M.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
      prod = prod * M;
    }
    CHECK((prod - exact_conditional_kernel(d, lo, hi, p, cfg)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("Dobrushin coefficient of fixed kernels") {
  Eigen::MatrixXd same(2, 2);
  same << 0.3, 0.7, 0.3, 0.7;
  CHECK(dobrushin(same) == 0.0);
  CHECK(dobrushin(Eigen::MatrixXd::Identity(3, 3)) == 1.0);
  Eigen::MatrixXd M(2, 2);
  M << 0.9, 0.1, 0.2, 0.8;
  CHECK(dobrushin(M) == doctest::Approx(0.7));
}

TEST_CASE("conditional mixing bound on random design instances") {
  MixingCheckOptions opt;
  opt.n_instances = 500;
  const MixingReport r = run_mixing_check(opt);
  REQUIRE(r.instances.size() == 500);
  CHECK(r.ok());
  CHECK(r.max_violation <= 1e-10);
  for (const auto& inst : r.instances) {
    CHECK(inst.m + inst.j <= 10);
    CHECK(inst.bound >= 0.0);
    CHECK(inst.bound <= 1.0);
    CHECK(inst.tv >= 0.0);
    CHECK(inst.tv <= 2.0);
  }
  // Deterministic in the seed, independent of the thread count.
  opt.threads = 3;
  const MixingReport r3 = run_mixing_check(opt);
  for (std::size_t i = 0; i < r.instances.size(); ++i) CHECK(r3.instances[i].tv == r.instances[i].tv);
}

TEST_CASE("conditional mixing bound with three regimes and longer lags") {
  std::mt19937_64 rng(8);
  ModelConfig cfg = paper_model_config(Variant::Joint);
  cfg.n_regimes = 3;
  cfg.ar_order_y = 2;
  cfg.ar_order_z = 2;
  for (int i = 0; i < 40; ++i) {
    const ParamVector p = testing::random_params(cfg, rng);
    const Dataset d = testing::random_data(30, rng);
    const int lo = 1 + static_cast<int>(rng() % 10);
    const int hi = lo + static_cast<int>(rng() % 8);
    const MixingInstance inst = check_instance(d, lo, hi, p, cfg);
    CHECK(inst.half_tv_within_bound);
    CHECK(inst.chain_rule_holds);
    CHECK(inst.step_bound_holds);
  }
}

TEST_CASE("the un-halved l1 distance can exceed the product bound") {
  // Persistent chain: rows (0.9, 0.1) and (0.1, 0.9), q = 0.1. One step has
  // l1 distance 1.6 against a bound of 0.9; half of it (0.8) is within.
  const double a = std::log(9.0);
  const ParamVector p = flat_transitions(a, a);
  const Dataset d = simulate_dgp(paper_dgp(0.0, 20, 9));
  const ModelConfig cfg = paper_model_config(Variant::Joint);
  const MixingInstance inst = check_instance(d, 5, 5, p, cfg);
  CHECK(inst.tv == doctest::Approx(1.6).epsilon(1e-12));
  CHECK(inst.bound == doctest::Approx(0.9).epsilon(1e-12));
  CHECK_FALSE(inst.tv_within_bound);
  CHECK(inst.half_tv_within_bound);
}

TEST_CASE("mixing enumeration guard and argument checks") {
  const ParamVector p = paper_dgp_params(0.0);
  const Dataset d = simulate_dgp(paper_dgp(0.0, 40, 10));
  const ModelConfig cfg = paper_model_config(Variant::Joint);
  CHECK_THROWS_AS(exact_conditional_tv(d, 1, 30, p, cfg), SizeError);
  CHECK_THROWS_AS(exact_conditional_tv(d, 5, 4, p, cfg), DomainError);
  CHECK_THROWS_AS(exact_conditional_tv(d, 5, 41, p, cfg), DomainError);
  CHECK_THROWS_AS(dobrushin_coefficient(d, 5, 8, 9, p, cfg), DomainError);
  MixingCheckOptions bad;
  bad.n_instances = 0;
  CHECK_THROWS_AS(run_mixing_check(bad), DomainError);
}

TEST_CASE("initial-rule effect decays geometrically") {
  const ParamVector p = paper_dgp_params(0.8);
  const Dataset d = simulate_dgp(paper_dgp(0.8, 500, 11));
  const ModelConfig cfg = paper_model_config(Variant::Joint);

  const ForgettingCurve same = init_forgetting_curve(d, p, cfg, InitRule::uniform(), InitRule::uniform());
  for (double v : same.diff) CHECK(v == 0.0);

  const ForgettingCurve c = init_forgetting_curve(d, p, cfg, InitRule::uniform(), InitRule::stationary());
  CHECK(c.diff.size() == 500);
  REQUIRE(c.first_below > 0);
  CHECK(c.first_below < 200);
  CHECK(c.log_slope < 0.0);
  CHECK(std::isfinite(c.fitted_constant));
  for (std::size_t i = 0; i < c.diff.size(); ++i) CHECK(c.diff[i] <= c.fitted_constant * c.bound[i] + 1e-13);
}
