#include "tvtp/errors.hpp"
#include "tvtp/mc.hpp"

#include <doctest.h>

#include <cmath>
#include <mutex>
#include <sstream>

using namespace tvtp;

namespace {

EstimationResult fake_result(const ModelConfig& cfg, const ParamVector& theta, double se) {
  EstimationResult r;
  r.config = cfg;
  r.theta_hat = theta;
  r.names = ParamLayout(cfg).names();
  r.converged = true;
  const int q = ParamLayout(cfg).size();
  r.hessian_pd = true;
  r.cov_hessian = se * se * Eigen::MatrixXd::Identity(q, q);
  r.cov_sandwich = r.cov_hessian;
  r.se_hessian = Eigen::VectorXd::Constant(q, se);
  r.se_sandwich = r.se_hessian;
  r.hessian = -r.cov_hessian.inverse();
  return r;
}

MCDesign small_design() {
  MCDesign d;
  d.rho_grid = {0.0, 0.8};
  d.T_grid = {100};
  d.n_reps = 4;
  d.master_seed = 5;
  return d;
}

MCRecord record(Variant v, double rho, int T, int rep, Eigen::VectorXd est, Eigen::VectorXd se) {
  MCRecord r;
  r.estimator = v;
  r.rho = rho;
  r.T = T;
  r.rep = rep;
  r.converged = true;
  r.has_se = true;
  r.estimate = std::move(est);
  r.se = std::move(se);
  return r;
}

}  // namespace

TEST_CASE("relabel of estimation results") {
  const ModelConfig cfg = paper_model_config(Variant::Joint);
  const ParamLayout layout(cfg);
  EstimationResult r = fake_result(cfg, paper_dgp_params(0.8), 0.1);
  r.loglik = -123.0;
  for (int i = 0; i < layout.size(); ++i) r.cov_hessian(i, i) = 0.01 * (i + 1);
  r.se_hessian = r.cov_hessian.diagonal().cwiseSqrt();

  bool swapped = true;
  const EstimationResult same = relabel(r, &swapped);
  CHECK_FALSE(swapped);
  CHECK(same.estimate() == r.estimate());

  const int perm[2] = {1, 0};
  EstimationResult flipped = r;
  flipped.theta_hat = relabel(r.theta_hat, cfg, perm);
  const Eigen::MatrixXd M = layout.relabel_matrix(perm);
  flipped.cov_hessian = M * r.cov_hessian * M.transpose();
  flipped.se_hessian = M * r.se_hessian;
  const EstimationResult back = relabel(flipped, &swapped);
  CHECK(swapped);
  CHECK(back.estimate() == r.estimate());
  CHECK(back.cov_hessian == r.cov_hessian);
  CHECK(back.se_hessian == r.se_hessian);
  CHECK(back.loglik == r.loglik);
  // mu1 now carries the old se of mu0.
  CHECK(flipped.se_hessian[layout.mu_index(1)] == r.se_hessian[layout.mu_index(0)]);
  CHECK(flipped.se_hessian[layout.alpha_index(0, 0)] == r.se_hessian[layout.alpha_index(1, 0)]);

  const EstimationResult twice = relabel(relabel(flipped));
  CHECK(twice.estimate() == relabel(flipped).estimate());
}

TEST_CASE("relabel leaves the log-likelihood unchanged") {
  const Dataset d = simulate_dgp(paper_dgp(0.8, 300, 3));
  const ModelConfig cfg = paper_model_config(Variant::Joint);
  const int perm[2] = {1, 0};
  const ParamVector p = relabel(paper_dgp_params(0.8), cfg, perm);
  const EstimationResult r = relabel(fake_result(cfg, p, 0.1));
  CHECK(r.theta_hat.mu[0] > r.theta_hat.mu[1]);
  CHECK(std::abs(forward_filter(d, r.theta_hat, cfg).loglik - forward_filter(d, p, cfg).loglik) < 1e-12 * 1000);
}

TEST_CASE("critical value and streams") {
  MCDesign d;
  CHECK(d.critical_value() == doctest::Approx(1.959963984540054).epsilon(1e-12));
  d.level = 0.10;
  CHECK(d.critical_value() == doctest::Approx(1.6448536269514722).epsilon(1e-12));
  CHECK(mc_stream(0.8, 800, 0) != mc_stream(0.0, 800, 0));
  CHECK(mc_stream(0.8, 800, 0) != mc_stream(0.8, 1600, 0));
  CHECK(mc_stream(0.8, 800, 0) != mc_stream(0.8, 800, 1));
}

TEST_CASE("summaries of hand-built records") {
  MCDesign d = small_design();
  d.rho_grid = {0.8};
  d.estimators = {Variant::Partial};
  d.n_reps = 4;
  const ModelConfig cfg = paper_model_config(Variant::Partial);
  const Eigen::VectorXd truth = ParamLayout(cfg).flatten(mc_truth(d, Variant::Partial, 0.8));
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(truth.size());

  SUBCASE("all at the truth") {
    std::vector<MCRecord> recs;
    for (int i = 0; i < 4; ++i) recs.push_back(record(Variant::Partial, 0.8, 100, i, truth, ones));
    const MCReport r = summarize(recs, d);
    REQUIRE(r.rows.size() == 9);
    for (const auto& row : r.rows) {
      CHECK(row.bias == 0.0);
      CHECK(row.sd_ratio == 0.0);
      CHECK(row.size == 0.0);
      CHECK(row.n_converged == 4);
    }
  }
  SUBCASE("alternating plus and minus one") {
    std::vector<MCRecord> recs;
    for (int i = 0; i < 4; ++i)
      recs.push_back(record(Variant::Partial, 0.8, 100, i, truth + (i % 2 ? -1.0 : 1.0) * ones, ones));
    const MCReport r = summarize(recs, d);
    for (const auto& row : r.rows) {
      CHECK(row.bias == doctest::Approx(0.0).epsilon(1e-15));
      // sd with n - 1 divisor: sqrt(4 / 3).
      CHECK(row.sd_ratio == doctest::Approx(std::sqrt(4.0 / 3.0)));
      CHECK(row.size == 0.0);
    }
  }
  SUBCASE("sizes, power and exclusions") {
    std::vector<MCRecord> recs;
    recs.push_back(record(Variant::Partial, 0.8, 100, 0, truth + 2.5 * ones, ones));
    recs.push_back(record(Variant::Partial, 0.8, 100, 1, truth, ones));
    recs.push_back(record(Variant::Partial, 0.8, 100, 2, truth, ones));
    MCRecord failed = record(Variant::Partial, 0.8, 100, 3, truth + 100.0 * ones, ones);
    failed.converged = false;
    recs.push_back(failed);
    const MCReport r = summarize(recs, d);
    const MCRow* mu0 = r.find(Variant::Partial, 0.8, 100, "mu0");
    REQUIRE(mu0);
    CHECK(mu0->n_reps == 4);
    CHECK(mu0->n_converged == 3);
    CHECK(mu0->size == doctest::Approx(1.0 / 3.0));
    CHECK(mu0->bias == doctest::Approx(2.5 / 3.0));
    CHECK(mu0->power == doctest::Approx(1.0 / 3.0));  // mu0 = 1 at the truth: |1| < 1.96 < |3.5|
    CHECK(r.find(Variant::Partial, 0.8, 100, "sigma0")->boundary);
    CHECK_FALSE(mu0->boundary);
    CHECK(mu0->low_precision);
  }
  SUBCASE("no converged replications") {
    std::vector<MCRecord> recs;
    MCRecord failed = record(Variant::Partial, 0.8, 100, 0, truth, ones);
    failed.converged = false;
    recs.push_back(failed);
    const MCReport r = summarize(recs, d);
    for (const auto& row : r.rows) CHECK_FALSE(row.valid);
  }
}

TEST_CASE("harness with a stub estimator returning the truth") {
  MCDesign d = small_design();
  d.estimator = [&](const Dataset&, const ModelConfig& cfg, const FitOptions&) {
    return fake_result(cfg, mc_truth(d, cfg.variant, d.dgp.params.rho), 1.0);
  };
  // The stub reads rho from the template; keep rho = 0 so truth matches.
  d.rho_grid = {0.0};
  const MCReport r = run_monte_carlo(d);
  REQUIRE(r.rows.size() == 9 + 13);
  for (const auto& row : r.rows) {
    CHECK(row.bias == 0.0);
    CHECK(row.size == 0.0);
    CHECK(row.n_converged == 4);
    CHECK(row.n_relabeled == 0);
  }
}

TEST_CASE("estimators see identical data in a replication") {
  MCDesign d = small_design();
  std::vector<std::vector<double>> seen;
  std::mutex mu;
  d.estimator = [&](const Dataset& data, const ModelConfig& cfg, const FitOptions& opt) {
    std::lock_guard lock(mu);
    seen.push_back(data.y);
    CHECK(opt.starts.size() == 3);
    return fake_result(cfg, opt.starts.front(), 1.0);
  };
  d.rho_grid = {0.8};
  d.n_reps = 1;
  run_monte_carlo(d);
  REQUIRE(seen.size() == 2);
  CHECK(seen[0] == seen[1]);
  CHECK(seen[0].size() == 101);
}

TEST_CASE("a throwing estimator invalidates the cell and the run continues") {
  MCDesign d = small_design();
  d.estimator = [&](const Dataset&, const ModelConfig& cfg, const FitOptions& opt) -> EstimationResult {
    if (cfg.variant == Variant::Joint) throw EstimationError("boom");
    return fake_result(cfg, opt.starts.front(), 1.0);
  };
  const MCReport r = run_monte_carlo(d);
  CHECK(r.find(Variant::Joint, 0.0, 100, "mu0")->valid == false);
  CHECK(r.find(Variant::Partial, 0.0, 100, "mu0")->valid);
  int errors = 0;
  for (const auto& rec : r.records) errors += rec.error.empty() ? 0 : 1;
  CHECK(errors == 8);
}

TEST_CASE("Monte Carlo runs are deterministic across thread counts") {
  MCDesign d = small_design();
  d.T_grid = {150};
  d.n_reps = 3;
  d.threads = 1;
  const MCReport a = run_monte_carlo(d);
  d.threads = 3;
  const MCReport b = run_monte_carlo(d);
  std::ostringstream sa, sb;
  write_mc_csv(sa, a);
  write_mc_csv(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(a.rows.size() == 2 * (9 + 13));
}

TEST_CASE("report formats") {
  MCDesign d = small_design();
  d.n_reps = 1;
  d.estimator = [&](const Dataset&, const ModelConfig& cfg, const FitOptions& opt) {
    return fake_result(cfg, opt.starts.front(), 1.0);
  };
  const MCReport r = run_monte_carlo(d);
  std::ostringstream csv, table;
  write_mc_csv(csv, r);
  write_mc_table(table, r);
  std::istringstream lines(csv.str());
  std::string header, line;
  std::getline(lines, header);
  CHECK(header ==
        "estimator,rho,T,parameter,truth,mean,bias,sd,mean_se,sd_ratio,size,power,n_reps,n_converged,n_relabeled,"
        "n_se,flags");
  int n = 0;
  while (std::getline(lines, line)) {
    ++n;
    CHECK(line.find("low-precision") != std::string::npos);
  }
  CHECK(n == static_cast<int>(r.rows.size()));
  CHECK(table.str().find("partial ML, rho = 0.8") != std::string::npos);
  CHECK(table.str().find("beta0") != std::string::npos);
}

TEST_CASE("design validation") {
  MCDesign d = small_design();
  d.n_reps = 0;
  CHECK_THROWS_AS(run_monte_carlo(d), DomainError);
  d = small_design();
  d.level = 1.0;
  CHECK_THROWS_AS(run_monte_carlo(d), DomainError);
  d = small_design();
  d.rho_grid = {1.0};
  CHECK_THROWS_AS(run_monte_carlo(d), DomainError);
}
