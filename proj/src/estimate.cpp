#include "tvtp/estimate.hpp"

#include "tvtp/errors.hpp"
#include "tvtp/optimize.hpp"
#include "tvtp/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tvtp {

namespace {

struct OlsFit {
  double intercept = 0.0;
  std::vector<double> coefs;
  Eigen::VectorXd residuals;
  double sigma = 1.0;
};

// y_t on (1, y_{t-1}, ..., y_{t-p}) for t = first..last.
OlsFit ols_ar(const std::vector<double>& y, int p, int first) {
  const int n = static_cast<int>(y.size()) - first;
  Eigen::MatrixXd X(n, p + 1);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) {
    const int t = first + i;
    X(i, 0) = 1.0;
    for (int k = 0; k < p; ++k) X(i, k + 1) = y[t - 1 - k];
    v[i] = y[t];
  }
  const Eigen::VectorXd b = X.colPivHouseholderQr().solve(v);
  OlsFit out;
  out.intercept = b[0];
  out.coefs.assign(b.data() + 1, b.data() + b.size());
  out.residuals = v - X * b;
  out.sigma = std::sqrt(out.residuals.squaredNorm() / n);
  return out;
}

struct Mixture {
  std::vector<double> mean, sd, weight;
};

// EM for a K-component univariate Gaussian mixture, components sorted by
// decreasing mean.
Mixture fit_mixture(const Eigen::VectorXd& x, int K) {
  const auto n = x.size();
  std::vector<double> sorted(x.data(), x.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double total_sd = std::max(std::sqrt((x.array() - x.mean()).square().mean()), 1e-8);
  Mixture m;
  for (int k = 0; k < K; ++k) {
    m.mean.push_back(sorted[static_cast<std::size_t>((k + 0.5) / K * (n - 1))]);
    m.sd.push_back(total_sd / K);
    m.weight.push_back(1.0 / K);
  }
  Eigen::MatrixXd r(n, K);
  for (int iter = 0; iter < 100; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < K; ++k) {
        const double e = (x[i] - m.mean[k]) / m.sd[k];
        r(i, k) = std::log(m.weight[k]) - std::log(m.sd[k]) - 0.5 * e * e;
        mx = std::max(mx, r(i, k));
      }
      r.row(i) = (r.row(i).array() - mx).exp();
      r.row(i) /= r.row(i).sum();
    }
    for (int k = 0; k < K; ++k) {
      const double w = std::max(r.col(k).sum(), 1e-12);
      m.weight[k] = w / n;
      m.mean[k] = r.col(k).dot(x) / w;
      const double var = (r.col(k).array() * (x.array() - m.mean[k]).square()).sum() / w;
      m.sd[k] = std::max(std::sqrt(var), 1e-3 * total_sd);
    }
  }
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return m.mean[a] > m.mean[b]; });
  Mixture s;
  for (int k : order) {
    s.mean.push_back(m.mean[k]);
    s.sd.push_back(m.sd[k]);
    s.weight.push_back(m.weight[k]);
  }
  return s;
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& M) { return 0.5 * (M + M.transpose()); }

Eigen::VectorXd sqrt_diag(const Eigen::MatrixXd& C) { return C.diagonal().cwiseMax(0.0).cwiseSqrt(); }

}  // namespace

int default_bartlett_lag(int T) {
  return static_cast<int>(std::floor(4.0 * std::pow(T / 100.0, 2.0 / 9.0)));
}

void FitOptions::validate() const {
  if (!(grad_tol > 0.0)) throw DomainError("grad_tol must be > 0");
  if (max_iter < 1) throw DomainError("max_iter must be >= 1");
  if (!(fd_step.relative > 0.0) || !(fd_step.floor > 0.0)) throw DomainError("finite-difference steps must be > 0");
  if (hac.lag && *hac.lag < 0) throw DomainError("HAC lag must be >= 0");
}

Eigen::VectorXd EstimationResult::estimate() const { return ParamLayout(config).flatten(theta_hat); }

ParamVector moment_anchor(const Dataset& data, const ModelConfig& cfg) {
  data.validate(cfg);
  const int K = cfg.n_regimes;
  const int t0 = cfg.first_scored();
  const OlsFit fy = ols_ar(data.y, cfg.ar_order_y, t0);

  ParamVector p;
  const Mixture mix = K > 1 ? fit_mixture(fy.residuals, K) : Mixture{{0.0}, {fy.sigma}, {1.0}};
  if (cfg.switching.intercept) {
    for (int s = 0; s < K; ++s) p.mu.push_back(fy.intercept + mix.mean[s]);
  } else {
    p.mu = {fy.intercept};
  }
  for (int s = 0; s < (cfg.switching.ar ? K : 1); ++s) p.phi.insert(p.phi.end(), fy.coefs.begin(), fy.coefs.end());
  if (cfg.switching.scale) {
    p.sigma = mix.sd;
  } else {
    p.sigma = {fy.sigma};
  }
  p.trans.assign(K, std::vector<LogitCoef>(K - 1));
  for (auto& row : p.trans)
    if (!row.empty()) row[0] = {2.0, 0.0};

  if (cfg.joint()) {
    const OlsFit fz = ols_ar(data.z, cfg.ar_order_z, t0);
    p.mu2 = fz.intercept;
    p.psi = fz.coefs;
    p.sigma2 = std::max(fz.sigma, 1e-8);
    const Eigen::VectorXd& a = fy.residuals;
    const Eigen::VectorXd& b = fz.residuals;
    const double c = (a.array() - a.mean()).matrix().dot((b.array() - b.mean()).matrix()) /
                     std::sqrt((a.array() - a.mean()).square().sum() * (b.array() - b.mean()).square().sum());
    p.rho = std::clamp(std::isfinite(c) ? c : 0.0, -0.95, 0.95);
  }
  for (double& s : p.sigma) s = std::max(s, 1e-8);
  p.validate(cfg);
  return p;
}

Eigen::VectorXd start_grid_step(const ModelConfig& cfg) {
  const ParamLayout layout(cfg);
  Eigen::VectorXd step = Eigen::VectorXd::Constant(layout.size(), 0.5);
  for (int s = 0; s < (cfg.switching.ar ? cfg.n_regimes : 1); ++s)
    for (int i = 0; i < cfg.ar_order_y; ++i) step[layout.phi_index(s, i)] = 0.1;
  if (cfg.joint())
    for (int i = 0; i < cfg.ar_order_z; ++i) step[layout.psi_index(i)] = 0.1;
  return step;
}

std::vector<ParamVector> default_starts(const Dataset& data, const ModelConfig& cfg) {
  const ParamVector anchor = moment_anchor(data, cfg);
  const Eigen::VectorXd raw = pack(anchor, cfg).raw;
  const Eigen::VectorXd step = start_grid_step(cfg);
  std::vector<ParamVector> starts = {anchor};
  for (int j = 0; j < raw.size(); ++j) {
    for (double sign : {1.0, -1.0}) {
      Eigen::VectorXd r = raw;
      r[j] += sign * step[j];
      starts.push_back(unpack({r}, cfg));
    }
  }
  return starts;
}

Eigen::MatrixXd per_observation_scores(const Dataset& data, const ParamVector& theta, const ModelConfig& cfg,
                                       const InitRule& init, const StepRule& rule) {
  const ParamLayout layout(cfg);
  const VectorFn steps = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return forward_filter(data, layout.unflatten(x), cfg, init).step_loglik;
  };
  return numerical_jacobian(steps, layout.flatten(theta), rule);
}

Eigen::MatrixXd loglik_hessian(const Dataset& data, const ParamVector& theta, const ModelConfig& cfg,
                               const InitRule& init, const StepRule& rule) {
  const ParamLayout layout(cfg);
  const VectorFn grad = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return fisher_score(data, layout.unflatten(x), cfg, init);
  };
  return numerical_hessian_from_gradient(grad, layout.flatten(theta), rule);
}

Eigen::MatrixXd score_long_run_variance(const Eigen::MatrixXd& scores, const HacOptions& hac) {
  const auto n = scores.rows();
  Eigen::MatrixXd B = scores.transpose() * scores / static_cast<double>(n);
  if (hac.kind == HacOptions::Kind::Bartlett) {
    const int L = hac.lag.value_or(default_bartlett_lag(static_cast<int>(n)));
    for (int l = 1; l <= L && l < n; ++l) {
      const Eigen::MatrixXd G =
          scores.bottomRows(n - l).transpose() * scores.topRows(n - l) / static_cast<double>(n);
      B += (1.0 - l / (L + 1.0)) * (G + G.transpose());
    }
  }
  return symmetrize(B);
}

Eigen::MatrixXd sandwich_from_parts(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int n) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  const auto& sv = svd.singularValues();
  const double cond = sv[0] / sv[sv.size() - 1];
  if (!std::isfinite(cond) || cond > 1e14) {
    std::ostringstream os;
    os << "sandwich: information matrix is singular (condition number " << cond << ")";
    throw NumericError(os.str());
  }
  const Eigen::MatrixXd Ainv = A.fullPivLu().inverse();
  return symmetrize(Ainv * B * Ainv.transpose() / static_cast<double>(n));
}

Eigen::MatrixXd sandwich_cov(const Dataset& data, const ModelConfig& cfg, const ParamVector& theta_hat,
                             const HacOptions& hac, const InitRule& init, const StepRule& rule) {
  const Eigen::MatrixXd H = loglik_hessian(data, theta_hat, cfg, init, rule);
  const Eigen::MatrixXd S = per_observation_scores(data, theta_hat, cfg, init, rule);
  const auto n = static_cast<int>(S.rows());
  return sandwich_from_parts(-H / n, score_long_run_variance(S, hac), n);
}

EstimationResult fit(const Dataset& data, const ModelConfig& cfg, const FitOptions& options) {
  options.validate();
  cfg.validate();
  data.validate(cfg);
  const std::vector<ParamVector> starts = options.starts.empty() ? default_starts(data, cfg) : options.starts;
  const ParamLayout layout(cfg);
  const int n = data.last() - cfg.first_scored() + 1;

  const Objective objective = [&](const Eigen::VectorXd& raw, Eigen::VectorXd* grad) -> double {
    try {
      const ParamVector p = unpack({raw}, cfg);
      const ScoredLoglik s = loglik_and_score(data, p, cfg, options.init);
      if (grad) *grad = -s.score.cwiseProduct(pack_jacobian_diag(p, cfg)) / n;
      return -s.loglik / n;
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const NumericError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  BfgsOptions bopt;
  bopt.grad_tol = options.grad_tol;
  bopt.max_iter = options.max_iter;

  std::vector<StartDiagnostics> diag(starts.size());
  std::vector<BfgsResult> runs(starts.size());
  parallel_for(static_cast<int>(starts.size()), options.threads, [&](int i) {
    try {
      runs[i] = bfgs_minimize(objective, pack(starts[i], cfg).raw, bopt);
      if (!runs[i].converged && runs[i].iterations < bopt.max_iter) runs[i] = newton_polish(objective, runs[i], bopt);
      diag[i].ok = true;
      diag[i].loglik = -runs[i].f * n;
      diag[i].grad_norm = runs[i].grad.norm();
      diag[i].iterations = runs[i].iterations;
      diag[i].converged = runs[i].converged;
      diag[i].message = runs[i].status;
    } catch (const std::exception& e) {
      diag[i].message = e.what();
    }
  });

  int best = -1;
  for (int i = 0; i < static_cast<int>(starts.size()); ++i)
    if (diag[i].ok && (best < 0 || diag[i].loglik > diag[best].loglik)) best = i;
  if (best < 0) {
    std::ostringstream os;
    os << "all " << starts.size() << " starts failed:";
    for (std::size_t i = 0; i < diag.size(); ++i) os << "\n  start " << i << ": " << diag[i].message;
    throw EstimationError(os.str());
  }

  EstimationResult r;
  r.config = cfg;
  r.names = layout.names();
  r.n_obs = n;
  r.theta_hat = unpack({runs[best].x}, cfg);
  r.loglik = forward_filter(data, r.theta_hat, cfg, options.init).loglik;
  r.grad_norm = runs[best].grad.norm();
  r.converged = runs[best].converged;
  r.start_index = best;
  r.n_iter = runs[best].iterations;
  r.starts = std::move(diag);
  r.warnings = stationarity_warnings(r.theta_hat, cfg);

  r.hessian = loglik_hessian(data, r.theta_hat, cfg, options.init, options.fd_step);
  const Eigen::MatrixXd info = -r.hessian;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  r.hessian_pd = llt.info() == Eigen::Success &&
                 Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(info, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() > 0.0;
  if (!r.hessian_pd) {
    r.warnings.push_back("Hessian is not negative definite at the estimate; standard errors omitted");
    return r;
  }
  r.cov_hessian = symmetrize(llt.solve(Eigen::MatrixXd::Identity(layout.size(), layout.size())));
  r.se_hessian = sqrt_diag(r.cov_hessian);
  const Eigen::MatrixXd S = per_observation_scores(data, r.theta_hat, cfg, options.init, options.fd_step);
  r.cov_sandwich = sandwich_from_parts(info / n, score_long_run_variance(S, options.hac), n);
  r.se_sandwich = sqrt_diag(r.cov_sandwich);
  return r;
}

Eigen::VectorXd t_stats(const EstimationResult& result, const Eigen::VectorXd& null_values, SeFlavor flavor) {
  const Eigen::VectorXd& se = result.se(flavor);
  if (se.size() == 0) throw NumericError("standard errors are not available");
  const Eigen::VectorXd est = result.estimate();
  if (null_values.size() != est.size()) throw DomainError("null vector has wrong length");
  Eigen::VectorXd t(est.size());
  for (Eigen::Index j = 0; j < est.size(); ++j) {
    if (!(se[j] > 0.0)) throw NumericError("zero standard error for " + result.names[j]);
    t[j] = (est[j] - null_values[j]) / se[j];
  }
  return t;
}

}  // namespace tvtp
