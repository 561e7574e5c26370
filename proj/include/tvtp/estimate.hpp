#pragma once

// Maximum-likelihood fitting with multiple starts, empirical-Hessian and
// sandwich covariance estimators, and t statistics.

#include "tvtp/filter.hpp"
#include "tvtp/model.hpp"
#include "tvtp/numdiff.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace tvtp {

// Long-run variance of the per-observation scores: plain outer product, or
// Bartlett (Newey-West) weights up to `lag` (default floor(4 (T/100)^(2/9))).
struct HacOptions {
  enum class Kind { None, Bartlett };
  Kind kind = Kind::None;
  std::optional<int> lag;

  static HacOptions none() { return {}; }
  static HacOptions bartlett(std::optional<int> lag = std::nullopt) { return {Kind::Bartlett, lag}; }
};

int default_bartlett_lag(int T);

struct FitOptions {
  std::vector<ParamVector> starts;  // empty: default_starts()
  double grad_tol = 1e-8;           // on the gradient of the mean log-likelihood
  int max_iter = 500;
  StepRule fd_step{1e-6, 1e-7};
  HacOptions hac;
  InitRule init;
  int threads = 1;

  void validate() const;
};

struct StartDiagnostics {
  bool ok = false;
  double loglik = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

enum class SeFlavor { Hessian, Sandwich };

struct EstimationResult {
  ModelConfig config;
  ParamVector theta_hat;
  std::vector<std::string> names;
  int n_obs = 0;  // scored observations
  double loglik = 0.0;  // total
  double grad_norm = 0.0;  // Euclidean norm of the gradient of the mean log-likelihood (optimizer space)
  bool converged = false;
  int start_index = -1;
  int n_iter = 0;

  Eigen::MatrixXd hessian;  // of the total log-likelihood, natural space
  bool hessian_pd = false;  // -hessian positive definite
  Eigen::MatrixXd cov_hessian;   // empty unless hessian_pd
  Eigen::MatrixXd cov_sandwich;  // empty unless hessian_pd
  Eigen::VectorXd se_hessian;
  Eigen::VectorXd se_sandwich;

  std::vector<StartDiagnostics> starts;
  std::vector<std::string> warnings;

  Eigen::VectorXd estimate() const;  // flat natural-space vector
  bool has_se() const { return se_hessian.size() > 0; }
  const Eigen::VectorXd& se(SeFlavor f) const { return f == SeFlavor::Hessian ? se_hessian : se_sandwich; }
};

// Moment-based anchor: OLS of the non-switching AR, a Gaussian mixture on its
// residuals for the regime intercepts and scales, alpha = 2, beta = 0.
ParamVector moment_anchor(const Dataset& data, const ModelConfig& cfg);

// Per-coordinate grid step in optimizer space (0.1 for AR coefficients, 0.5
// otherwise).
Eigen::VectorXd start_grid_step(const ModelConfig& cfg);

// The anchor plus the anchor with each optimizer-space coordinate moved by
// +/- one grid step, one coordinate at a time (2q + 1 starts).
std::vector<ParamVector> default_starts(const Dataset& data, const ModelConfig& cfg);

EstimationResult fit(const Dataset& data, const ModelConfig& cfg, const FitOptions& options = {});

// d log p_t / d theta for every scored t (n x q), natural space, by central
// differences of the per-step log-likelihoods.
Eigen::MatrixXd per_observation_scores(const Dataset& data, const ParamVector& theta, const ModelConfig& cfg,
                                       const InitRule& init = {}, const StepRule& rule = {});

// Hessian of the total log-likelihood, natural space, by central differences
// of the analytic score.
Eigen::MatrixXd loglik_hessian(const Dataset& data, const ParamVector& theta, const ModelConfig& cfg,
                               const InitRule& init = {}, const StepRule& rule = {});

// Long-run score covariance B (q x q) from per-observation scores (n x q).
Eigen::MatrixXd score_long_run_variance(const Eigen::MatrixXd& scores, const HacOptions& hac);

// A^{-1} B A^{-1} / n. Throws NumericError (with the condition number) when A
// is singular.
Eigen::MatrixXd sandwich_from_parts(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int n);

// Sandwich covariance of theta_hat with A = -hessian / n.
Eigen::MatrixXd sandwich_cov(const Dataset& data, const ModelConfig& cfg, const ParamVector& theta_hat,
                             const HacOptions& hac, const InitRule& init = {}, const StepRule& rule = {});

// (theta_hat_j - null_j) / se_j.
Eigen::VectorXd t_stats(const EstimationResult& result, const Eigen::VectorXd& null_values,
                        SeFlavor flavor = SeFlavor::Hessian);

}  // namespace tvtp
