#pragma once

// Forward filter, path-enumeration oracle, forward-backward smoother and the
// Fisher-identity score for the switching autoregression.

#include "tvtp/model.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace tvtp {

// Observations X_0..X_T with X_t = (y_t, z_t). The partial variant still
// reads z through the transition kernel.
struct Dataset {
  std::vector<double> y;
  std::vector<double> z;
  std::optional<std::vector<int>> s_true;

  int length() const { return static_cast<int>(y.size()); }
  int last() const { return length() - 1; }  // T

  // Throws DomainError unless y, z are finite, equally long and cover the
  // lag window of cfg plus at least one scored observation.
  void validate(const ModelConfig& cfg) const;

  Dataset slice(int begin, int end) const;  // [begin, end)
};

// Initial conditional law nu(. | X) of the regime at the last unscored time.
struct InitRule {
  enum class Kind { Uniform, StationaryAtX0, Fixed };
  Kind kind = Kind::StationaryAtX0;
  Eigen::VectorXd fixed;

  static InitRule uniform() { return {Kind::Uniform, {}}; }
  static InitRule stationary() { return {Kind::StationaryAtX0, {}}; }
  static InitRule fixed_at(Eigen::VectorXd v) { return {Kind::Fixed, std::move(v)}; }

  // nu(. | z) for K regimes.
  Eigen::VectorXd distribution(double z, const ParamVector& p, int K) const;
};

struct FilterOutput {
  int first_t = 1;              // time index of row 0
  Eigen::MatrixXd delta;        // n x K, P(S_t = s | X_0^{t-1})
  Eigen::MatrixXd filtered;     // n x K, P(S_t = s | X_0^{t})
  Eigen::VectorXd step_loglik;  // n, log p_t(X_t | X_0^{t-1})
  double loglik = 0.0;          // sum of step_loglik

  int steps() const { return static_cast<int>(step_loglik.size()); }
  double mean_loglik() const { return loglik / steps(); }
};

FilterOutput forward_filter(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                            const InitRule& init = {});

// Total log-likelihood by direct marginalization over all regime paths.
// Throws SizeError when K^(n+1) > 2^20.
double brute_force_loglik(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                          const InitRule& init = {});

struct SmootherOutput {
  int first_t = 1;
  Eigen::VectorXd initial;             // K, P(S_{first_t - 1} = s | X_0^T)
  Eigen::MatrixXd marginals;           // n x K, P(S_t = s | X_0^T)
  std::vector<Eigen::MatrixXd> pairwise;  // n matrices; pairwise[i](a, b) =
                                          // P(S_{t-1} = a, S_t = b | X_0^T), t = first_t + i
  double loglik = 0.0;
};

SmootherOutput smooth(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                      const InitRule& init = {});

// Gradient of the total log-likelihood in the flat natural-space coordinates
// of ParamLayout, via the smoothed complete-data score.
Eigen::VectorXd fisher_score(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                             const InitRule& init = {});

// Total log-likelihood and its gradient from one smoother pass.
struct ScoredLoglik {
  double loglik = 0.0;
  Eigen::VectorXd score;
};
ScoredLoglik loglik_and_score(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                              const InitRule& init = {});

// Log-emission matrix (n x K) for the scored range; row i is time first_t + i.
Eigen::MatrixXd log_emissions(const Dataset& data, const ParamVector& p, const ModelConfig& cfg);

}  // namespace tvtp
