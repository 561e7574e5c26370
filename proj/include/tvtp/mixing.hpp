#pragma once

// Exact-enumeration checks of the conditional mixing bound for the regime
// chain given observed data, and of the Dobrushin-coefficient chain rule.
//
// A segment is the index range [lo, hi] of a Dataset (lo plays the role of
// -m, hi of j). Emissions at lo + 1 .. hi enter the conditioning; lags before
// lo are read from the dataset, so lo >= max(p, p_z).

#include "tvtp/filter.hpp"
#include "tvtp/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace tvtp {

// Product over the path of (1 - q_lower_bound(z_n)); 1 for an empty path.
double product_bound(std::span<const double> z_path, const ParamVector& p, int K);

// Row b: P(S_{hi+1} = . | S_lo = b, X_lo..X_hi), by summing over every
// interior regime path. Throws SizeError when K^(hi-lo+2) > 2^22 and
// NumericError when some row has no mass.
Eigen::MatrixXd exact_conditional_kernel(const Dataset& data, int lo, int hi, const ParamVector& p,
                                         const ModelConfig& cfg);

// max over (b, c) of the l1 distance between rows of exact_conditional_kernel
// (range [0, 2]).
double exact_conditional_tv(const Dataset& data, int lo, int hi, const ParamVector& p, const ModelConfig& cfg);

// Row s: P(S_{l+1} = . | S_l = s, X_lo..X_hi) for lo <= l <= hi, by
// enumerating the regime paths after l.
Eigen::MatrixXd one_step_conditional_kernel(const Dataset& data, int lo, int hi, int l, const ParamVector& p,
                                            const ModelConfig& cfg);

// Half the largest l1 distance between two rows of a stochastic matrix.
double dobrushin(const Eigen::MatrixXd& kernel);

// dobrushin(one_step_conditional_kernel(...)).
double dobrushin_coefficient(const Dataset& data, int lo, int hi, int l, const ParamVector& p,
                             const ModelConfig& cfg);

struct MixingInstance {
  int m = 0, j = 0;  // segment length m + j + 1
  double bound = 1.0;            // product bound over z_lo .. z_hi
  double tv = 0.0;               // exact_conditional_tv, l1 convention
  double chain_product = 1.0;    // product of per-step Dobrushin coefficients
  double max_step_excess = 0.0;  // max_l dobrushin_l - (1 - q(z_l))
  bool half_tv_within_bound = false;  // tv / 2 <= bound + tol
  bool tv_within_bound = false;       // tv <= bound + tol (un-halved form)
  bool chain_rule_holds = false;      // tv / 2 <= chain_product + tol
  bool step_bound_holds = false;      // max_step_excess <= tol
};

struct MixingReport {
  std::vector<MixingInstance> instances;
  double tolerance = 1e-10;
  double max_violation = 0.0;  // max of tv/2 - bound over instances
  int violations = 0;          // half-TV bound, chain rule, or step bound failures
  int unhalved_violations = 0; // instances with tv > bound + tol

  bool ok() const { return violations == 0; }
};

struct MixingCheckOptions {
  int n_instances = 500;
  int max_length = 10;  // upper limit on m + j
  std::uint64_t seed = 1;
  int threads = 1;
  double tolerance = 1e-10;
};

// Random instances: parameters drawn around the simulation design, data from
// the design DGP (rho drawn from [-0.9, 0.9]), segment placed at a random
// point of the path with m + j <= max_length. Deterministic in the seed.
MixingReport run_mixing_check(const MixingCheckOptions& options);

// Check of one instance.
MixingInstance check_instance(const Dataset& data, int lo, int hi, const ParamVector& p, const ModelConfig& cfg,
                              double tolerance = 1e-10);

struct ForgettingCurve {
  std::vector<int> t;        // scored time indices
  std::vector<double> diff;  // |step_loglik_a - step_loglik_b|
  std::vector<double> bound; // running product of (1 - q(z_i)), i = first_t - 1 .. t - 1
  double fitted_constant = 0.0;  // max diff / bound over points above the noise floor
  double log_slope = 0.0;        // least-squares slope of log diff on t above the noise floor
  double bound_log_slope = 0.0;  // mean log(1 - q) over the path
  int first_below = -1;          // first t with diff below `threshold` from then on; -1 if never
};

// Per-step log-likelihood gap between two initial rules.
ForgettingCurve init_forgetting_curve(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                                      const InitRule& a, const InitRule& b, double threshold = 1e-12,
                                      double noise_floor = 1e-13);

}  // namespace tvtp
