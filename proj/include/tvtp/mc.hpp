#pragma once

// Monte Carlo harness: replicate, simulate, fit, relabel and summarize bias,
// sampling-sd to standard-error ratios, test size and power.

#include "tvtp/estimate.hpp"
#include "tvtp/simulate.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace tvtp {

// Canonical labels for K = 2 fits: regime 0 has the larger intercept. Swaps
// regime-indexed blocks of the estimate and permutes the Hessian and
// covariance rows and columns. Other K are returned unchanged.
EstimationResult relabel(const EstimationResult& result, bool* swapped = nullptr);

using Estimator = std::function<EstimationResult(const Dataset&, const ModelConfig&, const FitOptions&)>;

struct MCDesign {
  enum class Starts { Desk, Full };

  DgpSpec dgp = paper_dgp(0.0, 200, 0);  // template; rho, T, seed and rep are set per replication
  std::vector<double> rho_grid{0.0, 0.8};
  std::vector<int> T_grid{200, 800, 1600, 3200};
  int n_reps = 1000;
  std::vector<Variant> estimators{Variant::Partial, Variant::Joint};
  double level = 0.05;
  std::uint64_t master_seed = 1;
  // Desk: the true parameters and the moment anchor shifted by +/- one grid
  // step in every coordinate. Full: the true parameters and default_starts().
  Starts starts = Starts::Desk;
  FitOptions fit;          // starts are filled per replication
  int threads = 1;         // replications in flight
  Estimator estimator;     // empty: tvtp::fit
  int low_precision_reps = 30;  // fewer converged reps flag the cell

  void validate() const;
  double critical_value() const;  // two-sided normal quantile for level
};

// Simulation stream of replication `rep` in the (rho, T) cell; shared by all
// estimators so they see identical data.
std::uint64_t mc_stream(double rho, int T, int rep);

struct MCRecord {
  Variant estimator = Variant::Partial;
  double rho = 0.0;
  int T = 0;
  int rep = 0;
  bool converged = false;
  bool relabeled = false;
  bool has_se = false;
  std::string error;  // set when the fit threw
  Eigen::VectorXd estimate;
  Eigen::VectorXd se;  // empirical-Hessian standard errors
};

struct MCRow {
  Variant estimator = Variant::Partial;
  double rho = 0.0;
  int T = 0;
  std::string parameter;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;        // sampling sd (n - 1 divisor)
  double mean_se = 0.0;
  double sd_ratio = 0.0;  // sd / mean_se
  double size = 0.0;      // rejection rate of theta_j = truth
  double power = 0.0;     // rejection rate of theta_j = 0
  int n_reps = 0;
  int n_converged = 0;
  int n_relabeled = 0;
  int n_se = 0;           // converged reps with a definite Hessian
  bool boundary = false;  // the zero null sits on the parameter boundary
  bool low_precision = false;
  bool valid = true;      // false when no replication converged
};

struct MCReport {
  std::vector<MCRow> rows;
  std::vector<MCRecord> records;

  const MCRow* find(Variant estimator, double rho, int T, const std::string& parameter) const;
};

// Truth in the estimator's parameterization: the DGP parameters, restricted
// to the Y equation for the partial estimator.
ParamVector mc_truth(const MCDesign& design, Variant estimator, double rho);

MCReport run_monte_carlo(const MCDesign& design);

// Summaries from per-replication records, one row per (estimator, rho, T,
// parameter) in design order.
MCReport summarize(std::vector<MCRecord> records, const MCDesign& design);

void write_mc_csv(std::ostream& os, const MCReport& report);
void write_mc_table(std::ostream& os, const MCReport& report);

std::string variant_name(Variant v);

}  // namespace tvtp
