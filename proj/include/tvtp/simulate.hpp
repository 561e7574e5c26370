#pragma once

// Data generation from the switching-AR design with covariate-driven regimes
// and contemporaneously correlated Y/Z innovations.

#include "tvtp/filter.hpp"
#include "tvtp/model.hpp"

#include <cstdint>
#include <vector>

namespace tvtp {

struct DgpSpec {
  // Shape of the true model; the variant is ignored (both equations are
  // always generated).
  ModelConfig model;
  ParamVector params;  // joint-shaped; params.rho is ignored in favor of rho
  double rho = 0.0;
  int T = 200;
  int burnin = 100;
  double y0 = 0.5;
  double z0 = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t rep_index = 0;

  // Scales may be zero here (noise-free recursions are valid designs).
  void validate() const;
};

// Paper design: paper_dgp_params(rho) with the given length and stream.
DgpSpec paper_dgp(double rho, int T, std::uint64_t seed, std::uint64_t rep_index = 0);

// Generates burnin + T steps after (y0, z0) and returns the last T + 1
// points, with the latent path in s_true.
Dataset simulate_dgp(const DgpSpec& spec);

// Same, also returning the post-burn-in innovations (U1_t, U2_t), t = 1..T.
struct SimulationTrace {
  Dataset data;
  std::vector<double> u1, u2;
};
SimulationTrace simulate_dgp_trace(const DgpSpec& spec);

struct TransitionBin {
  double z_lo = 0.0, z_hi = 0.0;
  std::vector<long> transitions;   // per origin regime
  std::vector<long> stays;
  std::vector<double> expected;    // sum of model stay probabilities
  std::vector<double> sd;          // binomial (Poisson-binomial) sd
  bool within_band = true;         // every regime within 3 sd
};

struct TransitionReport {
  std::vector<TransitionBin> bins;
  int bins_within = 0;
};

// Bins transitions S_{t-1} -> S_t by deciles (n_bins quantiles) of Z_{t-1}
// and compares empirical stay counts with the model's logistic curve.
TransitionReport empirical_transition_check(const Dataset& sim, const ParamVector& params, int K,
                                            int n_bins = 10);

}  // namespace tvtp
