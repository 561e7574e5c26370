#pragma once

// Shared random generators for property tests.

#include "tvtp/filter.hpp"
#include "tvtp/model.hpp"

#include <random>

namespace tvtp::testing {

// Random valid parameters for cfg. Values are drawn around the simulation
// design so likelihood surfaces stay well-conditioned.
inline ParamVector random_params(const ModelConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int K = cfg.n_regimes;
  const int p = cfg.ar_order_y;
  ParamVector out;
  const int n_mu = cfg.switching.intercept ? K : 1;
  for (int s = 0; s < n_mu; ++s) out.mu.push_back(1.0 - 2.0 * s + 0.5 * u(rng));
  const int n_phi = cfg.switching.ar ? K * p : p;
  for (int i = 0; i < n_phi; ++i) out.phi.push_back(0.6 / std::max(p, 1) * u(rng));
  const int n_sigma = cfg.switching.scale ? K : 1;
  for (int s = 0; s < n_sigma; ++s) out.sigma.push_back(1.0 + 0.4 * u(rng));
  out.trans.assign(K, std::vector<LogitCoef>(K - 1));
  for (auto& row : out.trans)
    for (auto& c : row) c = {2.0 + u(rng), 0.5 * u(rng)};
  if (cfg.joint()) {
    out.mu2 = 0.2 + 0.2 * u(rng);
    for (int i = 0; i < cfg.ar_order_z; ++i) out.psi.push_back(0.7 / std::max(cfg.ar_order_z, 1) * u(rng));
    out.sigma2 = 1.0 + 0.3 * u(rng);
    out.rho = 0.8 * u(rng);
  }
  return out;
}

// Random observation series, not drawn from the model; filter identities
// hold for any data.
inline Dataset random_data(int length, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Dataset d;
  double y = 0.5, z = 1.0;
  for (int t = 0; t < length; ++t) {
    y = 0.5 * y + n(rng);
    z = 0.2 + 0.6 * z + n(rng);
    d.y.push_back(y);
    d.z.push_back(z);
  }
  return d;
}

}  // namespace tvtp::testing
