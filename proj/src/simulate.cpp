#include "tvtp/simulate.hpp"

#include "tvtp/errors.hpp"
#include "tvtp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tvtp {

double Philox4x32::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double a = 2.0 * std::numbers::pi * uniform();
  spare_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

namespace {

int draw_categorical(const Eigen::RowVectorXd& probs, double u) {
  double acc = 0.0;
  const auto K = static_cast<int>(probs.size());
  for (int s = 0; s < K - 1; ++s) {
    acc += probs[s];
    if (u < acc) return s;
  }
  return K - 1;
}

}  // namespace

void DgpSpec::validate() const {
  if (T < 1) throw DomainError("T must be >= 1");
  if (burnin < 0) throw DomainError("burnin must be >= 0");
  if (!(std::abs(rho) < 1.0)) throw DomainError("|rho| must be < 1");
  if (!std::isfinite(y0) || !std::isfinite(z0)) throw DomainError("initial values must be finite");
  // Reuse the joint-variant checks with scales nudged positive, then check
  // the scales themselves for >= 0.
  ModelConfig cfg = model;
  cfg.variant = Variant::Joint;
  ParamVector probe = params;
  probe.rho = 0.0;
  for (double& s : probe.sigma) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw DomainError("sigma must be >= 0");
    s = 1.0;
  }
  if (!(probe.sigma2 >= 0.0) || !std::isfinite(probe.sigma2)) throw DomainError("sigma2 must be >= 0");
  probe.sigma2 = 1.0;
  probe.validate(cfg);
}

DgpSpec paper_dgp(double rho, int T, std::uint64_t seed, std::uint64_t rep_index) {
  DgpSpec spec;
  spec.model = paper_model_config(Variant::Joint);
  spec.params = paper_dgp_params(rho);
  spec.rho = rho;
  spec.T = T;
  spec.seed = seed;
  spec.rep_index = rep_index;
  return spec;
}

SimulationTrace simulate_dgp_trace(const DgpSpec& spec) {
  spec.validate();
  const ModelConfig& cfg = spec.model;
  const ParamVector& p = spec.params;
  const int K = cfg.n_regimes;
  const int py = cfg.ar_order_y;
  const int pz = cfg.ar_order_z;
  const int hist = std::max({py, pz, 1});
  const int steps = spec.burnin + spec.T;

  // Index hist - 1 holds (y0, z0); earlier entries pad the lag window.
  std::vector<double> y(hist + steps, spec.y0), z(hist + steps, spec.z0);
  std::vector<int> s(hist + steps, 0);
  std::vector<double> u1(steps), u2(steps);

  Philox4x32 rng(spec.seed, spec.rep_index);
  const double rho_c = std::sqrt(1.0 - spec.rho * spec.rho);
  s[hist - 1] = draw_categorical(stationary_distribution(transition_matrix(spec.z0, p, K)).transpose(),
                                 rng.uniform());
  for (int k = 0; k < steps; ++k) {
    const int t = hist + k;
    s[t] = draw_categorical(transition_matrix(z[t - 1], p, K).row(s[t - 1]), rng.uniform());
    const double e1 = rng.normal();
    const double e2 = rng.normal();
    u1[k] = e1;
    u2[k] = spec.rho * e1 + rho_c * e2;
    double my = p.intercept(s[t]);
    const auto phi = p.ar(s[t], py);
    for (int i = 0; i < py; ++i) my += phi[i] * y[t - 1 - i];
    double mz = p.mu2;
    for (int i = 0; i < pz; ++i) mz += p.psi[i] * z[t - 1 - i];
    y[t] = my + p.scale(s[t]) * u1[k];
    z[t] = mz + p.sigma2 * u2[k];
  }

  const int first = hist - 1 + spec.burnin;
  SimulationTrace out;
  out.data.y.assign(y.begin() + first, y.end());
  out.data.z.assign(z.begin() + first, z.end());
  out.data.s_true = std::vector<int>(s.begin() + first, s.end());
  out.u1.assign(u1.begin() + spec.burnin, u1.end());
  out.u2.assign(u2.begin() + spec.burnin, u2.end());
  return out;
}

Dataset simulate_dgp(const DgpSpec& spec) { return simulate_dgp_trace(spec).data; }

TransitionReport empirical_transition_check(const Dataset& sim, const ParamVector& params, int K,
                                            int n_bins) {
  TransitionReport report;
  if (!sim.s_true || sim.length() < 2 || n_bins < 1) return report;
  const auto& s = *sim.s_true;
  const int n = sim.length() - 1;

  std::vector<double> zs(sim.z.begin(), sim.z.end() - 1);
  std::sort(zs.begin(), zs.end());
  std::vector<double> edges(n_bins + 1);
  edges[0] = -std::numeric_limits<double>::infinity();
  edges[n_bins] = std::numeric_limits<double>::infinity();
  for (int b = 1; b < n_bins; ++b) edges[b] = zs[static_cast<std::size_t>(static_cast<double>(b) * n / n_bins)];

  report.bins.resize(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    auto& bin = report.bins[b];
    bin.z_lo = b == 0 ? zs.front() : edges[b];
    bin.z_hi = b == n_bins - 1 ? zs.back() : edges[b + 1];
    bin.transitions.assign(K, 0);
    bin.stays.assign(K, 0);
    bin.expected.assign(K, 0.0);
    bin.sd.assign(K, 0.0);
  }
  std::vector<double> var(static_cast<std::size_t>(n_bins) * K, 0.0);
  for (int t = 1; t <= n; ++t) {
    const double zc = sim.z[t - 1];
    const int b = static_cast<int>(std::upper_bound(edges.begin() + 1, edges.end() - 1, zc) - (edges.begin() + 1));
    const int from = s[t - 1];
    const double q = transition_matrix(zc, params, K)(from, from);
    auto& bin = report.bins[b];
    ++bin.transitions[from];
    if (s[t] == from) ++bin.stays[from];
    bin.expected[from] += q;
    var[static_cast<std::size_t>(b) * K + from] += q * (1.0 - q);
  }
  for (int b = 0; b < n_bins; ++b) {
    auto& bin = report.bins[b];
    for (int k = 0; k < K; ++k) {
      bin.sd[k] = std::sqrt(var[static_cast<std::size_t>(b) * K + k]);
      if (std::abs(static_cast<double>(bin.stays[k]) - bin.expected[k]) > 3.0 * bin.sd[k] + 1e-9)
        bin.within_band = false;
    }
    if (bin.within_band) ++report.bins_within;
  }
  return report;
}

}  // namespace tvtp
