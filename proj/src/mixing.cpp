#include "tvtp/mixing.hpp"

#include "tvtp/errors.hpp"
#include "tvtp/parallel.hpp"
#include "tvtp/rng.hpp"
#include "tvtp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tvtp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_segment(const Dataset& data, int lo, int hi, const ModelConfig& cfg) {
  if (lo < cfg.first_scored() - 1) throw DomainError("segment start must leave room for the lag window");
  if (hi < lo || hi > data.last()) throw DomainError("segment end out of range");
}

void check_paths(int K, int steps) {
  const double paths = std::pow(static_cast<double>(K), steps);
  if (paths > static_cast<double>(1 << 22))
    throw SizeError("mixing enumeration needs " + std::to_string(paths) + " paths (> 2^22)");
}

double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

// Row `from`: P(S_{end} = . | S_start = from, X) with emissions of the
// states start + 1 .. hi (end = hi + 1), enumerating S_{start+1} .. S_end.
// With `first_step` set, returns P(S_{start+1} = . | S_start = from, X)
// instead.
Eigen::MatrixXd enumerate_kernel(const Dataset& data, int start, int hi, const ParamVector& p, const ModelConfig& cfg,
                                 bool first_step) {
  p.validate(cfg);
  const int K = cfg.n_regimes;
  const int steps = hi - start + 1;  // transitions start -> hi + 1
  check_paths(K, steps + 1);
  const int t0 = cfg.first_scored();
  const Eigen::MatrixXd E = log_emissions(data, p, cfg);
  std::vector<Eigen::MatrixXd> logQ(steps);
  for (int i = 0; i < steps; ++i) logQ[i] = transition_matrix(data.z[start + i], p, K).array().log().matrix();

  Eigen::MatrixXd out(K, K);
  std::vector<int> path(steps);
  for (int from = 0; from < K; ++from) {
    std::vector<std::vector<double>> terms(K);
    std::fill(path.begin(), path.end(), 0);
    const auto total = static_cast<long long>(std::pow(K, steps));
    for (long long c = 0; c < total; ++c) {
      double w = 0.0;
      int prev = from;
      for (int i = 0; i < steps; ++i) {
        w += logQ[i](prev, path[i]);
        const int t = start + 1 + i;
        if (t <= hi) w += E(t - t0, path[i]);
        prev = path[i];
      }
      terms[first_step ? path.front() : path.back()].push_back(w);
      for (int k = steps - 1; k >= 0; --k) {
        if (++path[k] < K) break;
        path[k] = 0;
      }
    }
    Eigen::VectorXd logs(K);
    for (int s = 0; s < K; ++s) logs[s] = log_sum_exp(terms[s]);
    const double norm = log_sum_exp(std::vector<double>(logs.data(), logs.data() + K));
    if (!std::isfinite(norm))
      throw NumericError("conditional regime distribution has no mass for starting regime " + std::to_string(from));
    out.row(from) = (logs.array() - norm).exp().matrix().transpose();
  }
  return out;
}

double max_row_l1(const Eigen::MatrixXd& M) {
  double best = 0.0;
  for (Eigen::Index a = 0; a < M.rows(); ++a)
    for (Eigen::Index b = a + 1; b < M.rows(); ++b) best = std::max(best, (M.row(a) - M.row(b)).cwiseAbs().sum());
  return best;
}

// Parameters around the simulation design, drawn from the Philox stream.
ParamVector random_design_params(Philox4x32& rng, double rho) {
  const auto u = [&](double lo, double hi) { return lo + (hi - lo) * rng.uniform(); };
  ParamVector p = paper_dgp_params(rho);
  p.mu = {u(0.0, 2.0), u(-2.0, 0.0)};
  p.phi = {u(-0.9, 0.9)};
  p.sigma = {u(0.3, 2.0), u(0.3, 2.0)};
  p.trans = {{{u(-1.0, 4.0), u(-1.5, 1.5)}}, {{u(-1.0, 4.0), u(-1.5, 1.5)}}};
  p.mu2 = u(-0.5, 0.5);
  p.psi = {u(-0.9, 0.9)};
  p.sigma2 = u(0.3, 2.0);
  return p;
}

}  // namespace

double product_bound(std::span<const double> z_path, const ParamVector& p, int K) {
  double prod = 1.0;
  for (double z : z_path) prod *= 1.0 - q_lower_bound(z, p, K);
  return prod;
}

Eigen::MatrixXd exact_conditional_kernel(const Dataset& data, int lo, int hi, const ParamVector& p,
                                         const ModelConfig& cfg) {
  check_segment(data, lo, hi, cfg);
  return enumerate_kernel(data, lo, hi, p, cfg, false);
}

double exact_conditional_tv(const Dataset& data, int lo, int hi, const ParamVector& p, const ModelConfig& cfg) {
  return max_row_l1(exact_conditional_kernel(data, lo, hi, p, cfg));
}

Eigen::MatrixXd one_step_conditional_kernel(const Dataset& data, int lo, int hi, int l, const ParamVector& p,
                                            const ModelConfig& cfg) {
  check_segment(data, lo, hi, cfg);
  if (l < lo || l > hi) throw DomainError("step index outside the segment");
  return enumerate_kernel(data, l, hi, p, cfg, true);
}

double dobrushin(const Eigen::MatrixXd& kernel) { return 0.5 * max_row_l1(kernel); }

double dobrushin_coefficient(const Dataset& data, int lo, int hi, int l, const ParamVector& p,
                             const ModelConfig& cfg) {
  return dobrushin(one_step_conditional_kernel(data, lo, hi, l, p, cfg));
}

MixingInstance check_instance(const Dataset& data, int lo, int hi, const ParamVector& p, const ModelConfig& cfg,
                              double tolerance) {
  const int K = cfg.n_regimes;
  MixingInstance r;
  r.m = 0;
  r.j = hi - lo;
  r.bound = product_bound(std::span<const double>(data.z).subspan(lo, hi - lo + 1), p, K);
  r.tv = exact_conditional_tv(data, lo, hi, p, cfg);
  r.chain_product = 1.0;
  r.max_step_excess = -std::numeric_limits<double>::infinity();
  for (int l = lo; l <= hi; ++l) {
    const double a = dobrushin_coefficient(data, lo, hi, l, p, cfg);
    r.chain_product *= a;
    r.max_step_excess = std::max(r.max_step_excess, a - (1.0 - q_lower_bound(data.z[l], p, K)));
  }
  r.half_tv_within_bound = 0.5 * r.tv <= r.bound + tolerance;
  r.tv_within_bound = r.tv <= r.bound + tolerance;
  r.chain_rule_holds = 0.5 * r.tv <= r.chain_product + tolerance;
  r.step_bound_holds = r.max_step_excess <= tolerance;
  return r;
}

MixingReport run_mixing_check(const MixingCheckOptions& options) {
  if (options.n_instances < 1) throw DomainError("n_instances must be >= 1");
  if (options.max_length < 0 || options.max_length > 20) throw DomainError("max_length must be in [0, 20]");
  MixingReport report;
  report.tolerance = options.tolerance;
  report.instances.resize(options.n_instances);
  const ModelConfig cfg = paper_model_config(Variant::Joint);
  parallel_for(options.n_instances, options.threads, [&](int i) {
    Philox4x32 rng(options.seed, 0x6d69780000000000ull + static_cast<std::uint64_t>(i));
    const double rho = -0.9 + 1.8 * rng.uniform();
    const ParamVector p = random_design_params(rng, rho);
    const int len = static_cast<int>(rng.uniform() * (options.max_length + 1));  // m + j
    const int m = static_cast<int>(rng.uniform() * (len + 1));
    const int T = 60;
    DgpSpec spec = paper_dgp(rho, T, options.seed, 0x6d69780000000000ull + static_cast<std::uint64_t>(i));
    spec.params = p;
    spec.params.rho = rho;
    const Dataset data = simulate_dgp(spec);
    const int lo = 1 + static_cast<int>(rng.uniform() * (T - len - 2));
    MixingInstance inst = check_instance(data, lo, lo + len, p, cfg, options.tolerance);
    inst.m = m;
    inst.j = len - m;
    report.instances[i] = inst;
  });
  report.max_violation = -std::numeric_limits<double>::infinity();
  for (const auto& inst : report.instances) {
    report.max_violation = std::max(report.max_violation, 0.5 * inst.tv - inst.bound);
    if (!inst.half_tv_within_bound || !inst.chain_rule_holds || !inst.step_bound_holds) ++report.violations;
    if (!inst.tv_within_bound) ++report.unhalved_violations;
  }
  return report;
}

ForgettingCurve init_forgetting_curve(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                                      const InitRule& a, const InitRule& b, double threshold, double noise_floor) {
  const FilterOutput fa = forward_filter(data, p, cfg, a);
  const FilterOutput fb = forward_filter(data, p, cfg, b);
  const int K = cfg.n_regimes;
  ForgettingCurve c;
  double running = 1.0;
  double log_q_sum = 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n_fit = 0;
  for (int i = 0; i < fa.steps(); ++i) {
    const int t = fa.first_t + i;
    const double one_minus_q = 1.0 - q_lower_bound(data.z[t - 1], p, K);
    running *= one_minus_q;
    log_q_sum += std::log(one_minus_q);
    const double d = std::abs(fa.step_loglik[i] - fb.step_loglik[i]);
    c.t.push_back(t);
    c.diff.push_back(d);
    c.bound.push_back(running);
    if (d > noise_floor) {
      c.fitted_constant = std::max(c.fitted_constant, d / running);
      const double ld = std::log(d);
      sx += t;
      sy += ld;
      sxx += static_cast<double>(t) * t;
      sxy += t * ld;
      ++n_fit;
    }
  }
  if (n_fit >= 2) c.log_slope = (n_fit * sxy - sx * sy) / (n_fit * sxx - sx * sx);
  if (!c.t.empty()) c.bound_log_slope = log_q_sum / static_cast<double>(c.t.size());
  for (int i = static_cast<int>(c.diff.size()) - 1; i >= 0; --i) {
    if (c.diff[i] >= threshold) break;
    c.first_below = c.t[i];
  }
  return c;
}

}  // namespace tvtp
