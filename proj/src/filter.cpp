#include "tvtp/filter.hpp"

#include "tvtp/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace tvtp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_or_neginf(double v) { return v > 0.0 ? std::log(v) : kNegInf; }

// Reversed lag windows for time t, reused across calls.
class LagBuffer {
 public:
  explicit LagBuffer(const ModelConfig& cfg)
      : y_(cfg.ar_order_y), z_(cfg.joint() ? cfg.ar_order_z : 0) {}

  Lags at(const Dataset& d, int t) {
    for (std::size_t i = 0; i < y_.size(); ++i) y_[i] = d.y[t - 1 - i];
    for (std::size_t i = 0; i < z_.size(); ++i) z_[i] = d.z[t - 1 - i];
    return {y_, z_};
  }

 private:
  std::vector<double> y_, z_;
};

// d log nu(s) / d theta for every flat coordinate (K x q).
Eigen::MatrixXd init_log_gradient(const InitRule& init, double z, const ParamVector& p,
                                  const ParamLayout& layout) {
  const int K = layout.config().n_regimes;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(K, layout.size());
  if (init.kind != InitRule::Kind::StationaryAtX0 || K == 1) return g;
  const Eigen::MatrixXd Q = transition_matrix(z, p, K);
  const Eigen::VectorXd pi = stationary_distribution(Q);
  // (I - Q)^T dpi = dQ^T pi with the last equation replaced by sum(dpi) = 0.
  Eigen::MatrixXd A = (Eigen::MatrixXd::Identity(K, K) - Q).transpose();
  A.row(K - 1).setOnes();
  const auto qr = A.colPivHouseholderQr();
  const auto dQ = transition_derivatives(z, Q, layout);
  for (int j = 0; j < layout.size(); ++j) {
    if (dQ[j].size() == 0) continue;
    Eigen::VectorXd rhs = dQ[j].transpose() * pi;
    rhs[K - 1] = 0.0;
    const Eigen::VectorXd dpi = qr.solve(rhs);
    for (int s = 0; s < K; ++s) g(s, j) = dpi[s] / pi[s];
  }
  return g;
}

}  // namespace

void Dataset::validate(const ModelConfig& cfg) const {
  if (y.size() != z.size()) throw DomainError("y and z must have equal length");
  const int need = std::max(cfg.ar_order_y, cfg.joint() ? cfg.ar_order_z : 0) + 2;
  if (length() < need)
    throw DomainError("dataset needs at least " + std::to_string(need) + " observations");
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (!std::isfinite(y[t]) || !std::isfinite(z[t]))
      throw DomainError("non-finite observation at t=" + std::to_string(t));
  }
  if (s_true && s_true->size() != y.size()) throw DomainError("s_true must match the series length");
}

Dataset Dataset::slice(int begin, int end) const {
  Dataset d;
  d.y.assign(y.begin() + begin, y.begin() + end);
  d.z.assign(z.begin() + begin, z.begin() + end);
  if (s_true) d.s_true = std::vector<int>(s_true->begin() + begin, s_true->begin() + end);
  return d;
}

Eigen::VectorXd InitRule::distribution(double z, const ParamVector& p, int K) const {
  switch (kind) {
    case Kind::Uniform:
      return Eigen::VectorXd::Constant(K, 1.0 / K);
    case Kind::StationaryAtX0:
      return stationary_distribution(transition_matrix(z, p, K));
    case Kind::Fixed:
      if (fixed.size() != K || (fixed.array() < 0.0).any() || std::abs(fixed.sum() - 1.0) > 1e-12)
        throw DomainError("fixed initial distribution must be a probability vector of length K");
      return fixed;
  }
  throw DomainError("unknown init rule");
}

Eigen::MatrixXd log_emissions(const Dataset& data, const ParamVector& p, const ModelConfig& cfg) {
  const int K = cfg.n_regimes;
  const int t0 = cfg.first_scored();
  const int n = data.last() - t0 + 1;
  Eigen::MatrixXd E(n, K);
  LagBuffer lags(cfg);
  for (int i = 0; i < n; ++i) {
    const int t = t0 + i;
    const Lags l = lags.at(data, t);
    for (int s = 0; s < K; ++s) E(i, s) = emission_logdensity(data.y[t], data.z[t], l, s, p, cfg);
  }
  return E;
}

FilterOutput forward_filter(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                            const InitRule& init) {
  p.validate(cfg);
  data.validate(cfg);
  const int K = cfg.n_regimes;
  const int t0 = cfg.first_scored();
  const Eigen::MatrixXd E = log_emissions(data, p, cfg);
  const int n = static_cast<int>(E.rows());

  FilterOutput out;
  out.first_t = t0;
  out.delta.resize(n, K);
  out.filtered.resize(n, K);
  out.step_loglik.resize(n);

  Eigen::RowVectorXd delta =
      init.distribution(data.z[t0 - 1], p, K).transpose() * transition_matrix(data.z[t0 - 1], p, K);
  Eigen::VectorXd logw(K);
  for (int i = 0; i < n; ++i) {
    const int t = t0 + i;
    delta /= delta.sum();
    out.delta.row(i) = delta;
    for (int s = 0; s < K; ++s) logw[s] = E(i, s) + log_or_neginf(delta[s]);
    const double m = logw.maxCoeff();
    if (!std::isfinite(m))
      throw NumericError("all regimes have zero or non-finite density at t=" + std::to_string(t));
    const double step = m + std::log((logw.array() - m).exp().sum());
    out.step_loglik[i] = step;
    out.loglik += step;
    const Eigen::RowVectorXd f = (logw.array() - step).exp().matrix().transpose();
    out.filtered.row(i) = f / f.sum();
    if (i + 1 < n) delta = out.filtered.row(i) * transition_matrix(data.z[t], p, K);
  }
  return out;
}

double brute_force_loglik(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                          const InitRule& init) {
  p.validate(cfg);
  data.validate(cfg);
  const int K = cfg.n_regimes;
  const int t0 = cfg.first_scored();
  const int n = data.last() - t0 + 1;
  const double paths = std::pow(static_cast<double>(K), n + 1);
  if (paths > static_cast<double>(1 << 20))
    throw SizeError("path enumeration needs " + std::to_string(paths) + " paths (> 2^20)");

  const Eigen::MatrixXd E = log_emissions(data, p, cfg);
  std::vector<Eigen::MatrixXd> logQ(n);
  for (int i = 0; i < n; ++i)
    logQ[i] = transition_matrix(data.z[t0 - 1 + i], p, K).array().log().matrix();
  const Eigen::VectorXd lognu =
      init.distribution(data.z[t0 - 1], p, K).unaryExpr([](double v) { return log_or_neginf(v); });

  // Path s_{t0-1}, s_{t0}, ..., s_T as an odometer.
  std::vector<int> path(n + 1, 0);
  const auto total = static_cast<long long>(paths);
  std::vector<double> weights;
  weights.reserve(total);
  for (long long c = 0; c < total; ++c) {
    double w = lognu[path[0]];
    for (int i = 0; i < n; ++i) w += logQ[i](path[i], path[i + 1]) + E(i, path[i + 1]);
    weights.push_back(w);
    for (int k = n; k >= 0; --k) {
      if (++path[k] < K) break;
      path[k] = 0;
    }
  }
  double m = kNegInf;
  for (double w : weights) m = std::max(m, w);
  if (!std::isfinite(m)) throw NumericError("every regime path has zero density");
  double acc = 0.0;
  for (double w : weights) acc += std::exp(w - m);
  return m + std::log(acc);
}

SmootherOutput smooth(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                      const InitRule& init) {
  const FilterOutput fo = forward_filter(data, p, cfg, init);
  const int K = cfg.n_regimes;
  const int t0 = fo.first_t;
  const int n = fo.steps();
  const Eigen::MatrixXd E = log_emissions(data, p, cfg);

  // Scaled emission ratios exp(log p_t(b) - log p_t), one row per step.
  Eigen::MatrixXd ratio(n, K);
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < K; ++b) ratio(i, b) = std::exp(E(i, b) - fo.step_loglik[i]);

  SmootherOutput out;
  out.first_t = t0;
  out.loglik = fo.loglik;
  out.marginals.resize(n, K);
  out.pairwise.assign(n, Eigen::MatrixXd::Zero(K, K));

  Eigen::VectorXd beta = Eigen::VectorXd::Ones(K);
  for (int i = n - 1; i >= 0; --i) {
    const int t = t0 + i;
    out.marginals.row(i) = fo.filtered.row(i).cwiseProduct(beta.transpose());
    const Eigen::MatrixXd Q = transition_matrix(data.z[t - 1], p, K);
    const Eigen::VectorXd prev = i > 0 ? Eigen::VectorXd(fo.filtered.row(i - 1).transpose())
                                       : init.distribution(data.z[t0 - 1], p, K);
    const Eigen::VectorXd right = ratio.row(i).transpose().cwiseProduct(beta);
    out.pairwise[i] = prev.asDiagonal() * Q * right.asDiagonal();
    beta = Q * right;
  }
  out.initial = out.pairwise[0].rowwise().sum();
  return out;
}

ScoredLoglik loglik_and_score(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                              const InitRule& init) {
  const SmootherOutput sm = smooth(data, p, cfg, init);
  const ParamLayout layout(cfg);
  const int K = cfg.n_regimes;
  const int t0 = sm.first_t;
  const int n = static_cast<int>(sm.marginals.rows());

  Eigen::VectorXd g = Eigen::VectorXd::Zero(layout.size());
  LagBuffer lags(cfg);
  for (int i = 0; i < n; ++i) {
    const int t = t0 + i;
    const Lags l = lags.at(data, t);
    for (int s = 0; s < K; ++s)
      emission_gradient(data.y[t], data.z[t], l, s, p, layout, g, sm.marginals(i, s));
    if (K > 1) {
      const Eigen::MatrixXd Q = transition_matrix(data.z[t - 1], p, K);
      for (int a = 0; a < K; ++a)
        for (int b = 0; b < K; ++b)
          transition_log_gradient(data.z[t - 1], a, b, Q, layout, g, sm.pairwise[i](a, b));
    }
  }
  g += init_log_gradient(init, data.z[t0 - 1], p, layout).transpose() * sm.initial;
  return {sm.loglik, g};
}

Eigen::VectorXd fisher_score(const Dataset& data, const ParamVector& p, const ModelConfig& cfg,
                             const InitRule& init) {
  return loglik_and_score(data, p, cfg, init).score;
}

}  // namespace tvtp
