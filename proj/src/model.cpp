#include "tvtp/model.hpp"

#include "tvtp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tvtp {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2 pi))

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite ") + what);
}

int reference_destination(int row, int K) { return (row + K - 1) % K; }

// Position k of destination `dest` within row `row` (K-1 means reference).
int slot_of(int row, int dest, int K) { return (dest - row + K) % K; }

}  // namespace

void ModelConfig::validate() const {
  if (n_regimes < 1) throw DomainError("n_regimes must be >= 1");
  if (ar_order_y < 0) throw DomainError("ar_order_y must be >= 0");
  if (ar_order_z < 0) throw DomainError("ar_order_z must be >= 0");
}

int ModelConfig::first_scored() const {
  return std::max({ar_order_y, joint() ? ar_order_z : 0, 1});
}

std::span<const double> ParamVector::ar(int s, int p) const {
  if (p == 0) return {};
  const std::size_t off = phi.size() == static_cast<std::size_t>(p) ? 0 : static_cast<std::size_t>(s) * p;
  return std::span<const double>(phi).subspan(off, p);
}

void ParamVector::validate(const ModelConfig& cfg) const {
  cfg.validate();
  const auto K = static_cast<std::size_t>(cfg.n_regimes);
  const auto p = static_cast<std::size_t>(cfg.ar_order_y);
  if (mu.size() != (cfg.switching.intercept ? K : 1)) throw DomainError("mu has wrong length");
  if (phi.size() != (cfg.switching.ar ? K * p : p)) throw DomainError("phi has wrong length");
  if (sigma.size() != (cfg.switching.scale ? K : 1)) throw DomainError("sigma has wrong length");
  if (trans.size() != K) throw DomainError("trans must have one row per regime");
  for (const auto& row : trans) {
    if (row.size() != K - 1) throw DomainError("trans row must hold K-1 logit pairs");
    for (const auto& c : row) {
      require_finite(c.alpha, "transition alpha");
      require_finite(c.beta, "transition beta");
    }
  }
  for (double v : mu) require_finite(v, "mu");
  for (double v : phi) require_finite(v, "phi");
  for (double v : sigma) {
    require_finite(v, "sigma");
    if (v <= 0.0) throw DomainError("sigma must be > 0");
  }
  if (cfg.joint()) {
    if (psi.size() != static_cast<std::size_t>(cfg.ar_order_z)) throw DomainError("psi has wrong length");
    require_finite(mu2, "mu2");
    for (double v : psi) require_finite(v, "psi");
    require_finite(sigma2, "sigma2");
    require_finite(rho, "rho");
    if (sigma2 <= 0.0) throw DomainError("sigma2 must be > 0");
    if (!(std::abs(rho) < 1.0)) throw DomainError("|rho| must be < 1");
  } else if (!psi.empty()) {
    throw DomainError("partial variant carries no Z-equation parameters");
  }
}

ParamVector paper_dgp_params(double rho) {
  ParamVector p;
  p.mu = {1.0, -1.0};
  p.phi = {0.9};
  p.sigma = {1.0, 1.0};
  p.trans = {{{2.0, -0.5}}, {{2.0, 0.5}}};
  p.mu2 = 0.2;
  p.psi = {0.8};
  p.sigma2 = 1.0;
  p.rho = rho;
  return p;
}

ModelConfig paper_model_config(Variant v) {
  ModelConfig c;
  c.variant = v;
  return c;
}

ParamVector to_partial(const ParamVector& p) {
  ParamVector q = p;
  q.mu2 = 0.0;
  q.psi.clear();
  q.sigma2 = 1.0;
  q.rho = 0.0;
  return q;
}

// ---------------------------------------------------------------------------
// ParamLayout

ParamLayout::ParamLayout(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int K = cfg_.n_regimes;
  const int p = cfg_.ar_order_y;
  const int n_mu = cfg_.switching.intercept ? K : 1;
  const int n_phi = cfg_.switching.ar ? K * p : p;
  const int n_sigma = cfg_.switching.scale ? K : 1;

  mu_ = 0;
  phi_ = mu_ + n_mu;
  sigma_ = phi_ + n_phi;
  trans_ = sigma_ + n_sigma;
  mu2_ = trans_ + 2 * K * (K - 1);
  size_ = mu2_ + (cfg_.joint() ? cfg_.ar_order_z + 3 : 0);

  auto idx = [](const std::string& base, int i) { return base + std::to_string(i); };
  for (int s = 0; s < n_mu; ++s) names_.push_back(n_mu == 1 ? "mu" : idx("mu", s));
  if (cfg_.switching.ar) {
    for (int s = 0; s < K; ++s)
      for (int i = 1; i <= p; ++i) names_.push_back("phi" + std::to_string(s) + "_" + std::to_string(i));
  } else {
    for (int i = 1; i <= p; ++i) names_.push_back(idx("phi", i));
  }
  for (int s = 0; s < n_sigma; ++s) names_.push_back(n_sigma == 1 ? "sigma" : idx("sigma", s));
  for (int r = 0; r < K; ++r) {
    for (int k = 0; k < K - 1; ++k) {
      if (K == 2) {
        names_.push_back(idx("alpha", r));
        names_.push_back(idx("beta", r));
      } else {
        const std::string suffix = std::to_string(r) + "_" + std::to_string((r + k) % K);
        names_.push_back("alpha" + suffix);
        names_.push_back("beta" + suffix);
      }
    }
  }
  if (cfg_.joint()) {
    names_.push_back("mu_z");
    for (int i = 1; i <= cfg_.ar_order_z; ++i) names_.push_back(idx("psi", i));
    names_.push_back("sigma_z");
    names_.push_back("rho");
  }
}

int ParamLayout::phi_index(int s, int i) const {
  return phi_ + (cfg_.switching.ar ? s * cfg_.ar_order_y : 0) + i;
}

bool ParamLayout::is_log_scale(int j) const {
  if (j >= sigma_ && j < trans_) return true;
  return cfg_.joint() && j == sigma2_index();
}

bool ParamLayout::is_correlation(int j) const { return cfg_.joint() && j == rho_index(); }

Eigen::VectorXd ParamLayout::flatten(const ParamVector& p) const {
  Eigen::VectorXd v(size_);
  const int K = cfg_.n_regimes;
  int j = 0;
  for (double m : p.mu) v[j++] = m;
  for (double f : p.phi) v[j++] = f;
  for (double s : p.sigma) v[j++] = s;
  for (int r = 0; r < K; ++r)
    for (int k = 0; k < K - 1; ++k) {
      v[j++] = p.trans[r][k].alpha;
      v[j++] = p.trans[r][k].beta;
    }
  if (cfg_.joint()) {
    v[j++] = p.mu2;
    for (double f : p.psi) v[j++] = f;
    v[j++] = p.sigma2;
    v[j++] = p.rho;
  }
  if (j != size_) throw DomainError("parameter vector does not match the model layout");
  return v;
}

ParamVector ParamLayout::unflatten(const Eigen::VectorXd& v) const {
  if (v.size() != size_) throw DomainError("flat vector has wrong length");
  const int K = cfg_.n_regimes;
  ParamVector p;
  p.mu.assign(v.data() + mu_, v.data() + phi_);
  p.phi.assign(v.data() + phi_, v.data() + sigma_);
  p.sigma.assign(v.data() + sigma_, v.data() + trans_);
  p.trans.assign(K, std::vector<LogitCoef>(K - 1));
  for (int r = 0; r < K; ++r)
    for (int k = 0; k < K - 1; ++k) p.trans[r][k] = {v[alpha_index(r, k)], v[beta_index(r, k)]};
  if (cfg_.joint()) {
    p.mu2 = v[mu2_index()];
    for (int i = 0; i < cfg_.ar_order_z; ++i) p.psi.push_back(v[psi_index(i)]);
    p.sigma2 = v[sigma2_index()];
    p.rho = v[rho_index()];
  }
  return p;
}

Eigen::MatrixXd ParamLayout::relabel_matrix(std::span<const int> perm) const {
  Eigen::MatrixXd M(size_, size_);
  for (int j = 0; j < size_; ++j) {
    const ParamVector unit = unflatten(Eigen::VectorXd::Unit(size_, j));
    M.col(j) = flatten(relabel(unit, cfg_, perm));
  }
  return M;
}

// ---------------------------------------------------------------------------
// Transforms

UnconstrainedVector pack(const ParamVector& p, const ModelConfig& cfg) {
  p.validate(cfg);
  const ParamLayout layout(cfg);
  Eigen::VectorXd raw = layout.flatten(p);
  for (int j = 0; j < raw.size(); ++j) {
    if (layout.is_log_scale(j)) raw[j] = std::log(raw[j]);
    else if (layout.is_correlation(j)) raw[j] = std::atanh(raw[j]);
  }
  return {raw};
}

ParamVector unpack(const UnconstrainedVector& v, const ModelConfig& cfg) {
  const ParamLayout layout(cfg);
  Eigen::VectorXd nat = v.raw;
  for (int j = 0; j < nat.size(); ++j) {
    require_finite(nat[j], "unconstrained coordinate");
    if (layout.is_log_scale(j)) nat[j] = std::exp(nat[j]);
    else if (layout.is_correlation(j)) nat[j] = std::tanh(nat[j]);
  }
  ParamVector p = layout.unflatten(nat);
  p.validate(cfg);
  return p;
}

Eigen::VectorXd pack_jacobian_diag(const ParamVector& p, const ModelConfig& cfg) {
  const ParamLayout layout(cfg);
  const Eigen::VectorXd nat = layout.flatten(p);
  Eigen::VectorXd d = Eigen::VectorXd::Ones(nat.size());
  for (int j = 0; j < nat.size(); ++j) {
    if (layout.is_log_scale(j)) d[j] = nat[j];
    else if (layout.is_correlation(j)) d[j] = 1.0 - nat[j] * nat[j];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Transition kernel

Eigen::VectorXd row_logits(double z, int row, const ParamVector& p, int K) {
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(K);
  for (int k = 0; k < K - 1; ++k) {
    const auto& c = p.trans[row][k];
    eta[(row + k) % K] = c.alpha + c.beta * z;
  }
  return eta;
}

Eigen::MatrixXd transition_matrix(double z, const ParamVector& p, int K) {
  require_finite(z, "covariate");
  if (static_cast<int>(p.trans.size()) != K) throw DomainError("trans must have one row per regime");
  Eigen::MatrixXd Q(K, K);
  for (int r = 0; r < K; ++r) {
    if (static_cast<int>(p.trans[r].size()) != K - 1) throw DomainError("trans row must hold K-1 logit pairs");
    Eigen::VectorXd eta = row_logits(z, r, p, K);
    if (!eta.allFinite()) throw DomainError("non-finite transition logit");
    const double m = eta.maxCoeff();
    Eigen::ArrayXd e = (eta.array() - m).exp();
    Q.row(r) = (e / e.sum()).matrix().transpose();
  }
  return Q;
}

double q_lower_bound(double z, const ParamVector& p, int K) {
  return transition_matrix(z, p, K).minCoeff();
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& Q) {
  const Eigen::Index K = Q.rows();
  if (K == 1) return Eigen::VectorXd::Ones(1);
  Eigen::MatrixXd A = (Eigen::MatrixXd::Identity(K, K) - Q).transpose();
  A.row(K - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(K);
  b[K - 1] = 1.0;
  Eigen::VectorXd pi = A.colPivHouseholderQr().solve(b);
  if (!pi.allFinite()) throw NumericError("stationary distribution is not unique");
  pi = pi.cwiseMax(0.0);
  return pi / pi.sum();
}

void transition_log_gradient(double z, int a, int b, const Eigen::MatrixXd& Q,
                             const ParamLayout& layout, Eigen::Ref<Eigen::VectorXd> grad,
                             double weight) {
  const int K = layout.config().n_regimes;
  for (int k = 0; k < K - 1; ++k) {
    const int d = (a + k) % K;
    const double g = weight * ((b == d ? 1.0 : 0.0) - Q(a, d));
    grad[layout.alpha_index(a, k)] += g;
    grad[layout.beta_index(a, k)] += g * z;
  }
}

std::vector<Eigen::MatrixXd> transition_derivatives(double z, const Eigen::MatrixXd& Q,
                                                    const ParamLayout& layout) {
  const int K = layout.config().n_regimes;
  std::vector<Eigen::MatrixXd> dQ(layout.size());
  for (int a = 0; a < K; ++a) {
    for (int k = 0; k < K - 1; ++k) {
      const int d = (a + k) % K;
      Eigen::MatrixXd da = Eigen::MatrixXd::Zero(K, K);
      for (int b = 0; b < K; ++b) da(a, b) = Q(a, b) * ((b == d ? 1.0 : 0.0) - Q(a, d));
      dQ[layout.alpha_index(a, k)] = da;
      dQ[layout.beta_index(a, k)] = da * z;
    }
  }
  return dQ;
}

// ---------------------------------------------------------------------------
// Emissions

namespace {

double ar_mean(double intercept, std::span<const double> coefs, std::span<const double> lags) {
  double m = intercept;
  for (std::size_t i = 0; i < coefs.size(); ++i) m += coefs[i] * lags[i];
  return m;
}

void check_lags(const Lags& lags, const ModelConfig& cfg) {
  if (lags.y.size() < static_cast<std::size_t>(cfg.ar_order_y) ||
      (cfg.joint() && lags.z.size() < static_cast<std::size_t>(cfg.ar_order_z)))
    throw DomainError("not enough lagged values for the AR order");
}

}  // namespace

double emission_logdensity(double y, double z, const Lags& lags, int regime, const ParamVector& p,
                           const ModelConfig& cfg) {
  check_lags(lags, cfg);
  const double sd = p.scale(regime);
  if (!(sd > 0.0)) throw DomainError("sigma must be > 0");
  const double e1 = (y - ar_mean(p.intercept(regime), p.ar(regime, cfg.ar_order_y), lags.y)) / sd;
  const double ly = -kLogSqrt2Pi - std::log(sd) - 0.5 * e1 * e1;
  if (!cfg.joint()) return ly;

  if (!(p.sigma2 > 0.0)) throw DomainError("sigma2 must be > 0");
  if (!(std::abs(p.rho) < 1.0)) throw DomainError("|rho| must be < 1");
  // Z | Y factorization; reduces to the product of marginals when rho = 0.
  const double e2 = (z - ar_mean(p.mu2, p.psi, lags.z)) / p.sigma2;
  const double d = 1.0 - p.rho * p.rho;
  const double r = e2 - p.rho * e1;
  const double lz = -kLogSqrt2Pi - std::log(p.sigma2) - 0.5 * std::log(d) - 0.5 * r * r / d;
  return ly + lz;
}

void emission_gradient(double y, double z, const Lags& lags, int regime, const ParamVector& p,
                       const ParamLayout& layout, Eigen::Ref<Eigen::VectorXd> grad, double weight) {
  const ModelConfig& cfg = layout.config();
  const int py = cfg.ar_order_y;
  const double sd = p.scale(regime);
  const double u1 = (y - ar_mean(p.intercept(regime), p.ar(regime, py), lags.y)) / sd;

  // d log p / d u1 and d log p / d u2.
  double g1 = -u1;
  double g2 = 0.0;
  double u2 = 0.0;
  if (cfg.joint()) {
    const double rho = p.rho;
    const double d = 1.0 - rho * rho;
    u2 = (z - ar_mean(p.mu2, p.psi, lags.z)) / p.sigma2;
    g1 = -(u1 - rho * u2) / d;
    g2 = -(u2 - rho * u1) / d;
    const double quad = u1 * u1 - 2.0 * rho * u1 * u2 + u2 * u2;
    grad[layout.rho_index()] += weight * (rho / d + u1 * u2 / d - rho * quad / (d * d));
    grad[layout.mu2_index()] += weight * (-g2 / p.sigma2);
    for (int i = 0; i < cfg.ar_order_z; ++i) grad[layout.psi_index(i)] += weight * (-g2 * lags.z[i] / p.sigma2);
    grad[layout.sigma2_index()] += weight * (-1.0 / p.sigma2 - g2 * u2 / p.sigma2);
  }
  grad[layout.mu_index(regime)] += weight * (-g1 / sd);
  for (int i = 0; i < py; ++i) grad[layout.phi_index(regime, i)] += weight * (-g1 * lags.y[i] / sd);
  grad[layout.sigma_index(regime)] += weight * (-1.0 / sd - g1 * u1 / sd);
}

// ---------------------------------------------------------------------------
// Relabeling

ParamVector relabel(const ParamVector& p, const ModelConfig& cfg, std::span<const int> perm) {
  const int K = cfg.n_regimes;
  if (static_cast<int>(perm.size()) != K) throw DomainError("permutation length must equal n_regimes");
  std::vector<int> seen(K, 0);
  for (int v : perm) {
    if (v < 0 || v >= K || seen[v]++) throw DomainError("not a permutation of the regimes");
  }
  ParamVector q = p;
  if (p.mu.size() == static_cast<std::size_t>(K))
    for (int r = 0; r < K; ++r) q.mu[r] = p.mu[perm[r]];
  if (p.sigma.size() == static_cast<std::size_t>(K))
    for (int r = 0; r < K; ++r) q.sigma[r] = p.sigma[perm[r]];
  const int ar = cfg.ar_order_y;
  if (ar > 0 && p.phi.size() == static_cast<std::size_t>(K * ar))
    for (int r = 0; r < K; ++r)
      for (int i = 0; i < ar; ++i) q.phi[r * ar + i] = p.phi[perm[r] * ar + i];

  // Old logit of destination `dest` in row `row`, as an (alpha, beta) pair.
  auto old_logit = [&](int row, int dest) -> LogitCoef {
    const int k = slot_of(row, dest, K);
    return k == K - 1 ? LogitCoef{} : p.trans[row][k];
  };
  for (int r = 0; r < K; ++r) {
    const int old_row = perm[r];
    const LogitCoef base = old_logit(old_row, perm[reference_destination(r, K)]);
    for (int k = 0; k < K - 1; ++k) {
      const LogitCoef c = old_logit(old_row, perm[(r + k) % K]);
      q.trans[r][k] = {c.alpha - base.alpha, c.beta - base.beta};
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Stationarity diagnostics

std::vector<double> ar_root_moduli(std::span<const double> coefs) {
  const auto p = static_cast<Eigen::Index>(coefs.size());
  std::vector<double> out;
  if (p == 0) return out;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) C(0, i) = coefs[i];
  for (Eigen::Index i = 1; i < p; ++i) C(i, i - 1) = 1.0;
  const Eigen::VectorXcd lambda = C.eigenvalues();
  for (Eigen::Index i = 0; i < p; ++i) {
    const double a = std::abs(lambda[i]);
    out.push_back(a == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / a);
  }
  return out;
}

std::vector<std::string> stationarity_warnings(const ParamVector& p, const ModelConfig& cfg) {
  std::vector<std::string> out;
  auto check = [&](std::span<const double> coefs, const std::string& what) {
    for (double m : ar_root_moduli(coefs)) {
      if (m <= 1.05) {
        std::ostringstream os;
        os << what << " has a characteristic root of modulus " << m << " (<= 1.05)";
        out.push_back(os.str());
        return;
      }
    }
  };
  const int n_blocks = cfg.switching.ar ? cfg.n_regimes : 1;
  for (int s = 0; s < n_blocks; ++s)
    check(p.ar(s, cfg.ar_order_y), n_blocks == 1 ? "Y equation" : "Y equation (regime " + std::to_string(s) + ")");
  if (cfg.joint()) check(p.psi, "Z equation");
  return out;
}

}  // namespace tvtp
