#pragma once

// Parametric family: Gaussian switching autoregressions whose hidden regime
// follows a Markov chain with covariate-driven (logistic) transition
// probabilities.

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace tvtp {

enum class Variant { Partial, Joint };

// Which parameter blocks carry a regime index.
struct SwitchMask {
  bool intercept = true;
  bool ar = false;
  bool scale = true;
};

struct ModelConfig {
  Variant variant = Variant::Partial;
  int n_regimes = 2;
  int ar_order_y = 1;
  int ar_order_z = 1;  // joint only
  SwitchMask switching;

  void validate() const;

  bool joint() const { return variant == Variant::Joint; }

  // Number of leading observations consumed as lags; the first scored
  // observation has this index.
  int first_scored() const;
};

// Logit coefficients of one destination in a transition row:
// eta = alpha + beta * z.
struct LogitCoef {
  double alpha = 0.0;
  double beta = 0.0;
};

// Parameters in their natural (constrained) space.
//
// Transition row s holds K-1 logit coefficient pairs for the destinations
// s, s+1, ..., s+K-2 (mod K); destination s-1 (mod K) is the reference
// category with logit 0. With K = 2 each row carries exactly the
// stay-probability logit, Q(z, s, s) = 1 / (1 + exp(-alpha_s - beta_s z)).
struct ParamVector {
  std::vector<double> mu;     // K entries, or 1 if the intercept does not switch
  std::vector<double> phi;    // p entries, or K*p (regime-major) if AR switches
  std::vector<double> sigma;  // K entries, or 1 if the scale does not switch
  std::vector<std::vector<LogitCoef>> trans;  // K rows of K-1 pairs

  // Z equation, joint variant only.
  double mu2 = 0.0;
  std::vector<double> psi;
  double sigma2 = 1.0;
  double rho = 0.0;

  double intercept(int s) const { return mu.size() == 1 ? mu[0] : mu[s]; }
  double scale(int s) const { return sigma.size() == 1 ? sigma[0] : sigma[s]; }
  std::span<const double> ar(int s, int p) const;

  // Throws DomainError if the shapes disagree with cfg or a value is outside
  // its domain.
  void validate(const ModelConfig& cfg) const;
};

// Paper-default parameters of the simulation design
// (mu = {1, -1}, phi = 0.9, sigma = 1, alpha = 2, beta = {-0.5, 0.5},
// mu2 = 0.2, psi = 0.8, sigma2 = 1, rho as given).
ParamVector paper_dgp_params(double rho = 0.0);
ModelConfig paper_model_config(Variant v);

// Restricts joint-shaped parameters to the partial variant.
ParamVector to_partial(const ParamVector& p);

// Flat ordering of free parameters, e.g. for K = 2, p = 1 partial:
// (mu0, mu1, phi1, sigma0, sigma1, alpha0, beta0, alpha1, beta1), followed by
// (mu2, psi1.., sigma2, rho) for the joint variant.
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& cfg);

  int size() const { return size_; }
  const std::vector<std::string>& names() const { return names_; }
  const ModelConfig& config() const { return cfg_; }

  int mu_index(int s) const { return mu_ + (cfg_.switching.intercept ? s : 0); }
  int phi_index(int s, int i) const;
  int sigma_index(int s) const { return sigma_ + (cfg_.switching.scale ? s : 0); }
  int alpha_index(int row, int k) const { return trans_ + 2 * (row * (cfg_.n_regimes - 1) + k); }
  int beta_index(int row, int k) const { return alpha_index(row, k) + 1; }
  int mu2_index() const { return mu2_; }
  int psi_index(int i) const { return mu2_ + 1 + i; }
  int sigma2_index() const { return mu2_ + 1 + cfg_.ar_order_z; }
  int rho_index() const { return sigma2_index() + 1; }

  // Coordinates mapped through log (scales) or atanh (rho) by pack().
  bool is_log_scale(int j) const;
  bool is_correlation(int j) const;

  Eigen::VectorXd flatten(const ParamVector& p) const;
  ParamVector unflatten(const Eigen::VectorXd& v) const;

  // Linear map M with flatten(relabel(p, perm)) = M * flatten(p). New
  // regime r takes the role of old regime perm[r]. For K = 2 M is a
  // permutation matrix; for K > 2 transition logits are re-referenced.
  Eigen::MatrixXd relabel_matrix(std::span<const int> perm) const;

 private:
  ModelConfig cfg_;
  int mu_ = 0, phi_ = 0, sigma_ = 0, trans_ = 0, mu2_ = 0, size_ = 0;
  std::vector<std::string> names_;
};

// Optimizer-space vector: log for scales, atanh for rho, identity otherwise.
struct UnconstrainedVector {
  Eigen::VectorXd raw;
};

UnconstrainedVector pack(const ParamVector& p, const ModelConfig& cfg);
ParamVector unpack(const UnconstrainedVector& v, const ModelConfig& cfg);

// d(natural)/d(raw), elementwise, evaluated at the natural-space point.
Eigen::VectorXd pack_jacobian_diag(const ParamVector& p, const ModelConfig& cfg);

// Logit of each destination of row s at covariate z (reference entry is 0).
Eigen::VectorXd row_logits(double z, int row, const ParamVector& p, int K);

// Row-stochastic K x K matrix Q(z, s, s').
Eigen::MatrixXd transition_matrix(double z, const ParamVector& p, int K);

// Exact uniform lower bound min_{s,s'} Q(z, s, s').
double q_lower_bound(double z, const ParamVector& p, int K);

// Stationary distribution (left eigenvector for eigenvalue 1) of Q.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& Q);

// Lagged values feeding one emission, most recent first:
// y_lags[i] = y_{t-1-i}, z_lags[i] = z_{t-1-i}.
struct Lags {
  std::span<const double> y;
  std::span<const double> z;
};

// log p(Y_t | lags, S_t = s) for the partial variant, log p(Y_t, Z_t | lags,
// S_t = s) for the joint variant.
double emission_logdensity(double y, double z, const Lags& lags, int regime,
                           const ParamVector& p, const ModelConfig& cfg);

// Gradient of emission_logdensity with respect to the flat parameters,
// accumulated (+=) into grad.
void emission_gradient(double y, double z, const Lags& lags, int regime,
                       const ParamVector& p, const ParamLayout& layout,
                       Eigen::Ref<Eigen::VectorXd> grad, double weight = 1.0);

// Gradient of log Q(z, a, b) with respect to the flat parameters, accumulated
// (+=, scaled by weight) into grad.
void transition_log_gradient(double z, int a, int b, const Eigen::MatrixXd& Q,
                             const ParamLayout& layout,
                             Eigen::Ref<Eigen::VectorXd> grad, double weight = 1.0);

// dQ/d(theta_j) for every flat transition coordinate j; other coordinates
// have zero derivative and are omitted (entries are empty matrices).
std::vector<Eigen::MatrixXd> transition_derivatives(double z, const Eigen::MatrixXd& Q,
                                                    const ParamLayout& layout);

// Swaps regime labels according to perm (new regime r = old regime perm[r]).
ParamVector relabel(const ParamVector& p, const ModelConfig& cfg, std::span<const int> perm);

// Moduli of the roots of 1 - c_1 x - ... - c_p x^p.
std::vector<double> ar_root_moduli(std::span<const double> coefs);

// Warnings for AR polynomials with a root of modulus <= 1.05.
std::vector<std::string> stationarity_warnings(const ParamVector& p, const ModelConfig& cfg);

}  // namespace tvtp
