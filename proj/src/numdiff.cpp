#include "tvtp/numdiff.hpp"

#include "tvtp/errors.hpp"

#include <cmath>
#include <string>

namespace tvtp {

namespace {

double checked(double v, int j) {
  if (!std::isfinite(v)) throw NumericError("non-finite objective in the stencil of coordinate " + std::to_string(j));
  return v;
}

Eigen::VectorXd checked(Eigen::VectorXd v, int j) {
  if (!v.allFinite()) throw NumericError("non-finite value in the stencil of coordinate " + std::to_string(j));
  return v;
}

}  // namespace

double StepRule::step(double x) const { return std::max(relative * std::abs(x), floor); }

Eigen::VectorXd numerical_gradient(const ScalarFn& f, const Eigen::VectorXd& at, const StepRule& rule) {
  Eigen::VectorXd g(at.size());
  Eigen::VectorXd x = at;
  for (int j = 0; j < at.size(); ++j) {
    const double h = rule.step(at[j]);
    x[j] = at[j] + h;
    const double fp = checked(f(x), j);
    x[j] = at[j] - h;
    const double fm = checked(f(x), j);
    x[j] = at[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd numerical_hessian(const ScalarFn& f, const Eigen::VectorXd& at, const StepRule& rule) {
  const auto n = at.size();
  Eigen::MatrixXd H(n, n);
  Eigen::VectorXd h(n);
  for (int j = 0; j < n; ++j) h[j] = rule.step(at[j]);
  const double f0 = checked(f(at), 0);
  Eigen::VectorXd x = at;
  for (int i = 0; i < n; ++i) {
    x[i] = at[i] + h[i];
    const double fp = checked(f(x), i);
    x[i] = at[i] - h[i];
    const double fm = checked(f(x), i);
    x[i] = at[i];
    H(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
    for (int j = 0; j < i; ++j) {
      auto eval = [&](double si, double sj) {
        x[i] = at[i] + si * h[i];
        x[j] = at[j] + sj * h[j];
        const double v = checked(f(x), i);
        x[i] = at[i];
        x[j] = at[j];
        return v;
      };
      H(i, j) = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * h[i] * h[j]);
      H(j, i) = H(i, j);
    }
  }
  return 0.5 * (H + H.transpose());
}

Eigen::MatrixXd numerical_jacobian(const VectorFn& f, const Eigen::VectorXd& at, const StepRule& rule) {
  Eigen::MatrixXd J;
  Eigen::VectorXd x = at;
  for (int j = 0; j < at.size(); ++j) {
    const double h = rule.step(at[j]);
    x[j] = at[j] + h;
    const Eigen::VectorXd fp = checked(f(x), j);
    x[j] = at[j] - h;
    const Eigen::VectorXd fm = checked(f(x), j);
    x[j] = at[j];
    if (j == 0) J.resize(fp.size(), at.size());
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

Eigen::MatrixXd numerical_hessian_from_gradient(const VectorFn& grad, const Eigen::VectorXd& at,
                                                const StepRule& rule) {
  const Eigen::MatrixXd J = numerical_jacobian(grad, at, rule);
  return 0.5 * (J + J.transpose());
}

}  // namespace tvtp
