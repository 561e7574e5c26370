#pragma once

// Central finite differences with per-coordinate steps
// h_j = max(relative * |x_j|, floor).

#include <Eigen/Dense>

#include <functional>

namespace tvtp {

struct StepRule {
  double relative = 1e-6;
  double floor = 1e-7;

  double step(double x) const;
};

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;
using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

Eigen::VectorXd numerical_gradient(const ScalarFn& f, const Eigen::VectorXd& at, const StepRule& rule = {});

// Second differences of f, symmetrized as (H + H^T) / 2. Steps much smaller
// than ~1e-4 lose most digits to cancellation; prefer
// numerical_hessian_from_gradient when an analytic gradient exists.
Eigen::MatrixXd numerical_hessian(const ScalarFn& f, const Eigen::VectorXd& at, const StepRule& rule = {});

// Central differences of a gradient, symmetrized.
Eigen::MatrixXd numerical_hessian_from_gradient(const VectorFn& grad, const Eigen::VectorXd& at,
                                                const StepRule& rule = {});

// Jacobian (m x n) of a vector-valued map.
Eigen::MatrixXd numerical_jacobian(const VectorFn& f, const Eigen::VectorXd& at, const StepRule& rule = {});

}  // namespace tvtp
