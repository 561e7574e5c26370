#pragma once

// Quasi-Newton minimization (BFGS inverse-Hessian update, strong-Wolfe line
// search).

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace tvtp {

// Returns f(x) and writes the gradient into *grad. A non-finite return value
// marks x as infeasible; the line search then backs off.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct BfgsOptions {
  double grad_tol = 1e-8;  // on the Euclidean norm of the gradient
  int max_iter = 500;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  int max_line_search = 40;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string status;
};

// Accepted steps satisfy the strong Wolfe conditions, or, once changes in f
// fall to rounding level, the approximate Wolfe conditions (f may then rise
// by at most a few ulps). Throws NumericError when f is not finite at x0.
BfgsResult bfgs_minimize(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& opt = {});

// Newton refinement of a BFGS result whose line search stalled at the
// rounding floor: Hessian by central differences of the gradient, a step is
// kept when it shrinks the gradient norm without raising f by more than a few
// ulps. Stops at grad_tol or after max_steps.
BfgsResult newton_polish(const Objective& f, BfgsResult start, const BfgsOptions& opt = {}, int max_steps = 8);

}  // namespace tvtp
