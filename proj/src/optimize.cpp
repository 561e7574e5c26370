#include "tvtp/optimize.hpp"

#include "tvtp/errors.hpp"
#include "tvtp/numdiff.hpp"

#include <cmath>
#include <limits>

namespace tvtp {

namespace {

struct Point {
  double a = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative
  Eigen::VectorXd g;
};

class LineSearch {
 public:
  LineSearch(const Objective& fn, const Eigen::VectorXd& x, const Eigen::VectorXd& d, const BfgsOptions& opt,
             int& evals)
      : fn_(fn), x_(x), d_(d), opt_(opt), evals_(evals) {}

  // Returns a step satisfying sufficient decrease (and, when found, the
  // curvature condition); a.a == 0 means no decrease was possible.
  Point run(const Point& start, double a_init) {
    f0_ = start.f;
    slope0_ = start.slope;
    Point prev = start;
    double a = a_init;
    for (int i = 0; i < opt_.max_line_search; ++i) {
      Point cur = eval(a);
      if (approximate_wolfe(cur)) return cur;
      if (!std::isfinite(cur.f) || cur.f > f0_ + opt_.c1 * a * slope0_ || (i > 0 && cur.f >= prev.f))
        return zoom(prev, cur);
      if (std::abs(cur.slope) <= -opt_.c2 * slope0_) return cur;
      if (cur.slope >= 0.0) return zoom(cur, prev);
      prev = cur;
      a *= 2.0;
    }
    return prev;
  }

 private:
  Point eval(double a) {
    ++evals_;
    Point p;
    p.a = a;
    p.g.resize(x_.size());
    const Eigen::VectorXd xa = x_ + a * d_;
    p.f = fn_(xa, &p.g);
    if (!std::isfinite(p.f) || !p.g.allFinite()) {
      p.f = std::numeric_limits<double>::infinity();
      p.slope = std::numeric_limits<double>::quiet_NaN();
    } else {
      p.slope = p.g.dot(d_);
    }
    return p;
  }

  // Near the minimum, changes in f drop below rounding and sufficient
  // decrease cannot be verified from f. Accept a step whose directional
  // derivative shows the decrease instead, provided f stays within a few
  // ulps of f0 (Hager-Zhang approximate Wolfe conditions).
  bool approximate_wolfe(const Point& p) const {
    if (!std::isfinite(p.f) || p.a <= 0.0) return false;
    const double slack = 16.0 * std::numeric_limits<double>::epsilon() * std::abs(f0_);
    return p.f <= f0_ + slack && p.slope >= opt_.c2 * slope0_ && p.slope <= (2.0 * opt_.c1 - 1.0) * slope0_;
  }

  Point zoom(Point lo, Point hi) {
    for (int i = 0; i < opt_.max_line_search; ++i) {
      const double width = hi.a - lo.a;
      double a = lo.a + 0.5 * width;
      if (std::isfinite(hi.f)) {
        const double denom = 2.0 * (hi.f - lo.f - lo.slope * width);
        if (denom > 0.0) {
          const double q = lo.a - lo.slope * width * width / denom;
          const double lo_b = lo.a + 0.1 * width, hi_b = hi.a - 0.1 * width;
          if (q > std::min(lo_b, hi_b) && q < std::max(lo_b, hi_b)) a = q;
        }
      }
      Point cur = eval(a);
      if (approximate_wolfe(cur)) return cur;
      if (!std::isfinite(cur.f) || cur.f > f0_ + opt_.c1 * a * slope0_ || cur.f >= lo.f) {
        hi = cur;
      } else {
        if (std::abs(cur.slope) <= -opt_.c2 * slope0_) return cur;
        if (cur.slope * (hi.a - lo.a) >= 0.0) hi = lo;
        lo = cur;
      }
      if (std::abs(hi.a - lo.a) < 1e-16 * std::max(1.0, std::abs(lo.a))) break;
    }
    return lo;
  }

  const Objective& fn_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& d_;
  const BfgsOptions& opt_;
  int& evals_;
  double f0_ = 0.0;
  double slope0_ = 0.0;
};

}  // namespace

BfgsResult bfgs_minimize(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& opt) {
  const auto n = x0.size();
  BfgsResult r;
  r.x = std::move(x0);
  r.grad.resize(n);
  r.f = f(r.x, &r.grad);
  r.evaluations = 1;
  if (!std::isfinite(r.f) || !r.grad.allFinite()) throw NumericError("objective is not finite at the start point");

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool fresh = true;  // H is the (unscaled) identity
  for (r.iterations = 0; r.iterations < opt.max_iter; ++r.iterations) {
    const double gnorm = r.grad.norm();
    if (gnorm <= opt.grad_tol) {
      r.converged = true;
      r.status = "gradient tolerance reached";
      return r;
    }
    Eigen::VectorXd d = -H * r.grad;
    if (r.grad.dot(d) >= 0.0) {
      H.setIdentity();
      fresh = true;
      d = -r.grad;
    }
    Point start;
    start.f = r.f;
    start.slope = r.grad.dot(d);
    start.g = r.grad;
    const double a_init = fresh ? std::min(1.0, 1.0 / d.norm()) : 1.0;
    LineSearch ls(f, r.x, d, opt, r.evaluations);
    Point next = ls.run(start, a_init);
    if (next.a == 0.0) {
      if (!fresh) {
        // Stale curvature information; restart from steepest descent.
        H.setIdentity();
        fresh = true;
        continue;
      }
      r.status = "line search could not decrease the objective";
      r.converged = gnorm <= opt.grad_tol;
      return r;
    }
    const Eigen::VectorXd s = next.a * d;
    const Eigen::VectorXd y = next.g - r.grad;
    r.x += s;
    r.f = next.f;
    r.grad = next.g;
    const double ys = y.dot(s);
    if (ys > 1e-12 * s.norm() * y.norm()) {
      if (fresh) {
        H *= ys / y.squaredNorm();
        fresh = false;
      }
      const double rho = 1.0 / ys;
      const Eigen::VectorXd Hy = H * y;
      // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T
      H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }
  }
  r.converged = r.grad.norm() <= opt.grad_tol;
  r.status = r.converged ? "gradient tolerance reached" : "iteration limit reached";
  return r;
}

}  // namespace tvtp

namespace tvtp {

BfgsResult newton_polish(const Objective& f, BfgsResult r, const BfgsOptions& opt, int max_steps) {
  const VectorFn grad = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd g;
    if (!std::isfinite(f(x, &g))) throw NumericError("objective not finite during Newton refinement");
    return g;
  };
  for (int k = 0; k < max_steps && r.grad.norm() > opt.grad_tol; ++k) {
    Eigen::MatrixXd H;
    try {
      H = numerical_hessian_from_gradient(grad, r.x, StepRule{1e-5, 1e-6});
    } catch (const NumericError&) {
      break;
    }
    r.evaluations += 2 * static_cast<int>(r.x.size());
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) break;
    const Eigen::VectorXd x = r.x - llt.solve(r.grad);
    Eigen::VectorXd g;
    const double fx = f(x, &g);
    ++r.evaluations;
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(r.f));
    if (!std::isfinite(fx) || fx > r.f + slack || !(g.norm() < r.grad.norm())) break;
    r.x = x;
    r.f = fx;
    r.grad = g;
    ++r.iterations;
  }
  if (r.grad.norm() <= opt.grad_tol && !r.converged) {
    r.converged = true;
    r.status = "gradient tolerance reached after Newton refinement";
  }
  return r;
}

}  // namespace tvtp
