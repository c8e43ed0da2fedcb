#pragma once

// Projected quasi-Newton minimizer for smooth objectives with box bounds.
// Used for the extreme-value MLE and for Gaussian-process hyperparameters.

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace extremis {

struct BfgsOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-8;  // on the projected gradient, infinity norm
  int max_halvings = 60;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  double projected_gradient_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline Eigen::VectorXd project_gradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                        const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x[i] <= lo[i] && g[i] > 0) || (x[i] >= hi[i] && g[i] < 0)) pg[i] = 0.0;
  }
  return pg;
}

}  // namespace detail

// `objective(x, grad)` returns f(x) and fills grad; it may return +inf for
// infeasible points, which the line search treats as a rejected step.
template <class Objective>
BfgsResult minimize_box(Objective&& objective, Eigen::VectorXd x, const Eigen::VectorXd& lo,
                        const Eigen::VectorXd& hi, const BfgsOptions& opt = {}) {
  const Eigen::Index n = x.size();
  x = x.cwiseMax(lo).cwiseMin(hi);
  Eigen::VectorXd g(n);
  double f = objective(x, g);
  BfgsResult out;
  if (!std::isfinite(f)) {
    out.x = x;
    return out;
  }
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool identity = true;
  Eigen::VectorXd g_new(n);

  for (int it = 0; it < opt.max_iterations; ++it) {
    const Eigen::VectorXd pg = detail::project_gradient(x, g, lo, hi);
    out.iterations = it;
    if (pg.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd d = -(H * pg);
    for (Eigen::Index i = 0; i < n; ++i)
      if (pg[i] == 0.0) d[i] = 0.0;
    if (d.dot(pg) >= 0.0) {
      H.setIdentity();
      identity = true;
      d = -pg;
    }

    bool accepted = false;
    Eigen::VectorXd x_new(n);
    double f_new = f;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double t = 1.0;
      for (int h = 0; h < opt.max_halvings; ++h, t *= 0.5) {
        x_new = (x + t * d).cwiseMax(lo).cwiseMin(hi);
        f_new = objective(x_new, g_new);
        if (std::isfinite(f_new) && f_new <= f + 1e-4 * g.dot(x_new - x)) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        if (identity) break;
        H.setIdentity();
        identity = true;
        d = -pg;
      }
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    x = x_new;
    f = f_new;
    g = g_new;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (identity) {
        H *= sy / y.squaredNorm();
        identity = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    if (s.lpNorm<Eigen::Infinity>() == 0.0) break;
  }
  out.x = x;
  out.value = f;
  out.projected_gradient_norm = detail::project_gradient(x, g, lo, hi).lpNorm<Eigen::Infinity>();
  out.converged = out.converged || out.projected_gradient_norm < opt.gradient_tolerance;
  return out;
}

}  // namespace extremis
