#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rcgp {

/*! Limited-memory quasi-Newton ascent with backtracking line search.
 *
 * Maximises f.  Gradients come from central finite differences unless an
 * analytic gradient is supplied.  Objective evaluations returning NaN or
 * -inf are treated as barriers: the line search backs off.
 */
struct OptimOptions {
  int max_iterations = 50;
  double tolerance = 1e-8;       // relative objective change
  double fd_rel_step = 1e-6;     // finite-difference relative step
  int memory = 8;                // L-BFGS history length
  double max_step_norm = 2.0;    // trust-region-style cap on one step
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool improved = false;
  std::vector<std::pair<int, double>> trace;  // (iteration, objective)
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline Eigen::VectorXd central_difference_gradient(const Objective& f,
                                                   const Eigen::VectorXd& x,
                                                   double rel_step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (std::isfinite(fp) && std::isfinite(fm)) ? (fp - fm) / (2.0 * h)
                                                    : 0.0;
  }
  return g;
}

inline OptimResult lbfgs_maximize(const Objective& f,
                                  const Eigen::VectorXd& x0,
                                  const OptimOptions& opts = {},
                                  const Gradient& analytic_grad = nullptr) {
  const auto safe_f = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };
  const auto grad = [&](const Eigen::VectorXd& x) {
    return analytic_grad ? analytic_grad(x)
                         : central_difference_gradient(f, x, opts.fd_rel_step);
  };

  OptimResult res;
  res.x = x0;
  res.f = safe_f(x0);
  res.trace.emplace_back(0, res.f);
  if (!std::isfinite(res.f)) return res;

  Eigen::VectorXd x = x0;
  double fx = res.f;
  Eigen::VectorXd g = grad(x);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    // Two-loop recursion for the ascent direction H g.
    Eigen::VectorXd q = g;
    std::vector<double> a(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      a[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= a[i] * y_hist[i];
    }
    if (!s_hist.empty()) {
      const double gamma = s_hist.back().dot(y_hist.back()) /
                           y_hist.back().squaredNorm();
      if (std::isfinite(gamma) && gamma > 0) q *= gamma;
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double b = rho_hist[i] * y_hist[i].dot(q);
      q += (a[i] - b) * s_hist[i];
    }
    Eigen::VectorXd dir = q;
    if (dir.dot(g) <= 0) dir = g;  // fall back to steepest ascent
    // Cap the step so one iteration cannot leap across the whole
    // parameter range (raw gradients can be enormous on log scales, and
    // an uncapped first step easily jumps over the useful basin).
    const double dn = dir.norm();
    if (opts.max_step_norm > 0.0 && dn > opts.max_step_norm)
      dir *= opts.max_step_norm / dn;

    // Backtracking Armijo line search (ascent form).
    double step = 1.0;
    const double slope = dir.dot(g);
    double f_new = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      x_new = x + step * dir;
      f_new = safe_f(x_new);
      if (f_new >= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || !(f_new > fx)) break;

    Eigen::VectorXd g_new = grad(x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    // L-BFGS stores maximisation curvature pairs with flipped sign so the
    // standard minimisation recursion applies; equivalently require
    // s.(g_old - g_new) > 0 for an ascent step.  Using (g - g_new):
    if (-sy > 1e-12) {
      s_hist.push_back(s);
      y_hist.push_back(-yv);
      rho_hist.push_back(1.0 / (-sy));
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    const double rel_change = (f_new - fx) / std::max(1.0, std::abs(f_new));
    x = x_new;
    fx = f_new;
    g = g_new;
    res.trace.emplace_back(iter, fx);
    res.iterations = iter;
    if (fx > res.f) {
      res.f = fx;
      res.x = x;
      res.improved = true;
    }
    if (rel_change < opts.tolerance) break;
  }
  return res;
}

}  // namespace rcgp
