#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace rcgp {

/*! Quantile rule for the soft threshold c: the (1-epsilon)-quantile of the
 * absolute residuals around the prior mean. */
struct ThresholdRule {
  double epsilon = 0.05;
};

/*! The generalised-Bayes weight w(x, y).
 *
 * Variants (r = y - m(x)):
 *   Constant          w = beta
 *   IMQ               w = beta (1 + r^2/c^2)^(-1/2)
 *   SquaredExp        w = beta exp(-r^2 / (2 c^2))
 *   Heteroskedastic   w = beta / r(x)   (beta carries sigma^2/sqrt(2))
 *
 * `tie_beta` (default) means beta is re-derived from the model's noise
 * level whenever the weight is attached to a fit: beta = sigma/sqrt(2)
 * (sigma^2/sqrt(2) for the heteroskedastic variant).  Set it to false to
 * keep the stored beta, e.g. for standalone evaluations.
 */
struct WeightFunction {
  enum class Kind { Constant, Imq, SquaredExp, Heteroskedastic };

  Kind kind = Kind::Constant;
  double beta = 1.0;
  double c = 1.0;
  bool tie_beta = true;
  std::function<double(const Eigen::VectorXd&)> rate;  // Heteroskedastic only

  static WeightFunction constant(double beta) {
    WeightFunction w;
    w.kind = Kind::Constant;
    w.beta = beta;
    w.check();
    return w;
  }

  static WeightFunction imq(double c, double beta = 1.0) {
    WeightFunction w;
    w.kind = Kind::Imq;
    w.beta = beta;
    w.c = c;
    w.check();
    return w;
  }

  static WeightFunction squared_exp(double c, double beta = 1.0) {
    WeightFunction w;
    w.kind = Kind::SquaredExp;
    w.beta = beta;
    w.c = c;
    w.check();
    return w;
  }

  static WeightFunction heteroskedastic(
      std::function<double(const Eigen::VectorXd&)> rate, double beta = 1.0) {
    if (!rate)
      throw std::invalid_argument("WeightFunction: rate callable required");
    WeightFunction w;
    w.kind = Kind::Heteroskedastic;
    w.beta = beta;
    w.rate = std::move(rate);
    w.check();
    return w;
  }

  void check() const {
    if (!(beta > 0.0) || !std::isfinite(beta))
      throw std::invalid_argument("WeightFunction: beta must be > 0");
    if ((kind == Kind::Imq || kind == Kind::SquaredExp) &&
        (!(c > 0.0) || !std::isfinite(c)))
      throw std::invalid_argument("WeightFunction: c must be > 0");
  }

  // Copy with beta replaced (used to tie beta to the noise level).
  WeightFunction with_beta(double b) const {
    WeightFunction w = *this;
    w.beta = b;
    w.check();
    return w;
  }
};

/*! Evaluate w at one point.  r_x is the heteroskedastic rate r(x) and is
 * ignored by the other variants. */
inline double weight_eval(const WeightFunction& w, double m_x, double y,
                          double r_x = 1.0) {
  const double r = y - m_x;
  switch (w.kind) {
    case WeightFunction::Kind::Constant:
      return w.beta;
    case WeightFunction::Kind::Imq:
      return w.beta / std::sqrt(1.0 + (r * r) / (w.c * w.c));
    case WeightFunction::Kind::SquaredExp:
      return w.beta * std::exp(-(r * r) / (2.0 * w.c * w.c));
    case WeightFunction::Kind::Heteroskedastic:
      if (!(r_x > 0.0) || !std::isfinite(r_x))
        throw std::invalid_argument("weight_eval: rate must be > 0");
      return w.beta / r_x;
  }
  return w.beta;  // unreachable
}

/*! d/dy log w(x,y)^2 — the ingredient of the shrinkage term m_w. */
inline double grad_log_w_squared(const WeightFunction& w, double m_x,
                                 double y) {
  const double r = y - m_x;
  switch (w.kind) {
    case WeightFunction::Kind::Constant:
    case WeightFunction::Kind::Heteroskedastic:
      return 0.0;
    case WeightFunction::Kind::Imq:
      return -2.0 * r / (w.c * w.c + r * r);
    case WeightFunction::Kind::SquaredExp:
      return -2.0 * r / (w.c * w.c);
  }
  return 0.0;  // unreachable
}

/*! Nearest-rank (1-epsilon)-quantile of the absolute residuals,
 * floored at 1e-12 so that w stays finite when all residuals vanish. */
inline double select_c(const Eigen::Ref<const Eigen::VectorXd>& residuals,
                       const ThresholdRule& rule = {}) {
  const Eigen::Index n = residuals.size();
  if (n == 0) throw std::invalid_argument("select_c: empty residual vector");
  if (rule.epsilon < 0.0 || rule.epsilon > 1.0)
    throw std::invalid_argument("select_c: epsilon must lie in [0,1]");
  std::vector<double> r(residuals.data(), residuals.data() + n);
  std::sort(r.begin(), r.end());
  // 1-based nearest-rank index ceil((1-eps) n), clamped to [1, n].
  auto idx = static_cast<Eigen::Index>(
      std::ceil((1.0 - rule.epsilon) * static_cast<double>(n)));
  idx = std::clamp<Eigen::Index>(idx, 1, n);
  return std::max(r[static_cast<std::size_t>(idx - 1)], 1e-12);
}

/*! Element-wise weights and gradients over a training set.  The optional
 * rate vector supplies r(x_i) for the heteroskedastic variant. */
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> weight_vector(
    const WeightFunction& w, const Eigen::Ref<const Eigen::VectorXd>& m_vec,
    const Eigen::Ref<const Eigen::VectorXd>& y,
    const Eigen::VectorXd& rate_vec = Eigen::VectorXd()) {
  const Eigen::Index n = y.size();
  if (m_vec.size() != n)
    throw std::invalid_argument("weight_vector: length mismatch");
  if (w.kind == WeightFunction::Kind::Heteroskedastic &&
      rate_vec.size() != n)
    throw std::invalid_argument("weight_vector: rate vector required");
  Eigen::VectorXd wv(n), gv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r_x = rate_vec.size() == n ? rate_vec[i] : 1.0;
    wv[i] = weight_eval(w, m_vec[i], y[i], r_x);
    gv[i] = grad_log_w_squared(w, m_vec[i], y[i]);
  }
  return {wv, gv};
}

/*! Empirical check of the Prop.-2 sufficient condition for a bounded
 * posterior influence: sup w and sup |y w^2| finite over a wide grid.
 *
 * The grid covers |y| in [0, 1e8].  "Bounded" is diagnosed by requiring
 * that |y w^2| has turned over before the end of the grid — for a weight
 * that decays fast enough the product peaks near c and then falls, while
 * for constant / y-independent weights it grows right up to the edge.
 */
struct RobustnessCheck {
  double sup_w = 0.0;
  double sup_y_w2 = 0.0;
  bool bounded = false;
};

inline RobustnessCheck robustness_check(const WeightFunction& w,
                                        double m_x = 0.0, double r_x = 1.0) {
  const int kPoints = 400;
  RobustnessCheck out;
  double last = 0.0, peak = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    // log grid from 1e-4 to 1e8, plus the origin on the first pass
    const double t = static_cast<double>(i) / (kPoints - 1);
    const double ay = (i == 0) ? 0.0 : std::pow(10.0, -4.0 + 12.0 * t);
    for (const double y : {m_x + ay, m_x - ay}) {
      const double wv = weight_eval(w, m_x, y, r_x);
      const double prod = std::abs(y * wv * wv);
      out.sup_w = std::max(out.sup_w, wv);
      out.sup_y_w2 = std::max(out.sup_y_w2, prod);
      if (y >= m_x) last = prod;
      peak = std::max(peak, prod);
    }
  }
  out.bounded = std::isfinite(out.sup_w) && std::isfinite(out.sup_y_w2) &&
                last < 0.999 * peak;
  return out;
}

}  // namespace rcgp
