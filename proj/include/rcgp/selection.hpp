#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rcgp/loo.hpp"
#include "rcgp/model.hpp"
#include "rcgp/optim.hpp"
#include "rcgp/rng.hpp"

namespace rcgp {

/*! Configuration for LOO hyperparameter search over (lengthscale,
 * signal variance, noise variance), all handled on the log scale. */
struct HyperSearchConfig {
  double init_lengthscale = 1.0;
  double init_signal_variance = 1.0;
  double init_sigma2 = 0.1;
  int max_iterations = 50;
  double tolerance = 1e-8;
  double fd_rel_step = 1e-6;
  int restarts = 3;          // first start is the initial point itself
  double restart_spread = 1.0;  // +/- perturbation in natural log units
  double epsilon = 0.05;     // quantile rule for c
  std::uint64_t seed = 0;    // restart perturbations
};

struct HyperSearchResult {
  KernelParams kernel{1.0, 1.0};
  double sigma2 = 0.1;
  double c = 0.0;            // frozen threshold (IMQ / SE weights)
  double objective = 0.0;
  bool warning = false;      // optimizer failed to improve on the start
  std::vector<std::pair<int, double>> trace;
};

/*! Maximise the analytic LOO objective.
 *
 * c is selected once from the residuals around the prior mean and frozen;
 * beta is re-tied to sigma/sqrt(2) inside every objective evaluation
 * because fit() does the tying.  The squared-distance matrix is computed
 * once and shared across evaluations.
 */
inline HyperSearchResult optimize_hyperparams(
    const Eigen::Ref<const Eigen::MatrixXd>& X,
    const Eigen::Ref<const Eigen::VectorXd>& y, const MeanFunction& mean,
    WeightFunction::Kind weight_kind, const HyperSearchConfig& config = {}) {
  if (y.size() < 2)
    throw std::invalid_argument("optimize_hyperparams: need n >= 2");
  if (!(config.tolerance > 0.0) || !(config.fd_rel_step > 0.0))
    throw std::invalid_argument("optimize_hyperparams: tolerances must be > 0");
  if (weight_kind == WeightFunction::Kind::Heteroskedastic)
    throw std::invalid_argument(
        "optimize_hyperparams: heteroskedastic weights are not supported "
        "(rate is a user callable, not a family)");

  const Eigen::VectorXd m_vec = mean_vector(mean, X);
  const Eigen::VectorXd residuals = (y - m_vec).cwiseAbs();
  const double c = select_c(residuals, ThresholdRule{config.epsilon});
  const Eigen::MatrixXd d2 = squared_distances(X);

  const auto make_weight = [&]() {
    switch (weight_kind) {
      case WeightFunction::Kind::Imq:
        return WeightFunction::imq(c);
      case WeightFunction::Kind::SquaredExp:
        return WeightFunction::squared_exp(c);
      default:
        return WeightFunction::constant(1.0);
    }
  };

  const auto objective = [&](const Eigen::VectorXd& logp) -> double {
    try {
      KernelParams kp(std::exp(logp[0]), std::exp(logp[1]));
      const double sigma2 = std::exp(logp[2]);
      FittedModel model = detail::fit_with_gram(
          gram_from_sqdist(kp, d2, true), X, y, kp, mean, sigma2,
          make_weight(), Ablation{});
      return loo_objective(model);
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  Eigen::VectorXd x0(3);
  x0 << std::log(config.init_lengthscale),
      std::log(config.init_signal_variance), std::log(config.init_sigma2);
  const double f0 = objective(x0);
  if (!std::isfinite(f0))
    throw std::invalid_argument(
        "optimize_hyperparams: objective non-finite at the initial point");

  OptimOptions opts;
  opts.max_iterations = config.max_iterations;
  opts.tolerance = config.tolerance;
  opts.fd_rel_step = config.fd_rel_step;

  Rng rng(config.seed);
  HyperSearchResult best;
  best.objective = f0;
  best.c = c;
  best.kernel = KernelParams(config.init_lengthscale,
                             config.init_signal_variance);
  best.sigma2 = config.init_sigma2;
  best.warning = true;

  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    Eigen::VectorXd start = x0;
    if (r > 0)
      for (int i = 0; i < 3; ++i)
        start[i] += rng.uniform(-config.restart_spread, config.restart_spread);
    const OptimResult run = lbfgs_maximize(objective, start, opts);
    for (const auto& [it, val] : run.trace)
      best.trace.emplace_back(r * (config.max_iterations + 1) + it, val);
    if (run.f > best.objective ||
        (r == 0 && run.f >= best.objective && run.improved)) {
      best.objective = run.f;
      best.kernel = KernelParams(std::exp(run.x[0]), std::exp(run.x[1]));
      best.sigma2 = std::exp(run.x[2]);
      best.warning = false;
    }
  }
  return best;
}

}  // namespace rcgp
