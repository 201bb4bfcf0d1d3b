#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcgp/model.hpp"
#include "rcgp/rng.hpp"
#include "rcgp/robustness.hpp"
#include "rcgp/selection.hpp"

namespace rcgp {

/*! A 2-D benchmark objective with its box domain and global minimum. */
struct TestObjective {
  std::string name;
  Eigen::Vector2d lo, hi;
  double global_minimum = 0.0;
  std::function<double(double, double)> eval;

  static TestObjective six_hump_camel() {
    TestObjective t;
    t.name = "six-hump-camel";
    t.lo << -3.0, -2.0;
    t.hi << 3.0, 2.0;
    t.global_minimum = -1.0316;
    t.eval = [](double x, double y) {
      return (4.0 - 2.1 * x * x + std::pow(x, 4) / 3.0) * x * x + x * y +
             (-4.0 + 4.0 * y * y) * y * y;
    };
    return t;
  }

  static TestObjective branin() {
    TestObjective t;
    t.name = "branin";
    t.lo << -5.0, 0.0;
    t.hi << 10.0, 15.0;
    t.global_minimum = 0.3979;
    t.eval = [](double x, double y) {
      const double a = 1.0, b = 5.1 / (4.0 * M_PI * M_PI), c = 5.0 / M_PI;
      const double r = 6.0, s = 10.0, u = 1.0 / (8.0 * M_PI);
      const double q = y - b * x * x + c * x - r;
      return a * q * q + s * (1.0 - u) * std::cos(x) + s;
    };
    return t;
  }

  static TestObjective mccormick() {
    TestObjective t;
    t.name = "mccormick";
    t.lo << -1.5, -3.0;
    t.hi << 4.0, 4.0;
    t.global_minimum = -1.9133;
    t.eval = [](double x, double y) {
      const double d = x - y;
      return std::sin(x + y) + d * d - 1.5 * x + 2.5 * y + 1.0;
    };
    return t;
  }

  static TestObjective rosenbrock() {
    TestObjective t;
    t.name = "rosenbrock";
    t.lo << -2.0, -1.0;
    t.hi << 2.0, 3.0;
    t.global_minimum = 0.0;
    t.eval = [](double x, double y) {
      const double a = y - x * x;
      const double b = x * x - 1.0;
      return 100.0 * a * a + b * b;
    };
    return t;
  }

  static TestObjective by_name(const std::string& name) {
    if (name == "six-hump-camel" || name == "camel") return six_hump_camel();
    if (name == "branin") return branin();
    if (name == "mccormick") return mccormick();
    if (name == "rosenbrock") return rosenbrock();
    throw std::invalid_argument("unknown test objective: " + name);
  }
};

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/*! Upper confidence bound, maximisation form: mu + lambda sqrt(var). */
inline double acq_ucb(const FittedModel& model,
                      const Eigen::Ref<const Eigen::VectorXd>& x_star,
                      double lambda = 2.0) {
  Eigen::VectorXd mu, var;
  predict_diag(model, x_star.transpose(), mu, var);
  return mu[0] + lambda * std::sqrt(std::max(var[0], 0.0));
}

/*! Probability of improvement over the incumbent. */
inline double acq_pi(const FittedModel& model,
                     const Eigen::Ref<const Eigen::VectorXd>& x_star,
                     double incumbent) {
  Eigen::VectorXd mu, var;
  predict_diag(model, x_star.transpose(), mu, var);
  const double sd = std::sqrt(std::max(var[0], 1e-12));
  return normal_cdf((mu[0] - incumbent) / sd);
}

enum class Acquisition { Ucb, Pi };

namespace detail {

// Halton low-discrepancy sequence point (index >= 1), bases 2 and 3.
inline double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

inline Eigen::MatrixXd halton_candidates(const Eigen::Vector2d& lo,
                                         const Eigen::Vector2d& hi, int budget,
                                         std::uint64_t seed) {
  // The seed offsets the start index so different runs see different but
  // deterministic candidate sets.
  const std::uint64_t start = 1 + (seed % 8191) * 17;
  Eigen::MatrixXd C(budget, 2);
  for (int i = 0; i < budget; ++i) {
    C(i, 0) = lo[0] + (hi[0] - lo[0]) * halton(start + i, 2);
    C(i, 1) = lo[1] + (hi[1] - lo[1]) * halton(start + i, 3);
  }
  return C;
}

}  // namespace detail

/*! Maximise the acquisition over a seeded Halton candidate set, then
 * refine locally with a shrinking coordinate pattern search.  Ties go to
 * the earliest candidate. */
inline Eigen::Vector2d propose_next(const FittedModel& model,
                                    Acquisition acq, double acq_param,
                                    const Eigen::Vector2d& lo,
                                    const Eigen::Vector2d& hi, int budget,
                                    std::uint64_t seed) {
  if (budget < 1) throw std::invalid_argument("propose_next: budget >= 1");
  if (!((hi - lo).minCoeff() > 0.0))
    throw std::invalid_argument("propose_next: empty domain");

  const Eigen::MatrixXd C = detail::halton_candidates(lo, hi, budget, seed);
  Eigen::VectorXd mu, var;
  predict_diag(model, C, mu, var);

  const auto score = [&](double m, double v) {
    if (acq == Acquisition::Ucb)
      return m + acq_param * std::sqrt(std::max(v, 0.0));
    return normal_cdf((m - acq_param) / std::sqrt(std::max(v, 1e-12)));
  };

  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < budget; ++i) {
    const double s = score(mu[i], var[i]);
    if (s > best_val) {  // strict: first candidate wins ties
      best_val = s;
      best = i;
    }
  }

  // Local refinement around the best candidate.
  Eigen::Vector2d x = C.row(best);
  Eigen::Vector2d step = (hi - lo) / 64.0;
  const auto eval_at = [&](const Eigen::Vector2d& p) {
    Eigen::VectorXd m1, v1;
    predict_diag(model, p.transpose(), m1, v1);
    return score(m1[0], v1[0]);
  };
  for (int round = 0; round < 6; ++round) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (int dd = 0; dd < 2; ++dd) {
        for (const double sgn : {1.0, -1.0}) {
          Eigen::Vector2d p = x;
          p[dd] = std::clamp(p[dd] + sgn * step[dd], lo[dd], hi[dd]);
          const double s = eval_at(p);
          if (s > best_val) {
            best_val = s;
            x = p;
            moved = true;
          }
        }
      }
    }
    step /= 2.0;
  }
  return x;
}

/*! One Bayesian-optimisation trajectory. */
struct BOState {
  Eigen::MatrixXd X;             // queried points (rows)
  Eigen::VectorXd y_obs;         // observations fed to the surrogate
  Eigen::VectorXd y_true;        // clean objective values at the queries
  std::vector<char> contaminated;
  Eigen::VectorXd cum_regret;    // per query, including the initial design
  double incumbent = 0.0;        // min observed raw value
  std::uint64_t seed = 0;
};

struct BOOptions {
  double lambda = 2.0;          // UCB
  int initial_design = 5;
  int candidates = 2048;
  double contamination_p = 0.0; // chance each evaluation is an outlier
  HyperSearchConfig hyper;      // refit settings (per iteration)
};

/*! Minimise a test objective with a GP or RCGP surrogate.
 *
 * The surrogate models the negated objective (the acquisitions are stated
 * in maximisation form).  With probability p an evaluation is pushed up
 * by z ~ U(3 s_y, 9 s_y), s_y being the running std of the clean values —
 * the contaminated value is what the surrogate sees, while regret is
 * always booked from the true objective.
 */
inline BOState run_bo(const TestObjective& objective,
                      WeightFunction::Kind surrogate, Acquisition acq,
                      int iterations, std::uint64_t seed,
                      const BOOptions& options = {}) {
  if (iterations < 1) throw std::invalid_argument("run_bo: iterations >= 1");
  Rng rng(seed);

  BOState st;
  st.seed = seed;
  const int total = options.initial_design + iterations;
  st.X.resize(total, 2);
  st.y_obs.resize(total);
  st.y_true.resize(total);
  st.cum_regret.resize(total);
  st.contaminated.assign(static_cast<std::size_t>(total), 0);

  double regret_acc = 0.0;
  int n = 0;
  const auto observe = [&](const Eigen::Vector2d& x) {
    const double g = objective.eval(x[0], x[1]);
    if (!std::isfinite(g))
      throw std::runtime_error("run_bo: objective evaluation non-finite");
    double obs = g;
    // Needs at least two prior clean values for a meaningful spread.
    const double coin = rng.uniform();
    if (coin < options.contamination_p && n >= 2) {
      const double s_y = detail::sample_std(st.y_true.head(n));
      obs = g + rng.uniform(3.0 * s_y, 9.0 * s_y);
      st.contaminated[static_cast<std::size_t>(n)] = 1;
    }
    st.X.row(n) = x.transpose();
    st.y_true[n] = g;
    st.y_obs[n] = obs;
    regret_acc += g - objective.global_minimum;
    st.cum_regret[n] = regret_acc;
    ++n;
  };

  for (int i = 0; i < options.initial_design; ++i) {
    Eigen::Vector2d x;
    x[0] = rng.uniform(objective.lo[0], objective.hi[0]);
    x[1] = rng.uniform(objective.lo[1], objective.hi[1]);
    observe(x);
  }

  for (int it = 0; it < iterations; ++it) {
    // Surrogate over the negated observations with a zero prior mean, so
    // the weight of an observation decreases exactly as it worsens (a
    // contaminated evaluation only ever moves away from zero).
    // Hyperparameters are refit from scratch every iteration and c is
    // re-selected from the current residuals.
    const Eigen::MatrixXd Xn = st.X.topRows(n);
    const Eigen::VectorXd h = -st.y_obs.head(n);
    const MeanFunction mean = MeanFunction::zero();
    HyperSearchResult hp;
    try {
      hp = optimize_hyperparams(Xn, h, mean, surrogate, options.hyper);
    } catch (const std::exception&) {
      hp.kernel = KernelParams(options.hyper.init_lengthscale,
                               options.hyper.init_signal_variance);
      hp.sigma2 = options.hyper.init_sigma2;
      hp.c = 1.0;
      hp.warning = true;
    }
    WeightFunction w = WeightFunction::constant(1.0);
    if (surrogate == WeightFunction::Kind::Imq)
      w = WeightFunction::imq(hp.c);
    else if (surrogate == WeightFunction::Kind::SquaredExp)
      w = WeightFunction::squared_exp(hp.c);
    const FittedModel model = fit(Xn, h, hp.kernel, mean, hp.sigma2, w);

    const double incumbent = h.maxCoeff();
    const double acq_param =
        acq == Acquisition::Ucb ? options.lambda : incumbent;
    const Eigen::Vector2d x_next =
        propose_next(model, acq, acq_param, objective.lo, objective.hi,
                     options.candidates, seed * 1000003ULL + it);
    observe(x_next);
  }

  st.incumbent = st.y_obs.head(n).minCoeff();
  return st;
}

}  // namespace rcgp
