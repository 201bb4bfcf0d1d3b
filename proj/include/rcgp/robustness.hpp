#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "rcgp/gaussian.hpp"
#include "rcgp/model.hpp"
#include "rcgp/rng.hpp"

namespace rcgp {

namespace detail {

inline double sample_std(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().mean());
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  const std::size_t k = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + k, v.end());
  double hi = v[k];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + k - 1, v.begin() + k);
    return (hi + v[k - 1]) / 2.0;
  }
  return hi;
}

inline double median(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return median(std::vector<double>(v.data(), v.data() + v.size()));
}

inline double mad(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double med = median(v);
  std::vector<double> dev(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i)
    dev[static_cast<std::size_t>(i)] = std::abs(v[i] - med);
  return median(std::move(dev));
}

}  // namespace detail

/*! One of the three outlier-injection regimes.
 *
 * Uniform: flagged points split 50-50; one half gets +z, the other -z,
 * z ~ U(3s, 9s) with s the std of the original observations.
 * Asymmetric: every flagged point shifted by -z (or +z for `Add`, the
 * Bayesian-optimisation variant where outliers overshoot).
 * Focused: flagged points are moved to a small cluster — covariates to
 * the per-dimension median plus 0.1*MAD*u, targets to
 * median(y) - 3 std(y) + 0.1*MAD_y*u, u ~ U(0,1) per coordinate.
 */
struct ContaminationSpec {
  enum class Regime { Uniform, Asymmetric, Focused };
  enum class Direction { Subtract, Add };

  Regime regime = Regime::Uniform;
  double fraction = 0.10;
  std::uint64_t seed = 0;
  Direction direction = Direction::Subtract;
};

struct Contaminated {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<char> mask;  // 1 where an outlier was injected
};

inline Contaminated contaminate(const Eigen::Ref<const Eigen::VectorXd>& y,
                                const Eigen::Ref<const Eigen::MatrixXd>& X,
                                const ContaminationSpec& spec) {
  const Eigen::Index n = y.size();
  if (X.rows() != n) throw std::invalid_argument("contaminate: |X| != |y|");
  if (spec.fraction < 0.0 || spec.fraction > 1.0)
    throw std::invalid_argument("contaminate: fraction must lie in [0,1]");

  Contaminated out{y, X, std::vector<char>(static_cast<std::size_t>(n), 0)};
  const auto n_out = static_cast<Eigen::Index>(
      std::llround(spec.fraction * static_cast<double>(n)));
  if (n_out == 0) return out;

  Rng rng(spec.seed);
  const std::vector<int> perm = rng.permutation(static_cast<int>(n));
  std::vector<int> flagged(perm.begin(), perm.begin() + n_out);
  for (int i : flagged) out.mask[static_cast<std::size_t>(i)] = 1;

  const double s = detail::sample_std(y);

  switch (spec.regime) {
    case ContaminationSpec::Regime::Uniform: {
      // First half of the shuffled flagged list shifts up, rest down.
      const Eigen::Index half = n_out / 2 + n_out % 2;
      for (Eigen::Index j = 0; j < n_out; ++j) {
        const double z = rng.uniform(3.0 * s, 9.0 * s);
        out.y[flagged[static_cast<std::size_t>(j)]] +=
            (j < half) ? z : -z;
      }
      break;
    }
    case ContaminationSpec::Regime::Asymmetric: {
      const double sign =
          spec.direction == ContaminationSpec::Direction::Add ? 1.0 : -1.0;
      for (Eigen::Index j = 0; j < n_out; ++j)
        out.y[flagged[static_cast<std::size_t>(j)]] +=
            sign * rng.uniform(3.0 * s, 9.0 * s);
      break;
    }
    case ContaminationSpec::Regime::Focused: {
      const Eigen::Index d = X.cols();
      Eigen::VectorXd x_med(d), x_mad(d);
      for (Eigen::Index j = 0; j < d; ++j) {
        x_med[j] = detail::median(X.col(j));
        x_mad[j] = detail::mad(X.col(j));
      }
      const double y_base = detail::median(y) - 3.0 * s;
      const double y_mad = detail::mad(y);
      for (Eigen::Index j = 0; j < n_out; ++j) {
        const int i = flagged[static_cast<std::size_t>(j)];
        for (Eigen::Index k = 0; k < d; ++k)
          out.X(i, k) = x_med[k] + 0.1 * x_mad[k] * rng.uniform();
        out.y[i] = y_base + 0.1 * y_mad * rng.uniform();
      }
      break;
    }
  }
  return out;
}

/*! Closed-form posterior influence of moving y_m to y_c for a standard GP:
 *   1/2 [ (K + sigma^2 I)^{-1} K sigma^{-2} ]_mm (y_m - y_c)^2 . */
inline double pif_gp_closed_form(const FittedModel& model, Eigen::Index m,
                                 double y_c) {
  if (model.weight.kind != WeightFunction::Kind::Constant)
    throw std::invalid_argument(
        "pif_gp_closed_form: constant-weight model required");
  if (m < 0 || m >= model.n())
    throw std::invalid_argument("pif_gp_closed_form: index out of range");
  const Eigen::VectorXd col = model.chol.solve(model.K.col(m));
  const double c1 = 0.5 * col[m] / model.sigma2;
  const double delta = model.y[m] - y_c;
  return c1 * delta * delta;
}

/*! Influence curve: KL between the clean posterior and the posterior
 * refitted with y_m replaced by each grid value.  Weights (and hence J_w
 * and m_w) are recomputed on the contaminated data; kernel, noise, mean
 * and the threshold c stay fixed at their clean-data values. */
struct PifCurve {
  Eigen::VectorXd grid;  // contaminated values y_m^c
  Eigen::VectorXd kl;
  Eigen::Index index = 0;
};

inline PifCurve pif_curve(const Eigen::Ref<const Eigen::MatrixXd>& X,
                          const Eigen::Ref<const Eigen::VectorXd>& y,
                          const ModelConfig& cfg, Eigen::Index m,
                          const Eigen::Ref<const Eigen::VectorXd>& grid) {
  if (m < 0 || m >= y.size())
    throw std::invalid_argument("pif_curve: index out of range");
  const FittedModel clean = fit(X, y, cfg);
  const GaussianBelief p = posterior(clean);
  PifCurve out;
  out.grid = grid;
  out.index = m;
  out.kl.resize(grid.size());
  Eigen::VectorXd yc = y;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    yc[m] = grid[i];
    const FittedModel dirty = fit(X, yc, cfg);
    out.kl[i] = kl_gaussian(p, posterior(dirty));
  }
  return out;
}

/*! Default grid: log-spaced offsets delta in [1e-2 s, 1e2 s] on both
 * sides of y_m, where s is the std of y. */
inline Eigen::VectorXd default_pif_grid(
    const Eigen::Ref<const Eigen::VectorXd>& y, Eigen::Index m,
    int points_per_side = 100) {
  const double s = detail::sample_std(y);
  Eigen::VectorXd grid(2 * points_per_side);
  for (int i = 0; i < points_per_side; ++i) {
    const double t = static_cast<double>(i) / (points_per_side - 1);
    const double delta = s * std::pow(10.0, -2.0 + 4.0 * t);
    grid[points_per_side - 1 - i] = y[m] - delta;
    grid[points_per_side + i] = y[m] + delta;
  }
  return grid;
}

}  // namespace rcgp
