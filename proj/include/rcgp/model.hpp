#pragma once

#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "rcgp/gaussian.hpp"
#include "rcgp/kernels.hpp"
#include "rcgp/weighting.hpp"

namespace rcgp {

namespace detail {
// Instrumentation: number of n-by-n factorisations performed by fit().
// Lets tests assert that LOO reuses the fit-time factorisation instead of
// computing another one.
inline std::atomic<long>& factorization_counter() {
  static std::atomic<long> counter{0};
  return counter;
}
}  // namespace detail

/*! Ablation switches for the two RCGP-specific terms (for studying what
 * each contributes; both off = full RCGP). */
struct Ablation {
  bool disable_shrinkage = false;         // force m_w := m
  bool disable_noise_reweighting = false; // force J_w := I
};

/*! A trained (RC)GP.
 *
 * Everything downstream of the training data is precomputed here: the
 * weight vector, the reweighted noise diagonal J_w, the shifted prior
 * mean m_w, the residual z = y - m_w, and a single Cholesky factorisation
 * of A = K + sigma^2 J_w.  All posterior/predictive/LOO quantities are
 * triangular solves against that factor; no further factorisations and no
 * explicit inverses.  Immutable after fit(); safe for concurrent reads.
 */
struct FittedModel {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  KernelParams kernel{1.0, 1.0};
  MeanFunction mean = MeanFunction::zero();
  double sigma2 = 1.0;
  WeightFunction weight;
  Ablation ablation;

  Eigen::MatrixXd K;        // training Gram (jitter included)
  Eigen::VectorXd m_vec;    // m(x_i)
  Eigen::VectorXd w_vec;    // w(x_i, y_i) after beta tying
  Eigen::VectorXd grad_vec; // d/dy log w^2 at the training points
  Eigen::VectorXd jw_diag;  // diagonal of J_w
  Eigen::VectorXd m_w;      // shrunk prior mean
  Eigen::VectorXd z;        // y - m_w
  Eigen::LLT<Eigen::MatrixXd> chol;  // factor of A = K + sigma^2 J_w
  Eigen::VectorXd alpha;    // A^{-1} z

  Eigen::Index n() const { return y.size(); }

  Eigen::MatrixXd solve(const Eigen::Ref<const Eigen::MatrixXd>& rhs) const {
    return chol.solve(rhs);
  }
};

/*! Convenience bundle describing a model before data is attached; used by
 * the robustness lab, the benchmark driver, and the CLI. */
struct ModelConfig {
  KernelParams kernel{1.0, 1.0};
  MeanFunction mean = MeanFunction::zero();
  double sigma2 = 1.0;
  WeightFunction weight = WeightFunction::constant(1.0);
  Ablation ablation;
};

namespace detail {

// Shared implementation; K is the jittered training Gram for X.
inline FittedModel fit_with_gram(Eigen::MatrixXd K, Eigen::MatrixXd X,
                                 Eigen::VectorXd y, const KernelParams& kernel,
                                 const MeanFunction& mean, double sigma2,
                                 WeightFunction weight,
                                 const Ablation& ablation) {
  const Eigen::Index n = y.size();
  if (n == 0) throw std::invalid_argument("fit: empty training set");
  if (X.rows() != n) throw std::invalid_argument("fit: |X| != |y|");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("fit: sigma2 must be > 0");
  if (!y.allFinite()) throw std::invalid_argument("fit: non-finite targets");

  FittedModel m;
  m.X = std::move(X);
  m.y = std::move(y);
  m.kernel = kernel;
  m.mean = mean;
  m.sigma2 = sigma2;
  m.ablation = ablation;
  m.K = std::move(K);
  m.m_vec = mean_vector(mean, m.X);

  if (weight.tie_beta) {
    const double beta =
        weight.kind == WeightFunction::Kind::Heteroskedastic
            ? sigma2 / std::sqrt(2.0)
            : std::sqrt(sigma2 / 2.0);
    weight = weight.with_beta(beta);
  }
  m.weight = weight;

  Eigen::VectorXd rate_vec;
  if (weight.kind == WeightFunction::Kind::Heteroskedastic) {
    rate_vec.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) rate_vec[i] = weight.rate(m.X.row(i));
  }
  std::tie(m.w_vec, m.grad_vec) =
      weight_vector(weight, m.m_vec, m.y, rate_vec);

  if (m.ablation.disable_noise_reweighting)
    m.jw_diag = Eigen::VectorXd::Ones(n);
  else
    m.jw_diag =
        ((sigma2 / 2.0) * m.w_vec.array().square().inverse()).matrix();
  m.m_w = m.ablation.disable_shrinkage
              ? m.m_vec
              : (m.m_vec + sigma2 * m.grad_vec).eval();
  m.z = m.y - m.m_w;

  Eigen::MatrixXd A = m.K;
  A.diagonal() += sigma2 * m.jw_diag;
  m.chol.compute(A);
  detail::factorization_counter().fetch_add(1, std::memory_order_relaxed);
  if (m.chol.info() != Eigen::Success) {
    const double min_pivot = Eigen::LDLT<Eigen::MatrixXd>(A)
                                 .vectorD()
                                 .minCoeff();
    std::ostringstream msg;
    msg << "fit: factorisation of K + sigma^2 J_w failed; smallest pivot "
        << min_pivot;
    throw std::runtime_error(msg.str());
  }
  m.alpha = m.chol.solve(m.z);
  return m;
}

}  // namespace detail

inline FittedModel fit(const Eigen::Ref<const Eigen::MatrixXd>& X,
                       const Eigen::Ref<const Eigen::VectorXd>& y,
                       const KernelParams& kernel, const MeanFunction& mean,
                       double sigma2, const WeightFunction& weight,
                       const Ablation& ablation = {}) {
  return detail::fit_with_gram(gram_matrix(kernel, X), X, y, kernel, mean,
                               sigma2, weight, ablation);
}

inline FittedModel fit(const Eigen::Ref<const Eigen::MatrixXd>& X,
                       const Eigen::Ref<const Eigen::VectorXd>& y,
                       const ModelConfig& cfg) {
  return fit(X, y, cfg.kernel, cfg.mean, cfg.sigma2, cfg.weight, cfg.ablation);
}

/*! Posterior over the latent values at the training inputs:
 * mu = m + K A^{-1} z,  Sigma = K A^{-1} sigma^2 J_w  (symmetrised). */
inline GaussianBelief posterior(const FittedModel& model) {
  GaussianBelief g;
  g.mean = model.m_vec + model.K * model.alpha;
  Eigen::MatrixXd rhs =
      (model.sigma2 * model.jw_diag).asDiagonal().toDenseMatrix();
  Eigen::MatrixXd cov = model.K * model.chol.solve(rhs);
  g.cov = (cov + cov.transpose()) / 2.0;
  return g;
}

/*! Predictive at new inputs.  Latent-function predictive by default;
 * `observation_noise` adds sigma^2 to the diagonal. */
inline GaussianBelief predict(const FittedModel& model,
                              const Eigen::Ref<const Eigen::MatrixXd>& X_star,
                              bool observation_noise = false) {
  if (X_star.rows() == 0)
    throw std::invalid_argument("predict: empty query set");
  const Eigen::MatrixXd ks = cross_gram(model.kernel, model.X, X_star);
  GaussianBelief g;
  g.mean = mean_vector(model.mean, X_star) + ks.transpose() * model.alpha;
  const Eigen::MatrixXd kss =
      gram_from_sqdist(model.kernel, squared_distances(X_star), false);
  Eigen::MatrixXd cov = kss - ks.transpose() * model.chol.solve(ks);
  g.cov = (cov + cov.transpose()) / 2.0;
  if (observation_noise) g.cov.diagonal().array() += model.sigma2;
  return g;
}

/*! Predictive mean and variance diagonal only — the cheap path used by
 * acquisition sweeps and benchmark scoring. */
inline void predict_diag(const FittedModel& model,
                         const Eigen::Ref<const Eigen::MatrixXd>& X_star,
                         Eigen::VectorXd& mu, Eigen::VectorXd& var,
                         bool observation_noise = false) {
  const Eigen::MatrixXd ks = cross_gram(model.kernel, model.X, X_star);
  mu = mean_vector(model.mean, X_star) + ks.transpose() * model.alpha;
  const Eigen::MatrixXd v =
      model.chol.matrixL().solve(ks);  // L^{-1} k_star
  var = (model.kernel.signal_variance - v.colwise().squaredNorm().array())
            .matrix();
  if (observation_noise) var.array() += model.sigma2;
}

/*! log N(y; m, K + sigma^2 I) — only defined for the standard-GP path. */
inline double gp_log_marginal_likelihood(const FittedModel& model) {
  if (model.weight.kind != WeightFunction::Kind::Constant)
    throw std::invalid_argument(
        "gp_log_marginal_likelihood: constant-weight model required");
  const Eigen::Index n = model.n();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    logdet += 2.0 * std::log(model.chol.matrixL()(i, i));
  return -0.5 * model.z.dot(model.alpha) - 0.5 * logdet -
         0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
}

/*! Log of the closed-form pseudo marginal likelihood.
 *
 * Diagnostic only: this quantity is not a normalised density over y and
 * must never drive hyperparameter selection.  Using |K||K^{-1}+B| = |B||A|
 * with B = (sigma^2 J_w)^{-1} and A = K + sigma^2 J_w, plus
 * B(K^{-1}+B)^{-1}B = B K A^{-1}, everything reduces to the fit-time
 * factorisation.  The constant C collects the f-free terms of the
 * expanded loss, evaluated on the centred targets.
 */
inline double log_pseudo_marginal(const FittedModel& model) {
  const Eigen::Index n = model.n();
  const Eigen::VectorXd b =
      (model.sigma2 * model.jw_diag).array().inverse().matrix();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    logdet += std::log(b[i]) + 2.0 * std::log(model.chol.matrixL()(i, i));

  const Eigen::VectorXd k_alpha = model.K * model.alpha;  // K A^{-1} z
  const double quad = (b.array() * model.z.array() * k_alpha.array()).sum();

  // C = sum_i [ wt2 yc^2 / s2 - 2 wt2 - 2 yc wt2 g ],  wt2 = (2/s2) w^2,
  // with yc the centred targets.
  const Eigen::ArrayXd yc = (model.y - model.m_vec).array();
  const Eigen::ArrayXd wt2 =
      (2.0 / model.sigma2) * model.w_vec.array().square();
  const Eigen::ArrayXd g = model.grad_vec.array();
  const double C =
      (wt2 * yc.square() / model.sigma2 - 2.0 * wt2 - 2.0 * yc * wt2 * g)
          .sum();

  return -0.5 * logdet + 0.5 * quad - 0.5 * C;
}

}  // namespace rcgp
