#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rcgp/gaussian.hpp"
#include "rcgp/kernels.hpp"
#include "rcgp/model.hpp"
#include "rcgp/optim.hpp"
#include "rcgp/rng.hpp"
#include "rcgp/weighting.hpp"

namespace rcgp {

/*! Inducing inputs for the sparse variational approximation. */
struct InducingSet {
  Eigen::MatrixXd U;  // m x d

  static InducingSet subset_of_data(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                    Eigen::Index m, std::uint64_t seed) {
    if (m < 1 || m > X.rows())
      throw std::invalid_argument("InducingSet: need 1 <= m <= n");
    Rng rng(seed);
    const std::vector<int> perm = rng.permutation(static_cast<int>(X.rows()));
    InducingSet s;
    s.U.resize(m, X.cols());
    for (Eigen::Index i = 0; i < m; ++i) s.U.row(i) = X.row(perm[i]);
    return s;
  }

  static InducingSet user_provided(Eigen::MatrixXd U) {
    if (U.rows() == 0) throw std::invalid_argument("InducingSet: empty");
    return InducingSet{std::move(U)};
  }
};

// Jitter on K_uu before factorisation.
inline constexpr double kInducingJitter = 1e-8;

namespace detail {

/*! Shared pieces of the sparse computations.
 *
 * Conventions: K_u is m x n with [K_u]_ij = k(u_i, x_j);
 * B = (sigma^2 J_w)^{-1} is diagonal; the targets are centred by the prior
 * mean at the data (the mean is added back at prediction);
 * z = (y - m) - sigma^2 grad_log_w^2; nu = B z;
 * Q = P = K_uu + K_u B K_u^T, computed once.
 */
struct SparseParts {
  Eigen::MatrixXd Kuu;   // with jitter
  Eigen::MatrixXd Ku;    // m x n
  Eigen::VectorXd b;     // diagonal of B
  Eigen::VectorXd z;
  Eigen::VectorXd nu;
  Eigen::MatrixXd Q;
  Eigen::LLT<Eigen::MatrixXd> kuu_chol;
  Eigen::LLT<Eigen::MatrixXd> q_chol;
  Eigen::VectorXd m_vec;
  Eigen::VectorXd w_vec;
  Eigen::VectorXd grad_vec;
};

inline SparseParts sparse_parts(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                const Eigen::Ref<const Eigen::VectorXd>& y,
                                const KernelParams& kernel,
                                const MeanFunction& mean, double sigma2,
                                WeightFunction weight,
                                const Eigen::Ref<const Eigen::MatrixXd>& U) {
  if (X.rows() != y.size())
    throw std::invalid_argument("sparse: |X| != |y|");
  if (U.cols() != X.cols())
    throw std::invalid_argument("sparse: inducing dimension mismatch");
  if (!(sigma2 > 0.0))
    throw std::invalid_argument("sparse: sigma2 must be > 0");

  SparseParts p;
  p.m_vec = mean_vector(mean, X);

  if (weight.tie_beta) {
    const double beta =
        weight.kind == WeightFunction::Kind::Heteroskedastic
            ? sigma2 / std::sqrt(2.0)
            : std::sqrt(sigma2 / 2.0);
    weight = weight.with_beta(beta);
  }
  Eigen::VectorXd rate_vec;
  if (weight.kind == WeightFunction::Kind::Heteroskedastic) {
    rate_vec.resize(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      rate_vec[i] = weight.rate(X.row(i));
  }
  std::tie(p.w_vec, p.grad_vec) = weight_vector(weight, p.m_vec, y, rate_vec);

  // J_w diagonal is (sigma^2/2) w^{-2}; B = (sigma^2 J_w)^{-1}.
  const Eigen::ArrayXd jw = (sigma2 / 2.0) / p.w_vec.array().square();
  p.b = (1.0 / (sigma2 * jw)).matrix();
  p.z = (y - p.m_vec) - sigma2 * p.grad_vec;
  p.nu = (p.b.array() * p.z.array()).matrix();

  p.Kuu = gram_from_sqdist(kernel, squared_distances(U), false);
  p.Kuu.diagonal().array() += kInducingJitter;
  p.Ku = cross_gram(kernel, U, X);

  p.Q = p.Kuu + p.Ku * p.b.asDiagonal() * p.Ku.transpose();
  p.Q = ((p.Q + p.Q.transpose()) / 2.0).eval();

  p.kuu_chol.compute(p.Kuu);
  if (p.kuu_chol.info() != Eigen::Success)
    throw std::runtime_error("sparse: K_uu not positive definite");
  p.q_chol.compute(p.Q);
  if (p.q_chol.info() != Eigen::Success)
    throw std::runtime_error("sparse: Q_u not positive definite");
  return p;
}

}  // namespace detail

/*! Optimal variational posterior over the inducing values (centred scale):
 *   mu_u    = K_uu Q^{-1} K_u nu
 *   Sigma_u = K_uu Q^{-1} K_uu
 * The prior mean is added back at prediction time. */
struct VariationalPosterior {
  Eigen::MatrixXd U;
  Eigen::VectorXd mu_u;
  Eigen::MatrixXd sigma_u;
  Eigen::MatrixXd Kuu;
  Eigen::LLT<Eigen::MatrixXd> kuu_chol;
  KernelParams kernel{1.0, 1.0};
  MeanFunction mean = MeanFunction::zero();
};

inline VariationalPosterior rcsvgp_fit(
    const Eigen::Ref<const Eigen::MatrixXd>& X,
    const Eigen::Ref<const Eigen::VectorXd>& y, const KernelParams& kernel,
    const MeanFunction& mean, double sigma2, const WeightFunction& weight,
    const InducingSet& inducing) {
  detail::SparseParts p =
      detail::sparse_parts(X, y, kernel, mean, sigma2, weight, inducing.U);
  VariationalPosterior vp;
  vp.U = inducing.U;
  vp.mu_u = p.Kuu * p.q_chol.solve(p.Ku * p.nu);
  Eigen::MatrixXd s = p.Kuu * p.q_chol.solve(p.Kuu);
  vp.sigma_u = (s + s.transpose()) / 2.0;
  vp.Kuu = p.Kuu;
  vp.kuu_chol = std::move(p.kuu_chol);
  vp.kernel = kernel;
  vp.mean = mean;
  return vp;
}

inline GaussianBelief rcsvgp_predict(
    const VariationalPosterior& vp,
    const Eigen::Ref<const Eigen::MatrixXd>& X_star) {
  if (X_star.cols() != vp.U.cols())
    throw std::invalid_argument("rcsvgp_predict: dimension mismatch");
  const Eigen::MatrixXd ku = cross_gram(vp.kernel, vp.U, X_star);  // m x n*
  const Eigen::MatrixXd phi = vp.kuu_chol.solve(ku);               // m x n*
  GaussianBelief g;
  g.mean = mean_vector(vp.mean, X_star) + phi.transpose() * vp.mu_u;
  const Eigen::MatrixXd kss =
      gram_from_sqdist(vp.kernel, squared_distances(X_star), false);
  Eigen::MatrixXd cov =
      kss - phi.transpose() * (vp.Kuu - vp.sigma_u) * phi;
  g.cov = (cov + cov.transpose()) / 2.0;
  return g;
}

/*! The variational objective J(u):
 *
 *   1/2 nu^T K_u^T Q^{-1} K_u nu
 * + 1/2 log( det(K_uu)^2 / det(Q) )
 * - 1/2 tr( B^{1/2} (K - K_u^T K_uu^{-1} K_u) B^{1/2} )
 * + 1/2 C
 *
 * with C the f-free loss constant (same convention as the pseudo
 * marginal).  C does not depend on u, so it only matters when comparing
 * across hyperparameters.
 */
inline double elbo_objective(const Eigen::Ref<const Eigen::MatrixXd>& X,
                             const Eigen::Ref<const Eigen::VectorXd>& y,
                             const KernelParams& kernel,
                             const MeanFunction& mean, double sigma2,
                             const WeightFunction& weight,
                             const Eigen::Ref<const Eigen::MatrixXd>& U) {
  detail::SparseParts p =
      detail::sparse_parts(X, y, kernel, mean, sigma2, weight, U);
  const Eigen::Index m = U.rows();

  const Eigen::VectorXd v = p.Ku * p.nu;
  const double data_term = 0.5 * v.dot(p.q_chol.solve(v));

  double logdet = 0.0;
  for (Eigen::Index i = 0; i < m; ++i)
    logdet += 2.0 * std::log(p.kuu_chol.matrixL()(i, i)) -
              std::log(p.q_chol.matrixL()(i, i));

  // Trace term: only the diagonal of K - K_u^T K_uu^{-1} K_u is needed.
  const Eigen::MatrixXd half = p.kuu_chol.matrixL().solve(p.Ku);  // m x n
  const Eigen::ArrayXd k_diag =
      Eigen::ArrayXd::Constant(X.rows(), kernel.signal_variance);
  const Eigen::ArrayXd resid =
      k_diag - half.colwise().squaredNorm().transpose().array();
  const double trace_term = -0.5 * (p.b.array() * resid).sum();

  const Eigen::ArrayXd yc = (y - p.m_vec).array();
  const Eigen::ArrayXd wt2 = (2.0 / sigma2) * p.w_vec.array().square();
  const double C =
      (wt2 * yc.square() / sigma2 - 2.0 * wt2 -
       2.0 * yc * wt2 * p.grad_vec.array())
          .sum();

  return data_term + logdet + trace_term + 0.5 * C;
}

/*! Analytic gradient of elbo_objective with respect to the inducing
 * inputs (same shape as U).  Verified against central finite differences
 * in the test suite. */
inline Eigen::MatrixXd elbo_gradient_u(
    const Eigen::Ref<const Eigen::MatrixXd>& X,
    const Eigen::Ref<const Eigen::VectorXd>& y, const KernelParams& kernel,
    const MeanFunction& mean, double sigma2, const WeightFunction& weight,
    const Eigen::Ref<const Eigen::MatrixXd>& U) {
  detail::SparseParts p =
      detail::sparse_parts(X, y, kernel, mean, sigma2, weight, U);
  const Eigen::Index m = U.rows();
  const Eigen::Index d = U.cols();
  const double ell2 = kernel.lengthscale * kernel.lengthscale;

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd kuu_inv = p.kuu_chol.solve(I);
  const Eigen::MatrixXd q_inv = p.q_chol.solve(I);
  const Eigen::VectorXd v = p.Ku * p.nu;
  const Eigen::VectorXd a = p.q_chol.solve(v);
  const Eigen::MatrixXd G = p.kuu_chol.solve(p.Ku);            // m x n
  const Eigen::MatrixXd T = p.Ku.transpose() * q_inv;          // n x m
  const Eigen::MatrixXd S =
      G * p.b.asDiagonal() * G.transpose();                    // m x m
  const Eigen::VectorXd q = (p.b.array() *
                             (p.Ku.transpose() * a).array())
                                .matrix();                     // n

  Eigen::MatrixXd grad(m, d);
  for (Eigen::Index ai = 0; ai < m; ++ai) {
    // Coefficients of dK_u row ai (length n) and of the symmetric
    // dK_uu row/column ai (length m, diagonal entry has zero derivative).
    const Eigen::ArrayXd rcoef =
        a[ai] * p.nu.array() - a[ai] * q.array() -
        p.b.array() * T.col(ai).array() + p.b.array() * G.row(ai).transpose().array();
    const Eigen::ArrayXd scoef =
        -a[ai] * a.array() + 2.0 * kuu_inv.row(ai).transpose().array() -
        q_inv.row(ai).transpose().array() - S.row(ai).transpose().array();

    const Eigen::ArrayXd e = rcoef * p.Ku.row(ai).transpose().array();
    const Eigen::ArrayXd f = scoef * p.Kuu.row(ai).transpose().array();
    const double e_sum = e.sum();
    const double f_sum = f.sum();
    for (Eigen::Index dd = 0; dd < d; ++dd) {
      const double gr =
          (e * X.col(dd).array()).sum() - U(ai, dd) * e_sum;
      const double gs =
          (f * U.col(dd).array()).sum() - U(ai, dd) * f_sum;
      grad(ai, dd) = (gr + gs) / ell2;
    }
  }
  return grad;
}

/*! Quasi-Newton ascent of the ELBO over the inducing locations; kernel,
 * mean, noise and weight stay fixed. */
struct InducingSearchResult {
  InducingSet inducing;
  double objective = 0.0;
  bool warning = false;
  std::vector<std::pair<int, double>> trace;
};

inline InducingSearchResult optimize_inducing(
    const Eigen::Ref<const Eigen::MatrixXd>& X,
    const Eigen::Ref<const Eigen::VectorXd>& y, const KernelParams& kernel,
    const MeanFunction& mean, double sigma2, const WeightFunction& weight,
    const InducingSet& initial, int max_iterations = 50) {
  const Eigen::Index m = initial.U.rows();
  const Eigen::Index d = initial.U.cols();
  if (m > X.rows())
    throw std::invalid_argument("optimize_inducing: m > n");

  const auto unflatten = [&](const Eigen::VectorXd& flat) {
    return Eigen::MatrixXd(
        Eigen::Map<const Eigen::MatrixXd>(flat.data(), m, d));
  };
  const auto objective = [&](const Eigen::VectorXd& flat) -> double {
    try {
      return elbo_objective(X, y, kernel, mean, sigma2, weight,
                            unflatten(flat));
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
  const auto gradient = [&](const Eigen::VectorXd& flat) -> Eigen::VectorXd {
    const Eigen::MatrixXd g =
        elbo_gradient_u(X, y, kernel, mean, sigma2, weight, unflatten(flat));
    return Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
  };

  Eigen::VectorXd x0 =
      Eigen::Map<const Eigen::VectorXd>(initial.U.data(), m * d);
  OptimOptions opts;
  opts.max_iterations = max_iterations;
  const OptimResult run = lbfgs_maximize(objective, x0, opts, gradient);

  InducingSearchResult out;
  out.inducing = InducingSet{unflatten(run.x)};
  out.objective = run.f;
  out.warning = !run.improved;
  out.trace = run.trace;
  return out;
}

}  // namespace rcgp
