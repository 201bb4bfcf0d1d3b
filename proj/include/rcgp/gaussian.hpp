#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace rcgp {

/*! A multivariate Gaussian: posterior, predictive, or anything else that
 * needs a mean vector and a covariance matrix. */
struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/*! KL(p || q) between two Gaussians of equal dimension.
 *
 *   1/2 ( tr(Sq^-1 Sp) - n + (mq-mp)^T Sq^-1 (mq-mp) + ln det Sq / det Sp )
 *
 * When the two covariance matrices are bit-identical (e.g. influence
 * curves of a model whose posterior covariance does not depend on y) the
 * trace and log-determinant terms are exactly zero, so we skip them;
 * this keeps tiny KL values from drowning in factorisation round-off.
 */
inline double kl_gaussian(const GaussianBelief& p, const GaussianBelief& q) {
  const Eigen::Index n = p.mean.size();
  if (q.mean.size() != n || p.cov.rows() != n || p.cov.cols() != n ||
      q.cov.rows() != n || q.cov.cols() != n)
    throw std::invalid_argument("kl_gaussian: dimension mismatch");

  const Eigen::VectorXd d = q.mean - p.mean;
  Eigen::LLT<Eigen::MatrixXd> lq(q.cov);
  if (lq.info() != Eigen::Success)
    throw std::runtime_error("kl_gaussian: covariance of q not positive definite");
  const double quad = d.dot(lq.solve(d));

  if (p.cov == q.cov) return 0.5 * quad;

  Eigen::LLT<Eigen::MatrixXd> lp(p.cov);
  if (lp.info() != Eigen::Success)
    throw std::runtime_error("kl_gaussian: covariance of p not positive definite");

  const double trace = lq.solve(p.cov).trace();
  double logdet_q = 0.0, logdet_p = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    logdet_q += 2.0 * std::log(lq.matrixL()(i, i));
    logdet_p += 2.0 * std::log(lp.matrixL()(i, i));
  }
  return 0.5 * (trace - static_cast<double>(n) + quad + logdet_q - logdet_p);
}

}  // namespace rcgp
