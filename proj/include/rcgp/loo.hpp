#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "rcgp/model.hpp"

namespace rcgp {

/*! Closed-form leave-one-out predictive moments.
 *
 * With A = K + sigma^2 J_w and d_i = [A^{-1}]_ii:
 *   mu_i        = z_i + m_i - [A^{-1} z]_i / d_i
 *   var_latent  = 1/d_i - sigma^4 w_i^{-2} / 2
 *   var_pred    = var_latent + sigma^2
 * All of it falls out of the factorisation already held by the model.
 */
struct LooComponents {
  Eigen::VectorXd mu;
  Eigen::VectorXd var_latent;
  Eigen::VectorXd var_pred;
};

inline LooComponents loo_components(const FittedModel& model) {
  const Eigen::Index n = model.n();
  if (n < 2)
    throw std::invalid_argument("loo_components: need at least 2 points");

  // diag(A^{-1}) via one triangular solve against the identity:
  // A^{-1} = L^{-T} L^{-1}, so [A^{-1}]_ii = || column i of L^{-1} ||^2.
  const Eigen::MatrixXd linv =
      model.chol.matrixL().solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::ArrayXd d = linv.colwise().squaredNorm().transpose();

  LooComponents out;
  out.mu = (model.z.array() + model.m_vec.array() -
            model.alpha.array() / d)
               .matrix();
  // (sigma^2 J_w)_ii equals sigma^4 w_i^{-2} / 2; jw_diag is used so the
  // identity stays exact under the ablation switches.
  out.var_latent = (d.inverse() - model.sigma2 * model.jw_diag.array())
                       .cwiseMax(0.0)
                       .matrix();
  out.var_pred = out.var_latent.array() + model.sigma2;
  return out;
}

/*! LOO objective: sum_i log N(y_i; mu_i, var_pred_i). */
inline double loo_objective(const FittedModel& model) {
  const LooComponents c = loo_components(model);
  const Eigen::ArrayXd r = model.y.array() - c.mu.array();
  const Eigen::ArrayXd v = c.var_pred.array();
  return (-0.5 * (2.0 * M_PI * v).log() - r.square() / (2.0 * v)).sum();
}

}  // namespace rcgp
