#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace rcgp {

/*! Squared-exponential kernel hyperparameters.
 *
 * The kernel is k(x,x') = s^2 exp(-||x-x'||^2 / (2 l^2)) with a single
 * isotropic lengthscale.  `jitter` is added to the diagonal of training
 * Gram matrices only (not to cross-covariances).  Immutable after
 * construction.
 */
struct KernelParams {
  double lengthscale = 1.0;
  double signal_variance = 1.0;
  double jitter;  // absolute value added to training Gram diagonals

  KernelParams(double lengthscale_ = 1.0, double signal_variance_ = 1.0)
      : lengthscale(lengthscale_),
        signal_variance(signal_variance_),
        jitter(1e-8 * signal_variance_) {
    validate();
  }

  KernelParams(double lengthscale_, double signal_variance_, double jitter_)
      : lengthscale(lengthscale_),
        signal_variance(signal_variance_),
        jitter(jitter_) {
    validate();
  }

  void validate() const {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
      throw std::invalid_argument("KernelParams: lengthscale must be > 0");
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
      throw std::invalid_argument("KernelParams: signal_variance must be > 0");
    if (!(jitter >= 0.0) || !std::isfinite(jitter))
      throw std::invalid_argument("KernelParams: jitter must be >= 0");
  }
};

inline double kernel_eval(const KernelParams& params,
                          const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& x_prime) {
  if (x.size() != x_prime.size())
    throw std::invalid_argument(
        "kernel_eval: dimension mismatch (" + std::to_string(x.size()) +
        " vs " + std::to_string(x_prime.size()) + ")");
  const double d2 = (x - x_prime).squaredNorm();
  return params.signal_variance *
         std::exp(-d2 / (2.0 * params.lengthscale * params.lengthscale));
}

/*! Pairwise squared Euclidean distances between rows of X and rows of Y.
 *
 * Cached by hyperparameter search: the distances do not depend on the
 * kernel parameters, so repeated Gram evaluations at new lengthscales
 * reduce to one vectorised exp.
 */
inline Eigen::MatrixXd squared_distances(
    const Eigen::Ref<const Eigen::MatrixXd>& X,
    const Eigen::Ref<const Eigen::MatrixXd>& Y) {
  if (X.cols() != Y.cols())
    throw std::invalid_argument("squared_distances: dimension mismatch");
  const Eigen::VectorXd xn = X.rowwise().squaredNorm();
  const Eigen::VectorXd yn = Y.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * X * Y.transpose());
  d2.colwise() += xn;
  d2.rowwise() += yn.transpose();
  return d2.cwiseMax(0.0);  // clamp round-off negatives
}

inline Eigen::MatrixXd squared_distances(
    const Eigen::Ref<const Eigen::MatrixXd>& X) {
  Eigen::MatrixXd d2 = squared_distances(X, X);
  d2.diagonal().setZero();
  return d2;
}

// Gram matrix from a precomputed squared-distance matrix.
inline Eigen::MatrixXd gram_from_sqdist(
    const KernelParams& params, const Eigen::Ref<const Eigen::MatrixXd>& d2,
    bool add_jitter) {
  const double inv = -1.0 / (2.0 * params.lengthscale * params.lengthscale);
  Eigen::MatrixXd K =
      (params.signal_variance * (d2.array() * inv).exp()).matrix();
  if (add_jitter && d2.rows() == d2.cols())
    K.diagonal().array() += params.jitter;
  return K;
}

inline void check_finite_rows(const Eigen::Ref<const Eigen::MatrixXd>& X,
                              const char* who) {
  if (!X.allFinite())
    throw std::invalid_argument(std::string(who) +
                                ": non-finite covariates");
}

/*! Training Gram matrix K_ij = k(x_i, x_j) with jitter on the diagonal. */
inline Eigen::MatrixXd gram_matrix(const KernelParams& params,
                                   const Eigen::Ref<const Eigen::MatrixXd>& X) {
  if (X.rows() == 0) throw std::invalid_argument("gram_matrix: empty input");
  check_finite_rows(X, "gram_matrix");
  Eigen::MatrixXd K = gram_from_sqdist(params, squared_distances(X), true);
  return ((K + K.transpose()) / 2.0).eval();  // exact symmetry
}

/*! Cross-covariance [k(x_i, x*_j)]; no jitter. */
inline Eigen::MatrixXd cross_gram(const KernelParams& params,
                                  const Eigen::Ref<const Eigen::MatrixXd>& X,
                                  const Eigen::Ref<const Eigen::MatrixXd>& X_star) {
  if (X.cols() != X_star.cols())
    throw std::invalid_argument("cross_gram: dimension mismatch");
  check_finite_rows(X, "cross_gram");
  check_finite_rows(X_star, "cross_gram");
  return gram_from_sqdist(params, squared_distances(X, X_star), false);
}

/*! Prior mean function m(x).
 *
 * Zero, a constant, the sample mean of the training targets, or a fitted
 * univariate polynomial (the remedy used for trending series such as
 * price data).  Immutable; construct through the factories.
 */
class MeanFunction {
 public:
  enum class Kind { Zero, Constant, Empirical, Polynomial };

  static MeanFunction zero() { return MeanFunction(Kind::Zero, 0.0, {}); }

  static MeanFunction constant(double value) {
    if (!std::isfinite(value))
      throw std::invalid_argument("MeanFunction: non-finite constant");
    return MeanFunction(Kind::Constant, value, {});
  }

  // value = sample mean of the training targets, fixed at construction.
  static MeanFunction empirical(const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (y.size() == 0)
      throw std::invalid_argument("MeanFunction::empirical: empty targets");
    return MeanFunction(Kind::Empirical, y.mean(), {});
  }

  // Ordinary least squares polynomial fit (1-D covariates only), solved
  // via Householder QR.
  static MeanFunction polynomial_fit(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                     const Eigen::Ref<const Eigen::VectorXd>& y,
                                     int degree = 3) {
    if (X.cols() != 1)
      throw std::invalid_argument(
          "MeanFunction::polynomial_fit: univariate covariates required");
    if (X.rows() != y.size())
      throw std::invalid_argument(
          "MeanFunction::polynomial_fit: size mismatch");
    if (degree < 0)
      throw std::invalid_argument("MeanFunction::polynomial_fit: degree < 0");
    Eigen::MatrixXd V(X.rows(), degree + 1);
    for (int j = 0; j <= degree; ++j)
      V.col(j) = X.col(0).array().pow(static_cast<double>(j));
    Eigen::VectorXd coeffs = V.householderQr().solve(y);
    if (!coeffs.allFinite())
      throw std::runtime_error(
          "MeanFunction::polynomial_fit: non-finite coefficients");
    return MeanFunction(Kind::Polynomial, 0.0, std::move(coeffs));
  }

  Kind kind() const { return kind_; }
  double value() const { return value_; }
  const Eigen::VectorXd& coefficients() const { return coeffs_; }

  double eval(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    switch (kind_) {
      case Kind::Zero:
        return 0.0;
      case Kind::Constant:
      case Kind::Empirical:
        return value_;
      case Kind::Polynomial: {
        if (x.size() != 1)
          throw std::invalid_argument(
              "MeanFunction: polynomial mean is univariate");
        double acc = 0.0, p = 1.0;
        for (Eigen::Index j = 0; j < coeffs_.size(); ++j) {
          acc += coeffs_[j] * p;
          p *= x[0];
        }
        return acc;
      }
    }
    return 0.0;  // unreachable
  }

 private:
  MeanFunction(Kind kind, double value, Eigen::VectorXd coeffs)
      : kind_(kind), value_(value), coeffs_(std::move(coeffs)) {}

  Kind kind_;
  double value_;
  Eigen::VectorXd coeffs_;
};

inline Eigen::VectorXd mean_vector(const MeanFunction& mean,
                                   const Eigen::Ref<const Eigen::MatrixXd>& X) {
  Eigen::VectorXd m(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) m[i] = mean.eval(X.row(i));
  return m;
}

}  // namespace rcgp
