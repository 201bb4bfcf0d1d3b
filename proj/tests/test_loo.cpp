#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "rcgp/loo.hpp"
#include "rcgp/model.hpp"
#include "rcgp/rng.hpp"

using namespace rcgp;

namespace {

// Naive O(n^4) oracle: refit on y_{-i} and evaluate the Prop.-1 predictive
// at x_i (plus observation noise).  beta stays fixed at the full-data tied
// value so the comparison isolates the LOO algebra.
void naive_loo(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
               const KernelParams& kp, double sigma2, WeightFunction w,
               Eigen::VectorXd& mu, Eigen::VectorXd& var_pred) {
  const auto n = X.rows();
  w = w.with_beta(w.kind == WeightFunction::Kind::Constant ||
                          w.kind == WeightFunction::Kind::Imq ||
                          w.kind == WeightFunction::Kind::SquaredExp
                      ? std::sqrt(sigma2 / 2.0)
                      : w.beta);
  w.tie_beta = false;
  mu.resize(n);
  var_pred.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd Xi(n - 1, X.cols());
    Eigen::VectorXd yi(n - 1);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      Xi.row(k) = X.row(j);
      yi[k] = y[j];
      ++k;
    }
    const FittedModel m = fit(Xi, yi, kp, MeanFunction::zero(), sigma2, w);
    const GaussianBelief g = predict(m, X.row(i), true);
    mu[i] = g.mean[0];
    var_pred[i] = g.cov(0, 0);
  }
}

}  // namespace

TEST_CASE("loo_components matches the naive refit oracle") {
  Rng rng(31);
  const int n = 20;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform(-4, 4);
    y[i] = std::sin(X(i, 0)) + 0.3 * rng.normal();
  }
  const KernelParams kp(1.1, 0.9, 0.0);  // zero jitter: K_{-i} is an exact
                                         // submatrix of K
  const double sigma2 = 0.2;

  SECTION("IMQ weight") {
    const WeightFunction w = WeightFunction::imq(0.8);
    const FittedModel m = fit(X, y, kp, MeanFunction::zero(), sigma2, w);
    const LooComponents loo = loo_components(m);
    Eigen::VectorXd mu, vp;
    naive_loo(X, y, kp, sigma2, w, mu, vp);
    CHECK((loo.mu - mu).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((loo.var_pred - vp).cwiseAbs().maxCoeff() < 1e-8);
  }

  SECTION("constant weight (classical identities)") {
    const WeightFunction w = WeightFunction::constant(1.0);
    const FittedModel m = fit(X, y, kp, MeanFunction::zero(), sigma2, w);
    const LooComponents loo = loo_components(m);
    Eigen::VectorXd mu, vp;
    naive_loo(X, y, kp, sigma2, w, mu, vp);
    CHECK((loo.mu - mu).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((loo.var_pred - vp).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("two symmetric points give symmetric LOO") {
  Eigen::MatrixXd X(2, 1);
  X << -1.0, 1.0;
  Eigen::VectorXd y(2);
  y << 0.7, 0.7;
  const FittedModel m = fit(X, y, KernelParams(1.0, 1.0), MeanFunction::zero(),
                            0.3, WeightFunction::imq(0.5));
  const LooComponents loo = loo_components(m);
  CHECK(loo.mu[0] == Catch::Approx(loo.mu[1]).epsilon(1e-12));
  CHECK(loo.var_pred[0] == Catch::Approx(loo.var_pred[1]).epsilon(1e-12));
}

TEST_CASE("variance floor and n >= 2") {
  Rng rng(8);
  Eigen::MatrixXd X(15, 1);
  Eigen::VectorXd y(15);
  for (int i = 0; i < 15; ++i) {
    X(i, 0) = rng.uniform(-3, 3);
    y[i] = rng.uniform(-2, 2);
  }
  const double sigma2 = 0.15;
  const FittedModel m = fit(X, y, KernelParams(0.9, 1.2),
                            MeanFunction::zero(), sigma2,
                            WeightFunction::imq(0.7));
  const LooComponents loo = loo_components(m);
  for (int i = 0; i < 15; ++i) {
    CHECK(loo.var_latent[i] >= -1e-10);
    CHECK(loo.var_pred[i] >= sigma2);
  }

  Eigen::MatrixXd X1(1, 1);
  X1 << 0.0;
  Eigen::VectorXd y1(1);
  y1 << 1.0;
  const FittedModel m1 = fit(X1, y1, KernelParams(), MeanFunction::zero(),
                             0.1, WeightFunction::constant(1.0));
  CHECK_THROWS_AS(loo_components(m1), std::invalid_argument);
}

TEST_CASE("loo_objective sums the per-point log densities") {
  Rng rng(12);
  Eigen::MatrixXd X(10, 1);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    X(i, 0) = rng.uniform(-3, 3);
    y[i] = rng.uniform(-1, 1);
  }
  const FittedModel m = fit(X, y, KernelParams(1.0, 1.0),
                            MeanFunction::zero(), 0.2,
                            WeightFunction::imq(0.6));
  const LooComponents loo = loo_components(m);
  double want = 0.0;
  for (int i = 0; i < 10; ++i)
    want += -0.5 * std::log(2.0 * M_PI * loo.var_pred[i]) -
            (y[i] - loo.mu[i]) * (y[i] - loo.mu[i]) / (2.0 * loo.var_pred[i]);
  CHECK(loo_objective(m) == Catch::Approx(want).epsilon(1e-12));
}

TEST_CASE("an extreme outlier moves the IMQ objective less") {
  Rng rng(19);
  const int n = 15;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform(-3, 3);
    y[i] = std::sin(X(i, 0)) + 0.2 * rng.normal();
  }
  const KernelParams kp(1.0, 1.0);
  const double sigma2 = 0.1;
  Eigen::VectorXd y_dirty = y;
  y_dirty[4] += 100.0 * std::sqrt(sigma2);

  const auto objective = [&](const Eigen::VectorXd& yy,
                             const WeightFunction& w) {
    return loo_objective(
        fit(X, yy, kp, MeanFunction::zero(), sigma2, w));
  };
  const double d_imq = std::abs(objective(y, WeightFunction::imq(0.5)) -
                                objective(y_dirty, WeightFunction::imq(0.5)));
  const double d_const =
      std::abs(objective(y, WeightFunction::constant(1.0)) -
               objective(y_dirty, WeightFunction::constant(1.0)));
  CHECK(d_imq < d_const);
}

TEST_CASE("permuting the data permutes the LOO components") {
  Rng rng(23);
  const int n = 12;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform(-3, 3);
    y[i] = rng.uniform(-2, 2);
  }
  const KernelParams kp(1.0, 1.0);
  const WeightFunction w = WeightFunction::imq(0.9);
  const LooComponents a =
      loo_components(fit(X, y, kp, MeanFunction::zero(), 0.2, w));

  const std::vector<int> perm = Rng(99).permutation(n);
  Eigen::MatrixXd Xp(n, 1);
  Eigen::VectorXd yp(n);
  for (int i = 0; i < n; ++i) {
    Xp.row(i) = X.row(perm[i]);
    yp[i] = y[perm[i]];
  }
  const LooComponents b =
      loo_components(fit(Xp, yp, kp, MeanFunction::zero(), 0.2, w));
  for (int i = 0; i < n; ++i) {
    CHECK(b.mu[i] == Catch::Approx(a.mu[perm[i]]).epsilon(1e-9));
    CHECK(b.var_pred[i] == Catch::Approx(a.var_pred[perm[i]]).epsilon(1e-9));
  }
}

TEST_CASE("LOO reuses the fit-time factorisation") {
  Rng rng(3);
  Eigen::MatrixXd X(8, 1);
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) {
    X(i, 0) = rng.uniform(-2, 2);
    y[i] = rng.uniform(-1, 1);
  }
  const FittedModel m = fit(X, y, KernelParams(), MeanFunction::zero(), 0.2,
                            WeightFunction::imq(0.5));
  const long before = detail::factorization_counter().load();
  (void)loo_components(m);
  (void)loo_objective(m);
  CHECK(detail::factorization_counter().load() == before);
}
