#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "rcgp/data.hpp"
#include "rcgp/selection.hpp"

using namespace rcgp;

TEST_CASE("optimizer never returns a worse objective than the start") {
  const Dataset d = synth_generate(5, 40, KernelParams(1.0, 1.0), 0.3);
  HyperSearchConfig cfg;
  cfg.max_iterations = 15;
  cfg.restarts = 2;
  const HyperSearchResult res = optimize_hyperparams(
      d.X, d.y, MeanFunction::zero(), WeightFunction::Kind::Constant, cfg);

  const FittedModel init =
      fit(d.X, d.y, KernelParams(cfg.init_lengthscale, cfg.init_signal_variance),
          MeanFunction::zero(), cfg.init_sigma2, WeightFunction::constant(1.0));
  CHECK(res.objective >= loo_objective(init) - 1e-12);

  const FittedModel at_best = fit(d.X, d.y, res.kernel, MeanFunction::zero(),
                                  res.sigma2, WeightFunction::constant(1.0));
  CHECK(loo_objective(at_best) == Catch::Approx(res.objective).epsilon(1e-9));
}

TEST_CASE("noise variance is recovered within a factor of 2") {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Dataset d =
        synth_generate(seed, 120, KernelParams(1.0, 1.0), std::sqrt(0.09));
    HyperSearchConfig cfg;
    cfg.init_lengthscale = 2.0;
    cfg.init_signal_variance = 2.0;
    cfg.init_sigma2 = 0.5;
    cfg.max_iterations = 40;
    cfg.restarts = 2;
    cfg.seed = seed;
    const HyperSearchResult res = optimize_hyperparams(
        d.X, d.y, MeanFunction::zero(), WeightFunction::Kind::Constant, cfg);
    if (res.sigma2 > 0.045 && res.sigma2 < 0.18) ++ok;
  }
  CHECK(ok >= 3);
}

TEST_CASE("c is frozen from the initial residuals") {
  const Dataset d = synth_generate(11, 60, KernelParams(1.0, 1.0), 0.5);
  HyperSearchConfig cfg;
  cfg.max_iterations = 10;
  cfg.restarts = 1;
  cfg.epsilon = 0.05;
  const HyperSearchResult res = optimize_hyperparams(
      d.X, d.y, MeanFunction::zero(), WeightFunction::Kind::Imq, cfg);
  const double expected_c =
      select_c(d.y.cwiseAbs(), ThresholdRule{cfg.epsilon});
  CHECK(res.c == expected_c);
}

TEST_CASE("input validation") {
  Eigen::MatrixXd X(1, 1);
  X << 0.0;
  Eigen::VectorXd y(1);
  y << 1.0;
  CHECK_THROWS_AS(optimize_hyperparams(X, y, MeanFunction::zero(),
                                       WeightFunction::Kind::Constant,
                                       HyperSearchConfig{}),
                  std::invalid_argument);

  HyperSearchConfig bad;
  bad.tolerance = 0.0;
  Eigen::MatrixXd X2(3, 1);
  X2 << 0.0, 1.0, 2.0;
  Eigen::VectorXd y2(3);
  y2 << 0.0, 1.0, 0.0;
  CHECK_THROWS_AS(optimize_hyperparams(X2, y2, MeanFunction::zero(),
                                       WeightFunction::Kind::Constant, bad),
                  std::invalid_argument);
}

TEST_CASE("trace records objective values") {
  const Dataset d = synth_generate(2, 30, KernelParams(1.0, 1.0), 0.3);
  HyperSearchConfig cfg;
  cfg.max_iterations = 8;
  cfg.restarts = 1;
  const HyperSearchResult res = optimize_hyperparams(
      d.X, d.y, MeanFunction::zero(), WeightFunction::Kind::Imq, cfg);
  REQUIRE(!res.trace.empty());
  for (const auto& [it, val] : res.trace) CHECK(std::isfinite(val));
}
