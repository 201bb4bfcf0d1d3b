#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "rcgp/data.hpp"
#include "rcgp/loo.hpp"
#include "rcgp/model.hpp"
#include "rcgp/robustness.hpp"
#include "rcgp/selection.hpp"
#include "rcgp/sparse.hpp"

namespace rcgp {

enum class ModelKind { GP, RCGP, SVGP, RCSVGP };

inline std::string model_name(ModelKind m) {
  switch (m) {
    case ModelKind::GP: return "gp";
    case ModelKind::RCGP: return "rcgp";
    case ModelKind::SVGP: return "svgp";
    case ModelKind::RCSVGP: return "rcsvgp";
  }
  return "?";
}

struct BenchmarkConfig {
  Dataset dataset;
  std::optional<ContaminationSpec> contamination;
  std::vector<ModelKind> models{ModelKind::GP, ModelKind::RCGP};
  int splits = 50;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  double epsilon = 0.05;
  Ablation ablation;
  HyperSearchConfig hyper;
  // Sparse models: m = floor(sqrt(n_train)) inducing points, a few ascent
  // steps on their locations, hyperparameters left at the search initials.
  int inducing_iterations = 10;
};

struct SplitResult {
  int split = 0;
  ModelKind model = ModelKind::GP;
  double mae_std_scale = 0.0;   // standardized targets
  double mae_orig_scale = 0.0;  // original units
  double seconds = 0.0;         // training incl. hyperparameter selection
  bool failed = false;
  std::string error;
};

struct ModelAggregate {
  ModelKind model = ModelKind::GP;
  int splits_ok = 0;
  double mae_mean = 0.0, mae_std = 0.0;             // standardized scale
  double mae_orig_mean = 0.0, mae_orig_std = 0.0;
  double seconds_mean = 0.0, seconds_std = 0.0;
};

struct BenchmarkReport {
  std::string setting;  // none | uniform | asymmetric | focused
  std::vector<SplitResult> per_split;
  std::vector<ModelAggregate> aggregates;
  std::uint64_t seed = 0;
  int splits = 0;
};

inline int worker_count(int jobs) {
  int n = 0;
  if (const char* env = std::getenv("RCGP_THREADS")) n = std::atoi(env);
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  return std::min(n, std::max(jobs, 1));
}

namespace detail {

inline double mae(const Eigen::Ref<const Eigen::VectorXd>& pred,
                  const Eigen::Ref<const Eigen::VectorXd>& truth) {
  return (pred - truth).cwiseAbs().mean();
}

// Evaluate one (split, model) cell.  The split's data pipeline is fully
// determined by the master seed and split index.
inline SplitResult run_split(const BenchmarkConfig& cfg, int split,
                             ModelKind model) {
  SplitResult res;
  res.split = split;
  res.model = model;
  try {
    const Eigen::Index n = cfg.dataset.y.size();
    Rng rng(cfg.seed * 7919 + static_cast<std::uint64_t>(split));
    const std::vector<int> perm = rng.permutation(static_cast<int>(n));
    const auto n_test = static_cast<Eigen::Index>(
        std::llround(cfg.test_fraction * static_cast<double>(n)));
    if (n_test < 1 || n_test >= n)
      throw std::invalid_argument("benchmark: degenerate split sizes");
    const Eigen::Index n_train = n - n_test;

    Dataset train, test;
    train.X.resize(n_train, cfg.dataset.X.cols());
    train.y.resize(n_train);
    test.X.resize(n_test, cfg.dataset.X.cols());
    test.y.resize(n_test);
    const bool latent = cfg.dataset.has_latent();
    if (latent) {
      train.latent.resize(n_train);
      test.latent.resize(n_test);
    }
    for (Eigen::Index i = 0; i < n_train; ++i) {
      train.X.row(i) = cfg.dataset.X.row(perm[i]);
      train.y[i] = cfg.dataset.y[perm[i]];
      if (latent) train.latent[i] = cfg.dataset.latent[perm[i]];
    }
    for (Eigen::Index i = 0; i < n_test; ++i) {
      test.X.row(i) = cfg.dataset.X.row(perm[n_train + i]);
      test.y[i] = cfg.dataset.y[perm[n_train + i]];
      if (latent) test.latent[i] = cfg.dataset.latent[perm[n_train + i]];
    }

    Standardizer tf;
    auto [tr, te] = standardize(train, test, tf);

    // Contaminate the training portion only, after standardisation, so the
    // outlier magnitudes and the error metric are both expressed on the
    // clean data scale; the test stays clean.
    if (cfg.contamination) {
      ContaminationSpec spec = *cfg.contamination;
      spec.seed = spec.seed * 104729 + static_cast<std::uint64_t>(split);
      Contaminated c = contaminate(tr.y, tr.X, spec);
      tr.y = std::move(c.y);
      tr.X = std::move(c.X);
      if (latent && spec.regime == ContaminationSpec::Regime::Focused)
        tr.latent.setZero();  // covariates moved; latent no longer valid
    }

    const MeanFunction mean = MeanFunction::empirical(tr.y);
    const auto t0 = std::chrono::steady_clock::now();
    Eigen::VectorXd pred;

    if (model == ModelKind::GP || model == ModelKind::RCGP) {
      HyperSearchConfig hyper = cfg.hyper;
      hyper.epsilon = cfg.epsilon;
      hyper.seed = cfg.seed + static_cast<std::uint64_t>(split);
      const WeightFunction::Kind kind = model == ModelKind::GP
                                            ? WeightFunction::Kind::Constant
                                            : WeightFunction::Kind::Imq;
      const HyperSearchResult hp =
          optimize_hyperparams(tr.X, tr.y, mean, kind, hyper);
      WeightFunction w = model == ModelKind::GP
                             ? WeightFunction::constant(1.0)
                             : WeightFunction::imq(hp.c);
      const FittedModel fm =
          fit(tr.X, tr.y, hp.kernel, mean, hp.sigma2, w, cfg.ablation);
      Eigen::VectorXd var;
      predict_diag(fm, te.X, pred, var);
    } else {
      const auto m = static_cast<Eigen::Index>(
          std::floor(std::sqrt(static_cast<double>(n_train))));
      InducingSet ind = InducingSet::subset_of_data(
          tr.X, std::max<Eigen::Index>(m, 1),
          cfg.seed + static_cast<std::uint64_t>(split));
      const KernelParams kp(cfg.hyper.init_lengthscale,
                            cfg.hyper.init_signal_variance);
      const double sigma2 = cfg.hyper.init_sigma2;
      WeightFunction w = WeightFunction::constant(1.0);
      if (model == ModelKind::RCSVGP) {
        const Eigen::VectorXd resid =
            (tr.y - mean_vector(mean, tr.X)).cwiseAbs();
        w = WeightFunction::imq(select_c(resid, ThresholdRule{cfg.epsilon}));
      }
      if (cfg.inducing_iterations > 0)
        ind = optimize_inducing(tr.X, tr.y, kp, mean, sigma2, w, ind,
                                cfg.inducing_iterations)
                  .inducing;
      const VariationalPosterior vp =
          rcsvgp_fit(tr.X, tr.y, kp, mean, sigma2, w, ind);
      pred = rcsvgp_predict(vp, te.X).mean;
    }

    res.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    // Synthetic data carries the noiseless function, so score against it;
    // CSV datasets score against the held-out observations.
    const Eigen::VectorXd& truth = te.has_latent() ? te.latent : te.y;
    res.mae_std_scale = mae(pred, truth);
    res.mae_orig_scale = res.mae_std_scale * tf.y_scale;
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
  }
  return res;
}

inline void aggregate_into(BenchmarkReport& report,
                           const std::vector<ModelKind>& models) {
  for (ModelKind m : models) {
    ModelAggregate agg;
    agg.model = m;
    std::vector<double> maes, maes_orig, secs;
    for (const SplitResult& r : report.per_split)
      if (r.model == m && !r.failed) {
        maes.push_back(r.mae_std_scale);
        maes_orig.push_back(r.mae_orig_scale);
        secs.push_back(r.seconds);
      }
    agg.splits_ok = static_cast<int>(maes.size());
    const auto mean_std = [](const std::vector<double>& v, double& mu,
                             double& sd) {
      if (v.empty()) {
        mu = sd = 0.0;
        return;
      }
      mu = 0.0;
      for (double x : v) mu += x;
      mu /= static_cast<double>(v.size());
      sd = 0.0;
      for (double x : v) sd += (x - mu) * (x - mu);
      sd = std::sqrt(sd / static_cast<double>(v.size()));
    };
    mean_std(maes, agg.mae_mean, agg.mae_std);
    mean_std(maes_orig, agg.mae_orig_mean, agg.mae_orig_std);
    mean_std(secs, agg.seconds_mean, agg.seconds_std);
    report.aggregates.push_back(agg);
  }
}

}  // namespace detail

inline std::string setting_name(
    const std::optional<ContaminationSpec>& spec) {
  if (!spec) return "none";
  switch (spec->regime) {
    case ContaminationSpec::Regime::Uniform: return "uniform";
    case ContaminationSpec::Regime::Asymmetric: return "asymmetric";
    case ContaminationSpec::Regime::Focused: return "focused";
  }
  return "?";
}

/*! Run every (split, model) cell in a work pool and aggregate.
 * Each cell derives its own RNG stream from the master seed and split
 * index, so the report is identical for any worker count. */
inline BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  if (cfg.splits < 1)
    throw std::invalid_argument("run_benchmark: splits >= 1");
  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw std::invalid_argument("run_benchmark: test_fraction in (0,1)");
  if (cfg.models.empty())
    throw std::invalid_argument("run_benchmark: empty model set");

  BenchmarkReport report;
  report.setting = setting_name(cfg.contamination);
  report.seed = cfg.seed;
  report.splits = cfg.splits;

  struct Cell {
    int split;
    ModelKind model;
  };
  std::vector<Cell> cells;
  for (int s = 0; s < cfg.splits; ++s)
    for (ModelKind m : cfg.models) cells.push_back({s, m});
  report.per_split.resize(cells.size());

  std::atomic<std::size_t> next{0};
  const int workers = worker_count(static_cast<int>(cells.size()));
  const auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      report.per_split[i] =
          detail::run_split(cfg, cells[i].split, cells[i].model);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  detail::aggregate_into(report, cfg.models);
  return report;
}

inline std::string benchmark_csv(const BenchmarkReport& r) {
  std::ostringstream out;
  out << "model,setting,mae_mean,mae_std,seconds_mean,seconds_std\n";
  out.precision(10);
  for (const ModelAggregate& a : r.aggregates)
    out << model_name(a.model) << ',' << r.setting << ',' << a.mae_mean << ','
        << a.mae_std << ',' << a.seconds_mean << ',' << a.seconds_std << '\n';
  return out.str();
}

inline std::string per_split_csv(const BenchmarkReport& r) {
  std::ostringstream out;
  out << "split,model,setting,mae_std_scale,mae_orig_scale,seconds,failed\n";
  out.precision(10);
  for (const SplitResult& s : r.per_split)
    out << s.split << ',' << model_name(s.model) << ',' << r.setting << ','
        << s.mae_std_scale << ',' << s.mae_orig_scale << ',' << s.seconds
        << ',' << (s.failed ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace rcgp
