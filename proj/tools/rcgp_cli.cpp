// Command-line front end for the rcgp library.
//
// Subcommands: synth, fit, predict, loo-opt, pif, contaminate, svgp, bo,
// benchmark.  Options can also be supplied through an INI file passed with
// --config; command-line flags win over the file.
//
// Exit codes: 0 success, 1 invalid input, 2 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcgp/rcgp.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string format = "json";  // json | csv
};

// Print to stdout, or write into --out and print the path.
void emit(const GlobalOpts& g, const std::string& filename,
          const std::string& content) {
  if (g.out_dir.empty()) {
    std::cout << content;
    if (content.empty() || content.back() != '\n') std::cout << '\n';
    return;
  }
  fs::create_directories(g.out_dir);
  const fs::path p = fs::path(g.out_dir) / filename;
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << content;
  std::cout << p.string() << '\n';
}

std::string render(const GlobalOpts& g, const ordered_json& j) {
  if (g.format == "json") return j.dump(2);
  std::ostringstream out;
  out << "key,value\n";
  for (const auto& [k, v] : j.items()) {
    if (v.is_structured()) continue;  // nested blocks stay JSON-only
    out << k << ',' << (v.is_string() ? v.get<std::string>() : v.dump())
        << '\n';
  }
  return out.str();
}

// Feature-only CSV (header row, all numeric columns).
Eigen::MatrixXd load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("empty file " + path);
  std::size_t cols = 1 + static_cast<std::size_t>(
                             std::count(line.begin(), line.end(), ','));
  std::vector<double> values;
  std::size_t rows = 0;
  int row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != cell.size() || cell.empty())
        throw std::invalid_argument("non-numeric cell at row " +
                                    std::to_string(row_no) + " of " + path);
      values.push_back(v);
      ++c;
    }
    if (c != cols)
      throw std::invalid_argument("ragged row " + std::to_string(row_no) +
                                  " in " + path);
    ++rows;
  }
  if (rows == 0) throw std::invalid_argument("no data rows in " + path);
  Eigen::MatrixXd X(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) X(i, j) = values[i * cols + j];
  return X;
}

std::string dataset_csv(const rcgp::Dataset& d,
                        const std::vector<char>* mask = nullptr) {
  std::ostringstream out;
  out.precision(10);
  for (Eigen::Index j = 0; j < d.X.cols(); ++j) out << 'x' << (j + 1) << ',';
  out << "target";
  if (d.has_latent()) out << ",latent";
  if (mask) out << ",contaminated";
  out << '\n';
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    for (Eigen::Index j = 0; j < d.X.cols(); ++j) out << d.X(i, j) << ',';
    out << d.y[i];
    if (d.has_latent()) out << ',' << d.latent[i];
    if (mask) out << ',' << int((*mask)[static_cast<std::size_t>(i)]);
    out << '\n';
  }
  return out.str();
}

// Options shared by the model-fitting subcommands.
struct DataOpts {
  std::string data_path;
  std::string target = "target";
  int synth_n = 0;
  double synth_noise_std = std::sqrt(0.3);
};

void add_data_opts(CLI::App* cmd, DataOpts& d) {
  cmd->add_option("--data", d.data_path, "CSV file with a header row");
  cmd->add_option("--target", d.target, "name of the target column");
  cmd->add_option("--synth-n", d.synth_n,
                  "generate a synthetic dataset of this size instead");
  cmd->add_option("--synth-noise-std", d.synth_noise_std,
                  "noise level for --synth-n");
}

rcgp::Dataset resolve_dataset(const DataOpts& d, std::uint64_t seed) {
  if (d.synth_n > 0)
    return rcgp::synth_generate(seed, d.synth_n, rcgp::KernelParams(),
                                d.synth_noise_std);
  if (d.data_path.empty())
    throw std::invalid_argument("provide --data or --synth-n");
  return rcgp::load_csv(d.data_path, d.target);
}

struct ModelOpts {
  std::string weight = "imq";  // constant | imq | se
  double epsilon = 0.05;
  double lengthscale = 1.0;
  double signal_variance = 1.0;
  double sigma2 = 0.1;
  std::string mean = "empirical";  // zero | empirical | constant | polynomial
  double mean_value = 0.0;
  int poly_degree = 3;
  bool optimize = false;
  int restarts = 3;
  int max_iterations = 50;
};

void add_model_opts(CLI::App* cmd, ModelOpts& m) {
  cmd->add_option("--weight", m.weight, "constant | imq | se")
      ->check(CLI::IsMember({"constant", "imq", "se"}));
  cmd->add_option("--epsilon", m.epsilon,
                  "expected outlier share for the soft threshold c");
  cmd->add_option("--lengthscale", m.lengthscale, "kernel lengthscale");
  cmd->add_option("--signal-variance", m.signal_variance,
                  "kernel signal variance");
  cmd->add_option("--sigma2", m.sigma2, "observation noise variance");
  cmd->add_option("--mean", m.mean,
                  "zero | empirical | constant | polynomial")
      ->check(CLI::IsMember({"zero", "empirical", "constant", "polynomial"}));
  cmd->add_option("--mean-value", m.mean_value, "value for --mean constant");
  cmd->add_option("--poly-degree", m.poly_degree,
                  "degree for --mean polynomial");
  cmd->add_flag("--optimize", m.optimize,
                "select hyperparameters by leave-one-out before fitting");
  cmd->add_option("--restarts", m.restarts, "optimizer restarts");
  cmd->add_option("--max-iterations", m.max_iterations,
                  "optimizer iteration cap");
}

rcgp::MeanFunction build_mean(const ModelOpts& m, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& y) {
  if (m.mean == "zero") return rcgp::MeanFunction::zero();
  if (m.mean == "empirical") return rcgp::MeanFunction::empirical(y);
  if (m.mean == "constant") return rcgp::MeanFunction::constant(m.mean_value);
  return rcgp::MeanFunction::polynomial_fit(X, y, m.poly_degree);
}

rcgp::WeightFunction::Kind weight_kind(const std::string& name) {
  if (name == "constant") return rcgp::WeightFunction::Kind::Constant;
  if (name == "imq") return rcgp::WeightFunction::Kind::Imq;
  return rcgp::WeightFunction::Kind::SquaredExp;
}

struct ResolvedModel {
  rcgp::KernelParams kernel{1.0, 1.0};
  double sigma2 = 0.1;
  double c = 1.0;
  rcgp::WeightFunction weight = rcgp::WeightFunction::constant(1.0);
  rcgp::MeanFunction mean = rcgp::MeanFunction::zero();
  double search_objective = 0.0;
  bool optimized = false;
  bool warning = false;
};

ResolvedModel resolve_model(const ModelOpts& m, const rcgp::Dataset& d,
                            std::uint64_t seed) {
  ResolvedModel r;
  r.mean = build_mean(m, d.X, d.y);
  const Eigen::VectorXd resid =
      (d.y - rcgp::mean_vector(r.mean, d.X)).cwiseAbs();
  if (m.optimize) {
    rcgp::HyperSearchConfig cfg;
    cfg.init_lengthscale = m.lengthscale;
    cfg.init_signal_variance = m.signal_variance;
    cfg.init_sigma2 = m.sigma2;
    cfg.epsilon = m.epsilon;
    cfg.restarts = m.restarts;
    cfg.max_iterations = m.max_iterations;
    cfg.seed = seed;
    const rcgp::HyperSearchResult hs = rcgp::optimize_hyperparams(
        d.X, d.y, r.mean, weight_kind(m.weight), cfg);
    r.kernel = hs.kernel;
    r.sigma2 = hs.sigma2;
    r.c = hs.c;
    r.search_objective = hs.objective;
    r.optimized = true;
    r.warning = hs.warning;
  } else {
    r.kernel = rcgp::KernelParams(m.lengthscale, m.signal_variance);
    r.sigma2 = m.sigma2;
    r.c = rcgp::select_c(resid, rcgp::ThresholdRule{m.epsilon});
  }
  if (m.weight == "constant")
    r.weight = rcgp::WeightFunction::constant(1.0);
  else if (m.weight == "imq")
    r.weight = rcgp::WeightFunction::imq(r.c);
  else
    r.weight = rcgp::WeightFunction::squared_exp(r.c);
  return r;
}

ordered_json model_json(const ResolvedModel& r, const rcgp::FittedModel& fm) {
  ordered_json j;
  j["n"] = fm.n();
  j["lengthscale"] = r.kernel.lengthscale;
  j["signal_variance"] = r.kernel.signal_variance;
  j["sigma2"] = r.sigma2;
  j["c"] = r.c;
  j["weight_beta"] = fm.weight.beta;
  j["optimized"] = r.optimized;
  if (r.optimized) {
    j["search_objective"] = r.search_objective;
    j["search_warning"] = r.warning;
  }
  j["loo_objective"] = rcgp::loo_objective(fm);
  if (fm.weight.kind == rcgp::WeightFunction::Kind::Constant)
    j["log_marginal_likelihood"] = rcgp::gp_log_marginal_likelihood(fm);
  j["log_pseudo_marginal"] = rcgp::log_pseudo_marginal(fm);
  const rcgp::RobustnessCheck rc = rcgp::robustness_check(fm.weight);
  j["weight_bounded"] = rc.bounded;
  return j;
}

int run(int argc, char** argv) {
  CLI::App app{"Robust-and-conjugate Gaussian process toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.set_config("--config", "", "INI file mirroring the options");
  app.allow_config_extras(CLI::config_extras_mode::ignore_all);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "master random seed")
      ->configurable(true);
  app.add_option("--out", g.out_dir, "directory for output files");
  app.add_option("--format", g.format, "json | csv")
      ->check(CLI::IsMember({"json", "csv"}));

  // ---- synth ------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "draw a synthetic dataset");
  int synth_n = 300;
  double synth_noise = std::sqrt(0.3);
  double synth_ell = 1.0, synth_sv = 1.0;
  synth->add_option("--n", synth_n, "number of points");
  synth->add_option("--noise-std", synth_noise, "observation noise std");
  synth->add_option("--lengthscale", synth_ell, "generating lengthscale");
  synth->add_option("--signal-variance", synth_sv,
                    "generating signal variance");

  // ---- fit / predict / loo-opt ------------------------------------------
  DataOpts fit_data;
  ModelOpts fit_model;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model, report diagnostics");
  add_data_opts(fit_cmd, fit_data);
  add_model_opts(fit_cmd, fit_model);

  DataOpts pred_data;
  ModelOpts pred_model;
  std::string query_path;
  int grid_n = 0;
  bool pred_noise = false;
  auto* pred_cmd =
      app.add_subcommand("predict", "fit, then predict at query points");
  add_data_opts(pred_cmd, pred_data);
  add_model_opts(pred_cmd, pred_model);
  pred_cmd->add_option("--query", query_path,
                       "CSV of query points (features only)");
  pred_cmd->add_option("--grid", grid_n,
                       "1-D: predict on a uniform grid over the data range");
  pred_cmd->add_flag("--observation-noise", pred_noise,
                     "add sigma2 to the predictive variance");

  DataOpts loo_data;
  ModelOpts loo_model;
  auto* loo_cmd = app.add_subcommand(
      "loo-opt", "leave-one-out hyperparameter search with trace");
  add_data_opts(loo_cmd, loo_data);
  add_model_opts(loo_cmd, loo_model);

  // ---- pif ---------------------------------------------------------------
  DataOpts pif_data;
  ModelOpts pif_model;
  long long pif_index = -1;
  int pif_points = 100;
  auto* pif_cmd = app.add_subcommand(
      "pif", "posterior influence curve for one contaminated point");
  add_data_opts(pif_cmd, pif_data);
  add_model_opts(pif_cmd, pif_model);
  pif_cmd->add_option("--index", pif_index,
                      "contaminated point (default: middle of the data)");
  pif_cmd->add_option("--points", pif_points, "grid points per side");

  // ---- contaminate --------------------------------------------------------
  DataOpts cont_data;
  std::string cont_regime = "uniform";
  std::string cont_direction = "subtract";
  double cont_fraction = 0.10;
  auto* cont_cmd =
      app.add_subcommand("contaminate", "inject outliers into a dataset");
  add_data_opts(cont_cmd, cont_data);
  cont_cmd->add_option("--regime", cont_regime,
                       "uniform | asymmetric | focused")
      ->check(CLI::IsMember({"uniform", "asymmetric", "focused"}));
  cont_cmd->add_option("--fraction", cont_fraction, "share of points hit");
  cont_cmd->add_option("--direction", cont_direction,
                       "asymmetric shift direction: subtract | add")
      ->check(CLI::IsMember({"subtract", "add"}));

  // ---- svgp ----------------------------------------------------------------
  DataOpts svgp_data;
  ModelOpts svgp_model;
  int svgp_m = 0;
  int svgp_iters = 10;
  std::string svgp_query;
  auto* svgp_cmd = app.add_subcommand(
      "svgp", "sparse variational fit with inducing-point refinement");
  add_data_opts(svgp_cmd, svgp_data);
  add_model_opts(svgp_cmd, svgp_model);
  svgp_cmd->add_option("--inducing", svgp_m,
                       "number of inducing points (default floor(sqrt n))");
  svgp_cmd->add_option("--iterations", svgp_iters,
                       "ascent steps on the inducing locations");
  svgp_cmd->add_option("--query", svgp_query,
                       "CSV of query points (features only)");

  // ---- bo -------------------------------------------------------------------
  std::string bo_objective = "branin";
  std::string bo_surrogate = "imq";
  std::string bo_acq = "ucb";
  int bo_iters = 50, bo_repeats = 10, bo_candidates = 2048, bo_init = 5;
  double bo_lambda = 2.0, bo_p = 0.0;
  int bo_hyper_iters = 15, bo_hyper_restarts = 1;
  auto* bo_cmd =
      app.add_subcommand("bo", "Bayesian optimisation of a test objective");
  bo_cmd->add_option("--objective", bo_objective,
                     "branin | camel | mccormick | rosenbrock");
  bo_cmd->add_option("--surrogate", bo_surrogate, "constant | imq | se")
      ->check(CLI::IsMember({"constant", "imq", "se"}));
  bo_cmd->add_option("--acquisition", bo_acq, "ucb | pi")
      ->check(CLI::IsMember({"ucb", "pi"}));
  bo_cmd->add_option("--iterations", bo_iters, "queries after the design");
  bo_cmd->add_option("--repeats", bo_repeats, "independent runs");
  bo_cmd->add_option("--lambda", bo_lambda, "UCB exploration weight");
  bo_cmd->add_option("--contamination-p", bo_p,
                     "chance an evaluation is an outlier");
  bo_cmd->add_option("--candidates", bo_candidates, "acquisition budget");
  bo_cmd->add_option("--initial-design", bo_init, "random initial queries");
  bo_cmd->add_option("--hyper-iterations", bo_hyper_iters,
                     "per-refit optimizer iterations");
  bo_cmd->add_option("--hyper-restarts", bo_hyper_restarts,
                     "per-refit optimizer restarts");

  // ---- benchmark --------------------------------------------------------------
  DataOpts bench_data;
  std::string bench_setting = "none";
  std::string bench_models = "gp,rcgp";
  int bench_splits = 50;
  double bench_fraction = 0.2, bench_epsilon = 0.05, bench_cont_frac = 0.10;
  int bench_hyper_iters = 30, bench_hyper_restarts = 1, bench_inducing = 10;
  auto* bench_cmd = app.add_subcommand(
      "benchmark", "repeated-split comparison of the model families");
  add_data_opts(bench_cmd, bench_data);
  bench_cmd->add_option("--setting", bench_setting,
                        "none | uniform | asymmetric | focused")
      ->check(CLI::IsMember({"none", "uniform", "asymmetric", "focused"}));
  bench_cmd->add_option("--models", bench_models,
                        "comma list from gp,rcgp,svgp,rcsvgp");
  bench_cmd->add_option("--splits", bench_splits, "train/test resamples");
  bench_cmd->add_option("--test-fraction", bench_fraction, "held-out share");
  bench_cmd->add_option("--epsilon", bench_epsilon, "threshold share");
  bench_cmd->add_option("--contamination-fraction", bench_cont_frac,
                        "share of training points hit");
  bench_cmd->add_option("--hyper-iterations", bench_hyper_iters,
                        "optimizer iterations per split");
  bench_cmd->add_option("--hyper-restarts", bench_hyper_restarts,
                        "optimizer restarts per split");
  bench_cmd->add_option("--inducing-iterations", bench_inducing,
                        "inducing-point ascent steps (sparse models)");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    const rcgp::Dataset d = rcgp::synth_generate(
        g.seed, synth_n, rcgp::KernelParams(synth_ell, synth_sv), synth_noise);
    emit(g, "synth.csv", dataset_csv(d));
    return 0;
  }

  if (fit_cmd->parsed()) {
    const rcgp::Dataset d = resolve_dataset(fit_data, g.seed);
    const ResolvedModel r = resolve_model(fit_model, d, g.seed);
    const rcgp::FittedModel fm =
        rcgp::fit(d.X, d.y, r.kernel, r.mean, r.sigma2, r.weight);
    emit(g, g.format == "json" ? "fit.json" : "fit.csv",
         render(g, model_json(r, fm)));
    return 0;
  }

  if (pred_cmd->parsed()) {
    const rcgp::Dataset d = resolve_dataset(pred_data, g.seed);
    const ResolvedModel r = resolve_model(pred_model, d, g.seed);
    const rcgp::FittedModel fm =
        rcgp::fit(d.X, d.y, r.kernel, r.mean, r.sigma2, r.weight);

    Eigen::MatrixXd Xq;
    if (!query_path.empty()) {
      Xq = load_features(query_path);
    } else if (grid_n > 1) {
      if (d.X.cols() != 1)
        throw std::invalid_argument("--grid needs 1-D inputs");
      Xq.resize(grid_n, 1);
      const double lo = d.X.col(0).minCoeff(), hi = d.X.col(0).maxCoeff();
      for (int i = 0; i < grid_n; ++i)
        Xq(i, 0) = lo + (hi - lo) * i / (grid_n - 1.0);
    } else {
      throw std::invalid_argument("predict: provide --query or --grid");
    }
    if (Xq.cols() != d.X.cols())
      throw std::invalid_argument("query dimension mismatch");

    Eigen::VectorXd mu, var;
    rcgp::predict_diag(fm, Xq, mu, var, pred_noise);
    std::ostringstream out;
    out.precision(10);
    for (Eigen::Index j = 0; j < Xq.cols(); ++j) out << 'x' << (j + 1) << ',';
    out << "mean,variance\n";
    for (Eigen::Index i = 0; i < Xq.rows(); ++i) {
      for (Eigen::Index j = 0; j < Xq.cols(); ++j) out << Xq(i, j) << ',';
      out << mu[i] << ',' << var[i] << '\n';
    }
    emit(g, "predictions.csv", out.str());
    return 0;
  }

  if (loo_cmd->parsed()) {
    const rcgp::Dataset d = resolve_dataset(loo_data, g.seed);
    ModelOpts m = loo_model;
    m.optimize = true;
    const ResolvedModel r = resolve_model(m, d, g.seed);
    const rcgp::FittedModel fm =
        rcgp::fit(d.X, d.y, r.kernel, r.mean, r.sigma2, r.weight);
    emit(g, g.format == "json" ? "loo_opt.json" : "loo_opt.csv",
         render(g, model_json(r, fm)));
    return 0;
  }

  if (pif_cmd->parsed()) {
    const rcgp::Dataset d = resolve_dataset(pif_data, g.seed);
    const Eigen::Index m =
        pif_index >= 0 ? static_cast<Eigen::Index>(pif_index)
                       : d.y.size() / 2;
    const ResolvedModel r = resolve_model(pif_model, d, g.seed);
    rcgp::ModelConfig cfg;
    cfg.kernel = r.kernel;
    cfg.sigma2 = r.sigma2;
    cfg.weight = r.weight;
    cfg.mean = r.mean;
    const Eigen::VectorXd grid = rcgp::default_pif_grid(d.y, m, pif_points);
    const rcgp::PifCurve curve = rcgp::pif_curve(d.X, d.y, cfg, m, grid);
    std::ostringstream out;
    out.precision(10);
    out << "y_contaminated,kl\n";
    for (Eigen::Index i = 0; i < curve.grid.size(); ++i)
      out << curve.grid[i] << ',' << curve.kl[i] << '\n';
    emit(g, "pif.csv", out.str());
    return 0;
  }

  if (cont_cmd->parsed()) {
    const rcgp::Dataset d = resolve_dataset(cont_data, g.seed);
    rcgp::ContaminationSpec spec;
    spec.fraction = cont_fraction;
    spec.seed = g.seed;
    if (cont_regime == "uniform")
      spec.regime = rcgp::ContaminationSpec::Regime::Uniform;
    else if (cont_regime == "asymmetric")
      spec.regime = rcgp::ContaminationSpec::Regime::Asymmetric;
    else
      spec.regime = rcgp::ContaminationSpec::Regime::Focused;
    spec.direction = cont_direction == "add"
                         ? rcgp::ContaminationSpec::Direction::Add
                         : rcgp::ContaminationSpec::Direction::Subtract;
    const rcgp::Contaminated c = rcgp::contaminate(d.y, d.X, spec);
    rcgp::Dataset out = d;
    out.y = c.y;
    out.X = c.X;
    out.latent.resize(0);
    emit(g, "contaminated.csv", dataset_csv(out, &c.mask));
    return 0;
  }

  if (svgp_cmd->parsed()) {
    const rcgp::Dataset d = resolve_dataset(svgp_data, g.seed);
    const ResolvedModel r = resolve_model(svgp_model, d, g.seed);
    const auto m = svgp_m > 0
                       ? static_cast<Eigen::Index>(svgp_m)
                       : static_cast<Eigen::Index>(std::floor(
                             std::sqrt(static_cast<double>(d.y.size()))));
    rcgp::InducingSet ind =
        rcgp::InducingSet::subset_of_data(d.X, std::max<Eigen::Index>(m, 1),
                                          g.seed);
    const double elbo0 = rcgp::elbo_objective(d.X, d.y, r.kernel, r.mean,
                                              r.sigma2, r.weight, ind.U);
    double elbo1 = elbo0;
    if (svgp_iters > 0) {
      const rcgp::InducingSearchResult sr = rcgp::optimize_inducing(
          d.X, d.y, r.kernel, r.mean, r.sigma2, r.weight, ind, svgp_iters);
      ind = sr.inducing;
      elbo1 = sr.objective;
    }
    const rcgp::VariationalPosterior vp =
        rcgp::rcsvgp_fit(d.X, d.y, r.kernel, r.mean, r.sigma2, r.weight, ind);

    ordered_json j;
    j["n"] = d.y.size();
    j["inducing"] = ind.U.rows();
    j["elbo_initial"] = elbo0;
    j["elbo_final"] = elbo1;
    j["lengthscale"] = r.kernel.lengthscale;
    j["signal_variance"] = r.kernel.signal_variance;
    j["sigma2"] = r.sigma2;
    j["c"] = r.c;
    std::vector<std::vector<double>> locs;
    for (Eigen::Index i = 0; i < ind.U.rows(); ++i) {
      std::vector<double> row(ind.U.cols());
      for (Eigen::Index jj = 0; jj < ind.U.cols(); ++jj)
        row[static_cast<std::size_t>(jj)] = ind.U(i, jj);
      locs.push_back(std::move(row));
    }
    j["inducing_points"] = locs;
    emit(g, g.format == "json" ? "svgp.json" : "svgp.csv", render(g, j));

    if (!svgp_query.empty()) {
      const Eigen::MatrixXd Xq = load_features(svgp_query);
      const rcgp::GaussianBelief gb = rcgp::rcsvgp_predict(vp, Xq);
      std::ostringstream out;
      out.precision(10);
      out << "mean,variance\n";
      for (Eigen::Index i = 0; i < gb.mean.size(); ++i)
        out << gb.mean[i] << ',' << gb.cov(i, i) << '\n';
      emit(g, "svgp_predictions.csv", out.str());
    }
    return 0;
  }

  if (bo_cmd->parsed()) {
    const rcgp::TestObjective obj = rcgp::TestObjective::by_name(bo_objective);
    rcgp::BOOptions opts;
    opts.lambda = bo_lambda;
    opts.candidates = bo_candidates;
    opts.initial_design = bo_init;
    opts.contamination_p = bo_p;
    opts.hyper.max_iterations = bo_hyper_iters;
    opts.hyper.restarts = bo_hyper_restarts;
    const rcgp::Acquisition acq = bo_acq == "pi" ? rcgp::Acquisition::Pi
                                                 : rcgp::Acquisition::Ucb;
    const rcgp::WeightFunction::Kind kind = weight_kind(bo_surrogate);

    if (bo_repeats < 1) throw std::invalid_argument("bo: repeats >= 1");
    const int total = bo_init + bo_iters;
    Eigen::MatrixXd regret(total, bo_repeats);
    double seconds = 0.0;
    for (int rep = 0; rep < bo_repeats; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const rcgp::BOState st = rcgp::run_bo(
          obj, kind, acq, bo_iters, g.seed + static_cast<std::uint64_t>(rep),
          opts);
      seconds += std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
      regret.col(rep) = st.cum_regret;
    }
    std::ostringstream out;
    out.precision(10);
    out << "iteration,mean_regret,std_regret,seconds\n";
    const double sec_per_rep = seconds / bo_repeats;
    for (int i = 0; i < total; ++i) {
      const double mu = regret.row(i).mean();
      const double sd = std::sqrt(
          (regret.row(i).array() - mu).square().mean());
      out << i << ',' << mu << ',' << sd << ',' << sec_per_rep << '\n';
    }
    emit(g, "regret.csv", out.str());
    return 0;
  }

  if (bench_cmd->parsed()) {
    rcgp::BenchmarkConfig cfg;
    cfg.dataset = resolve_dataset(bench_data, g.seed);
    cfg.splits = bench_splits;
    cfg.test_fraction = bench_fraction;
    cfg.seed = g.seed;
    cfg.epsilon = bench_epsilon;
    cfg.hyper.max_iterations = bench_hyper_iters;
    cfg.hyper.restarts = bench_hyper_restarts;
    cfg.inducing_iterations = bench_inducing;

    if (bench_setting != "none") {
      rcgp::ContaminationSpec spec;
      spec.fraction = bench_cont_frac;
      spec.seed = g.seed;
      if (bench_setting == "uniform")
        spec.regime = rcgp::ContaminationSpec::Regime::Uniform;
      else if (bench_setting == "asymmetric")
        spec.regime = rcgp::ContaminationSpec::Regime::Asymmetric;
      else
        spec.regime = rcgp::ContaminationSpec::Regime::Focused;
      cfg.contamination = spec;
    }

    cfg.models.clear();
    std::stringstream ss(bench_models);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok == "gp") cfg.models.push_back(rcgp::ModelKind::GP);
      else if (tok == "rcgp") cfg.models.push_back(rcgp::ModelKind::RCGP);
      else if (tok == "svgp") cfg.models.push_back(rcgp::ModelKind::SVGP);
      else if (tok == "rcsvgp") cfg.models.push_back(rcgp::ModelKind::RCSVGP);
      else throw std::invalid_argument("benchmark: unknown model '" + tok +
                                       "'");
    }

    const rcgp::BenchmarkReport rep = rcgp::run_benchmark(cfg);
    emit(g, "benchmark_" + rep.setting + ".csv", rcgp::benchmark_csv(rep));
    if (!g.out_dir.empty())
      emit(g, "per_split_" + rep.setting + ".csv", rcgp::per_split_csv(rep));
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
