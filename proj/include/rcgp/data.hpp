#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rcgp/kernels.hpp"
#include "rcgp/rng.hpp"

namespace rcgp {

struct Dataset {
  std::string name;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd latent;  // noiseless function values (synthetic only)

  bool has_latent() const { return latent.size() == y.size() && y.size() > 0; }
};

/*! Load a comma-delimited CSV with a header row.  Every column must parse
 * as a number; offending rows are reported by 1-based data-row number. */
inline Dataset load_csv(const std::string& path,
                        const std::string& target_column,
                        char delimiter = ',') {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("load_csv: empty file " + path);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> headers;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, delimiter)) headers.push_back(cell);
  }
  int target = -1;
  for (std::size_t j = 0; j < headers.size(); ++j)
    if (headers[j] == target_column) target = static_cast<int>(j);
  if (target < 0)
    throw std::invalid_argument("load_csv: no column named '" +
                                target_column + "' in " + path);

  std::vector<std::vector<double>> rows;
  int row_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++row_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    std::size_t col = 0;
    while (std::getline(ss, cell, delimiter)) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != cell.size() || cell.empty())
        throw std::invalid_argument("load_csv: non-numeric cell at row " +
                                    std::to_string(row_no) + ", column '" +
                                    (col < headers.size()
                                         ? headers[col]
                                         : std::to_string(col + 1)) +
                                    "'");
      row.push_back(v);
      ++col;
    }
    if (row.size() != headers.size())
      throw std::invalid_argument("load_csv: row " + std::to_string(row_no) +
                                  " has " + std::to_string(row.size()) +
                                  " cells, expected " +
                                  std::to_string(headers.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw std::invalid_argument("load_csv: no data rows in " + path);

  Dataset d;
  d.name = path;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(headers.size());
  d.X.resize(n, p - 1);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (j == target)
        d.y[i] = rows[i][j];
      else
        d.X(i, k++) = rows[i][j];
    }
  }
  return d;
}

/*! Exact draw from a zero-mean SE-kernel GP on a uniform grid over
 * [-5, 5], plus i.i.d. Gaussian noise.  The noiseless values are kept in
 * `latent` so synthetic benchmarks can score against ground truth. */
inline Dataset synth_generate(std::uint64_t seed, Eigen::Index n,
                              const KernelParams& kernel = KernelParams(),
                              double noise_std = std::sqrt(0.3)) {
  if (n < 1) throw std::invalid_argument("synth_generate: n >= 1");
  if (noise_std < 0.0)
    throw std::invalid_argument("synth_generate: noise_std >= 0");
  Dataset d;
  d.name = "synthetic";
  d.X.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i)
    d.X(i, 0) = n == 1 ? 0.0
                       : -5.0 + 10.0 * static_cast<double>(i) /
                                    static_cast<double>(n - 1);
  const Eigen::MatrixXd K = gram_matrix(kernel, d.X);
  Eigen::LLT<Eigen::MatrixXd> chol(K);
  if (chol.info() != Eigen::Success)
    throw std::runtime_error("synth_generate: Gram factorisation failed");
  Rng rng(seed);
  d.latent = chol.matrixL() * rng.normal_vector(n);
  d.y = d.latent + noise_std * rng.normal_vector(n);
  return d;
}

/*! Affine standardisation fitted on training data only. */
struct Standardizer {
  Eigen::VectorXd x_mean, x_scale;  // scale = std, or 1 for flat features
  double y_mean = 0.0, y_scale = 1.0;
  std::vector<int> zero_variance_features;

  Eigen::MatrixXd transform_x(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    Eigen::MatrixXd out = X;
    out.rowwise() -= x_mean.transpose();
    out.array().rowwise() /= x_scale.transpose().array();
    for (int j : zero_variance_features) out.col(j).setZero();
    return out;
  }
  Eigen::VectorXd transform_y(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    return (y.array() - y_mean) / y_scale;
  }
  Eigen::MatrixXd invert_x(const Eigen::Ref<const Eigen::MatrixXd>& Z) const {
    Eigen::MatrixXd out = Z;
    out.array().rowwise() *= x_scale.transpose().array();
    out.rowwise() += x_mean.transpose();
    return out;
  }
  Eigen::VectorXd invert_y(const Eigen::Ref<const Eigen::VectorXd>& z) const {
    return z.array() * y_scale + y_mean;
  }
};

inline Standardizer fit_standardizer(const Dataset& train) {
  if (train.y.size() == 0)
    throw std::invalid_argument("fit_standardizer: empty training set");
  Standardizer s;
  s.x_mean = train.X.colwise().mean();
  s.x_scale.resize(train.X.cols());
  for (Eigen::Index j = 0; j < train.X.cols(); ++j) {
    const double var =
        (train.X.col(j).array() - s.x_mean[j]).square().mean();
    const double sd = std::sqrt(var);
    if (sd < 1e-12) {
      s.x_scale[j] = 1.0;
      s.zero_variance_features.push_back(static_cast<int>(j));
    } else {
      s.x_scale[j] = sd;
    }
  }
  s.y_mean = train.y.mean();
  const double yvar = (train.y.array() - s.y_mean).square().mean();
  s.y_scale = yvar < 1e-24 ? 1.0 : std::sqrt(yvar);
  return s;
}

/*! Standardize train and test with statistics from train only.  The
 * latent column (when present) goes through the target transform so
 * ground-truth scoring stays on the standardized scale. */
inline std::pair<Dataset, Dataset> standardize(const Dataset& train,
                                               const Dataset& test,
                                               Standardizer& transform) {
  transform = fit_standardizer(train);
  Dataset tr = train, te = test;
  tr.X = transform.transform_x(train.X);
  tr.y = transform.transform_y(train.y);
  if (train.has_latent()) tr.latent = transform.transform_y(train.latent);
  if (test.y.size() > 0) {
    te.X = transform.transform_x(test.X);
    te.y = transform.transform_y(test.y);
    if (test.has_latent()) te.latent = transform.transform_y(test.latent);
  }
  return {tr, te};
}

}  // namespace rcgp
