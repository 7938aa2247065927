#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "cadrepair/errors.h"
#include "cadrepair/neural.h"
#include "cadrepair/rng.h"

namespace cadrepair {

Matrix Matrix::from_latents(std::span<const LatentVector> rows) {
  Matrix m(rows.size(), kLatentDim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy(rows[r].values.begin(), rows[r].values.end(), m.data.begin() + static_cast<std::ptrdiff_t>(r * kLatentDim));
  }
  return m;
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto src = row(idx[k]);
    std::copy(src.begin(), src.end(), out.data.begin() + static_cast<std::ptrdiff_t>(k * cols));
  }
  return out;
}

LinearRegressor LinearRegressor::identity(std::size_t dim) {
  LinearRegressor r;
  r.in_dim = r.out_dim = dim;
  r.weight.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) r.weight[i * dim + i] = 1.0;
  r.bias.assign(dim, 0.0);
  return r;
}

LinearRegressor fit_linear_regressor(const Matrix& inputs, const Matrix& targets, double ridge) {
  if (inputs.rows != targets.rows) throw Error(Errc::DimensionMismatch, "input/target row count mismatch");
  if (inputs.rows == 0 || inputs.cols == 0 || targets.cols == 0) {
    throw Error(Errc::DimensionMismatch, "empty regression problem");
  }
  if (!(ridge >= 0.0)) throw Error(Errc::BadRange, "ridge must be non-negative");

  const auto n = static_cast<Eigen::Index>(inputs.rows);
  const auto d = static_cast<Eigen::Index>(inputs.cols);
  const auto k = static_cast<Eigen::Index>(targets.cols);
  const Eigen::Index extra = ridge > 0.0 ? d : 0;

  // [X 1; sqrt(ridge) I 0] theta = [Y; 0]
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n + extra, d + 1);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + extra, k);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < d; ++c) design(r, c) = inputs(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    design(r, d) = 1.0;
    for (Eigen::Index c = 0; c < k; ++c) rhs(r, c) = targets(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
  }
  const double root = std::sqrt(ridge);
  for (Eigen::Index i = 0; i < extra; ++i) design(n + i, i) = root;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < d + 1) {
    throw Error(Errc::RankDeficient, "design matrix has rank " + std::to_string(qr.rank()) + " < " +
                                         std::to_string(d + 1) + "; use a positive ridge");
  }
  const Eigen::MatrixXd theta = qr.solve(rhs);

  LinearRegressor r;
  r.in_dim = inputs.cols;
  r.out_dim = targets.cols;
  r.weight.resize(r.in_dim * r.out_dim);
  r.bias.resize(r.out_dim);
  for (std::size_t o = 0; o < r.out_dim; ++o) {
    for (std::size_t i = 0; i < r.in_dim; ++i) {
      r.weight[o * r.in_dim + i] = theta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o));
    }
    r.bias[o] = theta(d, static_cast<Eigen::Index>(o));
  }
  return r;
}

Matrix predict_rows(const LinearRegressor& r, const Matrix& inputs) {
  if (inputs.cols != r.in_dim) throw Error(Errc::DimensionMismatch, "regressor input width mismatch");
  Matrix out(inputs.rows, r.out_dim);
  for (std::size_t row = 0; row < inputs.rows; ++row) {
    const std::vector<double> y = regressor_predict(r, inputs.row(row));
    std::copy(y.begin(), y.end(), out.data.begin() + static_cast<std::ptrdiff_t>(row * r.out_dim));
  }
  return out;
}

double r2_score(const Matrix& targets, const Matrix& predictions) {
  if (targets.rows != predictions.rows || targets.cols != predictions.cols || targets.rows == 0) {
    throw Error(Errc::DimensionMismatch, "r2 needs equally shaped, non-empty matrices");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < targets.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < targets.rows; ++r) mean += targets(r, c);
    mean /= static_cast<double>(targets.rows);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t r = 0; r < targets.rows; ++r) {
      const double e = targets(r, c) - predictions(r, c);
      const double t = targets(r, c) - mean;
      ss_res += e * e;
      ss_tot += t * t;
    }
    if (ss_tot > 0.0) {
      total += 1.0 - ss_res / ss_tot;
    } else {
      total += ss_res == 0.0 ? 1.0 : 0.0;
    }
  }
  return total / static_cast<double>(targets.cols);
}

double mse(const Matrix& targets, const Matrix& predictions) {
  if (targets.data.size() != predictions.data.size() || targets.data.empty()) {
    throw Error(Errc::DimensionMismatch, "mse needs equally shaped, non-empty matrices");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < targets.data.size(); ++i) {
    const double e = targets.data[i] - predictions.data[i];
    acc += e * e;
  }
  return acc / static_cast<double>(targets.data.size());
}

RegressionFit fit_and_score(const Matrix& inputs, const Matrix& targets, double ridge, double split,
                            std::uint64_t seed) {
  if (!(split > 0.0 && split < 1.0)) throw Error(Errc::BadRange, "split fraction must lie in (0, 1)");
  if (inputs.rows != targets.rows) throw Error(Errc::DimensionMismatch, "input/target row count mismatch");
  if (inputs.rows < 2) throw Error(Errc::TooFewRows, "need at least two rows to split");
  std::vector<std::size_t> order(inputs.rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(split * static_cast<double>(order.size()))), 1, order.size() - 1);

  RegressionFit fit;
  fit.train_rows.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  fit.test_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  const Matrix x_train = inputs.select_rows(fit.train_rows);
  const Matrix y_train = targets.select_rows(fit.train_rows);
  const Matrix x_test = inputs.select_rows(fit.test_rows);
  const Matrix y_test = targets.select_rows(fit.test_rows);
  fit.model = fit_linear_regressor(x_train, y_train, ridge);
  const Matrix p_train = predict_rows(fit.model, x_train);
  const Matrix p_test = predict_rows(fit.model, x_test);
  fit.metrics.train_r2 = r2_score(y_train, p_train);
  fit.metrics.train_mse = mse(y_train, p_train);
  fit.metrics.test_r2 = r2_score(y_test, p_test);
  fit.metrics.test_mse = mse(y_test, p_test);
  fit.metrics.n_train = fit.train_rows.size();
  fit.metrics.n_test = fit.test_rows.size();
  return fit;
}

std::vector<double> regressor_predict(const LinearRegressor& r, std::span<const double> z) {
  if (z.size() != r.in_dim) {
    throw Error(Errc::DimensionMismatch, "regressor expects width " + std::to_string(r.in_dim) + ", got " +
                                             std::to_string(z.size()));
  }
  std::vector<double> y(r.out_dim);
  for (std::size_t o = 0; o < r.out_dim; ++o) {
    double acc = r.bias[o];
    const double* w = r.weight.data() + o * r.in_dim;
    for (std::size_t i = 0; i < r.in_dim; ++i) acc += w[i] * z[i];
    y[o] = acc;
  }
  return y;
}

LatentVector regressor_predict(const LinearRegressor& r, const LatentVector& z) {
  return LatentVector::from(regressor_predict(r, z.span()));
}

LossGrad regressor_loss_grad(const LinearRegressor& r, std::span<const double> z, bool stop_gradient_y) {
  if (r.in_dim != r.out_dim) throw Error(Errc::DimensionMismatch, "regressor loss needs a square map");
  const std::vector<double> y = regressor_predict(r, z);
  const std::size_t n = z.size();
  std::vector<double> residual(n);
  LossGrad out;
  for (std::size_t i = 0; i < n; ++i) {
    residual[i] = y[i] - z[i];
    out.loss += residual[i] * residual[i];
  }
  out.grad.assign(n, 0.0);
  if (stop_gradient_y) {
    for (std::size_t i = 0; i < n; ++i) out.grad[i] = -2.0 * residual[i];
    return out;
  }
  // 2 (W - I)^T residual
  for (std::size_t o = 0; o < n; ++o) {
    const double e = 2.0 * residual[o];
    const double* w = r.weight.data() + o * n;
    for (std::size_t i = 0; i < n; ++i) out.grad[i] += w[i] * e;
    out.grad[o] -= e;
  }
  return out;
}

}  // namespace cadrepair
