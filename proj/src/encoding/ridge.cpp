// SPDX-License-Identifier: Apache-2.0
#include "vidbrain/encoding/ridge.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace vidbrain::encoding {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> view(const Matrix& m) { return {m.values.data(), Eigen::Index(m.rows), Eigen::Index(m.cols)}; }

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("ridge: lambda must be finite and >= 0");
}

}  // namespace

std::vector<double> Matrix::col(std::size_t c) const {
  std::vector<double> out(rows);
  for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
  return out;
}

const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid{0.1, 1.0, 100.0};
  return grid;
}

struct RidgeSolver::Impl {
  Eigen::MatrixXd u;  // n x r
  Eigen::VectorXd s;  // r
  Eigen::MatrixXd v;  // p x r
  std::size_t n = 0, p = 0, rank = 0;

  Eigen::VectorXd shrink(double lambda) const {
    Eigen::VectorXd d(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k) d[k] = s[k] > 0 ? s[k] / (s[k] * s[k] + lambda) : 0.0;
    return d;
  }
};

RidgeSolver::RidgeSolver(const Matrix& x) : impl_(std::make_unique<Impl>()) {
  if (x.rows == 0 || x.cols == 0) throw std::invalid_argument("ridge: empty design matrix");
  for (double v : x.values)
    if (!std::isfinite(v)) throw std::invalid_argument("ridge: non-finite entry in X");
  const Eigen::MatrixXd m = view(x);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  impl_->n = x.rows;
  impl_->p = x.cols;
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(x.rows, x.cols)) * std::numeric_limits<double>::epsilon() *
                     (s.size() ? s[0] : 0.0);
  std::size_t r = 0;
  while (r < static_cast<std::size_t>(s.size()) && s[r] > tol) ++r;
  impl_->rank = r;
  // Directions below the rank tolerance are dropped; they carry no signal
  // for lambda > 0 beyond rounding noise.
  impl_->u = svd.matrixU().leftCols(r);
  impl_->s = s.head(r);
  impl_->v = svd.matrixV().leftCols(r);
}

RidgeSolver::~RidgeSolver() = default;
RidgeSolver::RidgeSolver(RidgeSolver&&) noexcept = default;
RidgeSolver& RidgeSolver::operator=(RidgeSolver&&) noexcept = default;

std::size_t RidgeSolver::rank() const { return impl_->rank; }
std::size_t RidgeSolver::rows() const { return impl_->n; }
std::size_t RidgeSolver::cols() const { return impl_->p; }

std::vector<double> RidgeSolver::fit(std::span<const double> y, double lambda) const {
  check_lambda(lambda);
  if (y.size() != impl_->n) throw std::invalid_argument("ridge: y length does not match X rows");
  if (lambda == 0.0 && impl_->rank < impl_->p)
    throw std::invalid_argument("ridge: lambda = 0 with rank-deficient X (rank " + std::to_string(impl_->rank) +
                                " < " + std::to_string(impl_->p) + ") is ill-posed");
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), Eigen::Index(y.size()));
  const Eigen::VectorXd b = impl_->v * (impl_->shrink(lambda).asDiagonal() * (impl_->u.transpose() * yv));
  return {b.data(), b.data() + b.size()};
}

Matrix RidgeSolver::fit_columns(const Matrix& y, std::span<const double> lambdas) const {
  if (y.rows != impl_->n) throw std::invalid_argument("ridge: Y rows do not match X rows");
  if (lambdas.size() != y.cols) throw std::invalid_argument("ridge: need one lambda per target column");
  Matrix b(impl_->p, y.cols);
  const Eigen::MatrixXd uty = impl_->u.transpose() * Eigen::MatrixXd(view(y));
  for (std::size_t c = 0; c < y.cols; ++c) {
    check_lambda(lambdas[c]);
    if (lambdas[c] == 0.0 && impl_->rank < impl_->p)
      throw std::invalid_argument("ridge: lambda = 0 with rank-deficient X is ill-posed");
    const Eigen::VectorXd bc = impl_->v * (impl_->shrink(lambdas[c]).asDiagonal() * uty.col(Eigen::Index(c)));
    for (std::size_t i = 0; i < impl_->p; ++i) b.at(i, c) = bc[Eigen::Index(i)];
  }
  return b;
}

Matrix RidgeSolver::loo_residuals(const Matrix& y, double lambda) const {
  check_lambda(lambda);
  if (y.rows != impl_->n) throw std::invalid_argument("ridge: Y rows do not match X rows");
  // H = U diag(s^2 / (s^2 + lambda)) U^T.
  Eigen::VectorXd g(impl_->s.size());
  for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = impl_->s[k] * impl_->shrink(lambda)[k];
  const Eigen::MatrixXd ym = view(y);
  const Eigen::MatrixXd fitted = impl_->u * (g.asDiagonal() * (impl_->u.transpose() * ym));
  Matrix out(y.rows, y.cols);
  for (std::size_t i = 0; i < y.rows; ++i) {
    const double h = (impl_->u.row(Eigen::Index(i)).array().square() * g.transpose().array()).sum();
    const double denom = 1.0 - h;
    if (std::abs(denom) <= 1e-12) throw std::domain_error("ridge: leverage h_ii = 1 at row " + std::to_string(i));
    for (std::size_t c = 0; c < y.cols; ++c) out.at(i, c) = (ym(Eigen::Index(i), Eigen::Index(c)) - fitted(Eigen::Index(i), Eigen::Index(c))) / denom;
  }
  return out;
}

std::vector<double> ridge_fit(const Matrix& x, std::span<const double> y, double lambda) {
  return RidgeSolver(x).fit(y, lambda);
}

std::vector<double> loo_select_lambdas(const RidgeSolver& solver, const Matrix& y, std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("loo_select_lambda: empty lambda grid");
  std::vector<double> best(y.cols, 0.0), best_mse(y.cols, std::numeric_limits<double>::infinity());
  for (double lambda : grid) {
    const Matrix e = solver.loo_residuals(y, lambda);
    for (std::size_t c = 0; c < y.cols; ++c) {
      double mse = 0.0;
      for (std::size_t i = 0; i < y.rows; ++i) mse += e.at(i, c) * e.at(i, c);
      mse /= static_cast<double>(y.rows);
      const double tie = 1e-12 * std::max(1.0, best_mse[c]);
      const bool better = mse < best_mse[c] - tie;
      const bool tied = std::abs(mse - best_mse[c]) <= tie && lambda > best[c];
      if (better || tied) {
        best[c] = lambda;
        best_mse[c] = std::min(mse, best_mse[c]);
      }
    }
  }
  return best;
}

double loo_select_lambda(const Matrix& x, std::span<const double> y, std::span<const double> grid) {
  Matrix ym(y.size(), 1);
  ym.values.assign(y.begin(), y.end());
  return loo_select_lambdas(RidgeSolver(x), ym, grid)[0];
}

PearsonResult pearson_r(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) throw std::invalid_argument("pearson_r: series lengths differ");
  if (y.size() < 2) throw std::invalid_argument("pearson_r: need at least 2 points");
  const double n = static_cast<double>(y.size());
  double my = 0, mh = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    my += y[i];
    mh += yhat[i];
  }
  my /= n;
  mh /= n;
  double syy = 0, shh = 0, syh = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = y[i] - my, b = yhat[i] - mh;
    syy += a * a;
    shh += b * b;
    syh += a * b;
  }
  const double scale_y = std::max(1.0, std::abs(my)), scale_h = std::max(1.0, std::abs(mh));
  if (syy <= 1e-24 * n * scale_y * scale_y || shh <= 1e-24 * n * scale_h * scale_h) return {0.0, true};
  return {std::clamp(syh / std::sqrt(syy * shh), -1.0, 1.0), false};
}

}  // namespace vidbrain::encoding
