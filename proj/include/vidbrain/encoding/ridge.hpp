// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <vector>

namespace vidbrain::encoding {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::vector<double> col(std::size_t c) const;
};

/// The default grid {0.1, 1, 100}.
const std::vector<double>& default_lambda_grid();

/// Thin SVD of X shared by every target column. All solves are exact
/// minimizers of ||Xb - y||^2 + lambda ||b||^2.
class RidgeSolver {
 public:
  explicit RidgeSolver(const Matrix& x);
  ~RidgeSolver();
  RidgeSolver(RidgeSolver&&) noexcept;
  RidgeSolver& operator=(RidgeSolver&&) noexcept;

  std::size_t rank() const;
  std::size_t rows() const;
  std::size_t cols() const;

  /// Throws std::invalid_argument for lambda < 0, or lambda = 0 with a
  /// rank-deficient X.
  std::vector<double> fit(std::span<const double> y, double lambda) const;
  /// Coefficients [p, Y.cols] with one lambda per target column.
  Matrix fit_columns(const Matrix& y, std::span<const double> lambdas) const;
  /// Closed-form leave-one-out residuals e_i / (1 - h_ii) for every column
  /// of Y. Throws std::domain_error if some h_ii equals 1.
  Matrix loo_residuals(const Matrix& y, double lambda) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::vector<double> ridge_fit(const Matrix& x, std::span<const double> y, double lambda);

/// Lambda minimizing the mean squared LOO residual; ties go to the larger
/// lambda. Throws std::invalid_argument for an empty grid.
double loo_select_lambda(const Matrix& x, std::span<const double> y, std::span<const double> grid);
/// Per-column selection sharing one factorization.
std::vector<double> loo_select_lambdas(const RidgeSolver& solver, const Matrix& y, std::span<const double> grid);

struct PearsonResult {
  double r = 0.0;
  bool degenerate = false;  // one series is constant; r is reported as 0
};

/// Throws std::invalid_argument for unequal lengths or fewer than 2 points.
PearsonResult pearson_r(std::span<const double> y, std::span<const double> yhat);

}  // namespace vidbrain::encoding
