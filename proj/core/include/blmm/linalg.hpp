#pragma once

#include <Eigen/Dense>

namespace blmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Pivots at or below this value are treated as loss of positive definiteness.
inline constexpr double kCholeskyPivotTolerance = 1e-12;

/// Lower-triangular Cholesky factor L with L * L^T == c.
///
/// Throws DimensionError for non-square or asymmetric input and
/// NotPositiveDefiniteError naming the first failing leading minor.
Matrix cholesky(const Matrix& c);

/// diag(sigma) * l, i.e. Stan's diag_pre_multiply. The product with its own
/// transpose is the covariance matrix with standard deviations sigma and
/// correlation l * l^T.
Matrix scale_cholesky(const Vector& sigma, const Matrix& l);

/// Maps i.i.d. standard normal columns z (n x m) to N(0, Sigma) columns,
/// Sigma = scale_cholesky(sigma, l) * scale_cholesky(sigma, l)^T.
Matrix correlated_draws(const Vector& sigma, const Matrix& l, const Matrix& z);

/// Unnormalized LKJ log density of the correlation matrix l * l^T,
/// expressed on its Cholesky factor:
///
///   sum_{k=2..n} (n - k + 2 eta - 2) * log l[k][k]
///
/// The normalizing constant depends only on (n, eta) and is omitted.
/// Throws InvalidFactorError when a row norm differs from 1 by more than 1e-8
/// or the factor is not lower triangular with a positive diagonal.
double lkj_cholesky_logpdf(const Matrix& l, double eta);

/// True when l is lower triangular with positive diagonal and unit rows.
bool is_correlation_cholesky(const Matrix& l, double tol = 1e-8);

}  // namespace blmm
