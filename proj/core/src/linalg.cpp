#include "blmm/linalg.hpp"

#include <cmath>
#include <string>

#include "blmm/errors.hpp"

namespace blmm {

Matrix cholesky(const Matrix& c) {
  if (c.rows() != c.cols()) {
    throw DimensionError("cholesky: matrix is " + std::to_string(c.rows()) +
                         "x" + std::to_string(c.cols()) + ", expected square");
  }
  const Eigen::Index n = c.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      const double scale = std::max({1.0, std::abs(c(i, j)), std::abs(c(j, i))});
      if (std::abs(c(i, j) - c(j, i)) > 1e-12 * scale) {
        throw DimensionError("cholesky: matrix is not symmetric");
      }
    }
  }

  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = c(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > kCholeskyPivotTolerance)) {
      throw NotPositiveDefiniteError(static_cast<std::size_t>(j + 1), pivot);
    }
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = c(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / d;
    }
  }
  return l;
}

Matrix scale_cholesky(const Vector& sigma, const Matrix& l) {
  if (l.rows() != l.cols() || sigma.size() != l.rows()) {
    throw DimensionError("scale_cholesky: sigma has length " +
                         std::to_string(sigma.size()) + " but factor is " +
                         std::to_string(l.rows()) + "x" +
                         std::to_string(l.cols()));
  }
  return sigma.asDiagonal() * l;
}

Matrix correlated_draws(const Vector& sigma, const Matrix& l, const Matrix& z) {
  if (z.rows() != l.rows()) {
    throw DimensionError("correlated_draws: z has " + std::to_string(z.rows()) +
                         " rows, factor has dimension " +
                         std::to_string(l.rows()));
  }
  const Matrix lambda = scale_cholesky(sigma, l);
  if (z.cols() == 0) return Matrix(l.rows(), 0);
  return lambda.triangularView<Eigen::Lower>() * z;
}

bool is_correlation_cholesky(const Matrix& l, double tol) {
  if (l.rows() != l.cols()) return false;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0)) return false;
    for (Eigen::Index j = i + 1; j < l.cols(); ++j) {
      if (l(i, j) != 0.0) return false;
    }
    if (std::abs(l.row(i).squaredNorm() - 1.0) > tol) return false;
  }
  return true;
}

double lkj_cholesky_logpdf(const Matrix& l, double eta) {
  if (!(eta > 0.0)) throw DomainError("lkj_cholesky_logpdf: eta must be > 0");
  if (!is_correlation_cholesky(l)) {
    throw InvalidFactorError(
        "lkj_cholesky_logpdf: not the Cholesky factor of a correlation matrix");
  }
  const auto n = static_cast<double>(l.rows());
  double lp = 0.0;
  // 0-based row k corresponds to the 1-based index k + 1 in the density.
  for (Eigen::Index k = 1; k < l.rows(); ++k) {
    const double coef = n - static_cast<double>(k + 1) + 2.0 * eta - 2.0;
    lp += coef * std::log(l(k, k));
  }
  return lp;
}

}  // namespace blmm
