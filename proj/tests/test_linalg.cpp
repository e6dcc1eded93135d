#include <doctest.h>

#include <cmath>
#include <random>

#include "blmm/errors.hpp"
#include "blmm/linalg.hpp"
#include "test_support.hpp"

using namespace blmm;

TEST_CASE("cholesky of the 2x2 worked example") {
  const Matrix c = test::correlation_2x2(-0.5);
  const Matrix l = cholesky(c);
  CHECK(l(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(l(0, 1) == 0.0);
  CHECK(l(1, 0) == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(std::abs(l(1, 1) - 0.8660254) < 1e-6);
  CHECK(((l * l.transpose()) - c).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("cholesky closed form for rho = 0.3") {
  const Matrix l = cholesky(test::correlation_2x2(0.3));
  CHECK(l(1, 0) == doctest::Approx(0.3));
  CHECK(std::abs(l(1, 1) - std::sqrt(1.0 - 0.09)) < 1e-14);
  CHECK(std::abs(l(1, 1) - 0.9539392) < 1e-7);
}

TEST_CASE("cholesky of identity is identity") {
  for (int n = 1; n <= 6; ++n) {
    CHECK(cholesky(Matrix::Identity(n, n)).isApprox(Matrix::Identity(n, n)));
  }
}

TEST_CASE("cholesky reproduces random SPD matrices") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 8;
    Matrix a(n, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
    Matrix c = a * a.transpose() + n * Matrix::Identity(n, n);
    c = 0.5 * (c + c.transpose());
    const Matrix l = cholesky(c);
    CHECK(((l * l.transpose()) - c).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff()));
    for (int i = 0; i < n; ++i) {
      CHECK(l(i, i) > 0.0);
      for (int j = i + 1; j < n; ++j) CHECK(l(i, j) == 0.0);
    }
  }
}

TEST_CASE("cholesky reports the failing leading minor") {
  Matrix c(3, 3);
  c << 1.0, 0.0, 0.0,
       0.0, 1.0, 1.0,
       0.0, 1.0, 1.0;
  try {
    cholesky(c);
    FAIL("expected NotPositiveDefiniteError");
  } catch (const NotPositiveDefiniteError& e) {
    CHECK(e.leading_minor() == 3);
  }
  Matrix neg(2, 2);
  neg << -1.0, 0.0, 0.0, 1.0;
  try {
    cholesky(neg);
    FAIL("expected NotPositiveDefiniteError");
  } catch (const NotPositiveDefiniteError& e) {
    CHECK(e.leading_minor() == 1);
  }
  CHECK_THROWS_AS(cholesky(Matrix::Ones(2, 3)), DimensionError);
  Matrix asym(2, 2);
  asym << 1.0, 0.2, 0.1, 1.0;
  CHECK_THROWS_AS(cholesky(asym), DimensionError);
}

TEST_CASE("scale_cholesky") {
  const Matrix l = cholesky(test::correlation_2x2(0.4));
  CHECK(scale_cholesky(Vector::Ones(2), l).isApprox(l));

  Vector s(2);
  s << 2.0, 3.0;
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 2.0;
  expect(1, 1) = 3.0;
  CHECK(scale_cholesky(s, Matrix::Identity(2, 2)).isApprox(expect));

  const double rho = -0.3, s0 = 0.25, s1 = 0.07;
  Vector sig(2);
  sig << s0, s1;
  const Matrix lam = scale_cholesky(sig, cholesky(test::correlation_2x2(rho)));
  const Matrix cov = lam * lam.transpose();
  CHECK(cov(0, 0) == doctest::Approx(s0 * s0));
  CHECK(cov(1, 1) == doctest::Approx(s1 * s1));
  CHECK(cov(0, 1) == doctest::Approx(rho * s0 * s1));
  CHECK(cov(1, 0) == doctest::Approx(rho * s0 * s1));

  CHECK_THROWS_AS(scale_cholesky(Vector::Ones(3), l), DimensionError);
}

TEST_CASE("correlated_draws") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(2, 50);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
  CHECK(correlated_draws(Vector::Ones(2), Matrix::Identity(2, 2), z).isApprox(z));

  const Matrix empty = correlated_draws(Vector::Ones(2), Matrix::Identity(2, 2), Matrix(2, 0));
  CHECK(empty.rows() == 2);
  CHECK(empty.cols() == 0);

  const int m = 100000;
  Matrix big(2, m);
  for (Eigen::Index i = 0; i < big.size(); ++i) big.data()[i] = normal(rng);
  const Matrix x = correlated_draws(Vector::Ones(2), cholesky(test::correlation_2x2(-0.5)), big);
  const Vector mean = x.rowwise().mean();
  const Matrix centered = x.colwise() - mean;
  const Matrix cov = centered * centered.transpose() / (m - 1);
  const double r = cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1));
  CHECK(std::abs(r + 0.5) < 0.02);

  CHECK_THROWS_AS(correlated_draws(Vector::Ones(2), Matrix::Identity(2, 2), Matrix::Ones(3, 4)),
                  DimensionError);
}

TEST_CASE("correlated_draws covariance within three standard errors") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 4; ++trial) {
    const int n = 2 + trial;
    Vector sigma(n);
    for (int i = 0; i < n; ++i) sigma(i) = 0.5 + i;
    const Matrix l = cholesky(test::random_correlation(n, rng));
    const Matrix lam = scale_cholesky(sigma, l);
    const Matrix target = lam * lam.transpose();
    const int m = 100000;
    Matrix z(n, m);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = normal(rng);
    const Matrix x = correlated_draws(sigma, l, z);
    const Matrix cov = x * x.transpose() / m;  // known zero mean
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        // Var(x_i x_j) = S_ii S_jj + S_ij^2 for a zero-mean Gaussian.
        const double se = std::sqrt((target(i, i) * target(j, j) + target(i, j) * target(i, j)) / m);
        CHECK(std::abs(cov(i, j) - target(i, j)) < 3.0 * se);
      }
    }
  }
}

TEST_CASE("lkj_cholesky_logpdf values") {
  const Matrix l = cholesky(test::correlation_2x2(0.5));
  CHECK(lkj_cholesky_logpdf(l, 1.0) == doctest::Approx(0.0));
  CHECK(lkj_cholesky_logpdf(l, 2.0) == doctest::Approx(std::log(0.75)));
  CHECK(lkj_cholesky_logpdf(l, 2.0) == doctest::Approx(-0.2877).epsilon(1e-4));
  for (double eta : {0.5, 1.0, 2.0, 7.0}) {
    CHECK(lkj_cholesky_logpdf(Matrix::Identity(4, 4), eta) == 0.0);
  }
}

TEST_CASE("lkj density of rho matches a numerically normalized marginal") {
  // For n = 2 the marginal of rho is proportional to (1 - rho^2)^(eta - 1).
  const double eta = 2.0;
  const int steps = 200000;
  double z = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double r = -1.0 + (i + 0.5) * 2.0 / steps;
    z += std::pow(1.0 - r * r, eta - 1.0) * 2.0 / steps;
  }
  CHECK(z == doctest::Approx(4.0 / 3.0).epsilon(1e-6));
  for (double rho : {-0.9, -0.3, 0.0, 0.5, 0.8}) {
    const double density = std::pow(1.0 - rho * rho, eta - 1.0) / z;
    const double at_zero = 1.0 / z;
    const double lp = lkj_cholesky_logpdf(cholesky(test::correlation_2x2(rho)), eta);
    CHECK(lp == doctest::Approx(std::log(density / at_zero)).epsilon(1e-10));
  }
}

TEST_CASE("lkj strictly decreases in |rho| for eta > 1") {
  for (double eta : {1.5, 2.0, 4.0}) {
    double prev = lkj_cholesky_logpdf(Matrix::Identity(2, 2), eta);
    for (double rho = 0.05; rho < 0.99; rho += 0.05) {
      const double pos = lkj_cholesky_logpdf(cholesky(test::correlation_2x2(rho)), eta);
      const double neg = lkj_cholesky_logpdf(cholesky(test::correlation_2x2(-rho)), eta);
      CHECK(pos < prev);
      CHECK(pos == doctest::Approx(neg));
      prev = pos;
    }
  }
}

TEST_CASE("lkj rejects invalid factors") {
  Matrix bad = Matrix::Identity(2, 2);
  bad(1, 0) = 0.5;
  CHECK_THROWS_AS(lkj_cholesky_logpdf(bad, 2.0), InvalidFactorError);
  Matrix upper = Matrix::Identity(2, 2);
  upper(0, 1) = 0.1;
  CHECK_THROWS_AS(lkj_cholesky_logpdf(upper, 2.0), InvalidFactorError);
  CHECK_THROWS_AS(lkj_cholesky_logpdf(Matrix::Identity(2, 2), 0.0), DomainError);
  Matrix slightly = cholesky(test::correlation_2x2(0.2));
  slightly(1, 1) += 1e-10;
  CHECK_NOTHROW(lkj_cholesky_logpdf(slightly, 2.0));
}
