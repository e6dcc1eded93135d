#include <doctest.h>

#include <cmath>
#include <random>

#include "blmm/adaptation.hpp"
#include "blmm/diagnostics.hpp"
#include "blmm/errors.hpp"
#include "blmm/sampler.hpp"
#include "test_support.hpp"

using namespace blmm;

namespace {

Matrix pooled_draws(const std::vector<ChainResult>& chains) {
  Eigen::Index rows = 0;
  for (const auto& c : chains) rows += c.draws.rows();
  Matrix out(rows, chains.front().draws.cols());
  Eigen::Index r = 0;
  for (const auto& c : chains) {
    out.middleRows(r, c.draws.rows()) = c.draws;
    r += c.draws.rows();
  }
  return out;
}

Vector column_variance(const Matrix& m) {
  const Vector mean = m.colwise().mean();
  return ((m.rowwise() - mean.transpose()).array().square().colwise().sum() / (m.rows() - 1)).matrix();
}

}  // namespace

TEST_CASE("leapfrog matches the harmonic oscillator") {
  const test::GaussianTarget target(Vector::Zero(1), Matrix::Identity(1, 1));
  const Vector inv_metric = Vector::Ones(1);
  PhasePoint z = make_phase_point(Vector::Zero(1), target);
  Vector p = Vector::Ones(1);
  const double eps = 0.1;
  const double h0 = hamiltonian(z, p, inv_metric);
  for (int step = 1; step <= 20; ++step) {
    REQUIRE(leapfrog(z, p, eps, inv_metric, target));
    // Exact flow from (0, 1): q = sin t, p = cos t.
    const double t = step * eps;
    CHECK(std::abs(z.theta(0) - std::sin(t)) < step * eps * eps * eps);
    CHECK(std::abs(p(0) - std::cos(t)) < step * eps * eps * eps);
    CHECK(std::abs(hamiltonian(z, p, inv_metric) - h0) < eps * eps);
  }
}

TEST_CASE("leapfrog fixed point") {
  const test::GaussianTarget target(Vector::Zero(3), Matrix::Identity(3, 3));
  PhasePoint z = make_phase_point(Vector::Zero(3), target);
  Vector p = Vector::Zero(3);
  REQUIRE(leapfrog(z, p, 0.3, Vector::Ones(3), target));
  CHECK(z.theta == Vector::Zero(3));
  CHECK(p == Vector::Zero(3));
}

TEST_CASE("leapfrog is reversible") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix cov(3, 3);
  cov << 2.0, 0.3, 0.1,
         0.3, 1.0, -0.2,
         0.1, -0.2, 0.5;
  const test::GaussianTarget target(Vector::Zero(3), cov);
  for (int trial = 0; trial < 50; ++trial) {
    Vector theta(3), p(3), inv_metric(3);
    for (int i = 0; i < 3; ++i) {
      theta(i) = normal(rng);
      p(i) = normal(rng);
      inv_metric(i) = 0.5 + std::abs(normal(rng));
    }
    PhasePoint z = make_phase_point(theta, target);
    const Vector p0 = p;
    for (int s = 0; s < 25; ++s) leapfrog(z, p, 0.1, inv_metric, target);
    p = -p;
    for (int s = 0; s < 25; ++s) leapfrog(z, p, 0.1, inv_metric, target);
    CHECK((z.theta - theta).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((p + p0).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("acceptance tends to one as the step size vanishes") {
  const test::GaussianTarget target(Vector::Zero(3), Matrix::Identity(3, 3));
  Rng rng(3);
  double prev_gap = 1.0;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    double worst = 1.0;
    for (int t = 0; t < 200; ++t) {
      PhasePoint z = make_phase_point(Vector::Constant(3, 0.7), target);
      const auto info = hmc_iteration(z, eps, 1, Vector::Ones(3), target, rng);
      worst = std::min(worst, info.accept_stat);
    }
    CHECK(1.0 - worst <= prev_gap);
    prev_gap = 1.0 - worst;
  }
  CHECK(prev_gap < 1e-6);
}

TEST_CASE("divergent proposals are rejected and flagged") {
  const test::GaussianTarget target(Vector::Zero(2), Matrix::Identity(2, 2));
  Rng rng(1);
  PhasePoint z = make_phase_point(Eigen::Vector2d(1.0, -1.0), target);
  const Vector start = z.theta;
  const auto info = hmc_iteration(z, 50.0, 10, Vector::Ones(2), target, rng);
  CHECK(info.divergent);
  CHECK_FALSE(info.accepted);
  CHECK(info.accept_stat == 0.0);
  CHECK(z.theta == start);
}

TEST_CASE("standard normal in three dimensions") {
  const test::GaussianTarget target(Vector::Zero(3), Matrix::Identity(3, 3));
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.iter = 21000;
  cfg.warmup = 1000;
  cfg.seed = 2024;
  const auto chains = sample(target, cfg);
  const Matrix d = pooled_draws(chains);
  REQUIRE(d.rows() == 20000);
  const Vector mean = d.colwise().mean();
  const Vector var = column_variance(d);
  for (int i = 0; i < 3; ++i) {
    CHECK(std::abs(mean(i)) < 0.05);
    CHECK(std::abs(var(i) - 1.0) < 0.1);
  }
  CHECK(chains[0].adaptation.warmup_accept > 0.6);
  CHECK(chains[0].adaptation.warmup_accept < 0.95);
  CHECK(chains[0].mean_accept > 0.6);
  CHECK(chains[0].mean_accept < 0.95);
}

TEST_CASE("correlated Gaussian, rho = 0.8") {
  const test::GaussianTarget target(Vector::Zero(2), test::correlation_2x2(0.8));
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.iter = 4000;
  cfg.seed = 99;
  const auto chains = sample(target, cfg);
  const Matrix d = pooled_draws(chains);
  const Vector mean = d.colwise().mean();
  const Matrix c = d.rowwise() - mean.transpose();
  const Matrix cov = c.transpose() * c / (d.rows() - 1);
  CHECK(std::abs(cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1)) - 0.8) < 0.03);
  for (int i = 0; i < 2; ++i) {
    std::vector<Vector> per_chain;
    for (const auto& ch : chains) per_chain.emplace_back(ch.draws.col(i));
    const auto r = split_rhat(per_chain);
    REQUIRE(r);
    CHECK(*r < 1.05);
  }
}

TEST_CASE("mass matrix adapts to the target scales") {
  Matrix cov = Matrix::Zero(2, 2);
  cov(0, 0) = 1.0;
  cov(1, 1) = 100.0;
  const test::GaussianTarget target(Vector::Zero(2), cov);
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.iter = 2000;
  cfg.seed = 5;
  for (const auto& ch : sample(target, cfg)) {
    const double ratio = ch.adaptation.inv_metric[1] / ch.adaptation.inv_metric[0];
    CHECK(ratio > 50.0);
    CHECK(ratio < 200.0);
  }
}

TEST_CASE("warmup = 0 keeps the unit metric and heuristic step size") {
  const test::GaussianTarget target(Vector::Zero(2), Matrix::Identity(2, 2));
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.iter = 50;
  cfg.warmup = 0;
  const auto ch = run_chain(target, cfg, 0);
  CHECK(ch.adaptation.inv_metric == std::vector<double>{1.0, 1.0});
  CHECK(ch.adaptation.step_size > 0.0);
  CHECK(ch.draws.rows() == 50);
}

TEST_CASE("sampling is deterministic and independent of the thread count") {
  const test::GaussianTarget target(Eigen::Vector2d(1.0, -2.0), test::correlation_2x2(0.3));
  SamplerConfig cfg;
  cfg.chains = 3;
  cfg.iter = 300;
  cfg.seed = 17;
  cfg.threads = 1;
  const auto a = sample(target, cfg);
  cfg.threads = 3;
  const auto b = sample(target, cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t c = 0; c < a.size(); ++c) {
    CHECK(a[c].draws == b[c].draws);
    CHECK(a[c].seed == chain_seed(17, static_cast<int>(c)));
  }
  CHECK(a[0].draws != a[1].draws);
  cfg.seed = 18;
  CHECK(sample(target, cfg)[0].draws != a[0].draws);
}

TEST_CASE("initialization failure") {
  const test::NanTarget target;
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iter = 10;
  CHECK_THROWS_AS(sample(target, cfg), InitializationError);
}

TEST_CASE("sampler config validation") {
  SamplerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.warmup_iterations() == 1000);
  cfg.warmup = 2000;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.warmup = std::nullopt;
  cfg.chains = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.chains = 1;
  cfg.target_accept = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("dual averaging converges on a monotone acceptance curve") {
  // Acceptance exp(-step) hits 0.8 at step = -log 0.8.
  DualAveraging da(0.8);
  double step = 1.0;
  da.restart(step);
  for (int i = 0; i < 2000; ++i) step = da.update(std::exp(-step));
  CHECK(da.final_step_size() == doctest::Approx(-std::log(0.8)).epsilon(0.05));
}

TEST_CASE("Welford variance matches the two-pass formula") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> normal(3.0, 2.0);
  Matrix xs(500, 3);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs.data()[i] = normal(rng);
  WelfordVariance w(3);
  for (Eigen::Index r = 0; r < xs.rows(); ++r) w.add(xs.row(r).transpose());
  CHECK(w.count() == 500);
  CHECK((w.variance() - column_variance(xs)).cwiseAbs().maxCoeff() < 1e-10);
  const Vector reg = regularized_inverse_metric(w);
  const Vector expect = (500.0 / 505.0) * column_variance(xs).array() + 1e-3 * 5.0 / 505.0;
  CHECK((reg - expect).cwiseAbs().maxCoeff() < 1e-10);
  w.reset();
  CHECK(w.count() == 0);
}

TEST_CASE("warmup schedule windows") {
  const WarmupSchedule s(1000);
  const auto& w = s.windows();
  REQUIRE(!w.empty());
  CHECK(w.front().begin == 75);
  CHECK(w.front().end == 100);
  CHECK(w.back().end == 950);
  for (std::size_t i = 1; i < w.size(); ++i) {
    CHECK(w[i].begin == w[i - 1].end);
    if (i + 1 < w.size()) CHECK(w[i].end - w[i].begin == 2 * (w[i - 1].end - w[i - 1].begin));
  }
  CHECK_FALSE(s.in_window(74));
  CHECK(s.in_window(75));
  CHECK(s.ends_window(99));
  CHECK(s.ends_window(949));
  CHECK_FALSE(s.in_window(950));

  const WarmupSchedule short_s(100);
  REQUIRE(!short_s.windows().empty());
  CHECK(short_s.windows().front().begin == 15);
  CHECK(short_s.windows().back().end == 90);

  CHECK(WarmupSchedule(10).windows().empty());
  CHECK_FALSE(WarmupSchedule(0).adapts_step_size());
}

TEST_CASE("mixed model draws respect the parameter constraints") {
  const auto p = test::small_problem(Family::MatrixForm, 10, 8, 21);
  SamplerConfig cfg;
  cfg.chains = 2;
  cfg.iter = 400;
  cfg.seed = 3;
  const auto fit = run_chains(p.sim.data, p.spec, cfg);
  CHECK(fit.draws.num_chains() == 2);
  CHECK(fit.draws.draws_per_chain() == 200);
  CHECK(fit.draws.first_iteration == 201);
  for (std::size_t j = 0; j < fit.draws.names.size(); ++j) {
    const auto& n = fit.draws.names[j];
    for (const auto& m : fit.draws.chains) {
      const Vector col = m.col(static_cast<Eigen::Index>(j));
      CHECK(col.allFinite());
      if (n.rfind("sigma_", 0) == 0) CHECK(col.minCoeff() > 0.0);
      if (n.rfind("rho_", 0) == 0 || n.rfind("L_", 0) == 0) CHECK(col.cwiseAbs().maxCoeff() < 1.0);
    }
  }
  const auto again = run_chains(p.sim.data, p.spec, cfg);
  CHECK(again.draws.chains[0] == fit.draws.chains[0]);
  CHECK(again.draws.chains[1] == fit.draws.chains[1]);
}
