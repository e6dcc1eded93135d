#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "blmm/diagnostics.hpp"
#include "blmm/errors.hpp"
#include "test_support.hpp"

using namespace blmm;

namespace {

std::vector<Vector> normal_chains(int chains, int n, std::mt19937_64& rng,
                                  std::vector<double> means = {}) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Vector> out;
  for (int c = 0; c < chains; ++c) {
    Vector v(n);
    const double m = means.empty() ? 0.0 : means[static_cast<std::size_t>(c)];
    for (int i = 0; i < n; ++i) v(i) = m + normal(rng);
    out.push_back(v);
  }
  return out;
}

// Independent evaluation of the split statistic straight from its definition.
double rhat_oracle(const std::vector<Vector>& chains) {
  std::vector<std::vector<double>> seqs;
  for (const auto& c : chains) {
    const auto half = c.size() / 2;
    seqs.emplace_back(c.data(), c.data() + half);
    seqs.emplace_back(c.data() + c.size() - half, c.data() + c.size());
  }
  const double n = static_cast<double>(seqs[0].size());
  const double m = static_cast<double>(seqs.size());
  std::vector<double> means, vars;
  for (const auto& s : seqs) {
    double mean = 0.0;
    for (double x : s) mean += x;
    mean /= n;
    double v = 0.0;
    for (double x : s) v += (x - mean) * (x - mean);
    means.push_back(mean);
    vars.push_back(v / (n - 1));
  }
  double grand = 0.0;
  for (double x : means) grand += x;
  grand /= m;
  double b = 0.0;
  for (double x : means) b += (x - grand) * (x - grand);
  b *= n / (m - 1);
  double w = 0.0;
  for (double x : vars) w += x;
  w /= m;
  return std::sqrt(((n - 1) / n * w + b / n) / w);
}

DrawsMatrix make_draws(int chains, int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  DrawsMatrix d;
  d.names = {"beta[1]", "sigma_e", "rho_u[2,1]", "lp__", "divergent__"};
  d.first_iteration = 1001;
  for (int c = 0; c < chains; ++c) {
    Matrix m(n, 5);
    for (int t = 0; t < n; ++t) {
      m(t, 0) = 6.0 + 0.1 * normal(rng);
      m(t, 1) = std::exp(0.1 * normal(rng) - 0.5);
      m(t, 2) = std::tanh(normal(rng));
      m(t, 3) = -100.0 + normal(rng);
      m(t, 4) = 0.0;
    }
    d.chains.push_back(m);
  }
  return d;
}

}  // namespace

TEST_CASE("split R-hat on i.i.d. chains") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto chains = normal_chains(4, 2000, rng);
    const auto r = split_rhat(chains);
    REQUIRE(r);
    CHECK(*r >= 0.99);
    CHECK(*r <= 1.05);
    CHECK(*r == doctest::Approx(rhat_oracle(chains)).epsilon(1e-12));
  }
}

TEST_CASE("split R-hat with separated means") {
  std::mt19937_64 rng(2);
  const auto chains = normal_chains(2, 1000, rng, {0.0, 10.0});
  const auto r = split_rhat(chains);
  REQUIRE(r);
  CHECK(*r > 3.0);
  CHECK(*r == doctest::Approx(rhat_oracle(chains)).epsilon(1e-12));
}

TEST_CASE("split R-hat formula on a hand-made example") {
  // Halves {0,2},{0,2},{4,6},{4,6}: means 1,1,5,5; variances 2; n = 2.
  const std::vector<Vector> chains{Eigen::Vector4d(0, 2, 0, 2), Eigen::Vector4d(4, 6, 4, 6)};
  const double w = 2.0, n = 2.0;
  const double b = n * (4.0 * 4.0 / 3.0);  // n * sample variance of {1,1,5,5}
  CHECK(*split_rhat(chains) == doctest::Approx(std::sqrt(((n - 1) / n * w + b / n) / w)));
}

TEST_CASE("split R-hat degenerate cases") {
  const std::vector<Vector> constant(3, Vector::Constant(10, 2.5));
  CHECK_FALSE(split_rhat(constant).has_value());
  CHECK_THROWS_AS(split_rhat({Vector::Zero(3), Vector::Zero(3)}), DiagnosticError);
  CHECK_THROWS_AS(split_rhat({Vector::Zero(8), Vector::Zero(6)}), DiagnosticError);
  CHECK_THROWS_AS(split_rhat({}), DiagnosticError);
  std::mt19937_64 rng(3);
  const auto odd = normal_chains(2, 11, rng);
  CHECK(*split_rhat(odd) == doctest::Approx(rhat_oracle(odd)).epsilon(1e-12));
}

TEST_CASE("quantiles follow linear interpolation") {
  Vector v(100);
  for (int i = 0; i < 100; ++i) v(i) = 100 - i;
  CHECK(quantile(v, 0.5) == doctest::Approx(50.5));
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 100.0);
  CHECK(quantile(v, 0.025) == doctest::Approx(1.0 + 99 * 0.025));
  const std::vector<double> ps{0.025, 0.5, 0.975};
  const auto qs = quantiles(v, ps);
  CHECK(qs[1] == doctest::Approx(50.5));
  CHECK_THROWS_AS(quantile(Vector(0), 0.5), DiagnosticError);
  CHECK_THROWS_AS(quantile(v, 1.5), DiagnosticError);
  CHECK_THROWS_AS(quantile(v, -0.1), DiagnosticError);
}

TEST_CASE("quantiles are monotone and affine equivariant") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial * 3;
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
    const double a = 0.1 + 5.0 * unif(rng), b = normal(rng);
    double prev = -HUGE_VAL;
    for (double p = 0.0; p <= 1.0; p += 0.01) {
      const double q = quantile(v, p);
      CHECK(q >= prev);
      prev = q;
      const Vector t = (a * v.array() + b).matrix();
      CHECK(quantile(t, p) == doctest::Approx(a * q + b).epsilon(1e-12));
    }
  }
}

TEST_CASE("prob_below") {
  const Eigen::Vector4d v(-1.0, 0.0, 0.0, 2.0);
  CHECK(prob_below(v, 0.0) == 0.25);
  CHECK(prob_below(v, HUGE_VAL) == 1.0);
  CHECK(prob_below(v, -HUGE_VAL) == 0.0);
  CHECK_THROWS_AS(prob_below(Vector(0), 0.0), DiagnosticError);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector w(500);
  for (int i = 0; i < 500; ++i) w(i) = normal(rng);
  double prev = 0.0;
  for (double t = -4.0; t <= 4.0; t += 0.05) {
    const double p = prob_below(w, t);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("summarize") {
  std::mt19937_64 rng(6);
  const auto d = make_draws(4, 200, rng);
  const auto all = summarize(d);
  REQUIRE(all.size() == 3);
  CHECK(all[0].name == "beta[1]");
  for (const auto& r : all) {
    const Vector pooled = d.pooled(r.name);
    CHECK(r.q2_5 <= r.q50);
    CHECK(r.q50 <= r.q97_5);
    CHECK(r.mean >= pooled.minCoeff());
    CHECK(r.mean <= pooled.maxCoeff());
    CHECK(r.mean == doctest::Approx(pooled.mean()));
    REQUIRE(r.rhat);
  }
  // Rows follow column order, not request order.
  const auto picked = summarize(d, {"rho_u[2,1]", "beta[1]"});
  REQUIRE(picked.size() == 2);
  CHECK(picked[0].name == "beta[1]");
  CHECK_THROWS_AS(summarize(d, {"gamma"}), ValidationError);

  DrawsMatrix c;
  c.names = {"k"};
  c.chains = {Matrix::Constant(20, 1, 4.2)};
  const auto row = summarize(c).at(0);
  CHECK(row.mean == doctest::Approx(4.2));
  CHECK_FALSE(row.rhat.has_value());
}

TEST_CASE("summary renderers") {
  std::vector<SummaryRow> rows{{"beta[1]", 6.06, 6.0, 6.06, 6.11, 1.0004},
                               {"rho_u[2,1]", -0.5, -0.9, -0.51, 0.2, std::nullopt}};
  std::ostringstream text, csv;
  write_summary_text(rows, text);
  write_summary_csv(rows, csv);
  CHECK(text.str().find("beta[1]") != std::string::npos);
  CHECK(text.str().find("NA") != std::string::npos);
  CHECK(csv.str() ==
        "name,mean,2.5%,50%,97.5%,Rhat\n"
        "beta[1],6.06,6,6.06,6.11,1.0004\n"
        "\"rho_u[2,1]\",-0.5,-0.9,-0.51,0.2,NA\n");
}

TEST_CASE("trace export cardinality and round trip") {
  std::mt19937_64 rng(7);
  const auto d = make_draws(4, 1000, rng);
  std::stringstream s;
  trace_export(d, {"beta[1]"}, s);
  std::string line;
  int rows = -1;
  std::stringstream copy(s.str());
  while (std::getline(copy, line)) ++rows;
  CHECK(rows == 4000);

  const auto back = read_trace(s);
  CHECK(back.names == std::vector<std::string>{"beta[1]"});
  CHECK(back.first_iteration == 1001);
  REQUIRE(back.num_chains() == 4);
  for (std::size_t c = 0; c < 4; ++c) CHECK(back.chains[c].col(0) == d.chains[c].col(0));

  std::stringstream s2;
  trace_export(d, {"beta[1]", "sigma_e", "rho_u[2,1]"}, s2);
  const auto back2 = read_trace(s2);
  CHECK(back2.names.size() == 3);
  CHECK(back2.chains[2].col(2) == d.chains[2].col(2));

  std::stringstream bad("chain,iteration,parameter,value\n1,1001,x\n");
  CHECK_THROWS_AS(read_trace(bad), SchemaError);
  std::stringstream gap("chain,iteration,parameter,value\n1,1,x,0\n1,5,x,0\n");
  CHECK_THROWS_AS(read_trace(gap), SchemaError);
}

TEST_CASE("chain CSV round trip and corruption") {
  std::mt19937_64 rng(8);
  const auto d = make_draws(1, 30, rng);
  std::stringstream s;
  write_chain_csv(d, 0, s);
  const auto back = read_chain_csv(s, "mem.csv");
  CHECK(back.names == d.names);
  CHECK(back.values == d.chains[0]);

  std::stringstream ragged("a,b\n1,2\n3\n");
  try {
    read_chain_csv(ragged, "chain_9.csv");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("chain_9.csv") != std::string::npos);
  }
  std::stringstream junk("a,b\n1,zz\n");
  CHECK_THROWS_AS(read_chain_csv(junk, "x"), SchemaError);
}
