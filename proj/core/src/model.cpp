#include "blmm/model.hpp"

#include <cmath>
#include <numbers>

#include "blmm/errors.hpp"

namespace blmm {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

// Forward-mode scalar used to differentiate the correlation-factor transform
// one direction at a time.
struct Dual {
  double v = 0.0;
  double d = 0.0;
  Dual() = default;
  Dual(double value, double deriv = 0.0) : v(value), d(deriv) {}
};

inline Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
inline Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
inline Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
inline Dual& operator+=(Dual& a, Dual b) { return a = a + b; }
inline Dual sqrt(Dual a) {
  const double s = std::sqrt(a.v);
  return {s, a.d / (2.0 * s)};
}
inline Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
inline Dual tanh(Dual a) {
  const double t = std::tanh(a.v);
  return {t, a.d * (1.0 - t * t)};
}

// log(1 - tanh(y)^2), stable for large |y|.
inline double log_sech2(double y) {
  const double a = std::abs(y);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}
inline Dual log_sech2(Dual y) { return {log_sech2(y.v), -2.0 * std::tanh(y.v) * y.d}; }

using std::log;
using std::sqrt;
using std::tanh;

// Row-major n x n factor from n(n-1)/2 unconstrained values.
template <class T>
void corr_factor(const T* y, int n, T* l, T& log_jac) {
  for (int i = 0; i < n * n; ++i) l[i] = T(0.0);
  if (n == 0) return;
  l[0] = T(1.0);
  std::size_t k = 0;
  for (int i = 1; i < n; ++i) {
    T z = tanh(y[k]);
    log_jac += log_sech2(y[k]);
    ++k;
    l[i * n] = z;
    T sum = z * z;
    for (int j = 1; j < i; ++j) {
      z = tanh(y[k]);
      log_jac += log_sech2(y[k]);
      ++k;
      const T rem = T(1.0) - sum;
      log_jac += T(0.5) * log(rem);
      const T v = z * sqrt(rem);
      l[i * n + j] = v;
      sum += v * v;
    }
    l[i * n + i] = sqrt(T(1.0) - sum);
  }
}

inline std::size_t n_cpc(int n) {
  return static_cast<std::size_t>(n) * static_cast<std::size_t>(n > 0 ? n - 1 : 0) / 2;
}

void check_theta(std::span<const double> theta, std::size_t dim) {
  if (theta.size() != dim) {
    throw DimensionError("unconstrained vector has length " +
                         std::to_string(theta.size()) + ", expected " +
                         std::to_string(dim));
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta[i])) {
      throw DomainError("unconstrained coordinate " + std::to_string(i) +
                        " is not finite");
    }
  }
}

void check_data(const Dataset& data, const ModelSpec& spec) {
  if (data.X.cols() != spec.P) {
    throw DimensionError("design matrix has " + std::to_string(data.X.cols()) +
                         " columns but the model expects P = " +
                         std::to_string(spec.P));
  }
  if (data.Z_u.cols() < spec.n_u || data.Z_w.cols() < spec.n_w) {
    throw DimensionError("random-effects design has too few columns");
  }
  if (data.X.rows() != data.N || data.rt.size() != data.N ||
      static_cast<int>(data.subj.size()) != data.N ||
      static_cast<int>(data.item.size()) != data.N ||
      (spec.n_u > 0 && data.Z_u.rows() != data.N) ||
      (spec.n_w > 0 && data.Z_w.rows() != data.N)) {
    throw DimensionError("dataset columns are not aligned");
  }
}

std::string idx(std::initializer_list<int> is) {
  std::string s = "[";
  bool first = true;
  for (int i : is) {
    if (!first) s += ',';
    s += std::to_string(i);
    first = false;
  }
  return s + "]";
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::FixedEffects: return "fixef";
    case Family::VaryingIntercepts: return "ranint";
    case Family::VaryingInterceptsSlopes: return "ranslp";
    case Family::MatrixForm: return "matrix";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "fixef") return Family::FixedEffects;
  if (name == "ranint") return Family::VaryingIntercepts;
  if (name == "ranslp") return Family::VaryingInterceptsSlopes;
  if (name == "matrix") return Family::MatrixForm;
  throw ValidationError("unknown model '" + std::string(name) +
                        "' (expected fixef, ranint, ranslp or matrix)");
}

ModelSpec ModelSpec::make(Family family, int P, double lkj_eta) {
  ModelSpec s;
  s.family = family;
  s.P = P;
  s.lkj_eta = lkj_eta;
  switch (family) {
    case Family::FixedEffects: s.n_u = s.n_w = 0; break;
    case Family::VaryingIntercepts: s.n_u = s.n_w = 1; break;
    case Family::VaryingInterceptsSlopes: s.n_u = s.n_w = 2; break;
    case Family::MatrixForm: s.n_u = s.n_w = P; break;
  }
  s.validate();
  return s;
}

void ModelSpec::validate() const {
  if (P < 1) throw ValidationError("model needs at least one fixed effect");
  if (!(lkj_eta > 0.0) || !std::isfinite(lkj_eta)) {
    throw ValidationError("lkj_eta must be positive");
  }
  int expected = 0;
  switch (family) {
    case Family::FixedEffects: expected = 0; break;
    case Family::VaryingIntercepts: expected = 1; break;
    case Family::VaryingInterceptsSlopes:
      expected = 2;
      if (P != 2) {
        throw ValidationError("varying intercepts and slopes model needs P = 2, got " +
                              std::to_string(P));
      }
      break;
    case Family::MatrixForm: expected = P; break;
  }
  if (n_u != expected || n_w != expected) {
    throw ValidationError("random-effect dimensions (" + std::to_string(n_u) + ", " +
                          std::to_string(n_w) + ") do not match model " +
                          std::string(family_name(family)));
  }
}

Matrix ParameterState::u() const {
  if (sigma_u.size() == 0) return Matrix(0, z_u.cols());
  return correlated_draws(sigma_u, L_u, z_u);
}

Matrix ParameterState::w() const {
  if (sigma_w.size() == 0) return Matrix(0, z_w.cols());
  return correlated_draws(sigma_w, L_w, z_w);
}

void ParameterState::validate(const ModelSpec& spec, int J, int K) const {
  auto fail = [](const std::string& what) { throw ValidationError(what); };
  if (beta.size() != spec.P) fail("beta has the wrong length");
  for (Eigen::Index i = 0; i < beta.size(); ++i) {
    if (!std::isfinite(beta(i))) fail("beta must be finite");
  }
  if (!(sigma_e > 0.0) || !std::isfinite(sigma_e)) fail("sigma_e must be positive");
  auto check_block = [&](const Vector& sigma, const Matrix& l, const Matrix& z,
                         int n, int groups, const char* tag) {
    const std::string t = tag;
    if (sigma.size() != n) fail("sigma_" + t + " has the wrong length");
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
      if (!(sigma(i) > 0.0) || !std::isfinite(sigma(i))) {
        fail("sigma_" + t + " must be positive");
      }
    }
    if (l.rows() != n || l.cols() != n) fail("L_" + t + " has the wrong shape");
    if (n > 0 && !is_correlation_cholesky(l)) {
      fail("L_" + t + " is not the Cholesky factor of a correlation matrix");
    }
    for (int i = 1; i < n; ++i) {
      for (int j = 0; j < i; ++j) {
        if (!(std::abs(l(i, j)) < 1.0)) fail("L_" + t + " has an entry with |value| >= 1");
      }
    }
    if (z.rows() != n || (n > 0 && z.cols() != groups)) {
      fail("z_" + t + " has the wrong shape");
    }
  };
  check_block(sigma_u, L_u, z_u, spec.n_u, J, "u");
  check_block(sigma_w, L_w, z_w, spec.n_w, K, "w");
}

ParameterLayout::ParameterLayout(const ModelSpec& s, int j, int k)
    : spec(s), J(j), K(k) {
  spec.validate();
  if (spec.n_u > 0 && J < 1) throw DimensionError("J must be positive");
  if (spec.n_w > 0 && K < 1) throw DimensionError("K must be positive");
  std::size_t off = 0;
  beta = off;
  off += static_cast<std::size_t>(spec.P);
  sigma_e = off;
  off += 1;
  sigma_u = off;
  off += static_cast<std::size_t>(spec.n_u);
  sigma_w = off;
  off += static_cast<std::size_t>(spec.n_w);
  cpc_u = off;
  off += n_cpc(spec.n_u);
  cpc_w = off;
  off += n_cpc(spec.n_w);
  z_u = off;
  off += static_cast<std::size_t>(spec.n_u) * static_cast<std::size_t>(J);
  z_w = off;
  off += static_cast<std::size_t>(spec.n_w) * static_cast<std::size_t>(K);
  dim = off;
}

std::size_t unconstrained_dim(const ModelSpec& spec, int J, int K) {
  return ParameterLayout(spec, J, K).dim;
}

Matrix cholesky_corr_constrain(std::span<const double> y, int n, double* log_jacobian) {
  if (y.size() != n_cpc(n)) {
    throw DimensionError("expected " + std::to_string(n_cpc(n)) +
                         " canonical partial correlations, got " +
                         std::to_string(y.size()));
  }
  std::vector<double> buf(static_cast<std::size_t>(n * n));
  double lj = 0.0;
  corr_factor(y.data(), n, buf.data(), lj);
  if (log_jacobian) *log_jacobian += lj;
  Matrix l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) l(i, j) = buf[static_cast<std::size_t>(i * n + j)];
  }
  return l;
}

Vector cholesky_corr_unconstrain(const Matrix& l) {
  const auto n = static_cast<int>(l.rows());
  if (n > 0 && !is_correlation_cholesky(l)) {
    throw InvalidFactorError("not the Cholesky factor of a correlation matrix");
  }
  Vector y(static_cast<Eigen::Index>(n_cpc(n)));
  Eigen::Index k = 0;
  for (int i = 1; i < n; ++i) {
    double sum = l(i, 0) * l(i, 0);
    y(k++) = std::atanh(l(i, 0));
    for (int j = 1; j < i; ++j) {
      y(k++) = std::atanh(l(i, j) / std::sqrt(1.0 - sum));
      sum += l(i, j) * l(i, j);
    }
  }
  return y;
}

ConstrainResult constrain(std::span<const double> theta, const ModelSpec& spec,
                          int J, int K) {
  const ParameterLayout lay(spec, J, K);
  check_theta(theta, lay.dim);
  ConstrainResult r;
  auto& s = r.state;
  s.beta = Eigen::Map<const Vector>(theta.data() + lay.beta, spec.P);
  s.sigma_e = std::exp(theta[lay.sigma_e]);
  r.log_jacobian += theta[lay.sigma_e];
  s.sigma_u.resize(spec.n_u);
  for (int i = 0; i < spec.n_u; ++i) {
    s.sigma_u(i) = std::exp(theta[lay.sigma_u + i]);
    r.log_jacobian += theta[lay.sigma_u + i];
  }
  s.sigma_w.resize(spec.n_w);
  for (int i = 0; i < spec.n_w; ++i) {
    s.sigma_w(i) = std::exp(theta[lay.sigma_w + i]);
    r.log_jacobian += theta[lay.sigma_w + i];
  }
  s.L_u = cholesky_corr_constrain(theta.subspan(lay.cpc_u, n_cpc(spec.n_u)), spec.n_u,
                                  &r.log_jacobian);
  s.L_w = cholesky_corr_constrain(theta.subspan(lay.cpc_w, n_cpc(spec.n_w)), spec.n_w,
                                  &r.log_jacobian);
  s.z_u = Eigen::Map<const Matrix>(theta.data() + lay.z_u, spec.n_u, spec.n_u > 0 ? J : 0);
  s.z_w = Eigen::Map<const Matrix>(theta.data() + lay.z_w, spec.n_w, spec.n_w > 0 ? K : 0);
  return r;
}

Vector unconstrain(const ParameterState& state, const ModelSpec& spec, int J, int K) {
  const ParameterLayout lay(spec, J, K);
  state.validate(spec, J, K);
  Vector theta(static_cast<Eigen::Index>(lay.dim));
  auto at = [&](std::size_t i) -> double& { return theta(static_cast<Eigen::Index>(i)); };
  for (int p = 0; p < spec.P; ++p) at(lay.beta + p) = state.beta(p);
  at(lay.sigma_e) = std::log(state.sigma_e);
  for (int i = 0; i < spec.n_u; ++i) at(lay.sigma_u + i) = std::log(state.sigma_u(i));
  for (int i = 0; i < spec.n_w; ++i) at(lay.sigma_w + i) = std::log(state.sigma_w(i));
  const Vector cu = cholesky_corr_unconstrain(state.L_u);
  const Vector cw = cholesky_corr_unconstrain(state.L_w);
  for (Eigen::Index i = 0; i < cu.size(); ++i) at(lay.cpc_u + i) = cu(i);
  for (Eigen::Index i = 0; i < cw.size(); ++i) at(lay.cpc_w + i) = cw(i);
  if (spec.n_u > 0) {
    Eigen::Map<Matrix>(theta.data() + lay.z_u, spec.n_u, J) = state.z_u;
  }
  if (spec.n_w > 0) {
    Eigen::Map<Matrix>(theta.data() + lay.z_w, spec.n_w, K) = state.z_w;
  }
  return theta;
}

Vector mu_vector(const ParameterState& state, const Dataset& data, const ModelSpec& spec) {
  check_data(data, spec);
  Vector mu = data.X * state.beta;
  if (spec.n_u > 0) {
    const Matrix u = state.u();
    for (int i = 0; i < data.N; ++i) {
      mu(i) += data.Z_u.row(i).head(spec.n_u).dot(u.col(data.subj[i] - 1));
    }
  }
  if (spec.n_w > 0) {
    const Matrix w = state.w();
    for (int i = 0; i < data.N; ++i) {
      mu(i) += data.Z_w.row(i).head(spec.n_w).dot(w.col(data.item[i] - 1));
    }
  }
  return mu;
}

double log_posterior(const ParameterState& state, const Dataset& data,
                     const ModelSpec& spec) {
  state.validate(spec, data.J, data.K);
  const Vector mu = mu_vector(state, data, spec);
  double lp = 0.0;
  const double log_sigma = std::log(state.sigma_e);
  for (int i = 0; i < data.N; ++i) {
    const double y = data.rt(i);
    if (!(y > 0.0)) {
      throw DomainError("rt[" + std::to_string(i + 1) + "] must be positive");
    }
    const double ly = std::log(y);
    const double r = (ly - mu(i)) / state.sigma_e;
    lp += -ly - log_sigma - kHalfLog2Pi - 0.5 * r * r;
  }
  lp += -0.5 * state.z_u.squaredNorm() - kHalfLog2Pi * static_cast<double>(state.z_u.size());
  lp += -0.5 * state.z_w.squaredNorm() - kHalfLog2Pi * static_cast<double>(state.z_w.size());
  if (spec.n_u > 1) lp += lkj_cholesky_logpdf(state.L_u, spec.lkj_eta);
  if (spec.n_w > 1) lp += lkj_cholesky_logpdf(state.L_w, spec.lkj_eta);
  return lp;
}

double log_density(std::span<const double> theta, const Dataset& data,
                   const ModelSpec& spec) {
  const auto c = constrain(theta, spec, data.J, data.K);
  return log_posterior(c.state, data, spec) + c.log_jacobian;
}

Vector grad_log_posterior(std::span<const double> theta, const Dataset& data,
                          const ModelSpec& spec) {
  const MixedModel model(data, spec);
  check_theta(theta, model.dim());
  Vector grad(static_cast<Eigen::Index>(model.dim()));
  model.log_density_gradient(theta, {grad.data(), model.dim()});
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad(i))) throw NonFiniteGradientError(static_cast<std::size_t>(i));
  }
  return grad;
}

MixedModel::MixedModel(const Dataset& data, const ModelSpec& spec)
    : data_(data), spec_(spec), layout_(spec, data.J, data.K) {
  check_data(data, spec);
  log_rt_.resize(data.N);
  for (int i = 0; i < data.N; ++i) {
    if (!(data.rt(i) > 0.0)) {
      throw DomainError("rt[" + std::to_string(i + 1) + "] must be positive");
    }
    log_rt_(i) = std::log(data.rt(i));
  }
  sum_log_rt_ = log_rt_.sum();
}

namespace {

struct GroupTerm {
  Vector sigma;
  Matrix l;
  Matrix lambda;
  Matrix g;  // d lp / d (random effect), n x groups
};

// Gradient contribution of one grouping factor (subjects or items) given the
// accumulated d lp / d u. Returns the log prior / Jacobian pieces.
double group_backward(const GroupTerm& t, std::span<const double> theta,
                      std::size_t sigma_off, std::size_t cpc_off, std::size_t z_off,
                      int n, int groups, double eta, std::span<double> grad) {
  if (n == 0) return 0.0;
  const Eigen::Map<const Matrix> z(theta.data() + z_off, n, groups);
  Eigen::Map<Matrix> gz(grad.data() + z_off, n, groups);
  gz.noalias() = t.lambda.transpose() * t.g;
  gz -= z;

  const Matrix d_lambda = t.g * z.transpose();
  Matrix g_l = Matrix::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    double s = 0.0;
    for (int b = 0; b <= a; ++b) {
      s += d_lambda(a, b) * t.l(a, b);
      g_l(a, b) = t.sigma(a) * d_lambda(a, b);
    }
    grad[sigma_off + a] = t.sigma(a) * s + 1.0;
  }
  double lp = 0.0;
  for (int k = 1; k < n; ++k) {
    const double coef = static_cast<double>(n - (k + 1)) + 2.0 * eta - 2.0;
    lp += coef * std::log(t.l(k, k));
    g_l(k, k) += coef / t.l(k, k);
  }

  const std::size_t m = n_cpc(n);
  if (m > 0) {
    std::vector<Dual> y(m), l(static_cast<std::size_t>(n * n));
    for (std::size_t q = 0; q < m; ++q) {
      for (std::size_t r = 0; r < m; ++r) y[r] = Dual(theta[cpc_off + r], r == q ? 1.0 : 0.0);
      Dual lj(0.0);
      corr_factor(y.data(), n, l.data(), lj);
      double gq = lj.d;
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b <= a; ++b) gq += g_l(a, b) * l[static_cast<std::size_t>(a * n + b)].d;
      }
      grad[cpc_off + q] = gq;
    }
  }
  return lp;
}

}  // namespace

double MixedModel::log_density_gradient(std::span<const double> theta,
                                        std::span<double> grad) const {
  const auto& lay = layout_;
  const int N = data_.N;
  const int P = spec_.P;
  const int nu = spec_.n_u;
  const int nw = spec_.n_w;
  const int J = data_.J;
  const int K = data_.K;

  double lp = 0.0;
  const Eigen::Map<const Vector> beta(theta.data() + lay.beta, P);
  const double log_se = theta[lay.sigma_e];
  const double se = std::exp(log_se);
  lp += log_se;  // Jacobian of exp

  auto make_group = [&](int n, std::size_t sigma_off, std::size_t cpc_off) {
    GroupTerm t;
    t.sigma.resize(n);
    for (int i = 0; i < n; ++i) {
      t.sigma(i) = std::exp(theta[sigma_off + i]);
      lp += theta[sigma_off + i];
    }
    double lj = 0.0;
    std::vector<double> buf(static_cast<std::size_t>(n * n));
    corr_factor(theta.data() + cpc_off, n, buf.data(), lj);
    lp += lj;
    t.l.resize(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) t.l(i, j) = buf[static_cast<std::size_t>(i * n + j)];
    }
    t.lambda = t.sigma.asDiagonal() * t.l;
    return t;
  };
  GroupTerm gu = make_group(nu, lay.sigma_u, lay.cpc_u);
  GroupTerm gw = make_group(nw, lay.sigma_w, lay.cpc_w);

  Vector mu = data_.X * beta;
  Matrix u, w;
  if (nu > 0) {
    u = gu.lambda * Eigen::Map<const Matrix>(theta.data() + lay.z_u, nu, J);
    for (int i = 0; i < N; ++i) {
      mu(i) += data_.Z_u.row(i).head(nu).dot(u.col(data_.subj[i] - 1));
    }
  }
  if (nw > 0) {
    w = gw.lambda * Eigen::Map<const Matrix>(theta.data() + lay.z_w, nw, K);
    for (int i = 0; i < N; ++i) {
      mu(i) += data_.Z_w.row(i).head(nw).dot(w.col(data_.item[i] - 1));
    }
  }

  const Vector r = (log_rt_ - mu) / se;
  const double rss = r.squaredNorm();
  lp += -sum_log_rt_ - N * (log_se + kHalfLog2Pi) - 0.5 * rss;

  const Vector g_mu = r / se;
  Eigen::Map<Vector>(grad.data() + lay.beta, P).noalias() = data_.X.transpose() * g_mu;
  grad[lay.sigma_e] = rss - N + 1.0;

  if (nu > 0) {
    gu.g = Matrix::Zero(nu, J);
    for (int i = 0; i < N; ++i) {
      gu.g.col(data_.subj[i] - 1) += g_mu(i) * data_.Z_u.row(i).head(nu).transpose();
    }
  }
  if (nw > 0) {
    gw.g = Matrix::Zero(nw, K);
    for (int i = 0; i < N; ++i) {
      gw.g.col(data_.item[i] - 1) += g_mu(i) * data_.Z_w.row(i).head(nw).transpose();
    }
  }

  const std::size_t n_zu = static_cast<std::size_t>(nu) * static_cast<std::size_t>(J);
  const std::size_t n_zw = static_cast<std::size_t>(nw) * static_cast<std::size_t>(K);
  const Eigen::Map<const Vector> zu(theta.data() + lay.z_u, static_cast<Eigen::Index>(n_zu));
  const Eigen::Map<const Vector> zw(theta.data() + lay.z_w, static_cast<Eigen::Index>(n_zw));
  lp += -0.5 * (zu.squaredNorm() + zw.squaredNorm()) -
        kHalfLog2Pi * static_cast<double>(n_zu + n_zw);

  lp += group_backward(gu, theta, lay.sigma_u, lay.cpc_u, lay.z_u, nu, J, spec_.lkj_eta, grad);
  lp += group_backward(gw, theta, lay.sigma_w, lay.cpc_w, lay.z_w, nw, K, spec_.lkj_eta, grad);
  return lp;
}

std::vector<std::string> constrained_names(const ModelSpec& spec, int J, int K) {
  const bool scalar = spec.family == Family::VaryingIntercepts;
  std::vector<std::string> names;
  for (int p = 1; p <= spec.P; ++p) names.push_back("beta" + idx({p}));
  names.push_back("sigma_e");
  auto group = [&](const std::string& t, int n) {
    if (scalar) {
      names.push_back("sigma_" + t);
    } else {
      for (int r = 1; r <= n; ++r) names.push_back("sigma_" + t + idx({r}));
    }
  };
  group("u", spec.n_u);
  group("w", spec.n_w);
  auto lower = [&](const std::string& prefix, int n) {
    for (int i = 2; i <= n; ++i) {
      for (int j = 1; j < i; ++j) names.push_back(prefix + idx({i, j}));
    }
  };
  lower("L_u", spec.n_u);
  lower("L_w", spec.n_w);
  auto effects = [&](const std::string& prefix, int n, int groups) {
    for (int g = 1; g <= groups && n > 0; ++g) {
      for (int r = 1; r <= n; ++r) names.push_back(prefix + (scalar ? idx({g}) : idx({r, g})));
    }
  };
  effects("z_u", spec.n_u, J);
  effects("z_w", spec.n_w, K);
  lower("rho_u", spec.n_u);
  lower("rho_w", spec.n_w);
  effects("u", spec.n_u, J);
  effects("w", spec.n_w, K);
  return names;
}

void write_constrained(std::span<const double> theta, const ModelSpec& spec, int J,
                       int K, std::span<double> out) {
  const auto c = constrain(theta, spec, J, K);
  const auto& s = c.state;
  std::size_t k = 0;
  auto put = [&](double v) { out[k++] = v; };
  for (int p = 0; p < spec.P; ++p) put(s.beta(p));
  put(s.sigma_e);
  for (int r = 0; r < spec.n_u; ++r) put(s.sigma_u(r));
  for (int r = 0; r < spec.n_w; ++r) put(s.sigma_w(r));
  auto lower = [&](const Matrix& m, int n) {
    for (int i = 1; i < n; ++i) {
      for (int j = 0; j < i; ++j) put(m(i, j));
    }
  };
  lower(s.L_u, spec.n_u);
  lower(s.L_w, spec.n_w);
  for (Eigen::Index i = 0; i < s.z_u.size(); ++i) put(s.z_u.data()[i]);
  for (Eigen::Index i = 0; i < s.z_w.size(); ++i) put(s.z_w.data()[i]);
  if (spec.n_u > 1) lower(s.L_u * s.L_u.transpose(), spec.n_u);
  if (spec.n_w > 1) lower(s.L_w * s.L_w.transpose(), spec.n_w);
  const Matrix u = s.u();
  const Matrix w = s.w();
  for (Eigen::Index i = 0; i < u.size(); ++i) put(u.data()[i]);
  for (Eigen::Index i = 0; i < w.size(); ++i) put(w.data()[i]);
  if (k != out.size()) {
    throw DimensionError("write_constrained: output has " + std::to_string(out.size()) +
                         " slots, wrote " + std::to_string(k));
  }
}

std::vector<std::string> summary_names(const ModelSpec& spec, int J, int K) {
  std::vector<std::string> out;
  for (auto& n : constrained_names(spec, J, K)) {
    if (n.starts_with("beta") || n.starts_with("sigma_") || n.starts_with("rho_")) {
      out.push_back(std::move(n));
    }
  }
  return out;
}

}  // namespace blmm
