#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blmm/ingest.hpp"
#include "blmm/linalg.hpp"

namespace blmm {

enum class Family {
  FixedEffects,             // log rt = X beta + e
  VaryingIntercepts,        // + subject and item intercepts
  VaryingInterceptsSlopes,  // + correlated intercepts and one slope (P = 2)
  MatrixForm,               // + correlated effects for every column of X
};

std::string_view family_name(Family family);
/// Accepts the CLI spellings fixef, ranint, ranslp and matrix.
Family parse_family(std::string_view name);

struct ModelSpec {
  Family family = Family::FixedEffects;
  int P = 2;
  int n_u = 0;
  int n_w = 0;
  double lkj_eta = 2.0;

  /// Fills n_u / n_w from the family: 0, 1, 2 or P.
  static ModelSpec make(Family family, int P, double lkj_eta = 2.0);
  /// Throws ValidationError when dimensions disagree with the family.
  void validate() const;
};

/// Constrained parameters. z_u is n_u x J and z_w is n_w x K; the random
/// effects are u = diag(sigma_u) L_u z_u and w = diag(sigma_w) L_w z_w.
/// For n <= 1 the correlation factor is the n x n identity.
struct ParameterState {
  Vector beta;
  double sigma_e = 1.0;
  Vector sigma_u;
  Vector sigma_w;
  Matrix L_u;
  Matrix L_w;
  Matrix z_u;
  Matrix z_w;

  Matrix u() const;
  Matrix w() const;

  /// Throws ValidationError for non-positive scales, invalid correlation
  /// factors or shapes inconsistent with (spec, J, K).
  void validate(const ModelSpec& spec, int J, int K) const;
};

/// Offsets of each block in the unconstrained vector:
///
///   [ beta (P) | log sigma_e | log sigma_u (n_u) | log sigma_w (n_w)
///   | cpc_u (n_u(n_u-1)/2) | cpc_w (n_w(n_w-1)/2)
///   | z_u (n_u*J, column-major) | z_w (n_w*K, column-major) ]
///
/// cpc are atanh of the canonical partial correlations, stored row by row
/// over the strict lower triangle.
struct ParameterLayout {
  ModelSpec spec;
  int J = 0;
  int K = 0;
  std::size_t beta = 0;
  std::size_t sigma_e = 0;
  std::size_t sigma_u = 0;
  std::size_t sigma_w = 0;
  std::size_t cpc_u = 0;
  std::size_t cpc_w = 0;
  std::size_t z_u = 0;
  std::size_t z_w = 0;
  std::size_t dim = 0;

  ParameterLayout(const ModelSpec& spec, int J, int K);
};

std::size_t unconstrained_dim(const ModelSpec& spec, int J, int K);

struct ConstrainResult {
  ParameterState state;
  double log_jacobian = 0.0;
};

/// Unconstrained -> constrained. Scales are exponentiated, correlation
/// factors are built from tanh-transformed canonical partial correlations,
/// beta and z pass through. Throws DimensionError / DomainError.
ConstrainResult constrain(std::span<const double> theta, const ModelSpec& spec,
                          int J, int K);

/// Inverse of constrain.
Vector unconstrain(const ParameterState& state, const ModelSpec& spec, int J,
                   int K);

/// Cholesky factor of a correlation matrix from n(n-1)/2 unconstrained
/// values, adding the log-Jacobian of the map to *log_jacobian when given.
Matrix cholesky_corr_constrain(std::span<const double> y, int n,
                               double* log_jacobian = nullptr);
Vector cholesky_corr_unconstrain(const Matrix& l);

/// Per-row lognormal location X beta + Z_u u[:, subj] + Z_w w[:, item].
/// Only the first n_u (n_w) columns of Z_u (Z_w) enter the model.
Vector mu_vector(const ParameterState& state, const Dataset& data,
                 const ModelSpec& spec);

/// Log posterior on the constrained support (flat priors on beta and the
/// scales), excluding the change-of-variables term:
///   sum_i lognormal(rt_i | mu_i, sigma_e) + sum N(z | 0, 1)
///   + lkj(L_u | eta) + lkj(L_w | eta)
double log_posterior(const ParameterState& state, const Dataset& data,
                     const ModelSpec& spec);

/// log_posterior(constrain(theta)) + log-Jacobian: the density the sampler
/// targets on the unconstrained space.
double log_density(std::span<const double> theta, const Dataset& data,
                   const ModelSpec& spec);

/// Gradient of log_density. Throws NonFiniteGradientError naming the
/// first offending coordinate.
Vector grad_log_posterior(std::span<const double> theta, const Dataset& data,
                          const ModelSpec& spec);

/// Names of the constrained quantities stored per draw: the D parameter
/// slots (beta[p], sigma_e, sigma_u[r], sigma_w[r], L_u[i,j], L_w[i,j],
/// z_u[r,j], z_w[r,k]) followed by derived rho_u[i,j], rho_w[i,j], u[r,j]
/// and w[r,k]. The varying-intercepts family uses scalar names (sigma_u,
/// u[j]). Indices are 1-based.
std::vector<std::string> constrained_names(const ModelSpec& spec, int J, int K);

/// Values matching constrained_names for one unconstrained point.
void write_constrained(std::span<const double> theta, const ModelSpec& spec,
                       int J, int K, std::span<double> out);

/// Names summarized by default: beta, sigma_e, sigma_u, sigma_w, rho_u, rho_w.
std::vector<std::string> summary_names(const ModelSpec& spec, int J, int K);

/// Evaluation interface consumed by the sampler.
class LogDensityModel {
 public:
  virtual ~LogDensityModel() = default;
  virtual std::size_t dim() const = 0;
  /// Writes the gradient and returns the log density. Must not throw for
  /// finite input; non-finite values signal a failed evaluation.
  virtual double log_density_gradient(std::span<const double> theta,
                                      std::span<double> grad) const = 0;
};

/// The mixed model bound to a dataset. Holds a reference to data.
class MixedModel final : public LogDensityModel {
 public:
  MixedModel(const Dataset& data, const ModelSpec& spec);

  std::size_t dim() const override { return layout_.dim; }
  double log_density_gradient(std::span<const double> theta,
                              std::span<double> grad) const override;

  const ParameterLayout& layout() const { return layout_; }
  const ModelSpec& spec() const { return spec_; }
  const Dataset& data() const { return data_; }

 private:
  const Dataset& data_;
  ModelSpec spec_;
  ParameterLayout layout_;
  Vector log_rt_;
  double sum_log_rt_ = 0.0;
};

}  // namespace blmm
