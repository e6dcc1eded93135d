#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "blmm/draws.hpp"
#include "blmm/ingest.hpp"
#include "blmm/linalg.hpp"
#include "blmm/model.hpp"

namespace blmm {

using Rng = std::mt19937_64;

/// Environment variable consulted for the default number of worker threads.
inline constexpr const char* kThreadsEnvVar = "BLMM_THREADS";

struct SamplerConfig {
  int chains = 4;
  int iter = 2000;
  /// Defaults to iter / 2.
  std::optional<int> warmup;
  std::uint64_t seed = 1;
  double target_accept = 0.8;
  int max_leapfrog = 1024;
  double init_radius = 2.0;
  /// Upper bound of the jittered integration time, in units where the
  /// adapted metric makes the posterior roughly unit scale. 2*pi is one
  /// period of a unit harmonic oscillator.
  double integration_time = 6.283185307179586;
  /// Worker threads; 0 reads BLMM_THREADS, falling back to the core count.
  int threads = 0;

  int warmup_iterations() const { return warmup.value_or(iter / 2); }
  /// Throws ValidationError unless 0 <= warmup < iter, chains >= 1, etc.
  void validate() const;
};

/// Position, cached gradient and log density at that position.
struct PhasePoint {
  Vector theta;
  Vector grad;
  double log_density = 0.0;
};

/// One velocity-Verlet step with diagonal inverse metric. Returns false when
/// the new log density or gradient is not finite.
bool leapfrog(PhasePoint& z, Vector& momentum, double step_size,
              const Vector& inv_metric, const LogDensityModel& model);

/// H = -log density + 0.5 p^T M^{-1} p.
double hamiltonian(const PhasePoint& z, const Vector& momentum,
                   const Vector& inv_metric);

/// Evaluates log density and gradient at theta.
PhasePoint make_phase_point(const Vector& theta, const LogDensityModel& model);

/// Energy error beyond which a transition counts as divergent.
inline constexpr double kDivergenceThreshold = 1000.0;

struct TransitionInfo {
  double accept_stat = 0.0;
  bool accepted = false;
  bool divergent = false;
  int n_leapfrog = 0;
};

/// Static HMC transition: fresh momentum ~ N(0, M), n_steps leapfrog steps,
/// Metropolis correction. Divergent proposals are rejected and flagged.
TransitionInfo hmc_iteration(PhasePoint& z, double step_size, int n_steps,
                             const Vector& inv_metric,
                             const LogDensityModel& model, Rng& rng);

/// Doubles or halves the step size until a single leapfrog step crosses an
/// acceptance probability of 0.8.
double find_initial_step_size(const PhasePoint& z, double step_size,
                              const Vector& inv_metric,
                              const LogDensityModel& model, Rng& rng);

struct AdaptationSummary {
  double step_size = 0.0;
  std::vector<double> inv_metric;
  double warmup_accept = 0.0;
  int warmup_divergences = 0;
};

struct ChainResult {
  std::uint64_t seed = 0;
  /// Post-warmup unconstrained draws, one row per iteration.
  Matrix draws;
  std::vector<double> log_density;
  std::vector<int> divergent;
  std::vector<int> n_leapfrog;
  std::vector<double> accept_stat;
  AdaptationSummary adaptation;
  int divergences = 0;
  double mean_accept = 0.0;
  double mean_leapfrog = 0.0;
  std::vector<std::string> warnings;
};

/// Deterministic per-chain seed derived from (seed, chain index).
std::uint64_t chain_seed(std::uint64_t seed, int chain);

/// Runs one chain from a uniform draw in [-init_radius, init_radius]^D.
/// Throws InitializationError after 100 non-finite starting points.
ChainResult run_chain(const LogDensityModel& model, const SamplerConfig& config,
                      int chain);

/// All chains, possibly on several threads; output does not depend on the
/// thread count.
std::vector<ChainResult> sample(const LogDensityModel& model,
                                const SamplerConfig& config);

int resolve_thread_count(int requested);

struct FitResult {
  ModelSpec spec;
  SamplerConfig config;
  DrawsMatrix draws;
  std::vector<ChainResult> chains;
};

/// Samples the mixed model and converts the draws to constrained space.
/// ChainResult::draws keep the unconstrained values.
FitResult run_chains(const Dataset& data, const ModelSpec& spec,
                     const SamplerConfig& config);

}  // namespace blmm
