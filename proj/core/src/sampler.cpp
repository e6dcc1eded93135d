#include "blmm/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include "blmm/adaptation.hpp"
#include "blmm/errors.hpp"

namespace blmm {

void SamplerConfig::validate() const {
  const int w = warmup_iterations();
  if (chains < 1) throw ValidationError("chains must be >= 1");
  if (iter < 1) throw ValidationError("iter must be >= 1");
  if (w < 0 || w >= iter) {
    throw ValidationError("warmup must satisfy 0 <= warmup < iter (warmup = " +
                          std::to_string(w) + ", iter = " + std::to_string(iter) + ")");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ValidationError("target_accept must lie in (0, 1)");
  }
  if (max_leapfrog < 1) throw ValidationError("max_leapfrog must be >= 1");
  if (!(init_radius > 0.0)) throw ValidationError("init_radius must be positive");
  if (!(integration_time > 0.0)) throw ValidationError("integration_time must be positive");
}

PhasePoint make_phase_point(const Vector& theta, const LogDensityModel& model) {
  PhasePoint z;
  z.theta = theta;
  z.grad.resize(theta.size());
  z.log_density = model.log_density_gradient({z.theta.data(), model.dim()},
                                             {z.grad.data(), model.dim()});
  return z;
}

double hamiltonian(const PhasePoint& z, const Vector& momentum, const Vector& inv_metric) {
  return -z.log_density + 0.5 * momentum.cwiseProduct(inv_metric).dot(momentum);
}

bool leapfrog(PhasePoint& z, Vector& momentum, double step_size, const Vector& inv_metric,
              const LogDensityModel& model) {
  momentum += 0.5 * step_size * z.grad;
  z.theta += step_size * inv_metric.cwiseProduct(momentum);
  z.log_density = model.log_density_gradient({z.theta.data(), model.dim()},
                                             {z.grad.data(), model.dim()});
  momentum += 0.5 * step_size * z.grad;
  return std::isfinite(z.log_density) && z.grad.allFinite();
}

namespace {

Vector draw_momentum(const Vector& inv_metric, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector p(inv_metric.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = normal(rng) / std::sqrt(inv_metric(i));
  return p;
}

}  // namespace

TransitionInfo hmc_iteration(PhasePoint& z, double step_size, int n_steps,
                             const Vector& inv_metric, const LogDensityModel& model,
                             Rng& rng) {
  TransitionInfo info;
  Vector p = draw_momentum(inv_metric, rng);
  const double h0 = hamiltonian(z, p, inv_metric);

  PhasePoint proposal = z;
  bool finite = true;
  for (int s = 0; s < n_steps; ++s) {
    ++info.n_leapfrog;
    if (!leapfrog(proposal, p, step_size, inv_metric, model)) {
      finite = false;
      break;
    }
  }
  const double h1 = finite ? hamiltonian(proposal, p, inv_metric) : HUGE_VAL;
  const double delta = h1 - h0;
  if (!std::isfinite(delta) || std::abs(delta) > kDivergenceThreshold) {
    info.divergent = true;
    info.accept_stat = 0.0;
    return info;
  }
  info.accept_stat = delta < 0.0 ? 1.0 : std::exp(-delta);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (unif(rng) < info.accept_stat) {
    z = std::move(proposal);
    info.accepted = true;
  }
  return info;
}

double find_initial_step_size(const PhasePoint& z, double step_size, const Vector& inv_metric,
                              const LogDensityModel& model, Rng& rng) {
  const double log_target = std::log(0.8);
  auto one_step = [&](double eps) {
    PhasePoint q = z;
    Vector p = draw_momentum(inv_metric, rng);
    const double h0 = hamiltonian(q, p, inv_metric);
    const bool ok = leapfrog(q, p, eps, inv_metric, model);
    const double h = ok ? hamiltonian(q, p, inv_metric) : HUGE_VAL;
    const double dh = h0 - h;
    return std::isnan(dh) ? -HUGE_VAL : dh;
  };
  const int direction = one_step(step_size) > log_target ? 1 : -1;
  for (int k = 0; k < 100; ++k) {
    const double dh = one_step(step_size);
    if (direction == 1 && !(dh > log_target)) break;
    if (direction == -1 && !(dh < log_target)) break;
    step_size = direction == 1 ? 2.0 * step_size : 0.5 * step_size;
    if (step_size > 1e7 || step_size < 1e-10) break;
  }
  return std::clamp(step_size, 1e-10, 1e7);
}

std::uint64_t chain_seed(std::uint64_t seed, int chain) {
  // splitmix64 finalizer applied to a per-chain offset.
  std::uint64_t x = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(chain + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

ChainResult run_chain(const LogDensityModel& model, const SamplerConfig& config, int chain) {
  config.validate();
  const auto dim = static_cast<Eigen::Index>(model.dim());
  const int warmup = config.warmup_iterations();
  const int kept = config.iter - warmup;

  ChainResult out;
  out.seed = chain_seed(config.seed, chain);
  Rng rng(out.seed);

  PhasePoint z;
  {
    std::uniform_real_distribution<double> init(-config.init_radius, config.init_radius);
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      Vector theta(dim);
      for (Eigen::Index i = 0; i < dim; ++i) theta(i) = init(rng);
      z = make_phase_point(theta, model);
      ok = std::isfinite(z.log_density) && z.grad.allFinite();
    }
    if (!ok) {
      throw InitializationError("chain " + std::to_string(chain + 1) +
                                ": log density not finite at 100 initial points");
    }
  }

  Vector inv_metric = Vector::Ones(dim);
  double step_size = find_initial_step_size(z, 1.0, inv_metric, model, rng);

  auto n_steps_max = [&](double eps) {
    const double n = std::ceil(config.integration_time / eps);
    return static_cast<int>(std::clamp(n, 1.0, static_cast<double>(config.max_leapfrog)));
  };

  const WarmupSchedule schedule(warmup);
  DualAveraging dual(config.target_accept);
  dual.restart(step_size);
  WelfordVariance var(dim);

  double accept_sum = 0.0;
  int accepted_warmup = 0;
  for (int t = 0; t < warmup; ++t) {
    std::uniform_int_distribution<int> jitter(1, n_steps_max(step_size));
    const auto info = hmc_iteration(z, step_size, jitter(rng), inv_metric, model, rng);
    accept_sum += info.accept_stat;
    accepted_warmup += info.accepted ? 1 : 0;
    out.adaptation.warmup_divergences += info.divergent ? 1 : 0;
    step_size = dual.update(info.accept_stat);
    if (schedule.in_window(t)) var.add(z.theta);
    if (schedule.ends_window(t)) {
      inv_metric = regularized_inverse_metric(var);
      var.reset();
      step_size = find_initial_step_size(z, step_size, inv_metric, model, rng);
      dual.restart(step_size);
    }
  }
  if (warmup > 0) {
    step_size = dual.final_step_size();
    out.adaptation.warmup_accept = accept_sum / warmup;
    if (accepted_warmup == 0) {
      out.warnings.push_back("chain " + std::to_string(chain + 1) +
                             ": every warmup proposal was rejected");
    }
  }
  out.adaptation.step_size = step_size;
  out.adaptation.inv_metric.assign(inv_metric.data(), inv_metric.data() + dim);

  out.draws.resize(kept, dim);
  out.log_density.resize(static_cast<std::size_t>(kept));
  out.divergent.resize(static_cast<std::size_t>(kept));
  out.n_leapfrog.resize(static_cast<std::size_t>(kept));
  out.accept_stat.resize(static_cast<std::size_t>(kept));
  const int n_max = n_steps_max(step_size);
  std::uniform_int_distribution<int> jitter(1, n_max);
  double accept_total = 0.0;
  double leapfrog_total = 0.0;
  for (int t = 0; t < kept; ++t) {
    const auto info = hmc_iteration(z, step_size, jitter(rng), inv_metric, model, rng);
    const auto k = static_cast<std::size_t>(t);
    out.draws.row(t) = z.theta.transpose();
    out.log_density[k] = z.log_density;
    out.divergent[k] = info.divergent ? 1 : 0;
    out.n_leapfrog[k] = info.n_leapfrog;
    out.accept_stat[k] = info.accept_stat;
    out.divergences += info.divergent ? 1 : 0;
    accept_total += info.accept_stat;
    leapfrog_total += info.n_leapfrog;
  }
  if (kept > 0) {
    out.mean_accept = accept_total / kept;
    out.mean_leapfrog = leapfrog_total / kept;
  }
  return out;
}

int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv(kThreadsEnvVar)) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<ChainResult> sample(const LogDensityModel& model, const SamplerConfig& config) {
  config.validate();
  std::vector<ChainResult> results(static_cast<std::size_t>(config.chains));
  std::vector<std::exception_ptr> errors(results.size());
  const int threads = std::min(resolve_thread_count(config.threads), config.chains);

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < config.chains; c = next++) {
      try {
        results[static_cast<std::size_t>(c)] = run_chain(model, config, c);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

FitResult run_chains(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config) {
  spec.validate();
  config.validate();
  const MixedModel model(data, spec);

  FitResult fit;
  fit.spec = spec;
  fit.config = config;
  fit.chains = sample(model, config);

  auto& draws = fit.draws;
  draws.names = constrained_names(spec, data.J, data.K);
  const std::size_t n_params = draws.names.size();
  draws.names.push_back("lp__");
  draws.names.push_back("divergent__");
  draws.first_iteration = config.warmup_iterations() + 1;

  std::vector<double> row(n_params);
  for (const auto& chain : fit.chains) {
    Matrix m(chain.draws.rows(), static_cast<Eigen::Index>(draws.names.size()));
    for (Eigen::Index t = 0; t < chain.draws.rows(); ++t) {
      const Vector theta = chain.draws.row(t).transpose();
      write_constrained({theta.data(), static_cast<std::size_t>(theta.size())}, spec,
                        data.J, data.K, row);
      for (std::size_t j = 0; j < n_params; ++j) m(t, static_cast<Eigen::Index>(j)) = row[j];
      m(t, static_cast<Eigen::Index>(n_params)) = chain.log_density[static_cast<std::size_t>(t)];
      m(t, static_cast<Eigen::Index>(n_params + 1)) = chain.divergent[static_cast<std::size_t>(t)];
    }
    draws.chains.push_back(std::move(m));
  }
  return fit;
}

}  // namespace blmm
