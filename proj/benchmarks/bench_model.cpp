#include <benchmark/benchmark.h>

#include <random>

#include "blmm/model.hpp"
#include "blmm/sampler.hpp"
#include "blmm/simulate.hpp"

namespace {

using namespace blmm;

// Dataset on a J x K Latin-square grid with moderate effects.
SimulatedData make_data(const ModelSpec& spec, int J, int K) {
  const Formula formula = Formula::parse(spec.family == Family::MatrixForm ? "so+dist+int" : "so");
  ParameterState truth;
  truth.beta = Vector::Zero(spec.P);
  truth.beta(0) = 6.0;
  truth.sigma_e = 0.5;
  truth.sigma_u = Vector::Constant(spec.n_u, 0.2);
  truth.sigma_w = Vector::Constant(spec.n_w, 0.15);
  truth.L_u = Matrix::Identity(spec.n_u, spec.n_u);
  truth.L_w = Matrix::Identity(spec.n_w, spec.n_w);
  SimulationLayout layout;
  layout.subjects = J;
  layout.items = K;
  layout.seed = 7;
  return simulate_dataset(spec, formula, truth, layout);
}

ModelSpec spec_for(int family) {
  switch (family) {
    case 0: return ModelSpec::make(Family::FixedEffects, 2);
    case 1: return ModelSpec::make(Family::VaryingIntercepts, 2);
    case 2: return ModelSpec::make(Family::VaryingInterceptsSlopes, 2);
    default: return ModelSpec::make(Family::MatrixForm, 4);
  }
}

void BM_Gradient(benchmark::State& state) {
  const ModelSpec spec = spec_for(static_cast<int>(state.range(0)));
  const auto sim = make_data(spec, static_cast<int>(state.range(1)), static_cast<int>(state.range(2)));
  const MixedModel model(sim.data, spec);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> theta(model.dim()), grad(model.dim());
  for (double& t : theta) t = u(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.log_density_gradient(theta, grad));
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * sim.data.N);
  state.SetLabel(std::string(family_name(spec.family)));
}
BENCHMARK(BM_Gradient)
    ->Args({0, 37, 15})
    ->Args({1, 37, 15})
    ->Args({2, 37, 15})
    ->Args({3, 37, 15})
    ->Args({3, 60, 24});

void BM_Leapfrog(benchmark::State& state) {
  const ModelSpec spec = spec_for(2);
  const auto sim = make_data(spec, 37, 15);
  const MixedModel model(sim.data, spec);
  const Vector start = Vector::Constant(static_cast<Eigen::Index>(model.dim()), 0.1);
  const Vector inv_metric = Vector::Ones(start.size());
  PhasePoint z = make_phase_point(start, model);
  Vector p = Vector::Constant(start.size(), 0.01);
  for (auto _ : state) {
    leapfrog(z, p, 1e-3, inv_metric, model);
    p = -p;
  }
}
BENCHMARK(BM_Leapfrog);

void BM_Fit(benchmark::State& state) {
  const ModelSpec spec = spec_for(static_cast<int>(state.range(0)));
  const auto sim = make_data(spec, 37, 15);
  SamplerConfig cfg;
  cfg.chains = 1;
  cfg.iter = 400;
  cfg.threads = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_chains(sim.data, spec, cfg));
  }
  state.SetLabel(std::string(family_name(spec.family)) + ", 1 chain x 400 iterations");
}
BENCHMARK(BM_Fit)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
