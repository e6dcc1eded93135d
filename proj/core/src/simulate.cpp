#include "blmm/simulate.hpp"

#include <cmath>
#include <random>

#include "blmm/errors.hpp"

namespace blmm {

SimulatedData simulate_dataset(const ModelSpec& spec, const Formula& formula,
                               const ParameterState& truth,
                               const SimulationLayout& layout) {
  spec.validate();
  if (layout.subjects < 2) {
    throw DegenerateGroupingError("need at least 2 subjects, got " +
                                  std::to_string(layout.subjects));
  }
  if (layout.items < 2) {
    throw DegenerateGroupingError("need at least 2 items, got " +
                                  std::to_string(layout.items));
  }
  if (static_cast<int>(formula.terms.size()) + 1 != spec.P) {
    throw ValidationError("formula " + formula.to_string() + " gives P = " +
                          std::to_string(formula.terms.size() + 1) +
                          " but the model has P = " + std::to_string(spec.P));
  }
  const int J = layout.subjects;
  const int K = layout.items;

  std::mt19937_64 rng(layout.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SimulatedData out;
  out.truth = truth;
  out.truth.z_u.resize(spec.n_u, spec.n_u > 0 ? J : 0);
  out.truth.z_w.resize(spec.n_w, spec.n_w > 0 ? K : 0);
  for (Eigen::Index i = 0; i < out.truth.z_u.size(); ++i) out.truth.z_u.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < out.truth.z_w.size(); ++i) out.truth.z_w.data()[i] = normal(rng);
  out.truth.validate(spec, J, K);
  out.u = out.truth.u();
  out.w = out.truth.w();

  const auto factors = formula.factors();
  std::vector<FactorSpec> specs;
  for (const auto& f : factors) specs.push_back(factor_spec(f));
  const int conditions = 1 << factors.size();
  std::uniform_int_distribution<int> pick(0, conditions - 1);

  for (int j = 1; j <= J; ++j) {
    for (int k = 1; k <= K; ++k) {
      const int cond = layout.latin_square ? (j + k) % conditions : pick(rng);
      TrialRecord rec;
      rec.subj = j;
      rec.item = k;
      for (std::size_t f = 0; f < factors.size(); ++f) {
        const bool positive = (cond >> f) & 1;
        rec.predictors[factors[f]] =
            positive ? specs[f].positive.front() : specs[f].negative.front();
      }
      rec.rt = 1.0;  // placeholder until mu is known
      out.records.push_back(std::move(rec));
    }
  }

  out.data = build_dataset(out.records, formula);
  const Vector mu = mu_vector(out.truth, out.data, spec);
  for (int i = 0; i < out.data.N; ++i) {
    const double rt = std::exp(mu(i) + truth.sigma_e * normal(rng));
    out.data.rt(i) = rt;
    out.records[static_cast<std::size_t>(i)].rt = rt;
  }
  return out;
}

}  // namespace blmm
