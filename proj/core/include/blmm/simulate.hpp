#pragma once

#include <cstdint>
#include <vector>

#include "blmm/ingest.hpp"
#include "blmm/model.hpp"

namespace blmm {

struct SimulationLayout {
  int subjects = 37;
  int items = 15;
  /// Each subject sees each item once, in condition (subject + item) mod C.
  /// Otherwise the condition of every trial is drawn uniformly.
  bool latin_square = true;
  std::uint64_t seed = 1;
};

struct SimulatedData {
  Dataset data;
  std::vector<TrialRecord> records;
  /// Truth with the z blocks that were actually drawn.
  ParameterState truth;
  Matrix u;
  Matrix w;
};

/// Draws u, w from their multivariate normal priors and rt from the
/// lognormal likelihood of the chosen family. The z blocks of truth are
/// ignored; everything else must satisfy ParameterState::validate. The
/// formula's factors define the 2^F experimental conditions. Deterministic
/// for a fixed seed.
SimulatedData simulate_dataset(const ModelSpec& spec, const Formula& formula,
                               const ParameterState& truth,
                               const SimulationLayout& layout);

}  // namespace blmm
