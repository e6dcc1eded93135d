#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "blmm/linalg.hpp"

namespace blmm {

/// Posterior draws: one matrix per chain with a shared column naming.
/// Columns include the model quantities plus "lp__" and "divergent__".
struct DrawsMatrix {
  std::vector<std::string> names;
  std::vector<Matrix> chains;
  /// Iteration label of the first stored row (warmup + 1).
  int first_iteration = 1;

  std::size_t num_chains() const { return chains.size(); }
  Eigen::Index draws_per_chain() const { return chains.empty() ? 0 : chains.front().rows(); }
  /// Column index; throws ValidationError for unknown names.
  Eigen::Index column(std::string_view name) const;
  bool has(std::string_view name) const;
  /// One column per chain.
  std::vector<Vector> chains_of(std::string_view name) const;
  /// All chains concatenated in chain order.
  Vector pooled(std::string_view name) const;
};

/// CSV with a header of column names; values in shortest round-trip form.
void write_chain_csv(const DrawsMatrix& draws, std::size_t chain, std::ostream& out);
void write_chain_csv(const DrawsMatrix& draws, std::size_t chain,
                     const std::filesystem::path& path);

struct ChainCsv {
  std::vector<std::string> names;
  Matrix values;
};

/// Throws SchemaError (with the source name) on ragged or non-numeric rows.
ChainCsv read_chain_csv(std::istream& in, std::string_view source = "<stream>");
ChainCsv read_chain_csv(const std::filesystem::path& path);

}  // namespace blmm
