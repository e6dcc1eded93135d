#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "blmm/linalg.hpp"

namespace blmm {

/// A two-level factor coded +1 / -1. Each side may accept several spellings;
/// the first spelling is the canonical one written by serialize_dataset.
struct FactorSpec {
  std::string name;
  std::vector<std::string> positive;
  std::vector<std::string> negative;
};

/// Relative-clause type: object relative (+1) vs subject relative (-1).
FactorSpec so_factor();
/// Head-noun/verb distance: far (+1) vs near (-1).
FactorSpec dist_factor();
/// Looks up a built-in factor by name ("so", "dist"); throws SchemaError.
FactorSpec factor_spec(std::string_view name);

/// +1 for the factor's positive level, -1 for its negative level.
/// Throws ValidationError listing the permitted labels otherwise.
int contrast_code(std::string_view level, const FactorSpec& factor);

struct TrialRecord {
  int subj = 0;
  int item = 0;
  /// factor name -> raw level label as it appears in the file
  std::map<std::string, std::string> predictors;
  double rt = 0.0;
  std::optional<std::string> region;
};

struct TableSchema {
  /// Factor columns to read in addition to subj, item and rt.
  std::vector<std::string> factors{"so"};
  /// Keep only rows whose region column equals this value.
  std::optional<std::string> region_filter;
};

struct ParsedTable {
  std::vector<TrialRecord> records;
  /// Rows dropped because rt was not numeric (e.g. NA).
  std::size_t rejected_rows = 0;
  /// Rows dropped by the region filter.
  std::size_t filtered_rows = 0;
};

/// Reads a header-bearing whitespace/tab separated table.
///
/// Required columns are subj, item, rt and every factor in the schema. A
/// "type" column is accepted in place of a missing "so" column, and an "int"
/// column, when present, is carried through so build_dataset can check it.
/// Throws SchemaError for missing columns or ragged rows and ValidationError
/// (naming the 1-based data row) for rt <= 0 or non-integer ids.
ParsedTable parse_table(std::istream& source, const TableSchema& schema);

/// One column of the fixed-effects design: a main effect (one factor) or an
/// interaction (product of several factors).
struct Term {
  std::string name;
  std::vector<std::string> factors;
};

/// Ordered list of terms following the implicit intercept, e.g. so+dist+int.
struct Formula {
  std::vector<Term> terms;

  /// Parses "so+dist+int" or "so+dist+so:dist". "int" is shorthand for the
  /// so:dist interaction; a leading "1" is accepted and ignored.
  static Formula parse(std::string_view text);
  /// Distinct main-effect factors in order of first appearance.
  std::vector<std::string> factors() const;
  std::string to_string() const;
};

struct Dataset {
  int N = 0;
  int J = 0;
  int K = 0;
  /// 1-based dense indices.
  std::vector<int> subj;
  std::vector<int> item;
  /// Original ids, indexed by dense index - 1.
  std::vector<int> subject_ids;
  std::vector<int> item_ids;
  Vector rt;
  Matrix X;
  Matrix Z_u;
  Matrix Z_w;
  /// "(Intercept)" followed by the formula term names.
  std::vector<std::string> column_names;
  Formula formula;

  int P() const { return static_cast<int>(X.cols()); }
};

/// Densifies subject/item ids by first appearance and builds X with an
/// intercept followed by the formula terms. Z_u and Z_w are copies of X.
/// Throws ValidationError on empty input, unknown levels or a file-supplied
/// interaction column that disagrees with the product of its parents, and
/// DegenerateGroupingError for fewer than two subjects or items.
Dataset build_dataset(const std::vector<TrialRecord>& records,
                      const Formula& formula);

/// Canonical tab-separated form: subj, item, main-effect factor labels, rt.
/// Original ids are written, so re-densifying reproduces the same indices;
/// rt uses the shortest round-trip decimal representation.
void serialize_dataset(const Dataset& data, std::ostream& out);

}  // namespace blmm
