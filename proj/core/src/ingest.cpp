#include "blmm/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "blmm/errors.hpp"
#include "blmm/format.hpp"

namespace blmm {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::istringstream in(line);
  std::string f;
  while (in >> f) {
    if (f.size() >= 2 && f.front() == '"' && f.back() == '"') {
      f = f.substr(1, f.size() - 2);
    }
    fields.push_back(f);
  }
  return fields;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

// Header lookup. R's write.table emits a header one field shorter than the
// rows (row names in the first column); that layout is accepted too.
struct Header {
  std::vector<std::string> names;
  std::size_t offset = 0;

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names.begin()) + offset;
  }
};

}  // namespace

FactorSpec so_factor() { return {"so", {"o", "obj-ext"}, {"s", "subj-ext"}}; }

FactorSpec dist_factor() { return {"dist", {"f", "far"}, {"n", "near"}}; }

FactorSpec factor_spec(std::string_view name) {
  if (name == "so") return so_factor();
  if (name == "dist") return dist_factor();
  throw SchemaError("unknown factor '" + std::string(name) +
                    "' (known factors: so, dist)");
}

int contrast_code(std::string_view level, const FactorSpec& factor) {
  if (std::find(factor.positive.begin(), factor.positive.end(), level) !=
      factor.positive.end()) {
    return +1;
  }
  if (std::find(factor.negative.begin(), factor.negative.end(), level) !=
      factor.negative.end()) {
    return -1;
  }
  std::vector<std::string> permitted = factor.positive;
  permitted.insert(permitted.end(), factor.negative.begin(),
                   factor.negative.end());
  throw ValidationError("factor '" + factor.name + "': unknown level '" +
                        std::string(level) + "' (permitted: " +
                        join(permitted, ", ") + ")");
}

ParsedTable parse_table(std::istream& source, const TableSchema& schema) {
  ParsedTable result;
  std::string line;

  Header header;
  while (std::getline(source, line)) {
    header.names = split_fields(line);
    if (!header.names.empty()) break;
  }
  if (header.names.empty()) throw SchemaError("input has no header row");

  auto require = [&](const std::string& name) -> std::size_t {
    auto idx = header.find(name);
    if (!idx) throw SchemaError("missing required column '" + name + "'");
    return *idx;
  };

  std::vector<std::pair<std::string, std::size_t>> factor_cols;
  std::size_t subj_col = 0, item_col = 0, rt_col = 0;
  std::optional<std::size_t> region_col, int_col;
  bool resolved = false;

  auto resolve_columns = [&](std::size_t width) {
    if (width == header.names.size() + 1) header.offset = 1;
    subj_col = require("subj");
    item_col = require("item");
    rt_col = require("rt");
    for (const auto& f : schema.factors) {
      auto idx = header.find(f);
      if (!idx && f == "so") idx = header.find("type");
      if (!idx) throw SchemaError("missing required column '" + f + "'");
      factor_cols.emplace_back(f, *idx);
    }
    region_col = header.find("region");
    int_col = header.find("int");
    if (schema.region_filter && !region_col) {
      throw SchemaError("region filter given but input has no 'region' column");
    }
    resolved = true;
  };

  std::size_t row_number = 0;
  while (std::getline(source, line)) {
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    ++row_number;
    if (!resolved) {
      // Resolve lazily so an empty body still succeeds for a valid header.
      resolve_columns(fields.size());
    }
    if (fields.size() != header.names.size() + header.offset) {
      throw SchemaError("row " + std::to_string(row_number) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.names.size() + header.offset));
    }

    if (schema.region_filter && fields[*region_col] != *schema.region_filter) {
      ++result.filtered_rows;
      continue;
    }

    auto rt = parse_double(fields[rt_col]);
    if (!rt || std::isnan(*rt)) {
      ++result.rejected_rows;
      continue;
    }
    if (!(*rt > 0.0) || std::isinf(*rt)) {
      throw ValidationError("row " + std::to_string(row_number) +
                            ": rt must be positive and finite, got " +
                            fields[rt_col]);
    }

    TrialRecord rec;
    auto subj = parse_integer(fields[subj_col]);
    auto item = parse_integer(fields[item_col]);
    if (!subj || *subj < 1) {
      throw ValidationError("row " + std::to_string(row_number) +
                            ": subj must be a positive integer, got " +
                            fields[subj_col]);
    }
    if (!item || *item < 1) {
      throw ValidationError("row " + std::to_string(row_number) +
                            ": item must be a positive integer, got " +
                            fields[item_col]);
    }
    rec.subj = static_cast<int>(*subj);
    rec.item = static_cast<int>(*item);
    rec.rt = *rt;
    for (const auto& [name, col] : factor_cols) rec.predictors[name] = fields[col];
    if (int_col) rec.predictors["int"] = fields[*int_col];
    if (region_col) rec.region = fields[*region_col];
    result.records.push_back(std::move(rec));
  }

  if (!resolved) {
    // Header-only input: still validate the schema.
    resolve_columns(header.names.size());
  }
  return result;
}

Formula Formula::parse(std::string_view text) {
  Formula formula;
  std::string s(text);
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('+', start);
    if (end == std::string::npos) end = s.size();
    const std::string token = trim(std::string_view(s).substr(start, end - start));
    start = end + 1;
    if (token.empty()) {
      throw ValidationError("formula '" + s + "': empty term");
    }
    if (token == "1") continue;
    Term term;
    term.name = token;
    if (token == "int") {
      term.factors = {"so", "dist"};
    } else {
      std::size_t p = 0;
      while (p <= token.size()) {
        auto q = token.find(':', p);
        if (q == std::string::npos) q = token.size();
        const std::string f = trim(std::string_view(token).substr(p, q - p));
        if (f.empty()) throw ValidationError("formula '" + s + "': empty factor");
        factor_spec(f);
        term.factors.push_back(f);
        p = q + 1;
      }
    }
    for (const auto& existing : formula.terms) {
      if (existing.name == term.name) {
        throw ValidationError("formula '" + s + "': duplicate term " + term.name);
      }
    }
    formula.terms.push_back(std::move(term));
  }
  if (formula.terms.empty()) {
    throw ValidationError("formula '" + s + "' has no terms");
  }
  for (const auto& t : formula.terms) {
    if (t.factors.size() < 2) continue;
    for (const auto& f : t.factors) {
      bool has_main = false;
      for (const auto& u : formula.terms) {
        if (u.factors.size() == 1 && u.factors[0] == f) has_main = true;
      }
      if (!has_main) {
        throw ValidationError("formula '" + s + "': interaction " + t.name +
                              " requires main effect " + f);
      }
    }
  }
  return formula;
}

std::vector<std::string> Formula::factors() const {
  std::vector<std::string> out;
  for (const auto& t : terms) {
    for (const auto& f : t.factors) {
      if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    }
  }
  return out;
}

std::string Formula::to_string() const {
  std::vector<std::string> names;
  for (const auto& t : terms) names.push_back(t.name);
  return join(names, "+");
}

Dataset build_dataset(const std::vector<TrialRecord>& records,
                      const Formula& formula) {
  if (records.empty()) throw ValidationError("build_dataset: no records");
  if (formula.terms.empty()) throw ValidationError("build_dataset: empty formula");

  const auto factor_names = formula.factors();
  std::vector<FactorSpec> specs;
  for (const auto& f : factor_names) specs.push_back(factor_spec(f));

  Dataset d;
  d.formula = formula;
  d.N = static_cast<int>(records.size());
  d.subj.resize(records.size());
  d.item.resize(records.size());
  d.rt.resize(d.N);
  const Eigen::Index P = static_cast<Eigen::Index>(formula.terms.size()) + 1;
  d.X.resize(d.N, P);
  d.column_names.push_back("(Intercept)");
  for (const auto& t : formula.terms) d.column_names.push_back(t.name);

  std::unordered_map<int, int> subj_index, item_index;
  std::unordered_map<std::string, int> codes;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (rec.subj < 1 || rec.item < 1) {
      throw ValidationError("record " + std::to_string(i + 1) +
                            ": subj and item must be >= 1");
    }
    if (!(rec.rt > 0.0) || !std::isfinite(rec.rt)) {
      throw ValidationError("record " + std::to_string(i + 1) +
                            ": rt must be positive and finite");
    }
    auto [sit, snew] = subj_index.try_emplace(rec.subj, d.J + 1);
    if (snew) {
      ++d.J;
      d.subject_ids.push_back(rec.subj);
    }
    auto [iit, inew] = item_index.try_emplace(rec.item, d.K + 1);
    if (inew) {
      ++d.K;
      d.item_ids.push_back(rec.item);
    }
    d.subj[i] = sit->second;
    d.item[i] = iit->second;
    d.rt(static_cast<Eigen::Index>(i)) = rec.rt;

    codes.clear();
    for (std::size_t f = 0; f < factor_names.size(); ++f) {
      auto it = rec.predictors.find(factor_names[f]);
      if (it == rec.predictors.end()) {
        throw ValidationError("record " + std::to_string(i + 1) +
                              ": missing factor '" + factor_names[f] + "'");
      }
      codes[factor_names[f]] = contrast_code(it->second, specs[f]);
    }

    const auto row = static_cast<Eigen::Index>(i);
    d.X(row, 0) = 1.0;
    for (std::size_t t = 0; t < formula.terms.size(); ++t) {
      const auto& term = formula.terms[t];
      int value = 1;
      for (const auto& f : term.factors) value *= codes[f];
      if (term.factors.size() > 1) {
        auto supplied = rec.predictors.find(term.name);
        if (supplied != rec.predictors.end()) {
          auto v = parse_double(supplied->second);
          if (!v || *v != static_cast<double>(value)) {
            throw ValidationError(
                "record " + std::to_string(i + 1) + ": supplied " + term.name +
                "=" + supplied->second + " disagrees with the product of " +
                join(term.factors, " and ") + " (" + std::to_string(value) + ")");
          }
        }
      }
      d.X(row, static_cast<Eigen::Index>(t) + 1) = value;
    }
  }

  if (d.J < 2) {
    throw DegenerateGroupingError("need at least 2 distinct subjects, found " +
                                  std::to_string(d.J));
  }
  if (d.K < 2) {
    throw DegenerateGroupingError("need at least 2 distinct items, found " +
                                  std::to_string(d.K));
  }
  d.Z_u = d.X;
  d.Z_w = d.X;
  return d;
}

void serialize_dataset(const Dataset& data, std::ostream& out) {
  const auto factors = data.formula.factors();
  std::vector<Eigen::Index> cols;
  std::vector<FactorSpec> specs;
  for (const auto& f : factors) {
    specs.push_back(factor_spec(f));
    auto it = std::find(data.column_names.begin(), data.column_names.end(), f);
    if (it == data.column_names.end()) {
      throw SchemaError("serialize_dataset: factor " + f +
                        " has no main-effect column");
    }
    cols.push_back(it - data.column_names.begin());
  }

  out << "subj\titem";
  for (const auto& f : factors) out << '\t' << f;
  out << "\trt\n";
  for (int i = 0; i < data.N; ++i) {
    out << data.subject_ids[data.subj[i] - 1] << '\t'
        << data.item_ids[data.item[i] - 1];
    for (std::size_t f = 0; f < factors.size(); ++f) {
      const double code = data.X(i, cols[f]);
      out << '\t' << (code > 0 ? specs[f].positive.front() : specs[f].negative.front());
    }
    out << '\t' << format_double(data.rt(i)) << '\n';
  }
}

}  // namespace blmm
