#include "blmm/draws.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "blmm/errors.hpp"
#include "blmm/format.hpp"

namespace blmm {

Eigen::Index DrawsMatrix::column(std::string_view name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw ValidationError("unknown parameter '" + std::string(name) + "'");
  }
  return it - names.begin();
}

bool DrawsMatrix::has(std::string_view name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

std::vector<Vector> DrawsMatrix::chains_of(std::string_view name) const {
  const auto c = column(name);
  std::vector<Vector> out;
  out.reserve(chains.size());
  for (const auto& m : chains) out.emplace_back(m.col(c));
  return out;
}

Vector DrawsMatrix::pooled(std::string_view name) const {
  const auto c = column(name);
  Eigen::Index total = 0;
  for (const auto& m : chains) total += m.rows();
  Vector out(total);
  Eigen::Index k = 0;
  for (const auto& m : chains) {
    out.segment(k, m.rows()) = m.col(c);
    k += m.rows();
  }
  return out;
}

void write_chain_csv(const DrawsMatrix& draws, std::size_t chain, std::ostream& out) {
  for (std::size_t j = 0; j < draws.names.size(); ++j) {
    if (j) out << ',';
    out << csv_field(draws.names[j]);
  }
  out << '\n';
  const Matrix& m = draws.chains.at(chain);
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(t, j));
    }
    out << '\n';
  }
}

void write_chain_csv(const DrawsMatrix& draws, std::size_t chain,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_chain_csv(draws, chain, out);
  if (!out) throw Error("failed writing " + path.string());
}

ChainCsv read_chain_csv(std::istream& in, std::string_view source) {
  const std::string src(source);
  ChainCsv csv;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(src + ": empty draws file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (!header) throw SchemaError(src + ": unterminated quote in header");
  for (const auto& f : *header) {
    if (f.empty()) throw SchemaError(src + ": empty column name in header");
    csv.names.push_back(f);
  }

  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto parsed = split_csv_line(line);
    if (!parsed) {
      throw SchemaError(src + ": row " + std::to_string(rows + 1) + ": unterminated quote");
    }
    const auto& fields = *parsed;
    if (fields.size() != csv.names.size()) {
      throw SchemaError(src + ": row " + std::to_string(rows + 1) + " has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(csv.names.size()));
    }
    for (const auto& f : fields) {
      auto v = parse_double(f);
      if (!v) {
        throw SchemaError(src + ": row " + std::to_string(rows + 1) +
                          ": non-numeric value '" + std::string(f) + "'");
      }
      values.push_back(*v);
    }
    ++rows;
  }
  const auto cols = static_cast<Eigen::Index>(csv.names.size());
  csv.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                              Eigen::RowMajor>>(values.data(), rows, cols);
  return csv;
}

ChainCsv read_chain_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path.string() + ": cannot open draws file");
  return read_chain_csv(in, path.string());
}

}  // namespace blmm
