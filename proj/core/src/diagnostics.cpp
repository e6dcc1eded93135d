#include "blmm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "blmm/errors.hpp"
#include "blmm/format.hpp"

namespace blmm {

std::optional<double> split_rhat(const std::vector<Vector>& chains) {
  if (chains.empty()) throw DiagnosticError("split_rhat: no chains");
  const Eigen::Index len = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != len) throw DiagnosticError("split_rhat: chains differ in length");
  }
  if (len < 4) {
    throw DiagnosticError("split_rhat: need at least 4 draws per chain, got " +
                          std::to_string(len));
  }
  const Eigen::Index n = len / 2;
  std::vector<Vector> halves;
  for (const auto& c : chains) {
    halves.emplace_back(c.head(n));
    halves.emplace_back(c.tail(n));
  }
  const auto m = static_cast<double>(halves.size());
  const auto nd = static_cast<double>(n);

  Vector means(static_cast<Eigen::Index>(halves.size()));
  double w = 0.0;
  for (std::size_t s = 0; s < halves.size(); ++s) {
    const double mean = halves[s].mean();
    means(static_cast<Eigen::Index>(s)) = mean;
    w += (halves[s].array() - mean).square().sum() / (nd - 1.0);
  }
  w /= m;
  const double grand = means.mean();
  const double b = nd * (means.array() - grand).square().sum() / (m - 1.0);
  if (!(w > 0.0)) return std::nullopt;
  const double var_plus = (nd - 1.0) / nd * w + b / nd;
  return std::sqrt(var_plus / w);
}

double quantile(const Vector& draws, double p) {
  const double probs[] = {p};
  return quantiles(draws, probs).front();
}

std::vector<double> quantiles(const Vector& draws, std::span<const double> probs) {
  if (draws.size() == 0) throw DiagnosticError("quantiles: empty draws");
  std::vector<double> sorted(draws.data(), draws.data() + draws.size());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DiagnosticError("quantiles: probability outside [0, 1]");
    }
    const double h = static_cast<double>(n - 1) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    out.push_back(sorted[lo] + frac * (sorted[hi] - sorted[lo]));
  }
  return out;
}

double prob_below(const Vector& draws, double threshold) {
  if (draws.size() == 0) throw DiagnosticError("prob_below: empty draws");
  return static_cast<double>((draws.array() < threshold).count()) /
         static_cast<double>(draws.size());
}

std::vector<SummaryRow> summarize(const DrawsMatrix& draws,
                                  const std::vector<std::string>& names) {
  std::vector<Eigen::Index> cols;
  if (names.empty()) {
    for (std::size_t j = 0; j < draws.names.size(); ++j) {
      if (draws.names[j] != "lp__" && draws.names[j] != "divergent__") {
        cols.push_back(static_cast<Eigen::Index>(j));
      }
    }
  } else {
    for (const auto& n : names) cols.push_back(draws.column(n));
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  }

  static constexpr double kProbs[] = {0.025, 0.5, 0.975};
  std::vector<SummaryRow> rows;
  for (auto c : cols) {
    const auto& name = draws.names[static_cast<std::size_t>(c)];
    const Vector pooled = draws.pooled(name);
    SummaryRow row;
    row.name = name;
    row.mean = pooled.mean();
    const auto q = quantiles(pooled, kProbs);
    row.q2_5 = q[0];
    row.q50 = q[1];
    row.q97_5 = q[2];
    try {
      row.rhat = split_rhat(draws.chains_of(name));
    } catch (const DiagnosticError&) {
      row.rhat.reset();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

void write_summary_text(const std::vector<SummaryRow>& rows, std::ostream& out) {
  std::size_t width = 4;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  auto pad_left = [](const std::string& s, std::size_t w) {
    return std::string(w > s.size() ? w - s.size() : 0, ' ') + s;
  };
  auto pad_right = [](const std::string& s, std::size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  out << pad_right("", width) << pad_left("mean", 10) << pad_left("2.5%", 10)
      << pad_left("50%", 10) << pad_left("97.5%", 10) << pad_left("Rhat", 8) << '\n';
  for (const auto& r : rows) {
    out << pad_right(r.name, width) << pad_left(fixed(r.mean, 4), 10)
        << pad_left(fixed(r.q2_5, 4), 10) << pad_left(fixed(r.q50, 4), 10)
        << pad_left(fixed(r.q97_5, 4), 10)
        << pad_left(r.rhat ? fixed(*r.rhat, 3) : "NA", 8) << '\n';
  }
}

void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "name,mean,2.5%,50%,97.5%,Rhat\n";
  for (const auto& r : rows) {
    out << csv_field(r.name) << ',' << format_double(r.mean) << ',' << format_double(r.q2_5) << ','
        << format_double(r.q50) << ',' << format_double(r.q97_5) << ','
        << (r.rhat ? format_double(*r.rhat) : "NA") << '\n';
  }
}

void trace_export(const DrawsMatrix& draws, const std::vector<std::string>& names,
                  std::ostream& out) {
  std::vector<Eigen::Index> cols;
  for (const auto& n : names) cols.push_back(draws.column(n));
  out << "chain,iteration,parameter,value\n";
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const Matrix& m = draws.chains[c];
    for (std::size_t k = 0; k < cols.size(); ++k) {
      for (Eigen::Index t = 0; t < m.rows(); ++t) {
        out << c + 1 << ',' << draws.first_iteration + t << ',' << csv_field(names[k]) << ','
            << format_double(m(t, cols[k])) << '\n';
      }
    }
  }
}

DrawsMatrix read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "chain,iteration,parameter,value") {
    throw SchemaError("trace: unexpected header");
  }
  // chain -> parameter -> (iteration, value)
  std::map<int, std::map<std::string, std::vector<std::pair<int, double>>>> cells;
  std::vector<std::string> order;
  int first_iteration = -1;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    if (line.back() == '\r') line.pop_back();
    const auto fields = split_csv_line(line);
    if (!fields || fields->size() != 4) {
      throw SchemaError("trace: malformed row " + std::to_string(row));
    }
    const std::string& name = (*fields)[2];
    auto chain = parse_integer((*fields)[0]);
    auto iter = parse_integer((*fields)[1]);
    auto value = parse_double((*fields)[3]);
    if (!chain || !iter || !value || *chain < 1 || *iter < 1) {
      throw SchemaError("trace: malformed row " + std::to_string(row));
    }
    if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
    if (first_iteration < 0 || *iter < first_iteration) first_iteration = static_cast<int>(*iter);
    cells[static_cast<int>(*chain)][name].emplace_back(static_cast<int>(*iter), *value);
  }
  DrawsMatrix d;
  d.names = order;
  d.first_iteration = first_iteration < 0 ? 1 : first_iteration;
  for (auto& [chain, params] : cells) {
    Eigen::Index rows = 0;
    for (auto& [name, v] : params) rows = std::max<Eigen::Index>(rows, static_cast<Eigen::Index>(v.size()));
    Matrix m = Matrix::Constant(rows, static_cast<Eigen::Index>(order.size()), std::nan(""));
    for (std::size_t j = 0; j < order.size(); ++j) {
      auto it = params.find(order[j]);
      if (it == params.end()) continue;
      for (const auto& [iter, value] : it->second) {
        const Eigen::Index r = iter - d.first_iteration;
        if (r >= rows) throw SchemaError("trace: iteration labels are not contiguous");
        m(r, static_cast<Eigen::Index>(j)) = value;
      }
    }
    d.chains.push_back(std::move(m));
  }
  return d;
}

}  // namespace blmm
