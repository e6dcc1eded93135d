#include "cli.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "blmm/diagnostics.hpp"
#include "blmm/errors.hpp"
#include "blmm/format.hpp"
#include "blmm/ingest.hpp"
#include "blmm/model.hpp"
#include "blmm/sampler.hpp"
#include "blmm/simulate.hpp"

namespace blmm::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

std::string default_formula(Family family) {
  return family == Family::MatrixForm ? "so+dist+int" : "so";
}

// CLI11 wants arguments in reverse order when given a vector.
int parse_args(CLI::App& app, const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err, bool& done) {
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  done = false;
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    done = true;
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    done = true;
    return kExitInvalid;
  }
  return kExitOk;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw Error("failed writing " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct ProbBelowQuery {
  std::string name;
  double threshold;
};

ProbBelowQuery parse_prob_below(const std::string& text) {
  const auto eq = text.rfind('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("--prob-below expects PARAM=THRESHOLD, got '" + text + "'");
  }
  auto v = parse_double(text.substr(eq + 1));
  if (!v) throw ValidationError("--prob-below: bad threshold in '" + text + "'");
  return {text.substr(0, eq), *v};
}

void print_prob_below(const DrawsMatrix& draws, const ProbBelowQuery& q, std::ostream& out) {
  const double p = prob_below(draws.pooled(q.name), q.threshold);
  out << "P(" << q.name << " < " << format_double(q.threshold) << ") = " << std::fixed
      << std::setprecision(4) << p << std::defaultfloat << '\n';
}

void report_warnings(const std::vector<SummaryRow>& rows, const FitResult& fit,
                     std::vector<std::string>& warnings) {
  for (const auto& r : rows) {
    if (r.rhat && *r.rhat > kRhatThreshold) {
      std::ostringstream s;
      s << "Rhat for " << r.name << " is " << std::setprecision(3) << *r.rhat
        << " (> " << kRhatThreshold << "); chains may not have converged";
      warnings.push_back(s.str());
    }
  }
  for (std::size_t c = 0; c < fit.chains.size(); ++c) {
    const auto& ch = fit.chains[c];
    if (ch.divergences > 0) {
      warnings.push_back("chain " + std::to_string(c + 1) + ": " +
                         std::to_string(ch.divergences) +
                         " divergent transitions after warmup");
    }
    for (const auto& w : ch.warnings) warnings.push_back(w);
  }
}

Vector json_vector(const json& j, const char* key, int n) {
  if (!j.contains(key)) {
    if (n == 0) return Vector(0);
    throw ValidationError(std::string("truth is missing '") + key + "'");
  }
  const auto& v = j.at(key);
  std::vector<double> vals;
  if (v.is_number()) {
    vals.push_back(v.get<double>());
  } else if (v.is_array()) {
    vals = v.get<std::vector<double>>();
  } else {
    throw ValidationError(std::string("truth '") + key + "' must be a number or array");
  }
  if (static_cast<int>(vals.size()) != n) {
    throw ValidationError(std::string("truth '") + key + "' has " +
                          std::to_string(vals.size()) + " values, expected " +
                          std::to_string(n));
  }
  for (double x : vals) {
    if (!(x > 0.0) || !std::isfinite(x)) {
      throw ValidationError(std::string("truth '") + key + "' must be positive");
    }
  }
  return Eigen::Map<const Vector>(vals.data(), n);
}

// Correlation factor from "corr_u" (full matrix) or "rho_u" (scalar, n = 2).
Matrix json_corr_factor(const json& j, const std::string& tag, int n) {
  Matrix c = Matrix::Identity(n, n);
  const std::string corr_key = "corr_" + tag;
  const std::string rho_key = "rho_" + tag;
  if (j.contains(rho_key)) {
    if (n != 2) throw ValidationError("truth '" + rho_key + "' needs a 2x2 correlation");
    const double rho = j.at(rho_key).get<double>();
    c(0, 1) = c(1, 0) = rho;
  } else if (j.contains(corr_key)) {
    const auto rows = j.at(corr_key).get<std::vector<std::vector<double>>>();
    if (static_cast<int>(rows.size()) != n) {
      throw ValidationError("truth '" + corr_key + "' must be " + std::to_string(n) + "x" +
                            std::to_string(n));
    }
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows[static_cast<std::size_t>(i)].size()) != n) {
        throw ValidationError("truth '" + corr_key + "' is not square");
      }
      for (int k = 0; k < n; ++k) c(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    }
  }
  for (int i = 0; i < n; ++i) {
    if (c(i, i) != 1.0) throw ValidationError("truth correlation diagonal must be 1");
    for (int k = 0; k < n; ++k) {
      if (i != k && !(std::abs(c(i, k)) < 1.0)) {
        throw ValidationError("truth correlations must satisfy |rho| < 1");
      }
    }
  }
  try {
    return cholesky(c);
  } catch (const Error& e) {
    throw ValidationError("truth correlation matrix for " + tag + " is invalid: " + e.what());
  }
}

json matrix_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(std::move(row));
  }
  return out;
}

json vector_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

std::string file_sha256(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path);
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (f) {
    f.read(buf, sizeof buf);
    if (f.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(f.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

int cmd_fit(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fit a Bayesian linear mixed model by HMC", "blmm fit"};
  std::string data_path, model_name, formula_text, out_dir = "blmm_fit";
  std::optional<std::string> region;
  SamplerConfig config;
  int warmup = -1;
  double lkj_eta = 2.0;
  app.add_option("--data", data_path, "Whitespace-separated data file with header")->required();
  app.add_option("--model", model_name, "fixef | ranint | ranslp | matrix")->required();
  app.add_option("--formula", formula_text, "Fixed-effect terms, e.g. so+dist+int");
  app.add_option("--iter", config.iter, "Iterations per chain")->capture_default_str();
  app.add_option("--chains", config.chains, "Number of chains")->capture_default_str();
  app.add_option("--warmup", warmup, "Warmup iterations (default iter/2)");
  app.add_option("--seed", config.seed, "Random seed")->capture_default_str();
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--region-filter", region, "Keep only rows with this region");
  app.add_option("--threads", config.threads, "Worker threads (default $BLMM_THREADS)");
  app.add_option("--target-accept", config.target_accept, "Target acceptance rate for step-size adaptation")->capture_default_str();
  app.add_option("--max-leapfrog", config.max_leapfrog, "Cap on leapfrog steps per iteration")->capture_default_str();
  app.add_option("--init-radius", config.init_radius, "Initial values drawn uniformly in [-r, r] on the unconstrained scale")->capture_default_str();
  app.add_option("--lkj-eta", lkj_eta, "LKJ shape for correlation priors")->capture_default_str();

  bool done = false;
  const int rc = parse_args(app, args, out, err, done);
  if (done) return rc;
  if (warmup >= 0) config.warmup = warmup;

  const std::string started = timestamp_utc();
  FitResult fit;
  Dataset data;
  ParsedTable table;
  ModelSpec spec;
  Formula formula;
  try {
    const Family family = parse_family(model_name);
    formula = Formula::parse(formula_text.empty() ? default_formula(family) : formula_text);
    std::ifstream in(data_path);
    if (!in) throw ValidationError("cannot open data file " + data_path);
    TableSchema schema;
    schema.factors = formula.factors();
    schema.region_filter = region;
    table = parse_table(in, schema);
    data = build_dataset(table.records, formula);
    spec = ModelSpec::make(family, data.P(), lkj_eta);
    config.validate();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  try {
    fit = run_chains(data, spec, config);
  } catch (const InitializationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInitFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }

  try {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    std::vector<std::string> chain_files;
    for (std::size_t c = 0; c < fit.draws.num_chains(); ++c) {
      const std::string name = "chain_" + std::to_string(c + 1) + ".csv";
      write_chain_csv(fit.draws, c, dir / name);
      chain_files.push_back(name);
    }
    const auto pars = summary_names(spec, data.J, data.K);
    const auto rows = summarize(fit.draws, pars);
    std::ostringstream text, csv, trace;
    write_summary_text(rows, text);
    write_summary_csv(rows, csv);
    trace_export(fit.draws, pars, trace);
    write_text_file(dir / "summary.txt", text.str());
    write_text_file(dir / "summary.csv", csv.str());
    write_text_file(dir / "trace.csv", trace.str());

    std::vector<std::string> warnings;
    report_warnings(rows, fit, warnings);

    json manifest;
    manifest["tool"] = "blmm";
    manifest["version"] = kVersion;
    manifest["command"] = "fit";
    manifest["model"] = {{"family", std::string(family_name(spec.family))},
                         {"formula", formula.to_string()},
                         {"P", spec.P},
                         {"n_u", spec.n_u},
                         {"n_w", spec.n_w},
                         {"lkj_eta", spec.lkj_eta}};
    manifest["data"] = {{"path", data_path},
                        {"sha256", file_sha256(data_path)},
                        {"region_filter", region ? json(*region) : json(nullptr)},
                        {"N", data.N},
                        {"J", data.J},
                        {"K", data.K},
                        {"rejected_rows", table.rejected_rows},
                        {"filtered_rows", table.filtered_rows}};
    manifest["sampler"] = {{"chains", config.chains},
                           {"iter", config.iter},
                           {"warmup", config.warmup_iterations()},
                           {"seed", config.seed},
                           {"target_accept", config.target_accept},
                           {"max_leapfrog", config.max_leapfrog},
                           {"init_radius", config.init_radius},
                           {"integration_time", config.integration_time}};
    json chains = json::array();
    for (std::size_t c = 0; c < fit.chains.size(); ++c) {
      const auto& ch = fit.chains[c];
      const auto& im = ch.adaptation.inv_metric;
      chains.push_back({{"chain", c + 1},
                        {"seed", ch.seed},
                        {"file", chain_files[c]},
                        {"step_size", ch.adaptation.step_size},
                        {"inv_metric_min", im.empty() ? 0.0 : *std::min_element(im.begin(), im.end())},
                        {"inv_metric_max", im.empty() ? 0.0 : *std::max_element(im.begin(), im.end())},
                        {"warmup_accept", ch.adaptation.warmup_accept},
                        {"warmup_divergences", ch.adaptation.warmup_divergences},
                        {"mean_accept", ch.mean_accept},
                        {"mean_leapfrog", ch.mean_leapfrog},
                        {"divergences", ch.divergences}});
    }
    manifest["chains"] = chains;
    manifest["first_iteration"] = fit.draws.first_iteration;
    manifest["summary_parameters"] = pars;
    manifest["outputs"] = {{"chains", chain_files},
                           {"summary_text", "summary.txt"},
                           {"summary_csv", "summary.csv"},
                           {"trace", "trace.csv"}};
    manifest["warnings"] = warnings;
    manifest["started_at"] = started;
    manifest["finished_at"] = timestamp_utc();
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

    out << text.str();
    for (const auto& w : warnings) err << "WARNING: " << w << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}

int cmd_simulate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulate a repeated-measures dataset from a model", "blmm simulate"};
  std::string model_name, truth_path, out_path, formula_text;
  SimulationLayout layout;
  bool no_latin = false;
  app.add_option("--model", model_name, "fixef | ranint | ranslp | matrix")->required();
  app.add_option("--truth", truth_path, "JSON file with true parameter values")->required();
  app.add_option("--subjects", layout.subjects, "Number of subjects J")->required();
  app.add_option("--items", layout.items, "Number of items K")->required();
  app.add_option("--seed", layout.seed, "Random seed")->capture_default_str();
  app.add_option("--out", out_path, "Output data file")->required();
  app.add_option("--formula", formula_text, "Fixed-effect terms (default so, or so+dist+int)");
  app.add_flag("--no-latin-square", no_latin, "Draw conditions at random");

  bool done = false;
  const int rc = parse_args(app, args, out, err, done);
  if (done) return rc;
  layout.latin_square = !no_latin;

  try {
    const Family family = parse_family(model_name);
    const Formula formula =
        Formula::parse(formula_text.empty() ? default_formula(family) : formula_text);
    const int P = static_cast<int>(formula.terms.size()) + 1;
    const ModelSpec spec = ModelSpec::make(family, P);

    json truth_json;
    try {
      truth_json = json::parse(read_text_file(truth_path));
    } catch (const json::exception& e) {
      throw ValidationError("cannot parse truth file " + truth_path + ": " + e.what());
    }
    ParameterState truth;
    try {
      const auto beta = truth_json.at("beta").get<std::vector<double>>();
      if (static_cast<int>(beta.size()) != P) {
        throw ValidationError("truth 'beta' has " + std::to_string(beta.size()) +
                              " values but the formula gives P = " + std::to_string(P));
      }
      truth.beta = Eigen::Map<const Vector>(beta.data(), P);
      truth.sigma_e = truth_json.at("sigma_e").get<double>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("truth file: ") + e.what());
    }
    if (!(truth.sigma_e > 0.0)) throw ValidationError("truth 'sigma_e' must be positive");
    truth.sigma_u = json_vector(truth_json, "sigma_u", spec.n_u);
    truth.sigma_w = json_vector(truth_json, "sigma_w", spec.n_w);
    truth.L_u = json_corr_factor(truth_json, "u", spec.n_u);
    truth.L_w = json_corr_factor(truth_json, "w", spec.n_w);

    const auto sim = simulate_dataset(spec, formula, truth, layout);
    std::ostringstream data_text;
    serialize_dataset(sim.data, data_text);
    write_text_file(out_path, data_text.str());

    json sidecar;
    sidecar["model"] = std::string(family_name(spec.family));
    sidecar["formula"] = formula.to_string();
    sidecar["subjects"] = layout.subjects;
    sidecar["items"] = layout.items;
    sidecar["latin_square"] = layout.latin_square;
    sidecar["seed"] = layout.seed;
    sidecar["beta"] = vector_json(sim.truth.beta);
    sidecar["sigma_e"] = sim.truth.sigma_e;
    sidecar["sigma_u"] = vector_json(sim.truth.sigma_u);
    sidecar["sigma_w"] = vector_json(sim.truth.sigma_w);
    sidecar["corr_u"] = matrix_json(sim.truth.L_u * sim.truth.L_u.transpose());
    sidecar["corr_w"] = matrix_json(sim.truth.L_w * sim.truth.L_w.transpose());
    sidecar["u"] = matrix_json(sim.u);
    sidecar["w"] = matrix_json(sim.w);
    write_text_file(out_path + ".truth.json", sidecar.dump(2) + "\n");
    out << "wrote " << sim.data.N << " rows to " << out_path << '\n';
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}

int cmd_summarize(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Summarize the draws of a previous fit", "blmm summarize"};
  std::string run_dir, pars_text, format = "text";
  std::vector<std::string> prob_below_args;
  app.add_option("--run", run_dir, "Directory written by blmm fit")->required();
  app.add_option("--pars", pars_text, "Comma-separated parameter names");
  app.add_option("--prob-below", prob_below_args, "PARAM=THRESHOLD, repeatable");
  app.add_option("--format", format, "text | csv")
      ->check(CLI::IsMember({"text", "csv"}))
      ->capture_default_str();

  bool done = false;
  const int rc = parse_args(app, args, out, err, done);
  if (done) return rc;

  try {
    const fs::path dir(run_dir);
    const fs::path manifest_path = dir / "manifest.json";
    json manifest;
    try {
      manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
      throw ValidationError(manifest_path.string() + ": " + e.what());
    }

    DrawsMatrix draws;
    std::vector<std::string> files;
    std::vector<std::string> default_pars;
    try {
      files = manifest.at("outputs").at("chains").get<std::vector<std::string>>();
      draws.first_iteration = manifest.at("first_iteration").get<int>();
      default_pars = manifest.at("summary_parameters").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ValidationError(manifest_path.string() + ": " + e.what());
    }
    for (const auto& f : files) {
      auto csv = read_chain_csv(dir / f);
      if (draws.names.empty()) {
        draws.names = csv.names;
      } else if (csv.names != draws.names) {
        throw SchemaError((dir / f).string() + ": header differs from the first chain");
      }
      if (!draws.chains.empty() && csv.values.rows() != draws.chains.front().rows()) {
        throw SchemaError((dir / f).string() + ": row count differs from the first chain");
      }
      draws.chains.push_back(std::move(csv.values));
    }
    if (draws.chains.empty()) throw ValidationError("run has no chain files");

    std::vector<ProbBelowQuery> queries;
    for (const auto& q : prob_below_args) queries.push_back(parse_prob_below(q));

    const auto pars = pars_text.empty() ? default_pars : split_list(pars_text);
    const auto rows = summarize(draws, pars);
    if (format == "csv") {
      write_summary_csv(rows, out);
    } else {
      write_summary_text(rows, out);
    }
    for (const auto& q : queries) print_prob_below(draws, q, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  static const char* kUsage =
      "usage: blmm <command> [options]\n"
      "\n"
      "commands:\n"
      "  fit        sample the posterior of a mixed model\n"
      "  simulate   generate a dataset from known parameters\n"
      "  summarize  recompute summaries from a fit directory\n"
      "\n"
      "Run 'blmm <command> --help' for options.\n";
  if (args.empty()) {
    err << kUsage;
    return kExitInvalid;
  }
  const std::string& cmd = args.front();
  const std::vector<std::string> rest(args.begin() + 1, args.end());
  if (cmd == "fit") return cmd_fit(rest, out, err);
  if (cmd == "simulate") return cmd_simulate(rest, out, err);
  if (cmd == "summarize") return cmd_summarize(rest, out, err);
  if (cmd == "--help" || cmd == "-h" || cmd == "help") {
    out << kUsage;
    return kExitOk;
  }
  if (cmd == "--version") {
    out << "blmm " << kVersion << '\n';
    return kExitOk;
  }
  err << "unknown command '" << cmd << "'\n\n" << kUsage;
  return kExitInvalid;
}

}  // namespace blmm::cli
