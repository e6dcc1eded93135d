#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blmm/draws.hpp"
#include "blmm/linalg.hpp"

namespace blmm {

/// Split R-hat. Every chain is cut into halves (odd lengths drop the middle
/// draw) and with n draws per half, W the mean within-half variance and
/// B / n the variance of the half means:
///
///   R = sqrt(((n - 1) / n * W + B / n) / W)
///
/// Returns nullopt when W == 0. Throws DiagnosticError for fewer than four
/// draws per chain or chains of unequal length.
std::optional<double> split_rhat(const std::vector<Vector>& chains);

/// Convergence threshold used for warnings.
inline constexpr double kRhatThreshold = 1.1;

/// Sample quantile with linear interpolation between order statistics
/// (h = (n - 1) p, the "type 7" rule). Throws DiagnosticError on empty input
/// or p outside [0, 1].
double quantile(const Vector& draws, double p);
std::vector<double> quantiles(const Vector& draws, std::span<const double> probs);

/// Fraction of draws strictly below threshold.
double prob_below(const Vector& draws, double threshold);

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double q2_5 = 0.0;
  double q50 = 0.0;
  double q97_5 = 0.0;
  std::optional<double> rhat;
};

/// One row per requested name, in the draws' column order. An empty filter
/// selects every column except lp__ and divergent__. Throws ValidationError
/// for unknown names.
std::vector<SummaryRow> summarize(const DrawsMatrix& draws,
                                  const std::vector<std::string>& names = {});

/// Aligned plain text, columns name mean 2.5% 50% 97.5% Rhat.
void write_summary_text(const std::vector<SummaryRow>& rows, std::ostream& out);
/// CSV with header name,mean,2.5%,50%,97.5%,Rhat; undefined R-hat is "NA".
void write_summary_csv(const std::vector<SummaryRow>& rows, std::ostream& out);

/// Long-format trace: header chain,iteration,parameter,value; chains are
/// 1-based and iterations carry the post-warmup labels.
void trace_export(const DrawsMatrix& draws, const std::vector<std::string>& names,
                  std::ostream& out);

/// Reads a trace export back into draws holding only the exported columns.
DrawsMatrix read_trace(std::istream& in);

}  // namespace blmm
