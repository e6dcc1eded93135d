#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace blmm::cli {

/// Exit codes of the blmm tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitInitFailure = 2;

/// Runs the tool with args excluding the program name, e.g.
/// {"fit", "--data", "x.txt", "--model", "fixef"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_fit(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cmd_summarize(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Hex SHA-256 of a file's bytes.
std::string file_sha256(const std::string& path);

}  // namespace blmm::cli
