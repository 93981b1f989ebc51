#pragma once

// Command-line front end: solve, bench, probe and list subcommands.
//
// Exit codes: 0 success (kkt_reached), 1 usage or input error, 2 max_iters
// (bench: a regular problem missed quadratic classification), 3 subproblem
// failure.

#include "nsdp/outer.hpp"

#include <iosfwd>
#include <string>

namespace nsdp {

inline constexpr const char* kIterationsCsvHeader = "# nsdp-iterations-csv v1";
inline constexpr const char* kIterationsCsvColumns =
    "k,sigma,log10_sigma,err,log10_err,norm_delta,n_alpha,n_beta,n_gamma,sub_iters,sub_residual,sub_status";
/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "NSDP_OUT_DIR";

/// Versioned per-iteration CSV: the header line, the column line, then one
/// row per record. Numbers use %.17g; absent values are empty fields.
std::string iterations_csv(const SolveReport& report);

/// Writes `content` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& content);

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nsdp
