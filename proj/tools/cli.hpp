#ifndef COMPART_TOOLS_CLI_HPP
#define COMPART_TOOLS_CLI_HPP

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace compart::cli {

/// Everything a command needs; filled from flags or from a JSON run file.
struct RunConfig {
  std::string command;
  std::string model_path;
  double t0 = 0.0;
  double t_end = 10.0;
  std::size_t grid = 201;
  std::vector<double> times;  // overrides grid when non-empty
  double rtol = 1e-8;
  double atol = 1e-10;
  std::vector<std::string> z;  // input overrides, one per compartment
  std::size_t mw = 6;
  std::vector<std::string> paths;
  std::vector<std::string> kinds;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::string out;
  std::string format = "csv";
  bool force = false;

  std::string scope = "composite";  // diact: composite, simple, or subsystem:<l>
  bool storage = false;             // diact: also integrate storages
  double t1 = std::numeric_limits<double>::quiet_NaN();  // activation time, defaults to t0
  std::string mode = "simultaneous";                      // path: simultaneous or posthoc
  std::string basis = "storage";                          // interact
  std::string source = "composite";
  std::string normalization = "pairwise-throughflow";
  double t_static = 0.0;  // static: time at which inputs are evaluated
  bool strong = false;    // validate: require the strong form
};

enum ExitCode { kOk = 0, kValidation = 1, kNumerical = 2 };

/// Reads a JSON run file; a relative model path resolves against the file's directory.
RunConfig load_run_config(const std::string& path);

/// Runs one command and writes its files. Returns an ExitCode.
int execute(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Splits on commas that are not inside parentheses.
std::vector<std::string> split_top_level(const std::string& text);

}  // namespace compart::cli

#endif
