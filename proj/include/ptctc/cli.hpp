#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptctc::cli {

/// Bad flags, config keys or parameter combinations (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Sweep {
  /// A model parameter, or "name/g" for a value in units of g.
  std::string param;
  double from = 0.0;
  double to = 0.0;
  int steps = 0;

  double value(int i) const { return from + (to - from) * i / (steps - 1); }
};

/// Parses "name:from:to:steps"; throws UsageError unless steps ≥ 2 and
/// from < to.
Sweep parse_sweep(const std::string& text);

struct RunConfig {
  std::string command;
  std::string model = "ddm";
  /// Explicitly set model parameters; the rest take per-model defaults.
  std::map<std::string, double> params;
  std::vector<int> twice_spins;
  std::vector<Sweep> sweeps;
  double t_end = 50.0;
  double dt = 0.1;
  std::optional<std::vector<double>> initial;
  std::optional<double> abs_tol;
  std::optional<double> rel_tol;
  double break_symmetry = 0.0;
  std::vector<std::pair<std::string, double>> extra_jumps;
  int samples = 1000;
  bool refine = false;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string output;
  std::string format = "csv";

  /// The merged settings as given, minus output path and thread count.
  nlohmann::json canonical;
};

/// Builds a RunConfig from merged settings (config file overlaid by flags).
/// Throws UsageError on unknown keys or invalid values.
RunConfig make_config(const std::string& command, const nlohmann::json& settings);

/// Entry point behind the ptctc executable. Results go to --output (or `out`
/// when absent); diagnostics go to `err` as single lines of the form
///   ptctc: error: kind=<usage|numerical|io> code=<n> message="..."
/// Returns 0 on success, 1 on numerical or I/O failure, 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ptctc::cli
