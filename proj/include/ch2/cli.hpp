#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ch2/emden.hpp"
#include "ch2/selfsim.hpp"
#include "ch2/verify.hpp"

namespace ch2::cli {

// Exit codes of the ch2sim binary.
enum ExitCode : int {
  kOk = 0,
  kInvalidInput = 1,
  kNumericalFailure = 2,
  kVerificationFailure = 3,
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using KeyValues = std::map<std::string, std::string>;

// Flat "key = value" text; '#' starts a comment. A line holding only "---"
// separates blocks (one block per case in sweep configs). Empty blocks are
// dropped.
std::vector<KeyValues> parse_blocks(std::string_view text);

// Fully parsed and validated run configuration. Every field is checked
// against the downstream invariants before any computation starts.
struct RunConfig {
  std::optional<int> sigma;
  double xi = 0.0;
  double alpha = 0.0;
  double a0 = 0.0;
  double a1 = 0.0;
  double tol = 1e-10;
  // Physical end time; similarity time is 3 t.
  std::optional<double> t_end;
  double t0 = 0.0;
  int nt = 81;
  int nx = 81;
  std::optional<double> x_min;
  std::optional<double> x_max;
  int levels = 2;
  double support_fraction = 0.8;
  double x_extent = 1.0;
  std::vector<double> dispersion = {0.0, 1.0, 10.0};
  std::vector<double> conservation_times;
  std::vector<double> decay_times = {1.0, 10.0, 100.0, 1000.0};
  double velocity_scale = 1.0;
  verify::Tolerances tolerances;

  emden::EmdenParams emden() const { return {xi, a0, a1}; }
  // Throws selfsim::InvalidCase when sigma is missing or the sign pattern is
  // not one of the four solution cases.
  selfsim::SolutionCase solution_case() const;
  verify::SuiteOptions suite_options() const;
};

// requires_case: sigma and alpha must be present and form a valid case.
RunConfig make_config(const KeyValues& kv, bool requires_case);

// Entry point shared by the binary and the tests. argv[0] is the program
// name. Files go to the --out directory; diagnostics to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Individual commands; each writes its files into out_dir and returns an
// exit code. Exceptions other than verification failures propagate.
int cmd_emden(const RunConfig& cfg, const std::string& out_dir, std::ostream& out);
int cmd_construct(const RunConfig& cfg, const std::string& out_dir, std::ostream& out);
int cmd_verify(const RunConfig& cfg, const std::string& out_dir, std::ostream& out);
int cmd_sweep(const std::vector<RunConfig>& cases, const std::string& out_dir, std::ostream& out);

// "%.17g" formatting used for every number in CSV output.
std::string format_number(double v);

}  // namespace ch2::cli
