#pragma once

#include "fxtqp/scenarios.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fxtqp::cli {

enum ExitCode { kOk = 0, kConfigError = 2, kSolverFailure = 3, kRequirementFailure = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

struct RunConfig {
  std::string scenario = "acc";
  Overrides overrides;
  std::optional<double> dt;
  std::string out_dir = ".";
  std::optional<SweepAxis> sweep;
  int jobs = 1;
};

// Scenario ids: acc, two-robot, synthetic:<id>. Unknown keys or values
// that do not parse throw ConfigError.
Scenario build_scenario(const std::string& id, const Overrides& overrides, std::optional<double> dt);

// Merges a JSON config file into cfg; explicit flags are applied afterwards
// by the caller.
void load_config_file(const std::string& path, RunConfig& cfg);

// "key=v1,v2,..." -> axis; an empty value list is allowed.
SweepAxis parse_sweep(const std::string& text);
std::pair<std::string, std::string> parse_assignment(const std::string& text);

int exit_code_for(const Outcome& o);

// summary.json body for one run
std::string summary_json(const Trace& trace, const Summary& summary);

int cmd_run(const RunConfig& cfg, std::ostream& log);
int cmd_sweep(const RunConfig& cfg, std::ostream& log);

struct BoundPoint {
  double alpha1;
  double alpha2;
  double mu;
  double delta1;
  double V0;
};

struct BoundCheck {
  BoundPoint point;
  Regime regime;
  std::optional<double> domain;  // largest admissible V0; empty means unbounded
  bool in_domain;
  double bound;
  std::optional<double> hit_time;
  double closed_form;            // mu pi / (2 sqrt(a1 a2)), meaningful for delta1 = 0
  bool pass;
};

std::vector<BoundPoint> default_bounds_grid();
std::vector<BoundCheck> verify_bounds(const std::vector<BoundPoint>& grid);
void write_bounds_csv(const std::vector<BoundCheck>& rows, std::ostream& os);
int cmd_verify_bounds(const std::string& out_dir, std::ostream& log);

// argv entry point used by the executable
int main_entry(int argc, char** argv);

}  // namespace fxtqp::cli
