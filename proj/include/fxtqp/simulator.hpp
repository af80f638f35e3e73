#pragma once

#include "fxtqp/constraints.hpp"
#include "fxtqp/controller.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fxtqp {

struct Phase {
  SetFunction goal;
  double deadline;                     // seconds after the phase starts
  std::vector<SetFunction> safe_extra;
  double reach_tol = 0.0;              // phase is met once goal(x) <= reach_tol
};

struct PhaseSchedule {
  std::vector<Phase> phases;
  std::vector<SetFunction> global_safes;

  void validate() const;
  // number of safety columns in a trace: global leaves plus the widest phase
  int safety_columns() const;
};

class NonFiniteState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutcomeKind { AllPhasesMet, DeadlineMissed, SafetyViolated, SolverFailure };

const char* to_string(OutcomeKind k);

struct Outcome {
  OutcomeKind kind = OutcomeKind::AllPhasesMet;
  int phase = -1;   // DeadlineMissed
  double t = 0.0;   // SafetyViolated, SolverFailure
  int branch = -1;  // SafetyViolated
  std::string detail;
};

// Records at a terminal state (completion, violation, missed deadline,
// solver failure) carry NaN inputs and slacks.
struct TraceRecord {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  double h_goal = 0.0;
  Eigen::VectorXd h_safe;
  double delta1 = 0.0;
  double delta2 = 0.0;
  bool strict_cs = false;
  int active_set_size = 0;
  int phase = 0;  // equals the phase count once every phase is met
  bool delta2_frozen = false;
};

struct BranchWarnings {
  int steps = 0;       // steps with 0 < h <= band
  double max_h = -1e300;
  double band = 0.0;   // final discretization band
};

struct Trace {
  std::string scenario_id;
  double dt = 0.0;
  int n_phases = 0;
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  std::vector<std::string> safety_names;
  std::vector<TraceRecord> records;
  Outcome outcome;
  std::vector<BranchWarnings> warnings;
};

struct RunOptions {
  double dt = 1e-2;
  std::optional<double> hold_until;  // keep running on the last phase's sets until this time
  std::string scenario_id;
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
};

Eigen::VectorXd step_euler(const ControlAffineSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           double dt);

Trace run(const ControlAffineSystem& sys, const PhaseSchedule& schedule, const InputBounds& bounds,
          const SynthesisParams& params, const Eigen::VectorXd& x0, const RunOptions& opts);

struct SeparationSpec {
  int first = 0;   // index of the first agent's position block
  int second = 0;  // index of the second agent's position block
  int dim = 2;
};

struct Summary {
  std::vector<std::optional<double>> min_safety_margin;  // per safety column: min over t of -h
  std::optional<double> min_separation;
  std::vector<double> reach_times;  // per completed phase, relative to the phase start
  std::vector<std::optional<double>> max_abs_u;
  std::optional<double> max_delta1;
  int nonstrict_steps = 0;
};

Summary monitor(const Trace& trace, const std::optional<SeparationSpec>& sep = std::nullopt);

void write_trace_csv(const Trace& trace, std::ostream& os);
// Restores records and column names; run metadata is not part of the CSV.
Trace read_trace_csv(std::istream& is);

}  // namespace fxtqp
