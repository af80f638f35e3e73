#pragma once

#include "fxtqp/constraints.hpp"
#include "fxtqp/fxts.hpp"
#include "fxtqp/qp.hpp"

#include <optional>
#include <stdexcept>
#include <vector>

namespace fxtqp {

// How a composite set turns into QP rows: one row per smooth branch, or one
// row for the max (gradient of the argmax branch).
enum class RowMode { PerBranch, MaxBranch };

struct SynthesisParams {
  double T_ud = 10.0;
  double mu = 5.0;
  Eigen::VectorXd w_u;          // per input, in scaled units; empty means all ones
  double w1 = 1.0;
  double w2 = 1.0;
  double q1 = 100.0;
  double k_margin = kDefaultMargin;
  Eigen::VectorXd input_scale;  // v = u / scale; empty means all ones
  std::optional<double> delta2_freeze_above;  // delta2 = 0 while any safety branch exceeds this level
  RowMode goal_rows = RowMode::PerBranch;
  RowMode safety_rows = RowMode::PerBranch;

  FxtsGains gains() const { return alpha_from_deadline(T_ud, mu); }
  void validate(int m) const;
  Eigen::VectorXd weights(int m) const;
  Eigen::VectorXd scale(int m) const;
};

struct ControlDecision {
  Eigen::VectorXd u;
  double delta1 = 0.0;
  double delta2 = 0.0;
  Regime regime = Regime::GlobalWithinDeadline;
  std::optional<double> predicted_T;
  Eigen::VectorXd duals;
  std::vector<int> active_set;
  bool strict_cs = true;
  bool delta2_frozen = false;
  double objective = 0.0;
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(QpStatus status, const std::string& what) : std::runtime_error(what), status_(status) {}
  QpStatus status() const { return status_; }

 private:
  QpStatus status_;
};

// Row order: input rows, convergence rows, safety rows (safes in order,
// branches in order within each).
QpProblem assemble(const ControlAffineSystem& sys, const SetFunction& hg, const std::vector<SetFunction>& safes,
                   const InputBounds& bounds, const SynthesisParams& params, const Eigen::VectorXd& x);

ControlDecision synthesize(const ControlAffineSystem& sys, const SetFunction& hg, const std::vector<SetFunction>& safes,
                           const InputBounds& bounds, const SynthesisParams& params, const Eigen::VectorXd& x,
                           const std::vector<int>* warm_start = nullptr);

struct ContinuityReport {
  double max_quotient = 0.0;
  int nonstrict_samples = 0;
  std::vector<double> quotients;
};

ContinuityReport continuity_probe(const ControlAffineSystem& sys, const SetFunction& hg,
                                  const std::vector<SetFunction>& safes, const InputBounds& bounds,
                                  const SynthesisParams& params, const Eigen::VectorXd& x, double radius,
                                  int n_samples, unsigned seed = 0);

}  // namespace fxtqp
