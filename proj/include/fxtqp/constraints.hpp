#pragma once

#include "fxtqp/fxts.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace fxtqp {

using StateMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using InputMatrixMap = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
using ScalarField = std::function<double(const Eigen::VectorXd&)>;

// x' = f(x) + g(x) u (+ disturbance(x), plant only)
struct ControlAffineSystem {
  int n = 0;
  int m = 0;
  StateMap f;
  InputMatrixMap g;
  StateMap disturbance;  // empty when absent
};

enum class SetKind { Goal, Safe };

// Set {x : h(x) <= 0}. A composite set is the max over its branches.
class SetFunction {
 public:
  SetFunction(SetKind kind, std::string name, ScalarField h, StateMap grad);
  static SetFunction max_of(SetKind kind, std::string name, std::vector<SetFunction> branches);

  double value(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  // index of the largest branch, smallest index on ties; 0 for smooth sets
  int argmax(const Eigen::VectorXd& x) const;

  bool composite() const { return !branches_.empty(); }
  const std::vector<SetFunction>& branches() const { return branches_; }
  // smooth pieces, nested composites flattened in order
  std::vector<SetFunction> leaves() const;

  SetKind kind() const { return kind_; }
  const std::string& name() const { return name_; }

 private:
  SetKind kind_;
  std::string name_;
  ScalarField h_;
  StateMap grad_;
  std::vector<SetFunction> branches_;
};

struct InputBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  InputBounds() = default;
  InputBounds(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static InputBounds symmetric(int m, double limit);
  int m() const { return static_cast<int>(lower.size()); }
};

struct LieDerivatives {
  double Lf = 0.0;
  Eigen::RowVectorXd Lg;
};

// One row over z = (v, delta1, delta2): a . z <= rhs
struct ConstraintRow {
  Eigen::RowVectorXd a;
  double rhs = 0.0;
};

struct InputRows {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

LieDerivatives lie_derivatives(const ControlAffineSystem& sys, const SetFunction& s, const Eigen::VectorXd& x);

// max(0, h)^gamma
double positive_power(double h, double gamma);

ConstraintRow convergence_row(const ControlAffineSystem& sys, const SetFunction& hg, const Eigen::VectorXd& x,
                              const FxtsGains& gains);

ConstraintRow safety_row(const ControlAffineSystem& sys, const SetFunction& hs, const Eigen::VectorXd& x);

InputRows input_rows(const InputBounds& bounds);

// Max relative error between the analytic gradient and central differences.
// States within a few eps of a branch switch are skipped.
double finite_diff_gradient_check(const SetFunction& s, const std::vector<Eigen::VectorXd>& xs, double eps = 1e-6);

}  // namespace fxtqp
