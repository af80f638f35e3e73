#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <vector>

namespace fxtqp {

// minimize 0.5 z'Hz + F'z  s.t.  A z <= b,  Aeq z = beq
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd F;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::MatrixXd Aeq;  // optional, may have zero rows
  Eigen::VectorXd beq;

  int n() const { return static_cast<int>(H.rows()); }
  int m() const { return static_cast<int>(A.rows()); }
  int meq() const { return static_cast<int>(Aeq.rows()); }
  double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(H * z) + F.dot(z); }
};

enum class QpStatus { Optimal, Infeasible, IterationLimit };

const char* to_string(QpStatus s);

struct QpSolution {
  QpStatus status = QpStatus::Infeasible;
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;     // one per inequality row, zero when inactive
  Eigen::VectorXd lambda_eq;  // one per equality row
  Eigen::VectorXd slack;      // b - A z
  std::vector<int> active_set;  // inequality rows in the final working set, ascending
  double objective = 0.0;
  int iterations = 0;
};

struct QpOptions {
  double feas_tol = 1e-8;
  double dual_tol = 1e-10;
  double stationarity_tol = 1e-8;
  int max_iter = -1;  // <0: 50*(m+n)
};

class QpInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Primal active-set method. The warm start is a previous working set; it is
// used only if the equality subproblem on that set lands on a feasible point.
QpSolution solve_qp(const QpProblem& p, const std::vector<int>* warm_start = nullptr,
                    const QpOptions& opt = {});

// Test oracle: enumerate every candidate working set, solve its KKT system by
// full-pivot LU, keep primal/dual feasible points, return the cheapest one.
QpSolution brute_force_solve(const QpProblem& p, double tol = 1e-9);

struct KktResidual {
  double stationarity = 0.0;
  double primal_violation = 0.0;
  double comp_slack = 0.0;
};

KktResidual kkt_residual(const QpProblem& p, const QpSolution& s);

bool check_strict_complementarity(const QpSolution& s, double tol);

void validate(const QpProblem& p);

}  // namespace fxtqp
