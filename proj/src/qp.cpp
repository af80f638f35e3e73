#include "fxtqp/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fxtqp {

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::IterationLimit: return "IterationLimit";
  }
  return "?";
}

void validate(const QpProblem& p) {
  const int n = p.n();
  if (n == 0) throw QpInputError("QP has no variables");
  if (p.H.cols() != n) throw QpInputError("H must be square");
  if (p.F.size() != n) throw QpInputError("F has wrong length");
  if (p.A.rows() > 0 && p.A.cols() != n) throw QpInputError("A has wrong column count");
  if (p.b.size() != p.A.rows()) throw QpInputError("b has wrong length");
  if (p.Aeq.rows() > 0 && p.Aeq.cols() != n) throw QpInputError("Aeq has wrong column count");
  if (p.beq.size() != p.Aeq.rows()) throw QpInputError("beq has wrong length");
  if (!p.H.allFinite() || !p.F.allFinite() || !p.A.allFinite() || !p.b.allFinite() ||
      !p.Aeq.allFinite() || !p.beq.allFinite())
    throw QpInputError("non-finite QP data");
  const double hs = std::max(1.0, p.H.cwiseAbs().maxCoeff());
  if ((p.H - p.H.transpose()).cwiseAbs().maxCoeff() > 1e-10 * hs)
    throw QpInputError("H is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(p.H);
  if (llt.info() != Eigen::Success) throw QpInputError("H is not positive definite");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Working-set machinery shared by phase 1 and phase 2.
class ActiveSetCore {
 public:
  ActiveSetCore(const QpProblem& p, const QpOptions& opt) : p_(p), opt_(opt), llt_(p.H) {
    c_ = llt_.matrixL().solve(p.F);
  }

  bool cholesky_ok() const { return llt_.info() == Eigen::Success; }

  // Minimizer of the objective with the equality rows and the rows in W held
  // tight. Returns false if the constraint rows are numerically dependent.
  bool eqp_point(const std::vector<int>& W, Eigen::VectorXd& z, Eigen::VectorXd& mu) const {
    const int n = p_.n();
    const int k = p_.meq() + static_cast<int>(W.size());
    if (k == 0) {
      z = llt_.matrixU().solve(Eigen::VectorXd(-c_));
      mu.resize(0);
      return true;
    }
    if (k > n) return false;
    Eigen::MatrixXd C(k, n);
    Eigen::VectorXd d(k);
    if (p_.meq() > 0) {
      C.topRows(p_.meq()) = p_.Aeq;
      d.head(p_.meq()) = p_.beq;
    }
    for (size_t j = 0; j < W.size(); ++j) {
      C.row(p_.meq() + j) = p_.A.row(W[j]);
      d(p_.meq() + j) = p_.b(W[j]);
    }
    Eigen::MatrixXd M = llt_.matrixL().solve(C.transpose());
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(M);
    Eigen::MatrixXd Q1 = qr.householderQ() * Eigen::MatrixXd::Identity(n, k);
    Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    const double rmax = R.diagonal().cwiseAbs().maxCoeff();
    if (!(rmax > 0.0) || R.diagonal().cwiseAbs().minCoeff() <= 1e-12 * rmax) return false;
    Eigen::VectorXd w = R.transpose().triangularView<Eigen::Lower>().solve(d);
    Eigen::VectorXd qc = Q1.transpose() * c_;
    Eigen::VectorXd y = Q1 * w - (c_ - Q1 * qc);
    z = llt_.matrixU().solve(y);
    mu = R.triangularView<Eigen::Upper>().solve(Eigen::VectorXd(-(w + qc)));
    return true;
  }

  // Primal active-set iterations from a feasible z with a consistent working set.
  QpSolution run(Eigen::VectorXd z, std::vector<int> W, int max_iter) const {
    const int n = p_.n();
    const int m = p_.m();
    std::vector<char> inW(m, 0);
    for (int i : W) inW[i] = 1;
    // rows found dependent on W at the current point; a positive step clears this
    std::vector<char> skip(m, 0);
    QpSolution s;
    Eigen::VectorXd zw, mu;
    for (int it = 0; it < max_iter; ++it) {
      s.iterations = it + 1;
      if (!eqp_point(W, zw, mu)) {
        // the newest blocking row is numerically dependent on W; it cannot
        // block a step that keeps W tight, so ignore it until z moves
        inW[W.back()] = 0;
        skip[W.back()] = 1;
        W.pop_back();
        continue;
      }
      Eigen::VectorXd step = zw - z;
      const double zscale = 1.0 + std::max(z.cwiseAbs().maxCoeff(), zw.cwiseAbs().maxCoeff());
      if (step.cwiseAbs().maxCoeff() <= 1e-11 * zscale) {
        const double dscale = opt_.dual_tol * std::max(1.0, mu.size() ? mu.cwiseAbs().maxCoeff() : 0.0);
        int drop = -1;
        double most = -dscale;
        for (size_t j = 0; j < W.size(); ++j) {
          const double lam = mu(p_.meq() + j);
          if (lam < most || (lam == most && drop >= 0 && W[j] < W[drop])) {
            most = lam;
            drop = static_cast<int>(j);
          }
        }
        if (drop < 0) {
          s.status = QpStatus::Optimal;
          finish(s, zw, W, mu);
          return s;
        }
        inW[W[drop]] = 0;
        W.erase(W.begin() + drop);
        z = zw;
        continue;
      }
      double alpha = 1.0;
      int block = -1;
      for (int i = 0; i < m; ++i) {
        if (inW[i] || skip[i]) continue;
        const double ap = p_.A.row(i).dot(step);
        if (ap <= 1e-14 * p_.A.row(i).norm() * step.norm()) continue;
        const double room = std::max(0.0, p_.b(i) - p_.A.row(i).dot(z));
        const double r = room / ap;
        if (r < alpha * (1.0 - 1e-12) - 1e-16) {
          alpha = r;
          block = i;
        }
      }
      z += alpha * step;
      if (alpha > 0.0) std::fill(skip.begin(), skip.end(), 0);
      if (block >= 0) {
        inW[block] = 1;
        W.push_back(block);
      }
    }
    s.status = QpStatus::IterationLimit;
    s.z = z;
    s.lambda = Eigen::VectorXd::Zero(m);
    s.lambda_eq = Eigen::VectorXd::Zero(p_.meq());
    s.slack = p_.b - p_.A * z;
    s.objective = p_.objective(z);
    (void)n;
    return s;
  }

 private:
  void finish(QpSolution& s, const Eigen::VectorXd& z, std::vector<int> W, const Eigen::VectorXd& mu) const {
    s.z = z;
    s.lambda = Eigen::VectorXd::Zero(p_.m());
    s.lambda_eq = p_.meq() > 0 ? Eigen::VectorXd(mu.head(p_.meq())) : Eigen::VectorXd(0);
    for (size_t j = 0; j < W.size(); ++j) s.lambda(W[j]) = std::max(0.0, mu(p_.meq() + j));
    std::sort(W.begin(), W.end());
    s.active_set = W;
    s.slack = p_.b - p_.A * z;
    s.objective = p_.objective(z);
  }

  const QpProblem& p_;
  QpOptions opt_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd c_;
};

int iteration_cap(const QpOptions& opt, int m, int n) {
  return opt.max_iter >= 0 ? opt.max_iter : 50 * (m + n);
}

// Phase 1: proximal iterations on min_z max_i dist_i(z), each one a small QP
// in (z, t) with an obviously feasible starting point.
std::optional<Eigen::VectorXd> find_feasible(const QpProblem& p, const QpOptions& opt, bool& hit_limit) {
  const int n = p.n();
  hit_limit = false;
  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(n);
  if (p.meq() > 0) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(p.Aeq);
    z0 = cod.solve(p.beq);
    const double res = (p.Aeq * z0 - p.beq).cwiseAbs().maxCoeff();
    if (res > opt.feas_tol * (1.0 + p.beq.cwiseAbs().maxCoeff())) return std::nullopt;
  }
  std::vector<int> rows;
  for (int i = 0; i < p.m(); ++i) {
    const double nr = p.A.row(i).norm();
    if (nr == 0.0) {
      if (p.b(i) < -opt.feas_tol) return std::nullopt;
      continue;
    }
    rows.push_back(i);
  }
  auto violation = [&](const Eigen::VectorXd& z) {
    double v = -kInf;
    for (int i : rows) v = std::max(v, (p.A.row(i).dot(z) - p.b(i)) / p.A.row(i).norm());
    return v;
  };
  if (rows.empty() || violation(z0) <= 0.0) return z0;

  const int mr = static_cast<int>(rows.size());
  QpProblem q;
  q.H = Eigen::MatrixXd::Identity(n + 1, n + 1);
  q.A.resize(mr, n + 1);
  q.b.resize(mr);
  for (int r = 0; r < mr; ++r) {
    const int i = rows[r];
    const double nr = p.A.row(i).norm();
    q.A.row(r).head(n) = p.A.row(i) / nr;
    q.A(r, n) = -1.0;
    q.b(r) = p.b(i) / nr;
  }
  if (p.meq() > 0) {
    q.Aeq = Eigen::MatrixXd::Zero(p.meq(), n + 1);
    q.Aeq.leftCols(n) = p.Aeq;
    q.beq = p.beq;
  } else {
    q.Aeq.resize(0, n + 1);
    q.beq.resize(0);
  }
  Eigen::VectorXd zc = z0;
  double prev = violation(zc);
  for (int outer = 0; outer < 200; ++outer) {
    q.F.resize(n + 1);
    q.F.head(n) = -zc;
    q.F(n) = 1.0;
    Eigen::VectorXd w(n + 1);
    w.head(n) = zc;
    w(n) = std::max(0.0, violation(zc)) + 1.0;
    ActiveSetCore core(q, opt);
    QpSolution s = core.run(w, {}, iteration_cap(opt, mr, n + 1));
    if (s.status != QpStatus::Optimal) {
      hit_limit = true;
      return std::nullopt;
    }
    zc = s.z.head(n);
    const double v = violation(zc);
    if (v <= 0.0) return zc;
    if (v <= opt.feas_tol) return zc;
    if (prev - v <= 1e-13 * (1.0 + std::abs(v))) return std::nullopt;
    prev = v;
  }
  return std::nullopt;
}

}  // namespace

QpSolution solve_qp(const QpProblem& p, const std::vector<int>* warm_start, const QpOptions& opt) {
  validate(p);
  const int n = p.n();
  const int m = p.m();
  const int cap = iteration_cap(opt, m, n);
  ActiveSetCore core(p, opt);

  if (warm_start && !warm_start->empty()) {
    std::vector<int> W;
    for (int i : *warm_start)
      if (i >= 0 && i < m && std::find(W.begin(), W.end(), i) == W.end()) W.push_back(i);
    std::sort(W.begin(), W.end());
    Eigen::VectorXd zw, mu;
    if (static_cast<int>(W.size()) + p.meq() <= n && core.eqp_point(W, zw, mu)) {
      const Eigen::VectorXd viol = p.A * zw - p.b;
      const bool feasible = m == 0 || viol.maxCoeff() <= opt.feas_tol;
      if (feasible) {
        QpSolution s = core.run(zw, W, cap);
        if (s.status == QpStatus::Optimal) return s;
      }
    }
  }

  // cold start: unconstrained minimizer first, else a phase-1 point
  Eigen::VectorXd z;
  std::vector<int> none;
  Eigen::VectorXd mu;
  core.eqp_point(none, z, mu);
  const bool z_ok = (m == 0 || (p.A * z - p.b).maxCoeff() <= 0.0) &&
                    (p.meq() == 0 || (p.Aeq * z - p.beq).cwiseAbs().maxCoeff() <= opt.feas_tol);
  if (!z_ok) {
    bool limit = false;
    auto start = find_feasible(p, opt, limit);
    if (!start) {
      QpSolution s;
      s.status = limit ? QpStatus::IterationLimit : QpStatus::Infeasible;
      s.z = Eigen::VectorXd::Zero(n);
      s.lambda = Eigen::VectorXd::Zero(m);
      s.lambda_eq = Eigen::VectorXd::Zero(p.meq());
      s.slack = p.b;
      return s;
    }
    z = *start;
  }
  return core.run(z, {}, cap);
}

QpSolution brute_force_solve(const QpProblem& p, double tol) {
  validate(p);
  const int n = p.n();
  const int m = p.m();
  const int meq = p.meq();
  if (m > 20) throw QpInputError("brute_force_solve supports at most 20 inequality rows");
  QpSolution best;
  best.status = QpStatus::Infeasible;
  double best_obj = kInf;
  const unsigned long total = 1ul << m;
  for (unsigned long mask = 0; mask < total; ++mask) {
    std::vector<int> W;
    for (int i = 0; i < m; ++i)
      if (mask & (1ul << i)) W.push_back(i);
    const int k = meq + static_cast<int>(W.size());
    if (k > n) continue;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = p.H;
    rhs.head(n) = -p.F;
    for (int r = 0; r < k; ++r) {
      Eigen::RowVectorXd a = r < meq ? Eigen::RowVectorXd(p.Aeq.row(r)) : Eigen::RowVectorXd(p.A.row(W[r - meq]));
      K.block(n + r, 0, 1, n) = a;
      K.block(0, n + r, n, 1) = a.transpose();
      rhs(n + r) = r < meq ? p.beq(r) : p.b(W[r - meq]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    Eigen::VectorXd sol = lu.solve(rhs);
    Eigen::VectorXd z = sol.head(n);
    Eigen::VectorXd mu = sol.tail(k);
    bool ok = true;
    for (int i = 0; i < m && ok; ++i)
      if (p.A.row(i).dot(z) - p.b(i) > tol * (1.0 + std::abs(p.b(i)))) ok = false;
    const double lscale = 1.0 + (k ? mu.cwiseAbs().maxCoeff() : 0.0);
    for (int r = meq; r < k && ok; ++r)
      if (mu(r) < -tol * lscale) ok = false;
    if (!ok) continue;
    const double obj = p.objective(z);
    if (obj < best_obj) {
      best_obj = obj;
      best.status = QpStatus::Optimal;
      best.z = z;
      best.lambda = Eigen::VectorXd::Zero(m);
      for (size_t j = 0; j < W.size(); ++j) best.lambda(W[j]) = std::max(0.0, mu(meq + j));
      best.lambda_eq = mu.head(meq);
      best.active_set = W;
      best.objective = obj;
      best.slack = p.b - p.A * z;
    }
  }
  if (best.status != QpStatus::Optimal) {
    best.z = Eigen::VectorXd::Zero(n);
    best.lambda = Eigen::VectorXd::Zero(m);
    best.lambda_eq = Eigen::VectorXd::Zero(meq);
    best.slack = p.b;
  }
  return best;
}

KktResidual kkt_residual(const QpProblem& p, const QpSolution& s) {
  KktResidual r;
  Eigen::VectorXd grad = p.H * s.z + p.F;
  if (p.m() > 0) grad += p.A.transpose() * s.lambda;
  if (p.meq() > 0) grad += p.Aeq.transpose() * s.lambda_eq;
  r.stationarity = grad.cwiseAbs().maxCoeff();
  for (int i = 0; i < p.m(); ++i) {
    const double g = p.A.row(i).dot(s.z) - p.b(i);
    r.primal_violation = std::max(r.primal_violation, g);
    r.comp_slack = std::max(r.comp_slack, std::abs(s.lambda(i) * g));
  }
  for (int i = 0; i < p.meq(); ++i)
    r.primal_violation = std::max(r.primal_violation, std::abs(p.Aeq.row(i).dot(s.z) - p.beq(i)));
  return r;
}

bool check_strict_complementarity(const QpSolution& s, double tol) {
  for (int i = 0; i < s.lambda.size(); ++i)
    if (!(s.lambda(i) > tol || s.slack(i) > tol)) return false;
  return true;
}

}  // namespace fxtqp
