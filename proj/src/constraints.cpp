#include "fxtqp/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace fxtqp {

SetFunction::SetFunction(SetKind kind, std::string name, ScalarField h, StateMap grad)
    : kind_(kind), name_(std::move(name)), h_(std::move(h)), grad_(std::move(grad)) {
  if (!h_ || !grad_) throw std::invalid_argument("SetFunction " + name_ + ": h and grad are required");
}

SetFunction SetFunction::max_of(SetKind kind, std::string name, std::vector<SetFunction> branches) {
  if (branches.empty()) throw std::invalid_argument("SetFunction " + name + ": no branches");
  if (branches.size() == 1) {
    SetFunction only = branches.front();
    only.kind_ = kind;
    return only;
  }
  auto shared = std::make_shared<std::vector<SetFunction>>(branches);
  ScalarField h = [shared](const Eigen::VectorXd& x) {
    double best = (*shared)[0].value(x);
    for (size_t i = 1; i < shared->size(); ++i) best = std::max(best, (*shared)[i].value(x));
    return best;
  };
  SetFunction out(kind, std::move(name), h, [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()).eval(); });
  out.branches_ = std::move(branches);
  return out;
}

int SetFunction::argmax(const Eigen::VectorXd& x) const {
  if (branches_.empty()) return 0;
  int best = 0;
  double v = branches_[0].value(x);
  for (size_t i = 1; i < branches_.size(); ++i) {
    const double w = branches_[i].value(x);
    if (w > v) {
      v = w;
      best = static_cast<int>(i);
    }
  }
  return best;
}

double SetFunction::value(const Eigen::VectorXd& x) const { return h_(x); }

Eigen::VectorXd SetFunction::gradient(const Eigen::VectorXd& x) const {
  if (branches_.empty()) return grad_(x);
  return branches_[argmax(x)].gradient(x);
}

std::vector<SetFunction> SetFunction::leaves() const {
  if (branches_.empty()) return {*this};
  std::vector<SetFunction> out;
  for (const auto& b : branches_) {
    auto sub = b.leaves();
    out.insert(out.end(), sub.begin(), sub.end());
  }
  for (auto& l : out) l.kind_ = kind_;
  return out;
}

InputBounds::InputBounds(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size() || lower.size() == 0) throw std::invalid_argument("InputBounds: size mismatch");
  for (int i = 0; i < lower.size(); ++i)
    if (!(lower(i) < upper(i))) throw std::invalid_argument("InputBounds: lower must be < upper");
}

InputBounds InputBounds::symmetric(int m, double limit) {
  return InputBounds(Eigen::VectorXd::Constant(m, -limit), Eigen::VectorXd::Constant(m, limit));
}

LieDerivatives lie_derivatives(const ControlAffineSystem& sys, const SetFunction& s, const Eigen::VectorXd& x) {
  if (x.size() != sys.n) throw std::invalid_argument("lie_derivatives: state has wrong dimension");
  if (!x.allFinite()) throw std::invalid_argument("lie_derivatives: non-finite state");
  const Eigen::VectorXd dh = s.gradient(x);
  LieDerivatives out;
  out.Lf = dh.dot(sys.f(x));
  out.Lg = dh.transpose() * sys.g(x);
  return out;
}

double positive_power(double h, double gamma) { return h <= 0.0 ? 0.0 : std::exp(gamma * std::log(h)); }

ConstraintRow convergence_row(const ControlAffineSystem& sys, const SetFunction& hg, const Eigen::VectorXd& x,
                              const FxtsGains& gains) {
  const auto ld = lie_derivatives(sys, hg, x);
  const double h = hg.value(x);
  ConstraintRow r;
  r.a = Eigen::RowVectorXd::Zero(sys.m + 2);
  r.a.head(sys.m) = ld.Lg;
  r.a(sys.m) = -h;
  r.rhs = -ld.Lf - gains.alpha1() * positive_power(h, gains.gamma1()) - gains.alpha2() * positive_power(h, gains.gamma2());
  return r;
}

ConstraintRow safety_row(const ControlAffineSystem& sys, const SetFunction& hs, const Eigen::VectorXd& x) {
  const auto ld = lie_derivatives(sys, hs, x);
  ConstraintRow r;
  r.a = Eigen::RowVectorXd::Zero(sys.m + 2);
  r.a.head(sys.m) = ld.Lg;
  r.a(sys.m + 1) = hs.value(x);
  r.rhs = -ld.Lf;
  return r;
}

InputRows input_rows(const InputBounds& bounds) {
  const int m = bounds.m();
  InputRows r;
  r.A = Eigen::MatrixXd::Zero(2 * m, m + 2);
  r.b.resize(2 * m);
  for (int i = 0; i < m; ++i) {
    r.A(2 * i, i) = 1.0;
    r.b(2 * i) = bounds.upper(i);
    r.A(2 * i + 1, i) = -1.0;
    r.b(2 * i + 1) = -bounds.lower(i);
  }
  return r;
}

double finite_diff_gradient_check(const SetFunction& s, const std::vector<Eigen::VectorXd>& xs, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_gradient_check: eps must be positive");
  double worst = 0.0;
  for (const auto& x : xs) {
    const Eigen::VectorXd g = s.gradient(x);
    if (s.composite()) {
      std::vector<double> vals;
      double gmax = 0.0;
      for (const auto& b : s.branches()) {
        vals.push_back(b.value(x));
        gmax = std::max(gmax, b.gradient(x).norm());
      }
      std::sort(vals.begin(), vals.end(), std::greater<>());
      if (vals[0] - vals[1] <= 10.0 * eps * (1.0 + gmax)) continue;
    }
    Eigen::VectorXd fd(x.size());
    for (int i = 0; i < x.size(); ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp(i) += eps;
      xm(i) -= eps;
      fd(i) = (s.value(xp) - s.value(xm)) / (2.0 * eps);
    }
    worst = std::max(worst, (g - fd).norm() / std::max(1.0, g.norm()));
  }
  return worst;
}

}  // namespace fxtqp
