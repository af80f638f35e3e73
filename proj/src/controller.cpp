#include "fxtqp/controller.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fxtqp {

void SynthesisParams::validate(int m) const {
  if (!(T_ud > 0.0)) throw std::invalid_argument("SynthesisParams: T_ud must be positive");
  if (!(mu > 1.0)) throw std::invalid_argument("SynthesisParams: mu must be > 1");
  if (!(w1 > 0.0) || !(w2 > 0.0) || !(q1 > 0.0)) throw std::invalid_argument("SynthesisParams: w1, w2, q1 must be positive");
  if (!(k_margin > 0.0 && k_margin < 1.0)) throw std::invalid_argument("SynthesisParams: k_margin must lie in (0,1)");
  if (w_u.size() != 0 && (w_u.size() != m || !(w_u.array() > 0.0).all()))
    throw std::invalid_argument("SynthesisParams: w_u must have one positive entry per input");
  if (input_scale.size() != 0 && (input_scale.size() != m || !(input_scale.array() > 0.0).all()))
    throw std::invalid_argument("SynthesisParams: input_scale must have one positive entry per input");
}

Eigen::VectorXd SynthesisParams::weights(int m) const { return w_u.size() ? w_u : Eigen::VectorXd::Ones(m); }

Eigen::VectorXd SynthesisParams::scale(int m) const {
  return input_scale.size() ? input_scale : Eigen::VectorXd::Ones(m);
}

namespace {

std::vector<SetFunction> pieces(const SetFunction& s, RowMode mode) {
  if (mode == RowMode::MaxBranch) return {s};
  return s.leaves();
}

}  // namespace

QpProblem assemble(const ControlAffineSystem& sys, const SetFunction& hg, const std::vector<SetFunction>& safes,
                   const InputBounds& bounds, const SynthesisParams& params, const Eigen::VectorXd& x) {
  const int m = sys.m;
  if (bounds.m() != m) throw std::invalid_argument("assemble: bounds do not match the input dimension");
  params.validate(m);
  const FxtsGains gains = params.gains();
  const Eigen::VectorXd S = params.scale(m);

  std::vector<ConstraintRow> rows;
  for (const auto& g : pieces(hg, params.goal_rows)) rows.push_back(convergence_row(sys, g, x, gains));
  bool freeze = false;
  for (const auto& s : safes)
    for (const auto& b : pieces(s, params.safety_rows)) {
      rows.push_back(safety_row(sys, b, x));
      if (params.delta2_freeze_above && b.value(x) > *params.delta2_freeze_above) freeze = true;
    }

  QpProblem p;
  const int nz = m + 2;
  p.H = Eigen::MatrixXd::Zero(nz, nz);
  p.H.diagonal().head(m) = params.weights(m);
  p.H(m, m) = params.w1;
  p.H(m + 1, m + 1) = params.w2;
  p.F = Eigen::VectorXd::Zero(nz);
  p.F(m) = params.q1;
  const InputRows in = input_rows(bounds);
  const int mi = static_cast<int>(in.A.rows());
  p.A.resize(mi + static_cast<int>(rows.size()), nz);
  p.b.resize(p.A.rows());
  p.A.topRows(mi) = in.A;
  for (int i = 0; i < mi; ++i) p.b(i) = in.b(i) / S(i / 2);
  for (size_t i = 0; i < rows.size(); ++i) {
    Eigen::RowVectorXd a = rows[i].a;
    a.head(m) = a.head(m).cwiseProduct(S.transpose());
    p.A.row(mi + i) = a;
    p.b(mi + i) = rows[i].rhs;
  }
  if (freeze) {
    p.Aeq = Eigen::MatrixXd::Zero(1, nz);
    p.Aeq(0, m + 1) = 1.0;
    p.beq = Eigen::VectorXd::Zero(1);
  } else {
    p.Aeq.resize(0, nz);
    p.beq.resize(0);
  }
  return p;
}

ControlDecision synthesize(const ControlAffineSystem& sys, const SetFunction& hg, const std::vector<SetFunction>& safes,
                           const InputBounds& bounds, const SynthesisParams& params, const Eigen::VectorXd& x,
                           const std::vector<int>* warm_start) {
  const QpProblem p = assemble(sys, hg, safes, bounds, params, x);
  const QpSolution s = solve_qp(p, warm_start);
  if (s.status != QpStatus::Optimal)
    throw SolverFailure(s.status, std::string("QP not solved: ") + to_string(s.status));
  const int m = sys.m;
  const Eigen::VectorXd S = params.scale(m);
  ControlDecision d;
  // clamp only removes round-off from the unscaling
  d.u = S.cwiseProduct(s.z.head(m)).cwiseMax(bounds.lower).cwiseMin(bounds.upper);
  d.delta1 = s.z(m);
  d.delta2 = s.z(m + 1);
  const FxtsGains gains = params.gains();
  d.regime = classify(gains, d.delta1);
  const double d1 = std::max(0.0, d.delta1);
  if (d.regime != Regime::LocalFixedTime) {
    d.predicted_T = settling_time_bound(gains, d1, params.k_margin).T;
  } else {
    const auto vmax = domain_threshold(gains, d1, params.k_margin);
    if (vmax && hg.value(x) <= *vmax) d.predicted_T = settling_time_bound(gains, d1, params.k_margin).T;
  }
  d.duals = s.lambda;
  d.active_set = s.active_set;
  d.strict_cs = check_strict_complementarity(s, 1e-8);
  d.delta2_frozen = p.meq() > 0;
  d.objective = s.objective;
  return d;
}

ContinuityReport continuity_probe(const ControlAffineSystem& sys, const SetFunction& hg,
                                  const std::vector<SetFunction>& safes, const InputBounds& bounds,
                                  const SynthesisParams& params, const Eigen::VectorXd& x, double radius,
                                  int n_samples, unsigned seed) {
  ContinuityReport rep;
  if (!(radius > 0.0) || n_samples <= 0) return rep;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  const ControlDecision base = synthesize(sys, hg, safes, bounds, params, x);
  if (!base.strict_cs) ++rep.nonstrict_samples;
  for (int k = 0; k < n_samples; ++k) {
    Eigen::VectorXd dir(x.size());
    for (int i = 0; i < x.size(); ++i) dir(i) = nd(rng);
    dir *= radius / dir.norm();
    const ControlDecision d = synthesize(sys, hg, safes, bounds, params, x + dir);
    if (!d.strict_cs) ++rep.nonstrict_samples;
    const double q = (d.u - base.u).norm() / dir.norm();
    rep.quotients.push_back(q);
    rep.max_quotient = std::max(rep.max_quotient, q);
  }
  return rep;
}

}  // namespace fxtqp
