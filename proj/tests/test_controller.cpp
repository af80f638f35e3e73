#include <doctest.h>

#include "fxtqp/controller.hpp"

#include <cmath>
#include <random>

using namespace fxtqp;
using Eigen::VectorXd;

namespace {

ControlAffineSystem integrator(int n, double drift = 0.0) {
  ControlAffineSystem s;
  s.n = n;
  s.m = n;
  s.f = [n, drift](const VectorXd&) { return VectorXd::Constant(n, drift).eval(); };
  s.g = [n](const VectorXd&) { return Eigen::MatrixXd::Identity(n, n).eval(); };
  return s;
}

SetFunction ball(SetKind kind, Eigen::Vector2d c, double r2, double sign = 1.0) {
  return SetFunction(kind, "ball", [=](const VectorXd& x) { return sign * ((x - c).squaredNorm() - r2); },
                     [=](const VectorXd& x) { return (sign * 2.0 * (x - c)).eval(); });
}

SynthesisParams short_deadline() {
  SynthesisParams p;
  p.T_ud = 2.0;
  p.mu = 3.0;
  return p;
}

}  // namespace

TEST_CASE("far from goal: slack is non-positive and the oracle agrees") {
  auto sys = integrator(2);
  auto hg = ball(SetKind::Goal, {0, 0}, 0.01);
  auto bounds = InputBounds::symmetric(2, 10.0);
  auto params = short_deadline();
  const Eigen::Vector2d x(2.0, 1.0);
  auto d = synthesize(sys, hg, {}, bounds, params, x);
  CHECK(d.delta1 <= 0.0);
  CHECK(d.regime == Regime::GlobalWithinDeadline);
  REQUIRE(d.predicted_T);
  CHECK(*d.predicted_T == doctest::Approx(2.0));
  auto oracle = brute_force_solve(assemble(sys, hg, {}, bounds, params, x));
  CHECK((d.u - oracle.z.head(2)).norm() < 1e-8);
  CHECK(d.delta1 == doctest::Approx(oracle.z(2)).epsilon(1e-9));
}

TEST_CASE("on the safe boundary the input satisfies the tangency condition") {
  auto sys = integrator(2);
  auto hg = ball(SetKind::Goal, {-3, 0}, 0.01);
  auto hs = ball(SetKind::Safe, {0, 0}, 1.0, -1.0);  // outside the unit disk
  auto bounds = InputBounds::symmetric(2, 5.0);
  const Eigen::Vector2d x(1.0, 0.0);
  auto d = synthesize(sys, hg, {hs}, bounds, short_deadline(), x);
  const auto ld = lie_derivatives(sys, hs, x);
  CHECK(ld.Lf + ld.Lg.dot(d.u) <= 1e-8);
}

TEST_CASE("inside both sets with slack constraints gives zero input") {
  auto sys = integrator(2);
  auto hg = ball(SetKind::Goal, {0, 0}, 100.0);
  auto hs = ball(SetKind::Safe, {0, 0}, 400.0);
  auto d = synthesize(sys, hg, {hs}, InputBounds::symmetric(2, 1.0), SynthesisParams{}, Eigen::Vector2d(0.1, 0.0));
  CHECK(d.u.norm() < 1e-12);
}

TEST_CASE("assemble shapes") {
  auto sys = integrator(2);
  auto hg = ball(SetKind::Goal, {0, 0}, 0.01);
  std::vector<SetFunction> br = {ball(SetKind::Safe, {3, 0}, 1.0, -1.0), ball(SetKind::Safe, {0, 3}, 1.0, -1.0),
                                 ball(SetKind::Safe, {-3, 0}, 1.0, -1.0)};
  auto composite = SetFunction::max_of(SetKind::Safe, "obstacles", br);
  SynthesisParams p;
  auto q = assemble(sys, hg, {composite}, InputBounds::symmetric(2, 7.0), p, Eigen::Vector2d(1, 1));
  CHECK(q.n() == 4);
  CHECK(q.m() == 4 + 1 + 3);
  CHECK(q.meq() == 0);
  CHECK(q.F(2) == 100.0);
  p.safety_rows = RowMode::MaxBranch;
  auto r = assemble(sys, hg, {composite}, InputBounds::symmetric(2, 7.0), p, Eigen::Vector2d(1, 1));
  CHECK(r.m() == 4 + 1 + 1);

  // inside the goal the power terms vanish and the slack coefficient is -h >= 0
  auto in = assemble(sys, hg, {}, InputBounds::symmetric(2, 7.0), SynthesisParams{}, Eigen::Vector2d(0.01, 0));
  CHECK(in.A(4, 2) >= 0.0);
  CHECK(in.b(4) == 0.0);
}

TEST_CASE("delta2 freeze adds an equality row") {
  auto sys = integrator(2);
  auto hg = ball(SetKind::Goal, {3, 0}, 0.01);
  auto hs = ball(SetKind::Safe, {0, 0}, 4.0);
  SynthesisParams p;
  p.delta2_freeze_above = -1.0;
  auto far = assemble(sys, hg, {hs}, InputBounds::symmetric(2, 7.0), p, Eigen::Vector2d(0, 0));
  CHECK(far.meq() == 0);
  auto near = assemble(sys, hg, {hs}, InputBounds::symmetric(2, 7.0), p, Eigen::Vector2d(1.9, 0));
  CHECK(near.meq() == 1);
  auto d = synthesize(sys, hg, {hs}, InputBounds::symmetric(2, 7.0), p, Eigen::Vector2d(1.9, 0));
  CHECK(d.delta2_frozen);
  CHECK(d.delta2 == 0.0);
}

TEST_CASE("infeasible QP escalates as SolverFailure") {
  auto sys = integrator(1, 1.0);
  SetFunction hg(SetKind::Goal, "g", [](const VectorXd& x) { return x(0) * x(0) - 0.01; },
                 [](const VectorXd& x) { return (2.0 * x).eval(); });
  SetFunction hs(SetKind::Safe, "wall", [](const VectorXd& x) { return x(0); },
                 [](const VectorXd&) { return VectorXd::Ones(1).eval(); });
  auto bounds = InputBounds::symmetric(1, 0.5);
  CHECK_THROWS_AS(synthesize(sys, hg, {hs}, bounds, SynthesisParams{}, VectorXd::Zero(1)), SolverFailure);
}

TEST_CASE("bounds, warm start and active-set self-consistency on random states") {
  auto sys = integrator(2);
  auto hg = ball(SetKind::Goal, {2, 2}, 0.04);
  auto hs = ball(SetKind::Safe, {0, 0}, 0.25, -1.0);
  InputBounds bounds(Eigen::Vector2d(-1.0, -2.0), Eigen::Vector2d(1.5, 2.0));
  SynthesisParams p = short_deadline();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ud(-3, 3);
  int tested = 0;
  for (int i = 0; i < 300; ++i) {
    Eigen::Vector2d x(ud(rng), ud(rng));
    if (hs.value(x) > -0.01) continue;
    ++tested;
    auto d = synthesize(sys, hg, {hs}, bounds, p, x);
    CHECK((d.u.array() >= bounds.lower.array() - 1e-9).all());
    CHECK((d.u.array() <= bounds.upper.array() + 1e-9).all());
    CHECK(d.regime == classify(p.gains(), d.delta1));
    auto again = synthesize(sys, hg, {hs}, bounds, p, x, &d.active_set);
    CHECK(std::abs(again.objective - d.objective) <= 1e-10 * std::max(1.0, std::abs(d.objective)));
    CHECK((again.u - d.u).norm() <= 1e-9);
    std::vector<int> junk = {0, 5};
    auto w = synthesize(sys, hg, {hs}, bounds, p, x, &junk);
    CHECK(std::abs(w.objective - d.objective) <= 1e-10 * std::max(1.0, std::abs(d.objective)));
  }
  CHECK(tested > 200);
}

TEST_CASE("input scaling reports physical units") {
  auto sys = integrator(1);
  sys.g = [](const VectorXd&) { return Eigen::MatrixXd::Constant(1, 1, 1e-3); };
  SetFunction hg(SetKind::Goal, "g", [](const VectorXd& x) { return x(0) * x(0) - 0.01; },
                 [](const VectorXd& x) { return (2.0 * x).eval(); });
  auto bounds = InputBounds::symmetric(1, 4000.0);
  SynthesisParams p = short_deadline();
  p.input_scale = VectorXd::Constant(1, 4000.0);
  auto d = synthesize(sys, hg, {}, bounds, p, VectorXd::Constant(1, 5.0));
  CHECK(d.u(0) < -100.0);
  CHECK(d.u(0) >= -4000.0);
  auto q = assemble(sys, hg, {}, bounds, p, VectorXd::Constant(1, 5.0));
  CHECK(q.b(0) == 1.0);
  CHECK(q.b(1) == 1.0);
}

TEST_CASE("continuity probe") {
  auto sys = integrator(2);
  auto hg = ball(SetKind::Goal, {2, 2}, 0.04);
  auto hs = ball(SetKind::Safe, {0, 0}, 0.25, -1.0);
  auto bounds = InputBounds::symmetric(2, 3.0);
  auto params = short_deadline();
  auto zero = continuity_probe(sys, hg, {hs}, bounds, params, Eigen::Vector2d(-1, -1), 0.0, 20);
  CHECK(zero.max_quotient == 0.0);
  CHECK(zero.quotients.empty());
  auto rep = continuity_probe(sys, hg, {hs}, bounds, params, Eigen::Vector2d(-1, -1.2), 1e-4, 20, 3);
  CHECK(rep.quotients.size() == 20);
  CHECK(std::isfinite(rep.max_quotient));
  CHECK(rep.max_quotient < 1e3);
}
