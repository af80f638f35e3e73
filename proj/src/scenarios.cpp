#include "fxtqp/scenarios.hpp"

#include <cmath>
#include <future>
#include <stdexcept>

namespace fxtqp {

Trace run_scenario(const Scenario& s) {
  RunOptions o = s.options;
  o.scenario_id = s.id;
  return run(s.sys, s.schedule, s.bounds, s.params, s.x0, o);
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

SynthesisParams params_from(const WeightPreset& w, int m, double T_ud, double mu) {
  SynthesisParams p;
  p.T_ud = T_ud;
  p.mu = mu;
  p.w_u = Eigen::VectorXd::Constant(m, w.w_u);
  p.w1 = w.w1;
  p.w2 = w.w2;
  p.q1 = w.q1;
  return p;
}

}  // namespace

void AccConfig::validate() const {
  require(M > 0 && grav > 0 && v_d > 0 && v_l0 >= 0 && D0 > 0, "AccConfig: vehicle constants must be positive");
  require(f0 >= 0 && f1 >= 0 && f2 >= 0, "AccConfig: drag coefficients must be non-negative");
  require(a_l > 0 && std::abs(lead_accel) < a_l * grav, "AccConfig: lead acceleration outside (-a_l g, a_l g)");
  require(tau_d > 0 && T_ud > 0 && mu > 1, "AccConfig: tau_d, T_ud must be positive and mu > 1");
  require(d_delta >= 0 && d_delta <= 100, "AccConfig: d_delta must lie in [0, 100]");
  require(v_f0 >= 0, "AccConfig: v_f0 must be non-negative");
  require(reach_band > 0 && dt > 0 && horizon > 0, "AccConfig: reach_band, dt, horizon must be positive");
}

Scenario acc_scenario(const AccConfig& cfg) {
  cfg.validate();
  Scenario s;
  s.id = "acc";
  const double M = cfg.M, f0 = cfg.f0, f1 = cfg.f1, f2 = cfg.f2, aL = cfg.lead_accel;
  s.sys.n = 3;
  s.sys.m = 1;
  // state (v_f, v_l, D)
  s.sys.f = [=](const Eigen::VectorXd& x) {
    const double fr = f0 + f1 * x(0) + f2 * x(0) * x(0);
    return Eigen::Vector3d(-fr / M, x(1) > 0.0 ? aL : 0.0, x(1) - x(0)).eval();
  };
  s.sys.g = [=](const Eigen::VectorXd&) { return Eigen::Vector3d(1.0 / M, 0.0, 0.0).eval(); };
  if (cfg.d_delta > 0.0) {
    const double k = cfg.d_delta / M, vd = cfg.v_d;
    s.sys.disturbance = [=](const Eigen::VectorXd& x) {
      return Eigen::Vector3d(k * std::abs(x(0) - vd), 0.0, 0.0).eval();
    };
  }

  const double vd = cfg.v_d, tau = cfg.tau_d;
  SetFunction goal(
      SetKind::Goal, "speed", [=](const Eigen::VectorXd& x) { return (x(0) - vd) * (x(0) - vd); },
      [=](const Eigen::VectorXd& x) { return Eigen::Vector3d(2.0 * (x(0) - vd), 0.0, 0.0).eval(); });
  SetFunction headway(
      SetKind::Safe, "headway", [=](const Eigen::VectorXd& x) { return tau * x(0) - x(2); },
      [=](const Eigen::VectorXd&) { return Eigen::Vector3d(tau, 0.0, -1.0).eval(); });
  s.schedule.phases.push_back({goal, cfg.T_ud, {}, cfg.reach_band * cfg.reach_band});
  s.schedule.global_safes.push_back(headway);

  s.bounds = InputBounds::symmetric(1, cfg.u_max());
  s.params = params_from(cfg.robust_mode() ? cfg.disturbed : cfg.nominal, 1, cfg.T_ud, cfg.mu);
  s.params.input_scale = Eigen::VectorXd::Constant(1, cfg.u_max());
  if (cfg.robust_mode()) s.params.delta2_freeze_above = cfg.freeze_level;

  s.x0 = Eigen::Vector3d(cfg.v_f0, cfg.v_l0, cfg.D0);
  s.options.dt = cfg.dt;
  s.options.hold_until = cfg.horizon;
  s.options.state_names = {"v_f", "v_l", "D"};
  s.options.input_names = {"F"};
  return s;
}

std::vector<Trace> acc_disturbance_sweep(const AccConfig& cfg, const std::vector<double>& d_deltas, double horizon) {
  std::vector<std::future<Trace>> jobs;
  for (double d : d_deltas) {
    AccConfig c = cfg;
    c.d_delta = d;
    c.horizon = horizon;
    jobs.push_back(std::async(std::launch::async, [c] { return run_scenario(acc_scenario(c)); }));
  }
  std::vector<Trace> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

void TwoRobotConfig::validate() const {
  require(d_m > 0 && component_bound > 0 && mu > 1 && phase_budget > 0 && dt > 0,
          "TwoRobotConfig: constants must be positive and mu > 1");
  require(box > disk && disk > 0 && circle_radius > 0 && semi_major > 0 && semi_minor > 0,
          "TwoRobotConfig: bad geometry");
  require(routes[0].size() == routes[1].size() && !routes[0].empty(), "TwoRobotConfig: routes must have equal length");
  for (const auto& r : routes)
    for (int w : r) require(w >= 1 && w <= 8, "TwoRobotConfig: waypoints are numbered 1..8");
  for (int w : start_sets) require(w >= 1 && w <= 8, "TwoRobotConfig: waypoints are numbered 1..8");
}

namespace {


// norm of D (p - c) with D diagonal, gradient D^2 (p - c) / norm
struct ScaledNorm {
  Eigen::Vector2d c;
  Eigen::Vector2d inv_axes;
  double value(const Eigen::Vector2d& p) const { return (p - c).cwiseProduct(inv_axes).norm(); }
  Eigen::Vector2d grad(const Eigen::Vector2d& p) const {
    const double n = value(p);
    if (n == 0.0) return Eigen::Vector2d::Zero();
    return (p - c).cwiseProduct(inv_axes).cwiseProduct(inv_axes) / n;
  }
};

SetFunction lift(const SetFunction& planar, int agent, SetKind kind, const std::string& name) {
  return SetFunction(
      kind, name, [planar, agent](const Eigen::VectorXd& x) { return planar.value(x.segment(2 * agent, 2)); },
      [planar, agent](const Eigen::VectorXd& x) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
        g.segment(2 * agent, 2) = planar.gradient(x.segment(2 * agent, 2));
        return g;
      });
}

}  // namespace

SetFunction waypoint_set(const TwoRobotConfig& cfg, int i) {
  if (i < 1 || i > 8) throw std::invalid_argument("waypoint_set: index must lie in 1..8");
  static const double cx[8] = {-1.5, 0.0, 1.5, 1.5, 1.5, 0.0, -1.5, -1.5};
  static const double cy[8] = {1.5, 1.5, 1.5, 0.0, -1.5, -1.5, -1.5, 0.0};
  ScaledNorm sn;
  sn.c = Eigen::Vector2d(cx[i - 1], cy[i - 1]);
  double r = 1.0;
  if (i % 2 == 1) {
    sn.inv_axes = Eigen::Vector2d::Ones();
    r = cfg.circle_radius;
  } else if (i == 2 || i == 6) {
    sn.inv_axes = Eigen::Vector2d(1.0 / cfg.semi_major, 1.0 / cfg.semi_minor);
  } else {
    sn.inv_axes = Eigen::Vector2d(1.0 / cfg.semi_minor, 1.0 / cfg.semi_major);
  }
  return SetFunction(
      SetKind::Goal, "S" + std::to_string(i), [sn, r](const Eigen::VectorXd& p) { return sn.value(p) - r; },
      [sn](const Eigen::VectorXd& p) { return Eigen::VectorXd(sn.grad(p)); });
}

Scenario two_robot_scenario(const TwoRobotConfig& cfg) {
  cfg.validate();
  Scenario s;
  s.id = "two-robot";
  s.sys.n = 4;
  s.sys.m = 4;
  s.sys.f = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(4).eval(); };
  s.sys.g = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(4, 4).eval(); };

  for (int k = 0; k < 2; ++k) {
    const std::string tag = std::to_string(k + 1);
    std::vector<SetFunction> faces;
    for (int j = 0; j < 2; ++j)
      for (double sg : {1.0, -1.0}) {
        const int idx = 2 * k + j;
        const double b = cfg.box;
        faces.emplace_back(
            SetKind::Safe, "box" + tag + (j == 0 ? "x" : "y") + (sg > 0 ? "+" : "-"),
            [idx, sg, b](const Eigen::VectorXd& x) { return sg * x(idx) - b; },
            [idx, sg](const Eigen::VectorXd& x) {
              Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
              g(idx) = sg;
              return g;
            });
      }
    s.schedule.global_safes.push_back(SetFunction::max_of(SetKind::Safe, "box" + tag, faces));
    const double r = cfg.disk;
    s.schedule.global_safes.emplace_back(
        SetKind::Safe, "disk" + tag, [k, r](const Eigen::VectorXd& x) { return r - x.segment(2 * k, 2).norm(); },
        [k](const Eigen::VectorXd& x) {
          Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
          const double n = x.segment(2 * k, 2).norm();
          if (n > 0.0) g.segment(2 * k, 2) = -x.segment(2 * k, 2) / n;
          return g;
        });
  }
  const double dm = cfg.d_m;
  s.schedule.global_safes.emplace_back(
      SetKind::Safe, "separation",
      [dm](const Eigen::VectorXd& x) { return dm - (x.head(2) - x.tail(2)).norm(); },
      [](const Eigen::VectorXd& x) {
        const Eigen::Vector2d d = x.head(2) - x.tail(2);
        const double n = d.norm();
        Eigen::VectorXd g = Eigen::VectorXd::Zero(4);
        if (n > 0.0) {
          g.head(2) = -d / n;
          g.tail(2) = d / n;
        }
        return g;
      });

  std::array<int, 2> current = cfg.start_sets;
  for (size_t i = 0; i < cfg.routes[0].size(); ++i) {
    Phase ph{SetFunction::max_of(SetKind::Goal, "phase" + std::to_string(i + 1),
                                 {lift(waypoint_set(cfg, cfg.routes[0][i]), 0, SetKind::Goal, "goal1"),
                                  lift(waypoint_set(cfg, cfg.routes[1][i]), 1, SetKind::Goal, "goal2")}),
             cfg.phase_budget,
             {},
             0.0};
    // stay in the set reached in the previous phase until the next one is entered
    for (int k = 0; k < 2; ++k)
      ph.safe_extra.push_back(lift(waypoint_set(cfg, current[k]), k, SetKind::Safe, "stay" + std::to_string(k + 1)));
    current = {cfg.routes[0][i], cfg.routes[1][i]};
    s.schedule.phases.push_back(std::move(ph));
  }

  s.bounds = InputBounds::symmetric(4, cfg.component_bound);
  s.params = params_from(cfg.weights, 4, cfg.phase_budget, cfg.mu);
  s.params.goal_rows = cfg.goal_rows;
  s.x0.resize(4);
  s.x0 << cfg.x1_0, cfg.x2_0;
  s.options.dt = cfg.dt;
  s.options.state_names = {"x1", "y1", "x2", "y2"};
  s.options.input_names = {"u1x", "u1y", "u2x", "u2y"};
  s.separation = SeparationSpec{0, 2, 2};
  return s;
}

namespace {

ControlAffineSystem integrator(int n) {
  ControlAffineSystem s;
  s.n = n;
  s.m = n;
  s.f = [n](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(n).eval(); };
  s.g = [n](const Eigen::VectorXd&) { return Eigen::MatrixXd::Identity(n, n).eval(); };
  return s;
}

// sign * (|x - c|^2 - r^2)
SetFunction ball(SetKind kind, const std::string& name, Eigen::VectorXd c, double r, double sign = 1.0) {
  return SetFunction(
      kind, name, [=](const Eigen::VectorXd& x) { return sign * ((x - c).squaredNorm() - r * r); },
      [=](const Eigen::VectorXd& x) { return (sign * 2.0 * (x - c)).eval(); });
}

Scenario synthetic_base(const std::string& id, ControlAffineSystem sys, double T_ud, double limit) {
  Scenario s;
  s.id = "synthetic:" + id;
  s.sys = std::move(sys);
  s.bounds = InputBounds::symmetric(s.sys.m, limit);
  s.params.T_ud = T_ud;
  s.params.mu = 5.0;
  s.options.dt = 1e-3;
  return s;
}

}  // namespace

std::vector<SyntheticCase> synthetic_suite() {
  std::vector<SyntheticCase> out;
  {
    Scenario s = synthetic_base("integrator-1d", integrator(1), 2.0, 20.0);
    s.schedule.phases.push_back({ball(SetKind::Goal, "eps", Eigen::VectorXd::Zero(1), 0.1), 2.0, {}, 0.0});
    s.schedule.global_safes.push_back(ball(SetKind::Safe, "interval", Eigen::VectorXd::Zero(1), 5.0));
    s.x0 = Eigen::VectorXd::Constant(1, 3.0);
    s.options.state_names = {"x"};
    s.options.input_names = {"u"};
    out.push_back({s, "1-D integrator driven into |x| <= 0.1 inside |x| <= 5"});
  }
  {
    Scenario s = synthetic_base("obstacle-2d", integrator(2), 4.0, 4.0);
    s.schedule.phases.push_back({ball(SetKind::Goal, "target", Eigen::Vector2d(2.0, 0.0), 0.2), 4.0, {}, 0.0});
    s.schedule.global_safes.push_back(ball(SetKind::Safe, "obstacle", Eigen::Vector2d::Zero(), 0.8, -1.0));
    s.x0 = Eigen::Vector2d(-2.0, 0.1);
    s.options.dt = 2e-3;
    s.options.state_names = {"px", "py"};
    s.options.input_names = {"ux", "uy"};
    out.push_back({s, "2-D integrator with the target behind a disk obstacle"});
  }
  {
    ControlAffineSystem sys;
    sys.n = 2;
    sys.m = 2;
    sys.f = [](const Eigen::VectorXd& x) { return Eigen::Vector2d(x(1), -std::sin(x(0))).eval(); };
    sys.g = [](const Eigen::VectorXd& x) {
      Eigen::Matrix2d g;
      g << 2.0 + std::cos(x(0)), 0.0, 0.3, 1.0;  // det >= 1
      return Eigen::MatrixXd(g);
    };
    Scenario s = synthetic_base("nonlinear-2d", sys, 3.0, 20.0);
    s.schedule.phases.push_back({ball(SetKind::Goal, "target", Eigen::Vector2d(1.0, 1.0), 0.2), 3.0, {}, 0.0});
    s.schedule.global_safes.push_back(ball(SetKind::Safe, "arena", Eigen::Vector2d::Zero(), 3.0));
    s.x0 = Eigen::Vector2d(-1.0, -1.0);
    s.options.state_names = {"x1", "x2"};
    s.options.input_names = {"u1", "u2"};
    out.push_back({s, "fully actuated pendulum-like system with invertible g"});
  }
  return out;
}

Scenario synthetic_scenario(const std::string& id) {
  for (auto& c : synthetic_suite())
    if (c.scenario.id == "synthetic:" + id) return c.scenario;
  throw std::invalid_argument("unknown synthetic scenario '" + id + "'");
}

Eigen::VectorXd single_integrator_safe_input(const Eigen::VectorXd& grad, double c) {
  const double n = grad.norm();
  if (n == 0.0) return Eigen::VectorXd::Zero(grad.size());
  return -c * grad / n;
}

Eigen::VectorXd fully_actuated_safe_input(const ControlAffineSystem& sys, const Eigen::VectorXd& grad,
                                          const Eigen::VectorXd& x) {
  return -sys.g(x).partialPivLu().solve(sys.f(x) + grad);
}

std::vector<SetFunction> all_set_functions(const Scenario& s) {
  std::vector<SetFunction> out;
  auto add = [&out](const SetFunction& f) {
    out.push_back(f);
    if (f.composite())
      for (const auto& l : f.leaves()) out.push_back(l);
  };
  for (const auto& p : s.schedule.phases) {
    add(p.goal);
    for (const auto& e : p.safe_extra) add(e);
  }
  for (const auto& g : s.schedule.global_safes) add(g);
  return out;
}

}  // namespace fxtqp
