#pragma once

#include "fxtqp/simulator.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace fxtqp {

// Everything needed for one closed-loop run.
struct Scenario {
  std::string id;
  ControlAffineSystem sys;
  PhaseSchedule schedule;
  InputBounds bounds;
  SynthesisParams params;
  Eigen::VectorXd x0;
  RunOptions options;
  std::optional<SeparationSpec> separation;
};

Trace run_scenario(const Scenario& s);

// QP weights; w_u is in units of the scaled input u / u_max.
struct WeightPreset {
  double w_u;
  double w1;
  double w2;
  double q1;
};

struct AccConfig {
  double M = 1650.0;
  double grav = 9.81;
  double v_d = 22.0;
  double v_l0 = 10.0;
  double D0 = 150.0;
  double f0 = 0.1;
  double f1 = 5.0;
  double f2 = 0.25;
  double a_l = 0.3;
  double tau_d = 1.8;
  double T_ud = 10.0;
  double mu = 5.0;
  double d_delta = 0.0;
  double v_f0 = 18.0;
  double lead_accel = 0.0;     // constant while the lead vehicle moves
  double freeze_level = -20.0;
  double reach_band = 0.5;     // phase met once |v_f - v_d| <= reach_band
  double dt = 1e-2;
  double horizon = 10.0;
  WeightPreset nominal{0.02706, 7.621, 4.243e5, 1242.0};
  WeightPreset disturbed{0.02706, 7.621, 1.778279e6, 316.2};

  double u_max() const { return 0.25 * M * grav; }
  // freeze rule and disturbed weights apply only under a disturbance
  bool robust_mode() const { return d_delta > 0.0; }
  void validate() const;
};

Scenario acc_scenario(const AccConfig& cfg);

// One run per disturbance gain over the given horizon; runs execute in parallel.
std::vector<Trace> acc_disturbance_sweep(const AccConfig& cfg, const std::vector<double>& d_deltas,
                                         double horizon = 20.0);

struct TwoRobotConfig {
  double d_m = 0.1;
  double component_bound = 7.0;
  double mu = 5.0;
  double phase_budget = 1.0;
  double box = 2.0;          // |x_j| <= box per coordinate
  double disk = 1.5;         // ||x|| >= disk
  double circle_radius = 0.5;
  double semi_major = 1.2;
  double semi_minor = 0.5;
  Eigen::Vector2d x1_0{-1.5, 1.5};
  Eigen::Vector2d x2_0{1.5, -1.5};
  double dt = 1e-3;
  WeightPreset weights{1.0, 1.0, 1.0, 100.0};
  RowMode goal_rows = RowMode::PerBranch;
  // waypoint visited by each agent in each phase, and the set each starts in
  std::array<std::vector<int>, 2> routes{std::vector<int>{2, 3, 4, 5, 6, 7, 8, 1},
                                         std::vector<int>{4, 3, 2, 1, 8, 7, 6, 5}};
  std::array<int, 2> start_sets{1, 5};

  void validate() const;
};

// Waypoint set i in 1..8 on the plane (circles at odd i, ellipses at even i).
SetFunction waypoint_set(const TwoRobotConfig& cfg, int i);

Scenario two_robot_scenario(const TwoRobotConfig& cfg);

// Small systems whose safe-control existence is known by construction.
struct SyntheticCase {
  Scenario scenario;
  std::string description;
};

std::vector<SyntheticCase> synthetic_suite();
Scenario synthetic_scenario(const std::string& id);

// u = -c grad / |grad|; zero when the gradient vanishes.
Eigen::VectorXd single_integrator_safe_input(const Eigen::VectorXd& grad, double c);

// u = -g^{-1} (f + grad) for a square invertible g.
Eigen::VectorXd fully_actuated_safe_input(const ControlAffineSystem& sys, const Eigen::VectorXd& grad,
                                          const Eigen::VectorXd& x);

// Every scenario set function, for gradient checks.
std::vector<SetFunction> all_set_functions(const Scenario& s);

}  // namespace fxtqp
