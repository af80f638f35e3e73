#include "fxtqp/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

namespace fxtqp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double parse_double(const std::string& key, const std::string& text) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size() || !std::isfinite(v))
    throw ConfigError("value '" + text + "' for '" + key + "' is not a finite number");
  return v;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

template <class Cfg>
void apply(Cfg& cfg, const std::map<std::string, std::function<void(Cfg&, const std::string&)>>& table,
           const Overrides& overrides, const std::string& scenario) {
  for (const auto& [key, value] : overrides) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown key '" + key + "' for scenario " + scenario);
    it->second(cfg, value);
  }
}

#define FXTQP_FIELD(Cfg, name) \
  { #name, [](Cfg& c, const std::string& v) { c.name = parse_double(#name, v); } }
#define FXTQP_WEIGHT(Cfg, prefix, member, field) \
  { prefix #field, [](Cfg& c, const std::string& v) { c.member.field = parse_double(prefix #field, v); } }

Scenario build_acc(const Overrides& overrides, std::optional<double> dt) {
  using C = AccConfig;
  static const std::map<std::string, std::function<void(C&, const std::string&)>> table = {
      FXTQP_FIELD(C, M),        FXTQP_FIELD(C, grav),      FXTQP_FIELD(C, v_d),
      FXTQP_FIELD(C, v_l0),     FXTQP_FIELD(C, D0),        FXTQP_FIELD(C, f0),
      FXTQP_FIELD(C, f1),       FXTQP_FIELD(C, f2),        FXTQP_FIELD(C, a_l),
      FXTQP_FIELD(C, tau_d),    FXTQP_FIELD(C, T_ud),      FXTQP_FIELD(C, mu),
      FXTQP_FIELD(C, d_delta),  FXTQP_FIELD(C, v_f0),      FXTQP_FIELD(C, lead_accel),
      FXTQP_FIELD(C, freeze_level), FXTQP_FIELD(C, reach_band), FXTQP_FIELD(C, dt),
      FXTQP_FIELD(C, horizon),
      FXTQP_WEIGHT(C, "nominal.", nominal, w_u),     FXTQP_WEIGHT(C, "nominal.", nominal, w1),
      FXTQP_WEIGHT(C, "nominal.", nominal, w2),      FXTQP_WEIGHT(C, "nominal.", nominal, q1),
      FXTQP_WEIGHT(C, "disturbed.", disturbed, w_u), FXTQP_WEIGHT(C, "disturbed.", disturbed, w1),
      FXTQP_WEIGHT(C, "disturbed.", disturbed, w2),  FXTQP_WEIGHT(C, "disturbed.", disturbed, q1),
  };
  C cfg;
  apply(cfg, table, overrides, "acc");
  if (dt) cfg.dt = *dt;
  return acc_scenario(cfg);
}

RowMode parse_row_mode(const std::string& v) {
  if (v == "per-branch") return RowMode::PerBranch;
  if (v == "max-branch") return RowMode::MaxBranch;
  throw ConfigError("goal_rows must be per-branch or max-branch, got '" + v + "'");
}

Scenario build_two_robot(const Overrides& overrides, std::optional<double> dt) {
  using C = TwoRobotConfig;
  static const std::map<std::string, std::function<void(C&, const std::string&)>> table = {
      FXTQP_FIELD(C, d_m),           FXTQP_FIELD(C, component_bound), FXTQP_FIELD(C, mu),
      FXTQP_FIELD(C, phase_budget),  FXTQP_FIELD(C, box),             FXTQP_FIELD(C, disk),
      FXTQP_FIELD(C, circle_radius), FXTQP_FIELD(C, semi_major),      FXTQP_FIELD(C, semi_minor),
      FXTQP_FIELD(C, dt),
      FXTQP_WEIGHT(C, "", weights, w_u), FXTQP_WEIGHT(C, "", weights, w1),
      FXTQP_WEIGHT(C, "", weights, w2),  FXTQP_WEIGHT(C, "", weights, q1),
      {"x1_0.x", [](C& c, const std::string& v) { c.x1_0(0) = parse_double("x1_0.x", v); }},
      {"x1_0.y", [](C& c, const std::string& v) { c.x1_0(1) = parse_double("x1_0.y", v); }},
      {"x2_0.x", [](C& c, const std::string& v) { c.x2_0(0) = parse_double("x2_0.x", v); }},
      {"x2_0.y", [](C& c, const std::string& v) { c.x2_0(1) = parse_double("x2_0.y", v); }},
      {"goal_rows", [](C& c, const std::string& v) { c.goal_rows = parse_row_mode(v); }},
  };
  C cfg;
  apply(cfg, table, overrides, "two-robot");
  if (dt) cfg.dt = *dt;
  return two_robot_scenario(cfg);
}

Scenario build_synthetic(const std::string& name, const Overrides& overrides, std::optional<double> dt) {
  Scenario s;
  try {
    s = synthetic_scenario(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (const auto& [key, value] : overrides) {
    if (key == "dt")
      s.options.dt = parse_double(key, value);
    else if (key == "T_ud")
      s.params.T_ud = parse_double(key, value);
    else if (key == "mu")
      s.params.mu = parse_double(key, value);
    else
      throw ConfigError("unknown key '" + key + "' for scenario " + s.id);
  }
  if (dt) s.options.dt = *dt;
  if (!(s.options.dt > 0.0)) throw ConfigError("dt must be positive");
  return s;
}

json opt(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

struct RunResult {
  Trace trace;
  Summary summary;
  int exit = kOk;
};

RunResult execute(const Scenario& s) {
  RunResult r;
  r.trace = run_scenario(s);
  r.summary = monitor(r.trace, s.separation);
  r.exit = exit_code_for(r.trace.outcome);
  return r;
}

json overrides_json(const Overrides& o) {
  json j = json::object();
  for (const auto& [k, v] : o) j[k] = v;
  return j;
}

void write_outputs(const fs::path& dir, const RunResult& r, const Overrides& overrides) {
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "trace.csv");
    if (!os) throw ConfigError("cannot write " + (dir / "trace.csv").string());
    write_trace_csv(r.trace, os);
  }
  json j = json::parse(summary_json(r.trace, r.summary));
  j["overrides"] = overrides_json(overrides);
  j["exit_code"] = r.exit;
  std::ofstream os(dir / "summary.json");
  if (!os) throw ConfigError("cannot write " + (dir / "summary.json").string());
  os << j.dump(2) << "\n";
}

double min_margin(const Summary& s) {
  double m = INFINITY;
  for (const auto& v : s.min_safety_margin)
    if (v) m = std::min(m, *v);
  return m;
}

double max_input(const Summary& s) {
  double m = -INFINITY;
  for (const auto& v : s.max_abs_u)
    if (v) m = std::max(m, *v);
  return m;
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int combine(int a, int b) {
  // config errors dominate, then solver failures, then missed requirements
  auto rank = [](int c) { return c == kConfigError ? 3 : c == kSolverFailure ? 2 : c == kRequirementFailure ? 1 : 0; };
  return rank(a) >= rank(b) ? a : b;
}

}  // namespace

std::pair<std::string, std::string> parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + text + "'");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

SweepAxis parse_sweep(const std::string& text) {
  auto [key, rest] = parse_assignment(text);
  SweepAxis axis{key, {}};
  std::stringstream ss(rest);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) axis.values.push_back(item);
  }
  return axis;
}

Scenario build_scenario(const std::string& id, const Overrides& overrides, std::optional<double> dt) {
  if (dt && !(*dt > 0.0)) throw ConfigError("dt must be positive");
  try {
    if (id == "acc") return build_acc(overrides, dt);
    if (id == "two-robot") return build_two_robot(overrides, dt);
    if (id.rfind("synthetic:", 0) == 0) return build_synthetic(id.substr(10), overrides, dt);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown scenario '" + id + "'");
}

void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "scenario") {
        cfg.scenario = value.get<std::string>();
      } else if (key == "set") {
        for (const auto& [k, v] : value.items())
          cfg.overrides.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
      } else if (key == "dt") {
        cfg.dt = value.get<double>();
      } else if (key == "out") {
        cfg.out_dir = value.get<std::string>();
      } else if (key == "jobs") {
        cfg.jobs = value.get<int>();
      } else if (key == "sweep") {
        SweepAxis axis{value.at("key").get<std::string>(), {}};
        for (const auto& v : value.at("values")) axis.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        cfg.sweep = axis;
      } else {
        throw ConfigError("config file: unknown field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
}

int exit_code_for(const Outcome& o) {
  switch (o.kind) {
    case OutcomeKind::AllPhasesMet: return kOk;
    case OutcomeKind::SolverFailure: return kSolverFailure;
    case OutcomeKind::DeadlineMissed:
    case OutcomeKind::SafetyViolated: return kRequirementFailure;
  }
  return kRequirementFailure;
}

std::string summary_json(const Trace& trace, const Summary& s) {
  json j;
  j["scenario"] = trace.scenario_id;
  j["dt"] = trace.dt;
  j["phases"] = trace.n_phases;
  j["steps"] = trace.records.size();
  j["final_t"] = trace.records.empty() ? 0.0 : trace.records.back().t;
  const auto& o = trace.outcome;
  j["outcome"] = {{"kind", to_string(o.kind)}, {"phase", o.phase}, {"t", o.t}, {"branch", o.branch},
                  {"detail", o.detail}};
  j["reach_times"] = s.reach_times;
  j["state_columns"] = trace.state_names;
  j["input_columns"] = trace.input_names;
  j["safety_columns"] = trace.safety_names;
  json margins = json::array(), us = json::array(), warn = json::array();
  for (const auto& m : s.min_safety_margin) margins.push_back(opt(m));
  for (const auto& u : s.max_abs_u) us.push_back(opt(u));
  for (size_t i = 0; i < trace.warnings.size(); ++i) {
    const auto& w = trace.warnings[i];
    warn.push_back({{"column", i < trace.safety_names.size() ? trace.safety_names[i] : std::to_string(i)},
                    {"steps", w.steps},
                    {"max_h", w.steps > 0 ? num(w.max_h) : json(nullptr)},
                    {"band", num(w.band)}});
  }
  j["min_safety_margin"] = margins;
  j["min_separation"] = opt(s.min_separation);
  j["max_abs_u"] = us;
  j["max_delta1"] = opt(s.max_delta1);
  j["nonstrict_steps"] = s.nonstrict_steps;
  j["discretization_warnings"] = warn;
  return j.dump(2);
}

int cmd_run(const RunConfig& cfg, std::ostream& log) {
  const Scenario s = build_scenario(cfg.scenario, cfg.overrides, cfg.dt);
  const RunResult r = execute(s);
  write_outputs(cfg.out_dir, r, cfg.overrides);
  log << s.id << ": " << to_string(r.trace.outcome.kind);
  if (!r.trace.outcome.detail.empty()) log << " (" << r.trace.outcome.detail << ")";
  log << "; reach times";
  for (double t : r.summary.reach_times) log << " " << t;
  log << "; written to " << cfg.out_dir << "\n";
  return r.exit;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.sweep) throw ConfigError("sweep needs --sweep key=v1,v2,...");
  const SweepAxis& axis = *cfg.sweep;
  if (axis.values.empty()) {
    log << "sweep over " << axis.key << ": no values, nothing to do\n";
    return kOk;
  }
  // build every scenario up front so a bad value fails before any run starts
  std::vector<Scenario> scenarios;
  std::vector<Overrides> overrides;
  for (const auto& v : axis.values) {
    Overrides o = cfg.overrides;
    o.emplace_back(axis.key, v);
    scenarios.push_back(build_scenario(cfg.scenario, o, cfg.dt));
    overrides.push_back(std::move(o));
  }

  std::vector<RunResult> results(scenarios.size());
  std::vector<std::string> errors(scenarios.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < scenarios.size(); i = next++) {
      try {
        results[i] = execute(scenarios[i]);
        write_outputs(fs::path(cfg.out_dir) / (axis.key + "=" + axis.values[i]), results[i], overrides[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int jobs = std::clamp<int>(cfg.jobs, 1, static_cast<int>(scenarios.size()));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error(e);

  fs::create_directories(cfg.out_dir);
  std::ofstream os(fs::path(cfg.out_dir) / "sweep.csv");
  if (!os) throw ConfigError("cannot write sweep.csv");
  os << axis.key << ",outcome,exit_code,final_t,reach_times,min_safety_margin,max_abs_u,max_delta1,nonstrict_steps\n";
  int code = kOk;
  for (size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    std::string reach;
    for (double t : r.summary.reach_times) reach += (reach.empty() ? "" : " ") + fmt(t);
    os << axis.values[i] << "," << to_string(r.trace.outcome.kind) << "," << r.exit << ","
       << fmt(r.trace.records.empty() ? 0.0 : r.trace.records.back().t) << "," << reach << ","
       << fmt(min_margin(r.summary)) << "," << fmt(max_input(r.summary)) << ","
       << fmt(r.summary.max_delta1.value_or(NAN)) << "," << r.summary.nonstrict_steps << "\n";
    log << axis.key << "=" << axis.values[i] << ": " << to_string(r.trace.outcome.kind) << "\n";
    code = combine(code, r.exit);
  }
  return code;
}

std::vector<BoundPoint> default_bounds_grid() {
  std::vector<BoundPoint> grid;
  for (auto [a1, a2] : {std::pair{1.0, 1.0}, std::pair{2.0, 0.5}})
    for (double mu : {2.0, 3.0, 5.0})
      for (double d1 : {-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 1.9, 2.5})
        for (double V0 : {0.01, 1.0, 100.0}) grid.push_back({a1, a2, mu, d1, V0});
  return grid;
}

std::vector<BoundCheck> verify_bounds(const std::vector<BoundPoint>& grid) {
  constexpr double kDt = 1e-4;
  constexpr double kSlack = 1e-6;  // level-crossing interpolation
  std::vector<BoundCheck> out;
  for (const auto& p : grid) {
    FxtsGains g(p.alpha1, p.alpha2, p.mu);
    BoundCheck c{p, classify(g, p.delta1), domain_threshold(g, p.delta1), true, 0.0, std::nullopt,
                 p.mu * std::numbers::pi / (2.0 * std::sqrt(p.alpha1 * p.alpha2)), true};
    c.in_domain = !c.domain || p.V0 <= *c.domain;
    c.bound = settling_time_bound(g, p.delta1).T;
    c.hit_time = simulate_scalar_v(g, p.delta1, p.V0, kDt).hit_time;
    if (c.in_domain) {
      c.pass = c.hit_time && *c.hit_time <= c.bound + kSlack;
      if (p.delta1 == 0.0) c.pass = c.pass && *c.hit_time <= c.closed_form + kSlack;
    }
    out.push_back(c);
  }
  return out;
}

void write_bounds_csv(const std::vector<BoundCheck>& rows, std::ostream& os) {
  os << "alpha1,alpha2,mu,delta1,V0,regime,domain,in_domain,bound,hit_time,closed_form,pass\n";
  for (const auto& r : rows) {
    os << fmt(r.point.alpha1) << "," << fmt(r.point.alpha2) << "," << fmt(r.point.mu) << "," << fmt(r.point.delta1)
       << "," << fmt(r.point.V0) << "," << to_string(r.regime) << "," << (r.domain ? fmt(*r.domain) : "inf") << ","
       << (r.in_domain ? "yes" : "out-of-domain") << "," << fmt(r.bound) << ","
       << (r.hit_time ? fmt(*r.hit_time) : "Never") << "," << fmt(r.closed_form) << "," << (r.pass ? 1 : 0) << "\n";
  }
}

int cmd_verify_bounds(const std::string& out_dir, std::ostream& log) {
  const auto rows = verify_bounds(default_bounds_grid());
  fs::create_directories(out_dir);
  std::ofstream os(fs::path(out_dir) / "bounds.csv");
  if (!os) throw ConfigError("cannot write bounds.csv");
  write_bounds_csv(rows, os);
  int in_domain = 0, failed = 0;
  for (const auto& r : rows) {
    in_domain += r.in_domain;
    failed += !r.pass;
  }
  log << rows.size() << " points, " << in_domain << " in domain, " << failed << " violations\n";
  return failed ? kRequirementFailure : kOk;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Fixed-time CLF-CBF QP controller: scenario runs, sweeps and bound checks"};
  app.require_subcommand(0, 1);

  RunConfig cfg;
  std::string scenario, config_path, sweep_text, out_dir;
  std::vector<std::string> sets;
  std::optional<double> dt;
  int jobs = 0;
  bool verify_flag = false;

  app.add_option("--scenario", scenario, "acc | two-robot | synthetic:<id>");
  app.add_option("--set", sets, "override a scenario field, key=value (repeatable)");
  app.add_option("--dt", dt, "integration step");
  app.add_option("--out", out_dir, "output directory (default: $FXTQP_OUT or .)");
  app.add_option("--sweep", sweep_text, "sweep axis, key=v1,v2,...");
  app.add_option("--jobs", jobs, "concurrent sweep runs")->check(CLI::PositiveNumber);
  app.add_option("--config", config_path, "JSON config file");
  app.add_flag("--verify-bounds", verify_flag, "check settling-time bounds on the default grid");

  auto* run_cmd = app.add_subcommand("run", "run one scenario")->fallthrough();
  auto* sweep_cmd = app.add_subcommand("sweep", "run one scenario per sweep value")->fallthrough();
  auto* verify_cmd = app.add_subcommand("verify-bounds", "check settling-time bounds")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (const char* env = std::getenv("FXTQP_OUT"); env && *env) cfg.out_dir = env;
    if (!config_path.empty()) load_config_file(config_path, cfg);
    if (!scenario.empty()) cfg.scenario = scenario;
    for (const auto& s : sets) cfg.overrides.push_back(parse_assignment(s));
    if (dt) cfg.dt = dt;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!sweep_text.empty()) cfg.sweep = parse_sweep(sweep_text);
    if (jobs > 0) cfg.jobs = jobs;
    if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");

    if (verify_flag || verify_cmd->parsed()) return cmd_verify_bounds(cfg.out_dir, std::cout);
    if (sweep_cmd->parsed() || (!run_cmd->parsed() && cfg.sweep)) return cmd_sweep(cfg, std::cout);
    return cmd_run(cfg, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NonFiniteState& e) {
    std::cerr << "non-finite state: " << e.what() << "\n";
    return kSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fxtqp::cli
