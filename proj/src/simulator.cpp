#include "fxtqp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace fxtqp {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

const char* to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::AllPhasesMet: return "AllPhasesMet";
    case OutcomeKind::DeadlineMissed: return "DeadlineMissed";
    case OutcomeKind::SafetyViolated: return "SafetyViolated";
    case OutcomeKind::SolverFailure: return "SolverFailure";
  }
  return "?";
}

void PhaseSchedule::validate() const {
  if (phases.empty()) throw std::invalid_argument("PhaseSchedule: no phases");
  for (const auto& p : phases) {
    if (!(p.deadline > 0.0)) throw std::invalid_argument("PhaseSchedule: deadlines must be positive");
    if (p.goal.kind() != SetKind::Goal) throw std::invalid_argument("PhaseSchedule: phase goal must be a Goal set");
    if (!(p.reach_tol >= 0.0)) throw std::invalid_argument("PhaseSchedule: reach_tol must be >= 0");
  }
  for (const auto& s : global_safes)
    if (s.kind() != SetKind::Safe) throw std::invalid_argument("PhaseSchedule: global safes must be Safe sets");
}

namespace {

int leaf_count(const std::vector<SetFunction>& sets) {
  int n = 0;
  for (const auto& s : sets) n += static_cast<int>(s.leaves().size());
  return n;
}

}  // namespace

int PhaseSchedule::safety_columns() const {
  int extra = 0;
  for (const auto& p : phases) extra = std::max(extra, leaf_count(p.safe_extra));
  return leaf_count(global_safes) + extra;
}

Eigen::VectorXd step_euler(const ControlAffineSystem& sys, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                           double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step_euler: dt must be positive");
  Eigen::VectorXd dx = sys.f(x) + sys.g(x) * u;
  if (sys.disturbance) dx += sys.disturbance(x);
  Eigen::VectorXd next = x + dt * dx;
  if (!next.allFinite()) throw NonFiniteState("step_euler: non-finite state");
  return next;
}

Trace run(const ControlAffineSystem& sys, const PhaseSchedule& schedule, const InputBounds& bounds,
          const SynthesisParams& params, const Eigen::VectorXd& x0, const RunOptions& opts) {
  schedule.validate();
  if (!(opts.dt > 0.0)) throw std::invalid_argument("run: dt must be positive");
  if (x0.size() != sys.n || !x0.allFinite()) throw std::invalid_argument("run: bad initial state");
  params.validate(sys.m);

  const int P = static_cast<int>(schedule.phases.size());
  const int n_global = leaf_count(schedule.global_safes);
  const int n_cols = schedule.safety_columns();

  Trace tr;
  tr.scenario_id = opts.scenario_id;
  tr.dt = opts.dt;
  tr.n_phases = P;
  tr.state_names = opts.state_names;
  tr.input_names = opts.input_names;
  if (static_cast<int>(tr.state_names.size()) != sys.n) {
    tr.state_names.clear();
    for (int i = 0; i < sys.n; ++i) tr.state_names.push_back(std::to_string(i));
  }
  if (static_cast<int>(tr.input_names.size()) != sys.m) {
    tr.input_names.clear();
    for (int i = 0; i < sys.m; ++i) tr.input_names.push_back(std::to_string(i));
  }
  for (const auto& s : schedule.global_safes)
    for (const auto& l : s.leaves()) tr.safety_names.push_back(l.name());
  for (int j = n_global; j < n_cols; ++j) tr.safety_names.push_back("phase_extra_" + std::to_string(j - n_global));
  tr.warnings.assign(n_cols, BranchWarnings{});

  std::vector<double> lipschitz(n_cols, 0.0);
  Eigen::VectorXd prev_h;
  int prev_active = -1;

  Eigen::VectorXd x = x0;
  int phase = 0;
  double phase_start = 0.0;
  std::vector<int> warm;

  auto terminal = [&](double t, const Eigen::VectorXd& xs, double hg, const Eigen::VectorXd& hs) {
    TraceRecord r;
    r.t = t;
    r.x = xs;
    r.u = Eigen::VectorXd::Constant(sys.m, kNaN);
    r.h_goal = hg;
    r.h_safe = hs;
    r.delta1 = kNaN;
    r.delta2 = kNaN;
    r.phase = phase;
    tr.records.push_back(r);
  };

  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * opts.dt;
    while (phase < P && schedule.phases[phase].goal.value(x) <= schedule.phases[phase].reach_tol) {
      ++phase;
      phase_start = t;
    }
    const int active = std::min(phase, P - 1);
    const Phase& ph = schedule.phases[active];
    std::vector<SetFunction> safes = schedule.global_safes;
    safes.insert(safes.end(), ph.safe_extra.begin(), ph.safe_extra.end());

    Eigen::VectorXd h = Eigen::VectorXd::Constant(n_cols, kNaN);
    {
      int j = 0;
      for (const auto& s : safes)
        for (const auto& l : s.leaves()) h(j++) = l.value(x);
    }
    const double hg = ph.goal.value(x);

    // discretization band from the observed rate of change of each branch
    bool violated = false;
    for (int j = 0; j < n_cols; ++j) {
      if (std::isnan(h(j))) continue;
      const bool comparable = prev_h.size() == n_cols && !std::isnan(prev_h(j)) && (j < n_global || prev_active == active);
      if (comparable) lipschitz[j] = std::max(lipschitz[j], std::abs(h(j) - prev_h(j)) / opts.dt);
      const double band = 10.0 * opts.dt * lipschitz[j];
      tr.warnings[j].band = band;
      tr.warnings[j].max_h = std::max(tr.warnings[j].max_h, h(j));
      if (h(j) > band && !violated) {
        violated = true;
        tr.outcome = {OutcomeKind::SafetyViolated, active, t, j, tr.safety_names[j]};
      } else if (h(j) > 0.0) {
        ++tr.warnings[j].steps;
      }
    }
    prev_h = h;
    prev_active = active;
    if (violated) {
      terminal(t, x, hg, h);
      return tr;
    }
    if (phase < P && t - phase_start > schedule.phases[phase].deadline) {
      tr.outcome = {OutcomeKind::DeadlineMissed, phase, t, -1, ""};
      terminal(t, x, hg, h);
      return tr;
    }
    if (phase == P && (!opts.hold_until || t >= *opts.hold_until - 1e-9 * opts.dt)) {
      tr.outcome = {OutcomeKind::AllPhasesMet, -1, t, -1, ""};
      terminal(t, x, hg, h);
      return tr;
    }

    ControlDecision d;
    try {
      d = synthesize(sys, ph.goal, safes, bounds, params, x, warm.empty() ? nullptr : &warm);
    } catch (const SolverFailure& e) {
      tr.outcome = {OutcomeKind::SolverFailure, active, t, -1, e.what()};
      terminal(t, x, hg, h);
      return tr;
    }
    TraceRecord r;
    r.t = t;
    r.x = x;
    r.u = d.u;
    r.h_goal = hg;
    r.h_safe = h;
    r.delta1 = d.delta1;
    r.delta2 = d.delta2;
    r.strict_cs = d.strict_cs;
    r.active_set_size = static_cast<int>(d.active_set.size());
    r.phase = phase;
    r.delta2_frozen = d.delta2_frozen;
    tr.records.push_back(r);
    warm = d.active_set;
    x = step_euler(sys, x, d.u, opts.dt);
  }
}

Summary monitor(const Trace& trace, const std::optional<SeparationSpec>& sep) {
  Summary s;
  if (trace.records.empty()) return s;
  const auto& first = trace.records.front();
  const int n_cols = static_cast<int>(first.h_safe.size());
  const int m = static_cast<int>(first.u.size());
  s.min_safety_margin.assign(n_cols, std::nullopt);
  s.max_abs_u.assign(m, std::nullopt);
  int max_phase = 0;
  for (const auto& r : trace.records) {
    for (int j = 0; j < n_cols; ++j) {
      if (std::isnan(r.h_safe(j))) continue;
      const double margin = -r.h_safe(j);
      if (!s.min_safety_margin[j] || margin < *s.min_safety_margin[j]) s.min_safety_margin[j] = margin;
    }
    for (int i = 0; i < m; ++i) {
      if (!std::isfinite(r.u(i))) continue;
      const double a = std::abs(r.u(i));
      if (!s.max_abs_u[i] || a > *s.max_abs_u[i]) s.max_abs_u[i] = a;
    }
    if (std::isfinite(r.delta1)) {
      if (!s.max_delta1 || r.delta1 > *s.max_delta1) s.max_delta1 = r.delta1;
      if (!r.strict_cs) ++s.nonstrict_steps;
    }
    if (sep) {
      const double d = (r.x.segment(sep->first, sep->dim) - r.x.segment(sep->second, sep->dim)).norm();
      if (!s.min_separation || d < *s.min_separation) s.min_separation = d;
    }
    max_phase = std::max(max_phase, r.phase);
  }
  // phase i starts at the first record with phase >= i and ends at the first with phase > i
  std::vector<double> first_at(max_phase + 1, kNaN);
  first_at[0] = first.t;
  for (const auto& r : trace.records)
    for (int p = 1; p <= r.phase; ++p)
      if (std::isnan(first_at[p])) first_at[p] = r.t;
  for (int p = 0; p < max_phase; ++p) s.reach_times.push_back(first_at[p + 1] - first_at[p]);
  return s;
}

namespace {

void put(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw std::runtime_error("trace csv: bad number '" + s + "'");
  return v;
}

}  // namespace

void write_trace_csv(const Trace& trace, std::ostream& os) {
  os << "t";
  for (const auto& n : trace.state_names) os << ",x_" << n;
  for (const auto& n : trace.input_names) os << ",u_" << n;
  os << ",h_g";
  for (size_t j = 0; j < trace.safety_names.size(); ++j) os << ",h_s_" << j;
  os << ",delta1,delta2,strict_cs,phase\n";
  for (const auto& r : trace.records) {
    put(os, r.t);
    for (int i = 0; i < r.x.size(); ++i) os << ',', put(os, r.x(i));
    for (int i = 0; i < r.u.size(); ++i) os << ',', put(os, r.u(i));
    os << ',', put(os, r.h_goal);
    for (int j = 0; j < r.h_safe.size(); ++j) os << ',', put(os, r.h_safe(j));
    os << ',', put(os, r.delta1);
    os << ',', put(os, r.delta2);
    os << ',' << (r.strict_cs ? 1 : 0) << ',' << r.phase << '\n';
  }
}

Trace read_trace_csv(std::istream& is) {
  Trace tr;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trace csv: missing header");
  const auto head = split(line);
  int n = 0, m = 0, k = 0;
  for (const auto& c : head) {
    if (c.rfind("x_", 0) == 0) {
      tr.state_names.push_back(c.substr(2));
      ++n;
    } else if (c.rfind("u_", 0) == 0) {
      tr.input_names.push_back(c.substr(2));
      ++m;
    } else if (c.rfind("h_s_", 0) == 0) {
      tr.safety_names.push_back(c.substr(4));
      ++k;
    }
  }
  const size_t expect = 1 + n + m + 1 + k + 4;
  if (head.size() != expect || head.front() != "t" || head.back() != "phase")
    throw std::runtime_error("trace csv: unexpected header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != expect) throw std::runtime_error("trace csv: wrong column count");
    TraceRecord r;
    size_t i = 0;
    r.t = parse_double(c[i++]);
    r.x.resize(n);
    for (int j = 0; j < n; ++j) r.x(j) = parse_double(c[i++]);
    r.u.resize(m);
    for (int j = 0; j < m; ++j) r.u(j) = parse_double(c[i++]);
    r.h_goal = parse_double(c[i++]);
    r.h_safe.resize(k);
    for (int j = 0; j < k; ++j) r.h_safe(j) = parse_double(c[i++]);
    r.delta1 = parse_double(c[i++]);
    r.delta2 = parse_double(c[i++]);
    r.strict_cs = c[i++] == "1";
    r.phase = std::stoi(c[i++]);
    tr.records.push_back(r);
  }
  if (tr.records.size() > 1) tr.dt = tr.records[1].t - tr.records[0].t;
  return tr;
}

}  // namespace fxtqp
