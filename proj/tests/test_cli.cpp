#include <doctest.h>

#include "fxtqp/cli.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace fxtqp;
using namespace fxtqp::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("fxtqp_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

int invoke(const std::string& args) {
  const std::string cmd = std::string(FXTQP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  REQUIRE(is);
  return json::parse(is);
}

int count_lines(const fs::path& p) {
  std::ifstream is(p);
  int n = 0;
  for (std::string line; std::getline(is, line);) ++n;
  return n;
}

}  // namespace

TEST_CASE("assignment and sweep parsing") {
  auto [k, v] = parse_assignment("v_f0 = 18");
  CHECK(k == "v_f0");
  CHECK(v == "18");
  CHECK_THROWS_AS(parse_assignment("novalue"), ConfigError);
  CHECK_THROWS_AS(parse_assignment("=3"), ConfigError);

  auto axis = parse_sweep("d_delta=0,25,50");
  CHECK(axis.key == "d_delta");
  CHECK(axis.values == std::vector<std::string>{"0", "25", "50"});
  CHECK(parse_sweep("v_f0=").values.empty());
}

TEST_CASE("scenario construction from overrides") {
  auto s = build_scenario("acc", {{"v_f0", "24"}, {"tau_d", "2"}}, 0.005);
  CHECK(s.x0(0) == 24.0);
  CHECK(s.options.dt == 0.005);
  CHECK(s.schedule.global_safes[0].value(Eigen::Vector3d(10, 10, 20)) == doctest::Approx(0.0));

  auto r = build_scenario("two-robot", {{"d_m", "0.2"}, {"goal_rows", "max-branch"}}, std::nullopt);
  CHECK(r.params.goal_rows == RowMode::MaxBranch);
  CHECK(build_scenario("synthetic:obstacle-2d", {{"dt", "0.01"}}, std::nullopt).options.dt == 0.01);

  CHECK_THROWS_AS(build_scenario("acc", {{"nope", "1"}}, std::nullopt), ConfigError);
  CHECK_THROWS_AS(build_scenario("acc", {{"v_f0", "fast"}}, std::nullopt), ConfigError);
  CHECK_THROWS_AS(build_scenario("acc", {{"d_delta", "500"}}, std::nullopt), ConfigError);
  CHECK_THROWS_AS(build_scenario("acc", {}, -1.0), ConfigError);
  CHECK_THROWS_AS(build_scenario("two-robot", {{"goal_rows", "sideways"}}, std::nullopt), ConfigError);
  CHECK_THROWS_AS(build_scenario("synthetic:missing", {}, std::nullopt), ConfigError);
  CHECK_THROWS_AS(build_scenario("boat", {}, std::nullopt), ConfigError);
}

TEST_CASE("config file") {
  auto dir = scratch("config");
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "c.json");
    os << R"({"scenario": "two-robot", "set": {"d_m": 0.15}, "dt": 0.002, "jobs": 3,
             "sweep": {"key": "mu", "values": [4, 5]}})";
  }
  RunConfig cfg;
  load_config_file((dir / "c.json").string(), cfg);
  CHECK(cfg.scenario == "two-robot");
  REQUIRE(cfg.overrides.size() == 1);
  CHECK(cfg.overrides[0].first == "d_m");
  CHECK(std::stod(cfg.overrides[0].second) == 0.15);
  CHECK(*cfg.dt == 0.002);
  CHECK(cfg.jobs == 3);
  REQUIRE(cfg.sweep);
  CHECK(cfg.sweep->values.size() == 2);

  {
    std::ofstream os(dir / "bad.json");
    os << R"({"colour": "red"})";
  }
  RunConfig other;
  CHECK_THROWS_AS(load_config_file((dir / "bad.json").string(), other), ConfigError);
  CHECK_THROWS_AS(load_config_file((dir / "missing.json").string(), other), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("exit code mapping") {
  Outcome o;
  CHECK(exit_code_for(o) == kOk);
  o.kind = OutcomeKind::SolverFailure;
  CHECK(exit_code_for(o) == kSolverFailure);
  o.kind = OutcomeKind::SafetyViolated;
  CHECK(exit_code_for(o) == kRequirementFailure);
  o.kind = OutcomeKind::DeadlineMissed;
  CHECK(exit_code_for(o) == kRequirementFailure);
}

TEST_CASE("two-robot run writes a summary that matches the re-parsed trace") {
  auto dir = scratch("run");
  CHECK(invoke("run --scenario two-robot --out " + dir.string()) == 0);
  auto j = read_json(dir / "summary.json");
  CHECK(j["outcome"]["kind"] == "AllPhasesMet");
  CHECK(j["exit_code"] == 0);
  REQUIRE(j["reach_times"].size() == 8);
  for (const auto& t : j["reach_times"]) CHECK(t.get<double>() <= 1.0);
  CHECK(j["min_separation"].get<double>() >= 0.1);

  std::ifstream is(dir / "trace.csv");
  const Trace parsed = read_trace_csv(is);
  const Scenario s = build_scenario("two-robot", {}, std::nullopt);
  const Summary again = monitor(parsed, s.separation);
  CHECK(j["reach_times"].get<std::vector<double>>() == again.reach_times);
  CHECK(j["min_separation"].get<double>() == *again.min_separation);
  CHECK(j["max_delta1"].get<double>() == *again.max_delta1);
  CHECK(j["nonstrict_steps"].get<int>() == again.nonstrict_steps);
  REQUIRE(j["min_safety_margin"].size() == again.min_safety_margin.size());
  for (size_t i = 0; i < again.min_safety_margin.size(); ++i) {
    REQUIRE(again.min_safety_margin[i]);
    CHECK(j["min_safety_margin"][i].get<double>() == *again.min_safety_margin[i]);
  }
  for (size_t i = 0; i < again.max_abs_u.size(); ++i) CHECK(j["max_abs_u"][i].get<double>() == *again.max_abs_u[i]);
  fs::remove_all(dir);
}

TEST_CASE("exit codes from the executable") {
  auto dir = scratch("codes");
  CHECK(invoke("run --scenario acc --set bogus=1 --out " + dir.string()) == kConfigError);
  CHECK(invoke("run --scenario acc --set v_f0=abc --out " + dir.string()) == kConfigError);
  CHECK(invoke("run --scenario acc --dt 0 --out " + dir.string()) == kConfigError);
  CHECK(invoke("--no-such-flag") == kConfigError);
  // a step this coarse overshoots the ball back and forth until the deadline
  CHECK(invoke("run --scenario synthetic:integrator-1d --set dt=0.5 --out " + dir.string()) == kRequirementFailure);
  CHECK(invoke("run --scenario acc --set v_f0=18 --out " + dir.string()) == kOk);
  fs::remove_all(dir);
}

TEST_CASE("sweeps") {
  auto dir = scratch("sweep");
  CHECK(invoke("sweep --scenario acc --sweep v_f0= --out " + dir.string()) == 0);
  CHECK(!fs::exists(dir / "sweep.csv"));

  CHECK(invoke("--scenario synthetic:obstacle-2d --sweep dt=0.002,0.004 --jobs 2 --out " + dir.string()) == 0);
  CHECK(count_lines(dir / "sweep.csv") == 3);
  CHECK(fs::exists(dir / "dt=0.002" / "summary.json"));
  CHECK(fs::exists(dir / "dt=0.004" / "trace.csv"));
  // the swept value lands in the sub-run's overrides
  CHECK(read_json(dir / "dt=0.004" / "summary.json")["dt"].get<double>() == 0.004);

  CHECK(invoke("sweep --scenario acc --sweep v_f0=18,oops --out " + dir.string()) == kConfigError);
  fs::remove_all(dir);
}

TEST_CASE("bound verification grid") {
  const auto grid = default_bounds_grid();
  const auto rows = verify_bounds(grid);
  int in_domain = 0, zero_rows = 0;
  for (const auto& r : rows) {
    if (!r.in_domain) {
      CHECK(r.point.delta1 > 2.0 * std::sqrt(r.point.alpha1 * r.point.alpha2));
      continue;
    }
    ++in_domain;
    CHECK(r.pass);
    if (r.point.delta1 == 0.0) {
      ++zero_rows;
      CHECK(r.bound == doctest::Approx(r.closed_form).epsilon(1e-12));
    }
  }
  CHECK(in_domain >= 60);
  CHECK(zero_rows == 18);

  // an out-of-domain point is reported, not failed
  auto far = verify_bounds({{1.0, 1.0, 2.0, 2.5, 100.0}});
  CHECK(!far[0].in_domain);
  CHECK(!far[0].hit_time);
  CHECK(far[0].pass);
  std::stringstream ss;
  write_bounds_csv(far, ss);
  CHECK(ss.str().find("out-of-domain") != std::string::npos);
  CHECK(ss.str().find("Never") != std::string::npos);

  auto dir = scratch("bounds");
  CHECK(invoke("--verify-bounds --out " + dir.string()) == 0);
  CHECK(count_lines(dir / "bounds.csv") == static_cast<int>(grid.size()) + 1);
  fs::remove_all(dir);
}
