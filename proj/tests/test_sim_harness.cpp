#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "mpp/config.hpp"
#include "mpp/error.hpp"
#include "mpp/sim_harness.hpp"

using namespace mpp;
using Catch::Matchers::WithinAbs;

namespace {

std::string state_log_text(const RunResult& r) {
  std::ostringstream out;
  write_state_log(out, r);
  return out.str();
}

ScenarioConfig quiet_empty_field() {
  ScenarioConfig cfg;
  cfg.n_obstacles = 0;
  cfg.n_paths = 1;
  cfg.sim.sensor_noise = false;
  return cfg;
}

// Independent Wilson score bounds.
WilsonInterval wilson_oracle(double s, double n, double z) {
  const double p = s / n;
  const double denom = 1.0 + z * z / n;
  const double center = (p + z * z / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  return {center - half, center + half};
}

}  // namespace

TEST_CASE("empty field with noise off flies level to success") {
  // The scenario caps corridor rays at 4 m, which holds a lone path's
  // corridor tight around its RRT* wiggles; rays at the module default
  // leave room for the QP to fly level.
  ScenarioConfig cfg = quiet_empty_field();
  cfg.corridor.max_ray = CorridorConfig{}.max_ray;
  const auto r = run_closed_loop(cfg);
  CHECK(r.outcome == Outcome::Success);
  CHECK(r.final_x >= 140.0);
  double max_z = 0.0;
  for (const auto& row : r.log) max_z = std::max(max_z, std::abs(row.truth.z));
  CHECK(max_z < 1.0);
  REQUIRE_FALSE(r.cycles.empty());
  for (const auto& c : r.cycles) CHECK(c.candidate == 0);
}

TEST_CASE("a wall across the field ends in failure") {
  ScenarioConfig cfg = quiet_empty_field();
  ObstacleField wall;
  wall.bounds = cfg.field.bounds;
  for (double z = -20.0; z <= 20.0; z += 1.5) wall.obstacles.push_back({Vec2(60.0, z), 1.0});
  cfg.field_override = wall;
  cfg.n_paths = 5;
  const auto r = run_closed_loop(cfg);
  CHECK(r.outcome != Outcome::Success);
  CHECK(r.outcome != Outcome::Timeout);
  CHECK(r.final_x < 60.0);
  CHECK(r.final_t < cfg.sim.max_time);
}

TEST_CASE("closed loop is bit-identical across runs") {
  ScenarioConfig cfg;
  cfg.seed = 17;
  cfg.n_paths = 5;
  const auto a = run_closed_loop(cfg);
  const auto b = run_closed_loop(cfg);
  CHECK(a.outcome == b.outcome);
  CHECK(state_log_text(a) == state_log_text(b));
  REQUIRE(a.cycles.size() == b.cycles.size());
  for (std::size_t i = 0; i < a.cycles.size(); ++i) {
    CHECK(a.cycles[i].candidate == b.cycles[i].candidate);
    CHECK(a.cycles[i].reference_knots == b.cycles[i].reference_knots);
  }
}

TEST_CASE("failure predicates see the true state") {
  ScenarioConfig cfg;
  cfg.n_paths = 5;
  const double theta_max = cfg.sim.theta_limit_deg * std::numbers::pi / 180.0;
  const double gamma_max = cfg.sim.gamma_limit_deg * std::numbers::pi / 180.0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    cfg.seed = seed;
    const auto r = run_closed_loop(cfg);
    REQUIRE(r.log.size() >= 2);
    // Every row before the terminal one is a healthy true state.
    for (std::size_t i = 0; i + 1 < r.log.size(); ++i) {
      const auto& s = r.log[i].truth;
      CHECK(std::abs(s.theta) <= theta_max);
      CHECK(std::abs(s.gamma) <= gamma_max);
      CHECK_FALSE(collision_check(s.x, s.z, r.field));
    }
    const auto& last = r.log.back().truth;
    switch (r.outcome) {
      case Outcome::Success: CHECK(last.x >= cfg.sim.success_x); break;
      case Outcome::CollisionFailure: CHECK(collision_check(last.x, last.z, r.field)); break;
      case Outcome::ExtremeStateFailure:
        CHECK((std::abs(last.theta) > theta_max || std::abs(last.gamma) > gamma_max ||
               last.v <= cfg.sim.min_airspeed));
        break;
      default: break;
    }
  }
}

TEST_CASE("planner time per cycle fits the replanning budget") {
  ScenarioConfig cfg;
  cfg.seed = 3;
  const auto r = run_closed_loop(cfg, false);
  REQUIRE_FALSE(r.cycles.empty());
  double total = 0.0;
  for (const auto& c : r.cycles) total += c.planner_ms;
  const double mean_ms = total / static_cast<double>(r.cycles.size());
  CHECK(mean_ms < 2.0 * 1000.0 * cfg.sim.replan_period);
}

TEST_CASE("reference interpolation") {
  const auto model = make_linear_model(12.0, 0.25, AircraftParams{});
  Trajectory traj = straight_trajectory(model, Vec2(5.0, 1.0), 4);
  REQUIRE(traj.knots.size() == 5);
  traj.knots[2].z = 3.0;
  traj.controls[1].elevator += 0.1;

  for (std::size_t i = 0; i < traj.knots.size(); ++i) {
    CHECK(interpolate_reference(traj, 0.25 * static_cast<double>(i)).x == traj.knots[i].x);
  }
  const auto mid = interpolate_reference(traj, 0.375);
  CHECK_THAT(mid.z, WithinAbs(0.5 * (traj.knots[1].z + traj.knots[2].z), 1e-12));
  CHECK_THAT(mid.x, WithinAbs(5.0 + 12.0 * 0.375, 1e-12));
  // Past the last knot the reference keeps moving at the final speed.
  CHECK_THAT(interpolate_reference(traj, 1.5).x, WithinAbs(5.0 + 18.0, 1e-9));

  // Continuity across every knot.
  for (int k = 1; k < 4; ++k) {
    const auto a = interpolate_reference(traj, 0.25 * k - 1e-9).to_vector();
    const auto b = interpolate_reference(traj, 0.25 * k + 1e-9).to_vector();
    CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-6);
  }

  CHECK(reference_input(traj, 0.30) == traj.controls[1]);
  CHECK(reference_input(traj, 0.49) == traj.controls[1]);
  CHECK(reference_input(traj, 0.50) == traj.controls[2]);
  CHECK(reference_input(traj, 10.0) == traj.controls.back());
}

TEST_CASE("direct path reference walks the polyline") {
  const auto model = make_linear_model(12.0, 0.25, AircraftParams{});
  const auto path = Path::from_waypoints({Vec2(0, 0), Vec2(12, 0), Vec2(24, 12)});
  const auto a = direct_path_reference(path, model, 0.5);
  CHECK_THAT(a.x, WithinAbs(6.0, 1e-12));
  CHECK(a.gamma == 0.0);
  const auto b = direct_path_reference(path, model, 1.5);
  CHECK_THAT(b.gamma, WithinAbs(std::numbers::pi / 4, 1e-12));
  CHECK_THAT(b.z, WithinAbs(6.0 / std::sqrt(2.0), 1e-9));
}

TEST_CASE("wilson interval") {
  const auto all = wilson_interval(100, 100);
  CHECK_THAT(all.low, WithinAbs(0.963, 5e-4));
  CHECK(all.high == 1.0);
  const auto none = wilson_interval(0, 10);
  CHECK(none.low == 0.0);
  const double z = 1.959963984540054;
  for (int n : {1, 7, 100}) {
    for (int s = 0; s <= n; ++s) {
      const auto w = wilson_interval(s, n);
      const auto o = wilson_oracle(s, n, z);
      CHECK_THAT(w.low, WithinAbs(std::max(0.0, o.low), 1e-12));
      CHECK_THAT(w.high, WithinAbs(std::min(1.0, o.high), 1e-12));
      const double p = static_cast<double>(s) / n;
      CHECK(w.low <= p);
      CHECK(p <= w.high);
    }
  }
  CHECK_THROWS_AS(wilson_interval(0, 0), Error);
  CHECK_THROWS_AS(wilson_interval(5, 4), Error);
  CHECK_THROWS_AS(wilson_interval(-1, 4), Error);
}

TEST_CASE("newcombe difference interval") {
  const double z = 1.959963984540054;
  const int s1 = 89, s2 = 47, n = 100;
  const auto w1 = wilson_oracle(s1, n, z);
  const auto w2 = wilson_oracle(s2, n, z);
  const double p1 = 0.89, p2 = 0.47;
  auto sq = [](double a) { return a * a; };
  const double lo = p1 - p2 - std::sqrt(sq(p1 - w1.low) + sq(w2.high - p2));
  const double hi = p1 - p2 + std::sqrt(sq(w1.high - p1) + sq(p2 - w2.low));
  const auto d = newcombe_difference(s1, n, s2, n);
  CHECK_THAT(d.low, WithinAbs(lo, 1e-12));
  CHECK_THAT(d.high, WithinAbs(hi, 1e-12));
  CHECK(d.low > 0.0);

  const auto same = newcombe_difference(50, 100, 50, 100);
  CHECK(same.low < 0.0);
  CHECK(same.high > 0.0);
  CHECK_THAT(same.low, WithinAbs(-same.high, 1e-12));
}

TEST_CASE("monte carlo bookkeeping") {
  ScenarioConfig cfg;
  CHECK_THROWS_AS(monte_carlo(cfg, {{0, 1, PlannerMode::Mpp}}, 0, 1), Error);

  CHECK(trial_seed(5, 20, 0) == trial_seed(5, 20, 0));
  CHECK(trial_seed(5, 20, 0) != trial_seed(5, 20, 1));
  CHECK(trial_seed(5, 20, 0) != trial_seed(5, 10, 0));
  CHECK(trial_seed(5, 20, 0) != trial_seed(6, 20, 0));

  cfg.sim.sensor_noise = false;
  const auto sweep = monte_carlo(cfg, {{0, 1, PlannerMode::Mpp}}, 4, 9);
  REQUIRE(sweep.rows.size() == 1);
  const auto& row = sweep.rows[0];
  CHECK(row.trials == 4);
  CHECK(row.successes == 4);
  CHECK(row.rate == 1.0);
  CHECK(row.ci_low <= row.rate);
  CHECK(row.rate <= row.ci_high);
  CHECK(row.outcomes.size() == 4);
}

TEST_CASE("monte carlo does not depend on the worker count") {
  ScenarioConfig cfg;
  const std::vector<SweepCell> cells{{20, 5, PlannerMode::Mpp}, {20, 1, PlannerMode::RrtOnly}};
  const auto one = monte_carlo(cfg, cells, 3, 21, 1);
  const auto three = monte_carlo(cfg, cells, 3, 21, 3);
  REQUIRE(one.rows.size() == three.rows.size());
  for (std::size_t i = 0; i < one.rows.size(); ++i) {
    CHECK(one.rows[i].outcomes == three.rows[i].outcomes);
    CHECK(one.rows[i].successes == three.rows[i].successes);
  }
  std::ostringstream a, b;
  write_sweep_csv(a, one);
  write_sweep_csv(b, three);
  CHECK(a.str() == b.str());
}

TEST_CASE("output formats") {
  auto cfg = quiet_empty_field();
  cfg.sim.success_x = 20.0;
  const auto r = run_closed_loop(cfg);
  const auto text = state_log_text(r);
  CHECK(text.substr(0, text.find('\n')) ==
        "t,x,z,v,theta,theta_dot,gamma,est_x,est_z,est_v,est_theta,est_theta_dot,est_gamma,"
        "ref_x,ref_z,ref_v,ref_theta,ref_theta_dot,ref_gamma,T_cmd,de_cmd");
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  CHECK(lines == r.log.size() + 1);

  std::ostringstream cyc;
  write_cycle_log(cyc, r);
  CHECK(cyc.str().substr(0, cyc.str().find('\n')) == "t,paths,feasible,candidate,planner_ms");

  SweepResult s;
  s.rows.push_back({{20, 25, PlannerMode::RrtOnly}, 10, 7, 0.7, 0.4, 0.9, {}});
  std::ostringstream sw;
  write_sweep_csv(sw, s);
  CHECK(sw.str() ==
        "n_obstacles,n_paths,trials,successes,rate,ci_low,ci_high,mode\n"
        "20,25,10,7,0.7,0.4,0.9,rrt_only\n");
}

TEST_CASE("scenario validation") {
  ScenarioConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.horizon_steps() == 18);
  cfg.sim.dt_plan = 0.013;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.sim.horizon = 4.6;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.n_paths = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigInvalid");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigInvalid);
  }
}

TEST_CASE("config json round trip") {
  ScenarioConfig cfg;
  cfg.seed = 1234567890123ULL;
  cfg.n_paths = 7;
  cfg.mode = PlannerMode::RrtOnly;
  cfg.sim.sensor_noise = false;
  cfg.lqr.Q(3, 3) = 250.0;
  cfg.weights.thrust_heavier = false;
  cfg.corridor.max_ray = 6.5;
  const std::string text = config_to_json(cfg);
  const auto back = config_from_json(text);
  CHECK(config_to_json(back) == text);
  CHECK(back.seed == cfg.seed);
  CHECK(back.mode == PlannerMode::RrtOnly);
  CHECK(back.lqr.Q(3, 3) == 250.0);
  CHECK(back.corridor.max_ray == 6.5);

  // A partial document overrides only what it names.
  const auto partial = config_from_json(R"({"scenario": {"n_obstacles": 5}})");
  CHECK(partial.n_obstacles == 5);
  CHECK(config_to_json(partial) ==
        config_to_json([] {
          ScenarioConfig c;
          c.n_obstacles = 5;
          return c;
        }()));
}

TEST_CASE("config rejects unknown keys, wrong types and bad values") {
  auto code_of = [](const std::string& text) {
    try {
      config_from_json(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  CHECK(code_of(R"({"scenario": {"n_obstacle": 5}})") == ErrorCode::ConfigInvalid);
  CHECK(code_of(R"({"scenaro": {}})") == ErrorCode::ConfigInvalid);
  CHECK(code_of(R"({"scenario": {"n_obstacles": "five"}})") == ErrorCode::ConfigInvalid);
  CHECK(code_of(R"({"scenario": {"mode": "fast"}})") == ErrorCode::ConfigInvalid);
  CHECK(code_of(R"({"lqr": {"Q_diag": [1, 2]}})") == ErrorCode::ConfigInvalid);
  CHECK(code_of(R"({"sim": {"dt_plan": 0.013}})") == ErrorCode::ConfigInvalid);
  CHECK(code_of("{ not json") == ErrorCode::ConfigInvalid);
}

TEST_CASE("config field file resolves relative to the config") {
  const auto dir = std::filesystem::temp_directory_path() / "mpp_config_field_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "wall.txt");
    f << "# x z radius\n60 0 1\n60 2 1\n";
  }
  {
    std::ofstream f(dir / "scenario.json");
    f << R"({"scenario": {"field_file": "wall.txt"}})";
  }
  const auto cfg = load_config(dir / "scenario.json");
  REQUIRE(cfg.field_override.has_value());
  CHECK(cfg.field_override->obstacles.size() == 2);
  CHECK(cfg.field_override->obstacles[1].center == Vec2(60.0, 2.0));

  {
    std::ofstream f(dir / "missing.json");
    f << R"({"scenario": {"field_file": "nope.txt"}})";
  }
  CHECK_THROWS_AS(load_config(dir / "missing.json"), Error);
  std::filesystem::remove_all(dir);
}
