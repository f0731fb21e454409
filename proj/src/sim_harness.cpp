#include "mpp/sim_harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include "mpp/error.hpp"
#include "mpp/random.hpp"

namespace mpp {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

enum StreamTag : std::uint64_t {
  kFieldStream = 1,
  kLidarStream = 2,
  kSensorStream = 3,
  kPlannerStream = 4,
};

// Ratio a / b when it is a positive integer up to rounding, else -1.
long integer_ratio(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) return -1;
  const double r = a / b;
  const double k = std::round(r);
  if (k < 1.0 || std::abs(r - k) > 1e-9 * std::max(1.0, r)) return -1;
  return static_cast<long>(k);
}

// Nearest free point to `target` on the vertical line through it, searched
// outward one cell at a time.
Vec2 free_goal(const OccupancyGrid& grid, Vec2 target) {
  const double res = grid.resolution();
  if (!grid.occupied_at(target)) return target;
  for (int k = 1; k < 4 * grid.nz(); ++k) {
    for (int sign : {1, -1}) {
      const Vec2 cand = target + Vec2(0.0, sign * k * res);
      if (!grid.occupied_at(cand)) return cand;
    }
  }
  return target;
}

}  // namespace

std::string_view to_string(PlannerMode mode) {
  switch (mode) {
    case PlannerMode::Mpp: return "mpp";
    case PlannerMode::RrtOnly: return "rrt_only";
  }
  return "unknown";
}

std::string_view to_string(BaselineTracker tracker) {
  switch (tracker) {
    case BaselineTracker::Direct: return "direct";
    case BaselineTracker::Pursuit: return "pursuit";
  }
  return "unknown";
}

std::string_view to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Success: return "Success";
    case Outcome::CollisionFailure: return "CollisionFailure";
    case Outcome::ExtremeStateFailure: return "ExtremeStateFailure";
    case Outcome::PlanningStarvation: return "PlanningStarvation";
    case Outcome::Timeout: return "Timeout";
  }
  return "Unknown";
}

void ScenarioConfig::validate() const {
  auto fail = [](const char* what) { throw Error(ErrorCode::ConfigInvalid, what); };
  if (n_obstacles < 0) fail("n_obstacles must be non-negative");
  if (n_paths < 1) fail("n_paths must be at least 1");
  if (!(sim.dt_sim > 0.0)) fail("dt_sim must be positive");
  if (integer_ratio(sim.dt_plan, sim.dt_sim) < 1) {
    fail("dt_plan must be an integer multiple of dt_sim");
  }
  if (integer_ratio(sim.horizon, sim.dt_plan) < 1) {
    fail("horizon must be an integer multiple of dt_plan");
  }
  if (integer_ratio(sim.replan_period, sim.dt_sim) < 1) {
    fail("replan_period must be an integer multiple of dt_sim");
  }
  if (!(sim.cruise_speed > 0.0)) fail("cruise_speed must be positive");
  if (!(sim.max_time > 0.0)) fail("max_time must be positive");
  if (!(sim.goal_distance > 0.0)) fail("goal_distance must be positive");
  if (!(sim.pursuit_lookahead > 0.0)) fail("pursuit_lookahead must be positive");
  if (!(grid.resolution > 0.0) || grid.inflation < 0 || grid.planner_clearance < 0 ||
      grid.hit_depth < 0.0 || grid.x_margin < 0.0) {
    fail("invalid grid configuration");
  }
  if (lidar.num_rays < 1 || !(lidar.max_range > 0.0)) fail("invalid lidar configuration");
  if (corridor.num_directions < 3 || !(corridor.max_ray > 0.0) || corridor.padding < 0.0) {
    fail("invalid corridor configuration");
  }
  if (!(sensors.sigma_v >= 0.0) || !(sensors.sigma_theta >= 0.0)) fail("invalid sensor noise");
  if ((process_noise_diag.array() < 0.0).any()) fail("process noise must be non-negative");
  try {
    aircraft.validate();
    PlannerConfig p = planner;
    p.num_runs = n_paths;
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
}

int ScenarioConfig::horizon_steps() const {
  return static_cast<int>(integer_ratio(sim.horizon, sim.dt_plan));
}

RefineConfig ScenarioConfig::refine_config() const {
  RefineConfig r;
  r.horizon_steps = horizon_steps();
  r.corridor = corridor;
  r.weights = weights;
  r.assembly = assembly;
  r.solver = solver;
  return r;
}

AircraftState interpolate_reference(const Trajectory& traj, double t) {
  if (traj.knots.empty() || !(traj.dt > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "empty reference trajectory");
  }
  const int n = static_cast<int>(traj.knots.size()) - 1;
  const double tau = std::max(0.0, t / traj.dt);
  if (tau >= n) {
    AircraftState s = traj.knots.back();
    const double extra = (tau - n) * traj.dt;
    s.x += s.v * std::cos(s.gamma) * extra;
    s.z += s.v * std::sin(s.gamma) * extra;
    return s;
  }
  const int i = static_cast<int>(std::floor(tau));
  const double w = tau - i;
  const Vec6 a = traj.knots[static_cast<std::size_t>(i)].to_vector();
  const Vec6 b = traj.knots[static_cast<std::size_t>(i + 1)].to_vector();
  return AircraftState::from_vector((1.0 - w) * a + w * b);
}

ControlInput reference_input(const Trajectory& traj, double t) {
  if (traj.controls.empty() || !(traj.dt > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "empty reference controls");
  }
  const int last = static_cast<int>(traj.controls.size()) - 1;
  const int i = std::clamp(static_cast<int>(std::floor(std::max(0.0, t / traj.dt))), 0, last);
  return traj.controls[static_cast<std::size_t>(i)];
}

Trajectory straight_trajectory(const LinearModel& model, const Vec2& start, int n) {
  Trajectory traj;
  traj.dt = model.dt;
  traj.cost = 0.0;
  for (const Vec2& p : straight_reference(start, model.trim_state.v, model.dt, n)) {
    traj.knots.push_back(trim_at(model, p));
  }
  traj.controls.assign(static_cast<std::size_t>(n), model.trim_input);
  return traj;
}

AircraftState direct_path_reference(const Path& path, const LinearModel& model, double t) {
  const auto& w = path.waypoints;
  if (w.size() < 2) throw Error(ErrorCode::InvalidArgument, "path needs two waypoints");
  double remaining = model.trim_state.v * std::max(0.0, t);
  std::size_t seg = 0;
  for (; seg + 2 < w.size(); ++seg) {
    const double len = (w[seg + 1] - w[seg]).norm();
    if (remaining <= len) break;
    remaining -= len;
  }
  // Beyond the last vertex the final segment is extended.
  const Vec2 d = w[seg + 1] - w[seg];
  const double len = d.norm();
  const Vec2 dir = len > 0.0 ? Vec2(d / len) : Vec2(1.0, 0.0);
  const Vec2 pos = w[seg] + remaining * dir;
  AircraftState ref = trim_at(model, pos);
  ref.gamma = std::atan2(dir.y(), dir.x());
  ref.theta = model.trim_state.theta + ref.gamma;
  ref.theta_dot = 0.0;
  return ref;
}

AircraftState pursuit_reference(const Path& path, const AircraftState& estimate,
                                const LinearModel& model, double lookahead,
                                double max_gamma) {
  const auto& w = path.waypoints;
  if (w.size() < 2) throw Error(ErrorCode::InvalidArgument, "path needs two waypoints");
  const Vec2 pos = estimate.position();

  // Closest point on the polyline, as (segment, fraction).
  std::size_t best_seg = 0;
  double best_frac = 0.0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const Vec2 d = w[i + 1] - w[i];
    const double len2 = d.squaredNorm();
    const double f = len2 > 0.0 ? std::clamp((pos - w[i]).dot(d) / len2, 0.0, 1.0) : 0.0;
    const double d2 = (w[i] + f * d - pos).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best_seg = i;
      best_frac = f;
    }
  }

  // Walk `lookahead` metres forward along the path.
  double remaining = lookahead;
  Vec2 target = w.back();
  Vec2 from = w[best_seg] + best_frac * (w[best_seg + 1] - w[best_seg]);
  for (std::size_t i = best_seg; i + 1 < w.size(); ++i) {
    const double seg = (w[i + 1] - from).norm();
    if (seg >= remaining) {
      target = from + remaining / seg * (w[i + 1] - from);
      break;
    }
    remaining -= seg;
    from = w[i + 1];
  }

  const Vec2 d = target - pos;
  double gamma = d.norm() > 1e-9 ? std::atan2(d.y(), d.x()) : 0.0;
  gamma = std::clamp(gamma, -max_gamma, max_gamma);
  AircraftState ref = trim_at(model, pos);
  ref.gamma = gamma;
  ref.theta = model.trim_state.theta + gamma;
  ref.theta_dot = 0.0;
  return ref;
}

namespace {

// Quantities fixed for a whole run.
struct RunSetup {
  LinearModel model;
  RowVec4 K;
  Mat6 W;
  RefineConfig refine;
  PlannerConfig planner;
  LidarConfig lidar;
  ObstacleField field;
  GridSpec spec;
  Rect extent;
};

RunSetup make_setup(const ScenarioConfig& cfg) {
  cfg.validate();
  RunSetup su;
  su.model = make_linear_model(cfg.sim.cruise_speed, cfg.sim.dt_plan, cfg.aircraft);
  su.K = lqr_gain(su.model, cfg.lqr);
  su.W = cfg.process_noise_diag.asDiagonal();
  su.refine = cfg.refine_config();
  su.planner = cfg.planner;
  su.planner.num_runs = cfg.n_paths;
  su.lidar = cfg.lidar;
  if (!cfg.sim.sensor_noise) su.lidar.range_error_coeff = 0.0;
  su.field = cfg.field_override
                 ? *cfg.field_override
                 : generate_field(cfg.n_obstacles, derive_seed(cfg.seed, {kFieldStream}),
                                  cfg.field);
  su.spec = grid_spec_for(su.field.bounds, cfg.grid.resolution, cfg.grid.x_margin,
                          cfg.grid.inflation);
  su.spec.hit_depth = cfg.grid.hit_depth;
  su.extent = OccupancyGrid(su.spec.origin, su.spec.resolution, su.spec.nx, su.spec.nz).extent();
  return su;
}

struct Perception {
  std::vector<LidarReturn> scan;
  OccupancyGrid grid;
  OccupancyGrid planning_grid;
  Vec2 goal;
};

// Scan from the true state, map in the estimated frame, pick the local goal.
Perception perceive(const ScenarioConfig& cfg, const RunSetup& su, const AircraftState& truth,
                    const AircraftState& est, Rng& lidar_rng) {
  Perception p;
  p.scan = lidar_scan(truth, su.field, su.lidar, lidar_rng);
  p.grid = build_occupancy_grid(p.scan, Pose2{est.x, est.z, est.theta}, su.spec);
  p.planning_grid = dilate(p.grid, cfg.grid.planner_clearance);
  const double margin = 2.0 * su.spec.resolution;
  Vec2 goal(std::min(est.x + cfg.sim.goal_distance, su.extent.x_max - margin),
            std::clamp(cfg.field.goal.y(), su.extent.z_min + margin, su.extent.z_max - margin));
  p.goal = free_goal(p.planning_grid, goal);
  return p;
}

EKFState initial_filter(const ScenarioConfig& cfg, const AircraftState& truth) {
  Vec6 sd;
  sd << 0.0, 0.0, cfg.sim.initial_sigma_v, cfg.sim.initial_sigma_angle,
      cfg.sim.initial_sigma_angle, cfg.sim.initial_sigma_angle;
  return {truth, sd.cwiseProduct(sd).asDiagonal()};
}

}  // namespace

CycleDump first_planning_cycle(const ScenarioConfig& cfg) {
  const RunSetup su = make_setup(cfg);
  Rng lidar_rng(derive_seed(cfg.seed, {kLidarStream}));
  Rng planner_rng(derive_seed(cfg.seed, {kPlannerStream}));
  CycleDump d;
  d.field = su.field;
  d.state = trim_at(su.model, cfg.field.start);
  auto p = perceive(cfg, su, d.state, d.state, lidar_rng);
  d.scan = std::move(p.scan);
  d.grid = std::move(p.grid);
  d.planning_grid = std::move(p.planning_grid);
  d.goal = p.goal;
  d.paths = plan_paths(d.planning_grid, d.state.position(), d.goal, su.planner, planner_rng);
  d.refine = evaluate_candidates(d.paths, su.model, d.grid, d.state, su.refine, true);
  const Vec6 x0_dev = Vec6::Zero();
  for (const auto& c : d.refine.constraints) {
    if (c.G_rows.empty()) {
      d.qps.emplace_back();
    } else {
      d.qps.push_back(assemble_qp(su.model, x0_dev, c, su.refine.weights,
                                  su.refine.horizon_steps, su.refine.assembly));
    }
  }
  return d;
}

RunResult run_closed_loop(const ScenarioConfig& cfg, bool keep_log) {
  const RunSetup su = make_setup(cfg);
  const SimConfig& sim = cfg.sim;
  const LinearModel& model = su.model;
  const int n = cfg.horizon_steps();
  const long steps_per_replan = integer_ratio(sim.replan_period, sim.dt_sim);
  const long max_steps = static_cast<long>(std::ceil(sim.max_time / sim.dt_sim - 1e-9));

  RunResult result;
  result.field = su.field;
  const ObstacleField& field = result.field;

  Rng lidar_rng(derive_seed(cfg.seed, {kLidarStream}));
  Rng sensor_rng(derive_seed(cfg.seed, {kSensorStream}));
  Rng planner_rng(derive_seed(cfg.seed, {kPlannerStream}));
  std::normal_distribution<double> normal(0.0, 1.0);

  AircraftState truth = trim_at(model, cfg.field.start);
  EKFState ekf = initial_filter(cfg, truth);

  // Current MPP reference, its start time and the raw path used by the
  // baseline tracker.
  Trajectory reference = straight_trajectory(model, truth.position(), n);
  double reference_t0 = 0.0;
  Path pursuit_path = Path::from_waypoints(
      {truth.position(), truth.position() + Vec2(sim.goal_distance, 0.0)});
  int failed_cycles = 0;

  const double theta_limit = sim.theta_limit_deg * kDeg;
  const double gamma_limit = sim.gamma_limit_deg * kDeg;
  const double max_pursuit_gamma = sim.pursuit_max_gamma_deg * kDeg;

  result.outcome = Outcome::Timeout;
  long step = 0;
  for (; step <= max_steps; ++step) {
    const double t = static_cast<double>(step) * sim.dt_sim;

    if (step % steps_per_replan == 0) {
      const auto t_start = std::chrono::steady_clock::now();
      CycleRecord cycle;
      cycle.t = t;
      const AircraftState est = ekf.estimate;
      const Perception per = perceive(cfg, su, truth, est, lidar_rng);
      try {
        const auto paths =
            plan_paths(per.planning_grid, est.position(), per.goal, su.planner, planner_rng);
        cycle.paths = static_cast<int>(paths.size());
        if (cfg.mode == PlannerMode::Mpp) {
          auto refined = evaluate_candidates(paths, model, per.grid, est, su.refine);
          for (const auto& rep : refined.reports) cycle.statuses.push_back(rep.status);
          if (!refined.best) {
            throw Error(ErrorCode::AllInfeasible, "no candidate produced a trajectory");
          }
          reference = std::move(*refined.best);
          cycle.candidate = reference.candidate;
          cycle.reference_knots = reference.knots;
        } else {
          pursuit_path = paths.front();
          cycle.candidate = 0;
        }
        reference_t0 = t;
        failed_cycles = 0;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoPathFound && e.code() != ErrorCode::AllInfeasible) throw;
        ++failed_cycles;
      }
      cycle.planner_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t_start)
                             .count();
      result.cycles.push_back(std::move(cycle));
      if (failed_cycles >= 2) {
        result.outcome = Outcome::PlanningStarvation;
        break;
      }
    }

    AircraftState ref_state;
    ControlInput ref_input;
    if (cfg.mode == PlannerMode::Mpp) {
      ref_state = interpolate_reference(reference, t - reference_t0);
      ref_input = reference_input(reference, t - reference_t0);
    } else {
      ref_state = sim.baseline_tracker == BaselineTracker::Direct
                      ? direct_path_reference(pursuit_path, model, t - reference_t0)
                      : pursuit_reference(pursuit_path, ekf.estimate, model,
                                          sim.pursuit_lookahead, max_pursuit_gamma);
      ref_input = model.trim_input;
    }
    ControlInput u = hf_control(ekf, ref_state, ref_input, su.K, cfg.lqr);
    u.thrust = std::max(0.0, u.thrust);

    if (keep_log) result.log.push_back({t, truth, ekf.estimate, ref_state, u});

    truth = step_rk4(truth, u, sim.dt_sim, cfg.aircraft);

    if (!truth.to_vector().allFinite() || std::abs(truth.theta) > theta_limit ||
        std::abs(truth.gamma) > gamma_limit || !(truth.v > sim.min_airspeed)) {
      result.outcome = Outcome::ExtremeStateFailure;
      ++step;
      break;
    }
    if (collision_check(truth.x, truth.z, field)) {
      result.outcome = Outcome::CollisionFailure;
      ++step;
      break;
    }
    if (truth.x >= sim.success_x) {
      result.outcome = Outcome::Success;
      ++step;
      break;
    }

    double meas_v = truth.v;
    double meas_theta = truth.theta;
    if (sim.sensor_noise) {
      meas_v += cfg.sensors.sigma_v * normal(sensor_rng);
      meas_theta += cfg.sensors.sigma_theta * normal(sensor_rng);
    }
    ekf = ekf_predict(ekf, u, sim.dt_sim, su.W, cfg.aircraft);
    ekf = ekf_update(ekf, meas_v, meas_theta, cfg.sensors);
  }

  result.final_x = truth.x;
  result.final_t = static_cast<double>(step) * sim.dt_sim;
  if (keep_log) {
    result.log.push_back({result.final_t, truth, ekf.estimate,
                          result.log.empty() ? truth : result.log.back().reference,
                          result.log.empty() ? ControlInput{} : result.log.back().command});
  }
  return result;
}

WilsonInterval wilson_interval(int successes, int trials, double z) {
  if (trials < 1 || successes < 0 || successes > trials) {
    throw Error(ErrorCode::InvalidArgument, "Wilson interval needs 0 <= successes <= trials >= 1");
  }
  const double nt = trials;
  const double p = successes / nt;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nt;
  const double center = (p + z2 / (2.0 * nt)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nt + z2 / (4.0 * nt * nt)) / denom;
  const double low = successes == 0 ? 0.0 : std::max(0.0, center - half);
  const double high = successes == trials ? 1.0 : std::min(1.0, center + half);
  return {low, high};
}

WilsonInterval newcombe_difference(int s1, int n1, int s2, int n2, double z) {
  const auto a = wilson_interval(s1, n1, z);
  const auto b = wilson_interval(s2, n2, z);
  const double p1 = static_cast<double>(s1) / n1;
  const double p2 = static_cast<double>(s2) / n2;
  const double d = p1 - p2;
  const double lo = d - std::sqrt((p1 - a.low) * (p1 - a.low) + (b.high - p2) * (b.high - p2));
  const double hi = d + std::sqrt((a.high - p1) * (a.high - p1) + (p2 - b.low) * (p2 - b.low));
  return {lo, hi};
}

std::uint64_t trial_seed(std::uint64_t base_seed, int n_obstacles, int trial) {
  return derive_seed(base_seed, {static_cast<std::uint64_t>(n_obstacles),
                                 static_cast<std::uint64_t>(trial)});
}

SweepResult monte_carlo(const ScenarioConfig& base, const std::vector<SweepCell>& cells,
                        int trials, std::uint64_t base_seed, int threads) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
  base.validate();
  const std::size_t jobs = cells.size() * static_cast<std::size_t>(trials);
  std::vector<Outcome> outcomes(jobs, Outcome::Timeout);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(1, threads)));

  auto worker = [&](std::size_t id) {
    try {
      for (std::size_t j = next++; j < jobs; j = next++) {
        const SweepCell& cell = cells[j / static_cast<std::size_t>(trials)];
        const int trial = static_cast<int>(j % static_cast<std::size_t>(trials));
        ScenarioConfig cfg = base;
        cfg.n_obstacles = cell.n_obstacles;
        cfg.n_paths = cell.n_paths;
        cfg.mode = cell.mode;
        cfg.seed = trial_seed(base_seed, cell.n_obstacles, trial);
        outcomes[j] = run_closed_loop(cfg, false).outcome;
      }
    } catch (...) {
      errors[id] = std::current_exception();
      next = jobs;
    }
  };

  const int workers = std::max(1, threads);
  if (workers == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker, static_cast<std::size_t>(i));
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  SweepResult sweep;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    SweepRow row;
    row.cell = cells[c];
    row.trials = trials;
    row.outcomes.assign(outcomes.begin() + static_cast<std::ptrdiff_t>(c * trials),
                        outcomes.begin() + static_cast<std::ptrdiff_t>((c + 1) * trials));
    row.successes = static_cast<int>(
        std::count(row.outcomes.begin(), row.outcomes.end(), Outcome::Success));
    row.rate = static_cast<double>(row.successes) / trials;
    const auto ci = wilson_interval(row.successes, trials);
    row.ci_low = ci.low;
    row.ci_high = ci.high;
    sweep.rows.push_back(std::move(row));
  }
  return sweep;
}

void write_state_log(std::ostream& out, const RunResult& result) {
  out << "t,x,z,v,theta,theta_dot,gamma,"
         "est_x,est_z,est_v,est_theta,est_theta_dot,est_gamma,"
         "ref_x,ref_z,ref_v,ref_theta,ref_theta_dot,ref_gamma,T_cmd,de_cmd\n";
  out.precision(17);
  auto put = [&out](const AircraftState& s) {
    out << s.x << ',' << s.z << ',' << s.v << ',' << s.theta << ',' << s.theta_dot << ','
        << s.gamma;
  };
  for (const auto& r : result.log) {
    out << r.t << ',';
    put(r.truth);
    out << ',';
    put(r.estimate);
    out << ',';
    put(r.reference);
    out << ',' << r.command.thrust << ',' << r.command.elevator << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep) {
  out << "n_obstacles,n_paths,trials,successes,rate,ci_low,ci_high,mode\n";
  out.precision(6);
  for (const auto& r : sweep.rows) {
    out << r.cell.n_obstacles << ',' << r.cell.n_paths << ',' << r.trials << ','
        << r.successes << ',' << r.rate << ',' << r.ci_low << ',' << r.ci_high << ','
        << to_string(r.cell.mode) << '\n';
  }
}

void write_cycle_log(std::ostream& out, const RunResult& result) {
  out << "t,paths,feasible,candidate,planner_ms\n";
  out.precision(10);
  for (const auto& c : result.cycles) {
    const auto feasible =
        std::count(c.statuses.begin(), c.statuses.end(), CandidateStatus::Optimal);
    out << c.t << ',' << c.paths << ',' << feasible << ',' << c.candidate << ',' << c.planner_ms
        << '\n';
  }
}

}  // namespace mpp
