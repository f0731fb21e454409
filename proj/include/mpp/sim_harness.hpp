#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "mpp/estimation_control.hpp"
#include "mpp/multipath_planner.hpp"
#include "mpp/qp_trajectory.hpp"
#include "mpp/world_perception.hpp"

namespace mpp {

enum class PlannerMode {
  Mpp,      // multi-path planning refined by the QP
  RrtOnly,  // the raw planner path tracked directly
};
std::string_view to_string(PlannerMode mode);

enum class BaselineTracker {
  Direct,   // time-indexed walk along the path, gamma from the current segment
  Pursuit,  // pure pursuit with a lookahead point
};
std::string_view to_string(BaselineTracker tracker);

struct SimConfig {
  double replan_period = 1.0;  // s
  double horizon = 4.5;        // s
  double dt_plan = 0.25;       // s
  double dt_sim = 0.01;        // s
  double cruise_speed = 12.0;  // m/s
  double goal_distance = 54.0; // m ahead of the vehicle
  double success_x = 140.0;    // m
  double max_time = 40.0;      // s
  double theta_limit_deg = 60.0;
  double gamma_limit_deg = 45.0;
  double min_airspeed = 1.0;   // below this the run counts as an extreme state
  bool sensor_noise = true;
  double initial_sigma_v = 0.1;
  double initial_sigma_angle = 0.005;
  BaselineTracker baseline_tracker = BaselineTracker::Direct;
  double pursuit_lookahead = 6.0;  // m
  double pursuit_max_gamma_deg = 30.0;
};

struct GridConfig {
  double resolution = 0.25;
  double x_margin = 60.0;
  int inflation = 1;
  // Extra clearance, in cells, kept by the path planner beyond the grid used
  // for raytracing.
  int planner_clearance = 3;
  double hit_depth = 1.5;  // m marked behind each lidar hit
};

struct ScenarioConfig {
  int n_obstacles = 20;
  int n_paths = 25;
  std::uint64_t seed = 1;
  PlannerMode mode = PlannerMode::Mpp;

  SimConfig sim;
  AircraftParams aircraft;
  LQRConfig lqr;
  SensorNoise sensors;
  Vec6 process_noise_diag = default_process_noise().diagonal();
  FieldConfig field;
  LidarConfig lidar;
  GridConfig grid;
  PlannerConfig planner;
  // Rays shorter than the module default keep the 8-direction polygon from
  // spanning obstacles that fall between two rays.
  CorridorConfig corridor{.padding = 0.5, .max_ray = 4.0, .num_directions = 8};
  CostWeights weights;
  AssemblyOptions assembly;
  QPSolverOptions solver;

  /// Replays a fixed obstacle field instead of generating one.
  std::optional<ObstacleField> field_override;

  /// Throws ConfigInvalid on inconsistent timing or out-of-range values.
  void validate() const;
  int horizon_steps() const;
  RefineConfig refine_config() const;
};

enum class Outcome {
  Success,
  CollisionFailure,
  ExtremeStateFailure,
  PlanningStarvation,
  Timeout,
};
std::string_view to_string(Outcome outcome);

struct LogRow {
  double t;
  AircraftState truth;
  AircraftState estimate;
  AircraftState reference;
  ControlInput command;
};

struct CycleRecord {
  double t;
  int paths = 0;
  int candidate = -1;  // selected candidate, -1 when planning failed
  double planner_ms = 0.0;
  std::vector<CandidateStatus> statuses;  // one per candidate path
  std::vector<AircraftState> reference_knots;
};

struct RunResult {
  Outcome outcome = Outcome::Timeout;
  double final_x = 0.0;
  double final_t = 0.0;
  std::vector<LogRow> log;
  std::vector<CycleRecord> cycles;
  ObstacleField field;
};

/// Receding-horizon loop: replans every replan_period from the state
/// estimate and tracks the reference with the high-frequency controller at
/// dt_sim. Failure predicates are evaluated on the true state.
RunResult run_closed_loop(const ScenarioConfig& cfg, bool keep_log = true);

/// Everything computed in the first planning cycle of run_closed_loop, for
/// debug dumps. Uses the same random streams as the closed loop.
struct CycleDump {
  ObstacleField field;
  AircraftState state;
  std::vector<LidarReturn> scan;
  OccupancyGrid grid;           // perception grid, used for raytracing
  OccupancyGrid planning_grid;  // dilated grid searched by the planner
  Vec2 goal;
  std::vector<Path> paths;
  RefineResult refine;          // with per-candidate corridors and constraints
  std::vector<QPProblem> qps;   // one per candidate with a corridor, else empty
};
CycleDump first_planning_cycle(const ScenarioConfig& cfg);

/// State at time `t` seconds after the trajectory start: linear interpolation
/// between knots, constant-speed extrapolation past the last knot.
AircraftState interpolate_reference(const Trajectory& traj, double t);
ControlInput reference_input(const Trajectory& traj, double t);

/// Straight-and-level trajectory from `start`, used before the first plan.
Trajectory straight_trajectory(const LinearModel& model, const Vec2& start, int n);

/// Baseline reference that walks the path at cruise speed: position at arc
/// length v * t, flight path angle of the segment under it. No positional
/// feedback.
AircraftState direct_path_reference(const Path& path, const LinearModel& model, double t);

/// Pure-pursuit reference for the planner-only baseline.
AircraftState pursuit_reference(const Path& path, const AircraftState& estimate,
                                const LinearModel& model, double lookahead,
                                double max_gamma);

struct WilsonInterval {
  double low;
  double high;
};
WilsonInterval wilson_interval(int successes, int trials, double z = 1.959963984540054);

/// Newcombe's hybrid score interval for p1 - p2 built from the two Wilson
/// intervals.
WilsonInterval newcombe_difference(int s1, int n1, int s2, int n2,
                                   double z = 1.959963984540054);

struct SweepCell {
  int n_obstacles = 20;
  int n_paths = 1;
  PlannerMode mode = PlannerMode::Mpp;
};

struct SweepRow {
  SweepCell cell;
  int trials = 0;
  int successes = 0;
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::vector<Outcome> outcomes;
};

struct SweepResult {
  std::vector<SweepRow> rows;
};

/// Seed of trial `trial` for a given obstacle count. Cells that share an
/// obstacle count see the same fields.
std::uint64_t trial_seed(std::uint64_t base_seed, int n_obstacles, int trial);

/// Runs `trials` closed-loop scenarios per cell on `threads` workers; results
/// do not depend on the worker count.
SweepResult monte_carlo(const ScenarioConfig& base, const std::vector<SweepCell>& cells,
                        int trials, std::uint64_t base_seed, int threads = 1);

void write_state_log(std::ostream& out, const RunResult& result);
void write_sweep_csv(std::ostream& out, const SweepResult& sweep);
void write_cycle_log(std::ostream& out, const RunResult& result);

}  // namespace mpp
