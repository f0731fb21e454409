#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "mpp/random.hpp"
#include "mpp/world_perception.hpp"

namespace mpp {

/// Geometric polyline; no timing or dynamics attached.
struct Path {
  std::vector<Vec2> waypoints;
  double length = 0.0;

  static Path from_waypoints(std::vector<Vec2> waypoints);
};

struct PlannerConfig {
  int samples_per_run = 300;
  int num_runs = 25;
  double step_size = 3.0;
  double neighbor_radius = 8.0;
  double goal_tolerance = 3.0;
  double ar_penalty_radius = 4.0;
  double ar_penalty_cost = 10.0;
  double goal_bias = 0.1;
  // Sampling window beyond the start/goal bounding box (m), clipped to the
  // grid.
  double sample_margin_x = 6.0;

  void validate() const;
};

/// False iff some sample of the segment, taken every resolution/2, lies in an
/// occupied cell.
bool segment_collision_free(const OccupancyGrid& grid, const Vec2& p1, const Vec2& p2);

/// One run of RRT* with the alternate-route penalty: a candidate parent pays
/// ar_penalty_cost for each of its existing children within
/// ar_penalty_radius of the new node.
std::optional<Path> rrt_star_ar(const OccupancyGrid& grid, const Vec2& start,
                                const Vec2& goal, const PlannerConfig& cfg, Rng& rng);

/// Repeated independent short runs; paths sorted by length (stable in run
/// order). Throws NoPathFound when every run fails.
std::vector<Path> plan_paths(const OccupancyGrid& grid, const Vec2& start,
                             const Vec2& goal, const PlannerConfig& cfg, Rng& rng);

/// Writes each path as "x z" lines, paths separated by a blank line.
void write_paths(std::ostream& out, const std::vector<Path>& paths);

}  // namespace mpp
