#pragma once

#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "mpp/multipath_planner.hpp"
#include "mpp/world_perception.hpp"

namespace mpp {

/// Unit search directions g_1..g_p in the (x, z) plane.
class SearchDirections {
 public:
  /// p directions evenly spaced in angle, the first along +x.
  static SearchDirections evenly_spaced(int p = 8);
  explicit SearchDirections(std::vector<Vec2> directions);

  int size() const { return static_cast<int>(dirs_.size()); }
  const Vec2& operator[](int j) const { return dirs_[static_cast<std::size_t>(j)]; }
  const std::vector<Vec2>& all() const { return dirs_; }

 private:
  std::vector<Vec2> dirs_;
};

struct CorridorConfig {
  double padding = 0.5;
  double max_ray = 12.0;
  int num_directions = 8;
};

struct Corridor {
  std::vector<Vec2> collocation_points;  // n+1 points
  Eigen::MatrixXd hit_distances;         // (n+1) x p
  double max_ray = 0.0;
};

/// Halfspaces g_j' (pos_i - ref_i) <= h_ij on the position part of each knot's
/// state perturbation.
struct PositionConstraints {
  std::vector<Eigen::Matrix<double, Eigen::Dynamic, 6>> G_rows;  // per knot, p x 6
  Eigen::VectorXd h;                                             // (n+1) * p
  int p = 0;

  int knots() const { return static_cast<int>(G_rows.size()); }
};

/// Points at arc length i * v * dt for i = 0..n; beyond the path end the last
/// segment is extended.
std::vector<Vec2> collocate(const Path& path, double v_cruise, double dt, int n);

/// Marches each direction in steps of resolution/2 and returns the distance to
/// the first occupied sample, capped at max_ray. Throws SeedOccupied when the
/// point's own cell is occupied.
Eigen::VectorXd raytrace_point(const OccupancyGrid& grid, const Vec2& point,
                               const SearchDirections& dirs, double max_ray);

Corridor raytrace_corridor(const OccupancyGrid& grid, std::vector<Vec2> points,
                           const SearchDirections& dirs, double max_ray);

/// Throws CorridorDegenerate if any hit distance is <= padding.
PositionConstraints build_constraints(const Corridor& corridor,
                                      const std::vector<Vec2>& reference_positions,
                                      const SearchDirections& dirs, double padding);

/// Straight-and-level reference positions start + (i * dt * v, 0).
std::vector<Vec2> straight_reference(const Vec2& start, double v, double dt, int n);

/// Tabular dump: knot, direction, hit distance, h.
void write_corridor(std::ostream& out, const Corridor& corridor,
                    const PositionConstraints& constraints);

}  // namespace mpp
