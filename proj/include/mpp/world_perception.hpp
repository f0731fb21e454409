#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mpp/flight_dynamics.hpp"
#include "mpp/random.hpp"

namespace mpp {

struct Rect {
  double x_min = 0.0;
  double x_max = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;

  bool contains(const Vec2& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= z_min && p.y() <= z_max;
  }
};

struct Obstacle {
  Vec2 center;
  double radius = 1.0;
};

struct ObstacleField {
  std::vector<Obstacle> obstacles;
  Rect bounds;
};

struct FieldConfig {
  Rect bounds{0.0, 150.0, -20.0, 20.0};
  Rect spawn{15.0, 135.0, -15.0, 15.0};
  Vec2 start{0.0, 0.0};
  Vec2 goal{140.0, 0.0};
  double obstacle_radius = 1.0;
  double clearance = 3.0;
};

/// Uniformly scattered circular obstacles, resampled until none touches the
/// clearance discs at start and goal. Deterministic in `seed`.
ObstacleField generate_field(int n_obstacles, std::uint64_t seed,
                             const FieldConfig& cfg = {});

/// Ground-truth collision: strictly inside some obstacle.
bool collision_check(double x, double z, const ObstacleField& field);

/// Plain-text field format: one "x z radius" per line, '#' starts a comment.
void write_field(std::ostream& out, const ObstacleField& field);
ObstacleField read_field(std::istream& in, const Rect& bounds);

struct LidarConfig {
  int num_rays = 256;
  double fov = 3.14159265358979323846;  // total span, centered on the pitch axis
  double max_range = 45.0;
  double range_error_coeff = 0.01;
};

struct LidarReturn {
  double angle;  // relative to the body axis (rad)
  double range;  // m
  bool hit;
};

/// Distance along a ray to the nearest circle boundary, if any lies ahead.
std::optional<double> ray_circle_distance(const Vec2& origin, const Vec2& dir,
                                          const Obstacle& obstacle);

std::vector<LidarReturn> lidar_scan(const AircraftState& state,
                                    const ObstacleField& field,
                                    const LidarConfig& cfg, Rng& rng);

struct GridSpec {
  Vec2 origin{0.0, -20.0};
  double resolution = 0.25;
  int nx = 600;
  int nz = 160;
  int inflation = 1;  // rings of cells marked around each hit
  // Depth behind each hit, along the ray, that is also marked occupied (m).
  double hit_depth = 0.0;
};

/// Grid covering the field bounds extended along x by `x_margin` on both
/// sides.
GridSpec grid_spec_for(const Rect& bounds, double resolution, double x_margin,
                       int inflation);

/// Binary occupancy matrix. Cells outside the matrix read as occupied.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(const Vec2& origin, double resolution, int nx, int nz);

  const Vec2& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  int nx() const { return nx_; }
  int nz() const { return nz_; }
  Rect extent() const;

  bool in_bounds(int ix, int iz) const {
    return ix >= 0 && iz >= 0 && ix < nx_ && iz < nz_;
  }
  bool occupied(int ix, int iz) const {
    return !in_bounds(ix, iz) || cells_[index(ix, iz)] != 0;
  }
  bool occupied_at(const Vec2& p) const;
  void set(int ix, int iz, bool value = true);

  /// Integer cell containing p (floor of the offset from the origin).
  Eigen::Vector2i cell_of(const Vec2& p) const;
  Vec2 cell_center(int ix, int iz) const;
  std::size_t occupied_count() const;

  bool operator==(const OccupancyGrid&) const = default;

 private:
  std::size_t index(int ix, int iz) const {
    return static_cast<std::size_t>(iz) * static_cast<std::size_t>(nx_) +
           static_cast<std::size_t>(ix);
  }

  Vec2 origin_{0.0, 0.0};
  double resolution_ = 1.0;
  int nx_ = 0;
  int nz_ = 0;
  std::vector<std::uint8_t> cells_;
};

struct Pose2 {
  double x = 0.0;
  double z = 0.0;
  double heading = 0.0;
};

OccupancyGrid build_occupancy_grid(const std::vector<LidarReturn>& scans,
                                   const Pose2& vehicle_pose,
                                   const GridSpec& spec);

/// Marks every cell within `radius_cells` (Euclidean, in cells) of an
/// occupied cell. Cells outside the matrix are not spread inward.
OccupancyGrid dilate(const OccupancyGrid& grid, int radius_cells);

}  // namespace mpp
