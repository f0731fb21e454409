#include "mpp/world_perception.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "mpp/error.hpp"

namespace mpp {

ObstacleField generate_field(int n_obstacles, std::uint64_t seed,
                             const FieldConfig& cfg) {
  if (n_obstacles < 0) {
    throw Error(ErrorCode::InvalidArgument, "obstacle count must be >= 0");
  }
  if (!(cfg.obstacle_radius > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "obstacle radius must be positive");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(cfg.spawn.x_min, cfg.spawn.x_max);
  std::uniform_real_distribution<double> uz(cfg.spawn.z_min, cfg.spawn.z_max);
  const double keep_out = cfg.clearance + cfg.obstacle_radius;

  ObstacleField field;
  field.bounds = cfg.bounds;
  field.obstacles.reserve(static_cast<std::size_t>(n_obstacles));
  for (int i = 0; i < n_obstacles; ++i) {
    bool placed = false;
    for (int round = 0; round < 1000 && !placed; ++round) {
      // Draw x before z so the stream layout is fixed.
      const double x = ux(rng);
      const double z = uz(rng);
      const Vec2 c(x, z);
      if ((c - cfg.start).norm() < keep_out || (c - cfg.goal).norm() < keep_out) {
        continue;
      }
      field.obstacles.push_back({c, cfg.obstacle_radius});
      placed = true;
    }
    if (!placed) {
      throw Error(ErrorCode::Unplaceable,
                  "could not place obstacle " + std::to_string(i));
    }
  }
  return field;
}

bool collision_check(double x, double z, const ObstacleField& field) {
  for (const auto& o : field.obstacles) {
    const double dx = x - o.center.x();
    const double dz = z - o.center.y();
    if (dx * dx + dz * dz < o.radius * o.radius) return true;
  }
  return false;
}

void write_field(std::ostream& out, const ObstacleField& field) {
  out << "# x z radius\n";
  out.precision(17);
  for (const auto& o : field.obstacles) {
    out << o.center.x() << ' ' << o.center.y() << ' ' << o.radius << '\n';
  }
}

ObstacleField read_field(std::istream& in, const Rect& bounds) {
  ObstacleField field;
  field.bounds = bounds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double x, z, r;
    if (!(ss >> x)) continue;  // blank or comment-only
    if (!(ss >> z >> r) || !(r > 0.0)) {
      throw Error(ErrorCode::Io, "bad obstacle on line " + std::to_string(line_no));
    }
    std::string rest;
    if (ss >> rest) {
      throw Error(ErrorCode::Io, "trailing text on line " + std::to_string(line_no));
    }
    field.obstacles.push_back({Vec2(x, z), r});
  }
  return field;
}

std::optional<double> ray_circle_distance(const Vec2& origin, const Vec2& dir,
                                          const Obstacle& obstacle) {
  // |origin + t dir - c|^2 = r^2 with |dir| = 1.
  const Vec2 oc = origin - obstacle.center;
  const double b = oc.dot(dir);
  const double c = oc.squaredNorm() - obstacle.radius * obstacle.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = -b - sq;
  if (t0 >= 0.0) return t0;
  const double t1 = -b + sq;
  if (t1 >= 0.0) return 0.0;  // origin inside the circle
  return std::nullopt;
}

std::vector<LidarReturn> lidar_scan(const AircraftState& state,
                                    const ObstacleField& field,
                                    const LidarConfig& cfg, Rng& rng) {
  if (cfg.num_rays < 1 || !(cfg.max_range > 0.0) || cfg.range_error_coeff < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "invalid lidar configuration");
  }
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  std::vector<LidarReturn> out;
  out.reserve(static_cast<std::size_t>(cfg.num_rays));
  const Vec2 origin = state.position();
  for (int k = 0; k < cfg.num_rays; ++k) {
    const double rel =
        cfg.num_rays == 1
            ? 0.0
            : -0.5 * cfg.fov + cfg.fov * static_cast<double>(k) / (cfg.num_rays - 1);
    const double a = state.theta + rel;
    const Vec2 dir(std::cos(a), std::sin(a));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : field.obstacles) {
      if (auto t = ray_circle_distance(origin, dir, o); t && *t < best) best = *t;
    }
    if (best <= cfg.max_range) {
      const double sigma = cfg.range_error_coeff * best;
      double measured = best;
      if (sigma > 0.0) measured += sigma * unit_normal(rng);
      out.push_back({rel, std::max(0.0, measured), true});
    } else {
      out.push_back({rel, cfg.max_range, false});
    }
  }
  return out;
}

GridSpec grid_spec_for(const Rect& bounds, double resolution, double x_margin,
                       int inflation) {
  if (!(resolution > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "grid resolution must be positive");
  }
  GridSpec spec;
  spec.origin = Vec2(bounds.x_min - x_margin, bounds.z_min);
  spec.resolution = resolution;
  spec.nx = static_cast<int>(std::ceil((bounds.x_max - bounds.x_min + 2 * x_margin) / resolution));
  spec.nz = static_cast<int>(std::ceil((bounds.z_max - bounds.z_min) / resolution));
  spec.inflation = inflation;
  return spec;
}

OccupancyGrid::OccupancyGrid(const Vec2& origin, double resolution, int nx, int nz)
    : origin_(origin), resolution_(resolution), nx_(nx), nz_(nz) {
  if (!(resolution > 0.0) || nx <= 0 || nz <= 0) {
    throw Error(ErrorCode::InvalidArgument, "grid needs positive resolution and size");
  }
  cells_.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(nz), 0);
}

Rect OccupancyGrid::extent() const {
  return {origin_.x(), origin_.x() + nx_ * resolution_, origin_.y(),
          origin_.y() + nz_ * resolution_};
}

Eigen::Vector2i OccupancyGrid::cell_of(const Vec2& p) const {
  return {static_cast<int>(std::floor((p.x() - origin_.x()) / resolution_)),
          static_cast<int>(std::floor((p.y() - origin_.y()) / resolution_))};
}

Vec2 OccupancyGrid::cell_center(int ix, int iz) const {
  return origin_ + resolution_ * Vec2(ix + 0.5, iz + 0.5);
}

bool OccupancyGrid::occupied_at(const Vec2& p) const {
  const auto c = cell_of(p);
  return occupied(c.x(), c.y());
}

void OccupancyGrid::set(int ix, int iz, bool value) {
  if (in_bounds(ix, iz)) cells_[index(ix, iz)] = value ? 1 : 0;
}

std::size_t OccupancyGrid::occupied_count() const {
  std::size_t n = 0;
  for (auto c : cells_) n += c != 0;
  return n;
}

OccupancyGrid build_occupancy_grid(const std::vector<LidarReturn>& scans,
                                   const Pose2& pose, const GridSpec& spec) {
  OccupancyGrid grid(spec.origin, spec.resolution, spec.nx, spec.nz);
  const Vec2 p0(pose.x, pose.z);
  for (const auto& r : scans) {
    if (!r.hit) continue;
    const double a = pose.heading + r.angle;
    const Vec2 dir(std::cos(a), std::sin(a));
    const double step = 0.5 * spec.resolution;
    for (double s = 0.0; s <= spec.hit_depth + 1e-12; s += step) {
      const auto c = grid.cell_of(p0 + (r.range + s) * dir);
      for (int dx = -spec.inflation; dx <= spec.inflation; ++dx) {
        for (int dz = -spec.inflation; dz <= spec.inflation; ++dz) {
          grid.set(c.x() + dx, c.y() + dz);
        }
      }
    }
  }
  return grid;
}

OccupancyGrid dilate(const OccupancyGrid& grid, int radius_cells) {
  if (radius_cells < 0) throw Error(ErrorCode::InvalidArgument, "dilation radius must be >= 0");
  OccupancyGrid out = grid;
  if (radius_cells == 0) return out;
  const int r2 = radius_cells * radius_cells;
  for (int iz = 0; iz < grid.nz(); ++iz) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      if (!grid.occupied(ix, iz)) continue;
      for (int dz = -radius_cells; dz <= radius_cells; ++dz) {
        for (int dx = -radius_cells; dx <= radius_cells; ++dx) {
          if (dx * dx + dz * dz <= r2) out.set(ix + dx, iz + dz);
        }
      }
    }
  }
  return out;
}

}  // namespace mpp
