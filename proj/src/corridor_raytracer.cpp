#include "mpp/corridor_raytracer.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

#include "mpp/error.hpp"

namespace mpp {

SearchDirections SearchDirections::evenly_spaced(int p) {
  if (p < 3) throw Error(ErrorCode::InvalidArgument, "need at least 3 search directions");
  std::vector<Vec2> dirs;
  dirs.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    const double a = 2.0 * std::numbers::pi * j / p;
    dirs.emplace_back(std::cos(a), std::sin(a));
  }
  return SearchDirections(std::move(dirs));
}

SearchDirections::SearchDirections(std::vector<Vec2> directions)
    : dirs_(std::move(directions)) {
  for (auto& d : dirs_) {
    if (std::abs(d.norm() - 1.0) > 1e-12) {
      throw Error(ErrorCode::InvalidArgument, "search directions must be unit length");
    }
  }
}

std::vector<Vec2> collocate(const Path& path, double v_cruise, double dt, int n) {
  if (path.waypoints.size() < 2 || !(path.length > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "collocation needs a path of positive length");
  }
  if (!(v_cruise > 0.0) || !(dt > 0.0) || n < 0) {
    throw Error(ErrorCode::InvalidArgument, "collocation needs v > 0, dt > 0, n >= 0");
  }
  const auto& w = path.waypoints;
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(n) + 1);

  std::size_t seg = 0;
  double seg_start = 0.0;  // arc length at w[seg]
  for (int i = 0; i <= n; ++i) {
    const double s = i * v_cruise * dt;
    while (seg + 1 < w.size() - 1 &&
           seg_start + (w[seg + 1] - w[seg]).norm() < s) {
      seg_start += (w[seg + 1] - w[seg]).norm();
      ++seg;
    }
    const Vec2 a = w[seg];
    const Vec2 b = w[seg + 1];
    const double len = (b - a).norm();
    if (len > 0.0) {
      out.push_back(a + (b - a) * ((s - seg_start) / len));
    } else {
      // Zero-length final segment: extend along the last segment that has
      // a direction.
      std::size_t k = seg;
      while (k > 0 && (w[k] - w[k - 1]).norm() == 0.0) --k;
      const Vec2 dir = (w[k] - w[k - 1]).normalized();
      out.push_back(b + dir * (s - seg_start));
    }
  }
  return out;
}

Eigen::VectorXd raytrace_point(const OccupancyGrid& grid, const Vec2& point,
                               const SearchDirections& dirs, double max_ray) {
  if (grid.occupied_at(point)) {
    throw Error(ErrorCode::SeedOccupied, "collocation point lies in an occupied cell");
  }
  const double step = 0.5 * grid.resolution();
  Eigen::VectorXd d(dirs.size());
  for (int j = 0; j < dirs.size(); ++j) {
    double hit = max_ray;
    for (int k = 1;; ++k) {
      const double t = k * step;
      if (t > max_ray) break;
      if (grid.occupied_at(point + t * dirs[j])) {
        hit = t;
        break;
      }
    }
    d(j) = hit;
  }
  return d;
}

Corridor raytrace_corridor(const OccupancyGrid& grid, std::vector<Vec2> points,
                           const SearchDirections& dirs, double max_ray) {
  Corridor c;
  c.max_ray = max_ray;
  c.hit_distances.resize(static_cast<Eigen::Index>(points.size()), dirs.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    c.hit_distances.row(static_cast<Eigen::Index>(i)) =
        raytrace_point(grid, points[i], dirs, max_ray).transpose();
  }
  c.collocation_points = std::move(points);
  return c;
}

PositionConstraints build_constraints(const Corridor& corridor,
                                      const std::vector<Vec2>& reference_positions,
                                      const SearchDirections& dirs, double padding) {
  const auto knots = corridor.collocation_points.size();
  const int p = dirs.size();
  if (reference_positions.size() != knots || corridor.hit_distances.cols() != p ||
      static_cast<std::size_t>(corridor.hit_distances.rows()) != knots) {
    throw Error(ErrorCode::DimensionMismatch, "corridor and references are misaligned");
  }
  if (corridor.hit_distances.size() > 0 && corridor.hit_distances.minCoeff() <= padding) {
    throw Error(ErrorCode::CorridorDegenerate, "hit distance within padding");
  }
  PositionConstraints out;
  out.p = p;
  out.G_rows.resize(knots);
  out.h.resize(static_cast<Eigen::Index>(knots) * p);
  for (std::size_t i = 0; i < knots; ++i) {
    auto& G = out.G_rows[i];
    G.setZero(p, 6);
    const Vec2 offset = corridor.collocation_points[i] - reference_positions[i];
    for (int j = 0; j < p; ++j) {
      G(j, 0) = dirs[j].x();
      G(j, 1) = dirs[j].y();
      const double d = corridor.hit_distances(static_cast<Eigen::Index>(i), j);
      out.h(static_cast<Eigen::Index>(i) * p + j) = dirs[j].dot(offset) + d - padding;
    }
  }
  return out;
}

std::vector<Vec2> straight_reference(const Vec2& start, double v, double dt, int n) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) out.push_back(start + Vec2(i * dt * v, 0.0));
  return out;
}

void write_corridor(std::ostream& out, const Corridor& corridor,
                    const PositionConstraints& constraints) {
  out << "knot direction hit_distance h\n";
  out.precision(10);
  for (Eigen::Index i = 0; i < corridor.hit_distances.rows(); ++i) {
    for (Eigen::Index j = 0; j < corridor.hit_distances.cols(); ++j) {
      out << i << ' ' << j << ' ' << corridor.hit_distances(i, j) << ' '
          << constraints.h(i * constraints.p + j) << '\n';
    }
  }
}

}  // namespace mpp
