#pragma once

// Randomized property checks for the corridor raytracer, shared by the unit
// tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mpp/corridor_raytracer.hpp"
#include "mpp/error.hpp"

namespace mpp::testing {

struct TraversalHit {
  double first_entry = std::numeric_limits<double>::infinity();
  // Entry of the first occupied cell the ray crosses along a chord of at
  // least `min_chord`.
  double solid_entry = std::numeric_limits<double>::infinity();
};

/// Grid traversal (Amanatides and Woo) over the cells a ray from p visits
/// within max_t, reporting where it first enters occupied cells.
inline TraversalHit dda_first_occupied(const OccupancyGrid& g, const Vec2& p, const Vec2& dir,
                                       double max_t, double min_chord) {
  const double res = g.resolution();
  const Vec2 local = (p - g.origin()) / res;
  int ix = static_cast<int>(std::floor(local.x()));
  int iz = static_cast<int>(std::floor(local.y()));
  const int sx = dir.x() > 0 ? 1 : -1;
  const int sz = dir.y() > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  const double dtx = dir.x() != 0.0 ? res / std::abs(dir.x()) : inf;
  const double dtz = dir.y() != 0.0 ? res / std::abs(dir.y()) : inf;
  double tx = dir.x() != 0.0
                  ? ((sx > 0 ? ix + 1 - local.x() : local.x() - ix) * res) / std::abs(dir.x())
                  : inf;
  double tz = dir.y() != 0.0
                  ? ((sz > 0 ? iz + 1 - local.y() : local.y() - iz) * res) / std::abs(dir.y())
                  : inf;
  TraversalHit out;
  double t = 0.0;
  while (t <= max_t) {
    if (tx < tz) {
      t = tx;
      tx += dtx;
      ix += sx;
    } else {
      t = tz;
      tz += dtz;
      iz += sz;
    }
    if (t > max_t) break;
    if (!g.occupied(ix, iz)) continue;
    out.first_entry = std::min(out.first_entry, t);
    if (std::min(tx, tz) - t >= min_chord) {
      out.solid_entry = t;
      break;
    }
  }
  return out;
}

struct CorridorPropertyReport {
  int fields = 0;
  int points = 0;
  int seed_occupied = 0;
  int slack_violations = 0;
  int boundary_violations = 0;
  int padding_violations = 0;
  // Rays whose first occupied cell was only clipped at a corner and skipped.
  int clipped_corners = 0;
  std::string first_failure;

  bool ok() const {
    return slack_violations == 0 && boundary_violations == 0 && padding_violations == 0 &&
           points > 0;
  }
};

/// Rasterized random discs on a 40 m square grid; a random polyline is
/// collocated and every collocation point is raytraced and turned into a
/// single-knot constraint set.
inline CorridorPropertyReport run_corridor_properties(int n_fields, std::uint64_t seed) {
  CorridorPropertyReport rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double res = 0.25;
  const int cells = 160;
  const auto dirs = SearchDirections::evenly_spaced(8);
  const double max_ray = 12.0;

  auto fail = [&](const std::string& what) {
    if (rep.first_failure.empty()) rep.first_failure = what;
  };

  for (int f = 0; f < n_fields; ++f) {
    ++rep.fields;
    OccupancyGrid g(Vec2(0.0, 0.0), res, cells, cells);
    const int discs = 5 + static_cast<int>(U(rng) * 25);
    for (int k = 0; k < discs; ++k) {
      const Vec2 c(40.0 * U(rng), 40.0 * U(rng));
      const double r = 0.5 + 2.5 * U(rng);
      const auto lo = g.cell_of(c - Vec2(r, r));
      const auto hi = g.cell_of(c + Vec2(r, r));
      for (int iz = lo.y(); iz <= hi.y(); ++iz)
        for (int ix = lo.x(); ix <= hi.x(); ++ix)
          if ((g.cell_center(ix, iz) - c).norm() <= r) g.set(ix, iz);
    }

    std::vector<Vec2> wps;
    wps.emplace_back(5.0 + 30.0 * U(rng), 5.0 + 30.0 * U(rng));
    for (int k = 0; k < 3; ++k) {
      const double a = 2.0 * 3.14159265358979323846 * U(rng);
      wps.push_back(wps.back() + (1.0 + 3.0 * U(rng)) * Vec2(std::cos(a), std::sin(a)));
    }
    const auto path = Path::from_waypoints(wps);
    const auto points = collocate(path, 2.0, 0.25, 18);
    const auto refs = straight_reference(points.front(), 2.0, 0.25, 18);

    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec2& c = points[i];
      if (g.occupied_at(c)) {
        ++rep.seed_occupied;
        try {
          raytrace_point(g, c, dirs, max_ray);
          ++rep.boundary_violations;
          fail("occupied seed did not throw");
        } catch (const Error& e) {
          if (e.code() != ErrorCode::SeedOccupied) fail("wrong error for an occupied seed");
        }
        continue;
      }
      ++rep.points;
      const Eigen::VectorXd d = raytrace_point(g, c, dirs, max_ray);

      // Hit placement against the traversal oracle.
      for (int j = 0; j < dirs.size(); ++j) {
        if (!(d(j) > 0.0 && d(j) <= max_ray)) {
          ++rep.boundary_violations;
          fail("hit distance outside (0, max_ray]");
          continue;
        }
        // Marching at res/2 can step over a cell the ray only clips along a
        // chord shorter than the step, never over one crossed along a full
        // step. The hit must also be the first occupied sample.
        const double step = 0.5 * res;
        const auto exact = dda_first_occupied(g, c, dirs[j], max_ray, step);
        if (d(j) < max_ray) {
          const Vec2 hit = c + d(j) * dirs[j];
          const Vec2 before = c + (d(j) - step) * dirs[j];
          const bool crosses = g.occupied_at(hit) && !g.occupied_at(before);
          const bool bracketed =
              d(j) >= exact.first_entry - 1e-12 && d(j) <= exact.solid_entry + step + 1e-12;
          if (!crosses || !bracketed) {
            ++rep.boundary_violations;
            fail("hit point more than one cell from the boundary");
          }
          if (d(j) > exact.first_entry + res) ++rep.clipped_corners;
        } else if (exact.solid_entry + step <= max_ray) {
          ++rep.boundary_violations;
          fail("raytrace missed an occupied cell");
        }
      }

      for (double padding : {0.1, 0.5, 1.0}) {
        if (d.minCoeff() <= padding) continue;
        Corridor cor;
        cor.collocation_points = {c};
        cor.hit_distances = d.transpose();
        cor.max_ray = max_ray;
        const auto pc = build_constraints(cor, {refs[i]}, dirs, padding);
        const Eigen::VectorXd dev = (pc.G_rows[0].leftCols<2>() * (c - refs[i]));

        // Slack of the collocation point itself.
        const Eigen::VectorXd slack = pc.h - dev;
        if (slack.minCoeff() < d.minCoeff() - padding - 1e-9 || !(slack.minCoeff() > 0.0)) {
          ++rep.slack_violations;
          fail("collocation point slack not positive");
        }
        // The unpadded hit point sits on its own halfspace boundary.
        for (int j = 0; j < dirs.size(); ++j) {
          const Vec2 hit = c + d(j) * dirs[j];
          const double on = dirs[j].dot(hit - refs[i]) - (pc.h(j) + padding);
          if (std::abs(on) > 1e-9) {
            ++rep.boundary_violations;
            fail("hit point off its halfspace boundary");
          }
        }
        // Shrinking the padding keeps every feasible perturbation feasible.
        const auto looser = build_constraints(cor, {refs[i]}, dirs, 0.5 * padding);
        for (int k = 0; k < 8; ++k) {
          const Vec2 delta = (c - refs[i]) + Vec2(12.0 * U(rng) - 6.0, 12.0 * U(rng) - 6.0);
          const Eigen::VectorXd lhs = pc.G_rows[0].leftCols<2>() * delta;
          const bool feasible = (lhs.array() <= pc.h.array()).all();
          const bool feasible_looser = (lhs.array() <= looser.h.array()).all();
          if (feasible && !feasible_looser) {
            ++rep.padding_violations;
            fail("padding monotonicity");
          }
        }
      }
    }
  }
  return rep;
}

}  // namespace mpp::testing
