#include "mpp/multipath_planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "mpp/error.hpp"

namespace mpp {

Path Path::from_waypoints(std::vector<Vec2> waypoints) {
  Path p;
  p.waypoints = std::move(waypoints);
  for (std::size_t i = 1; i < p.waypoints.size(); ++i) {
    p.length += (p.waypoints[i] - p.waypoints[i - 1]).norm();
  }
  return p;
}

void PlannerConfig::validate() const {
  if (samples_per_run <= 0 || num_runs <= 0 || !(step_size > 0) ||
      !(neighbor_radius > 0) || !(goal_tolerance > 0) || !(ar_penalty_radius > 0) ||
      ar_penalty_cost < 0 || goal_bias < 0 || goal_bias > 1) {
    throw Error(ErrorCode::InvalidArgument, "invalid planner configuration");
  }
}

bool segment_collision_free(const OccupancyGrid& grid, const Vec2& p1, const Vec2& p2) {
  const double len = (p2 - p1).norm();
  const double spacing = 0.5 * grid.resolution();
  const int steps = static_cast<int>(std::ceil(len / spacing));
  for (int i = 0; i <= steps; ++i) {
    const double t = steps == 0 ? 0.0 : static_cast<double>(i) / steps;
    if (grid.occupied_at(p1 + t * (p2 - p1))) return false;
  }
  return true;
}

namespace {

struct Node {
  Vec2 pos;
  int parent = -1;
  double cost = 0.0;
  std::vector<int> children;
};

// Uniform bucket grid for neighbor queries.
class SpatialHash {
 public:
  SpatialHash(const Rect& window, double bucket)
      : x0_(window.x_min), z0_(window.z_min), bucket_(bucket) {
    nbx_ = std::max(1, static_cast<int>(std::ceil((window.x_max - window.x_min) / bucket)));
    nbz_ = std::max(1, static_cast<int>(std::ceil((window.z_max - window.z_min) / bucket)));
    buckets_.resize(static_cast<std::size_t>(nbx_ * nbz_));
  }

  void insert(int id, const Vec2& p) { buckets_[bucket_index(key(p))].push_back(id); }

  /// Ids within `radius` of p, in ascending id order.
  std::vector<int> within(const Vec2& p, double radius,
                          const std::vector<Node>& nodes) const {
    std::vector<int> out;
    const auto k = key(p);
    const int span = static_cast<int>(std::ceil(radius / bucket_));
    for (int bx = k.first - span; bx <= k.first + span; ++bx) {
      for (int bz = k.second - span; bz <= k.second + span; ++bz) {
        if (bx < 0 || bz < 0 || bx >= nbx_ || bz >= nbz_) continue;
        for (int id : buckets_[bucket_index({bx, bz})]) {
          if ((nodes[static_cast<std::size_t>(id)].pos - p).norm() <= radius) out.push_back(id);
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Closest node; ties resolved toward the lowest id.
  int nearest(const Vec2& p, const std::vector<Node>& nodes) const {
    const auto k = key(p);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    const int max_ring = std::max(nbx_, nbz_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      for (int bx = k.first - ring; bx <= k.first + ring; ++bx) {
        for (int bz = k.second - ring; bz <= k.second + ring; ++bz) {
          if (std::max(std::abs(bx - k.first), std::abs(bz - k.second)) != ring) continue;
          if (bx < 0 || bz < 0 || bx >= nbx_ || bz >= nbz_) continue;
          for (int id : buckets_[bucket_index({bx, bz})]) {
            const double d = (nodes[static_cast<std::size_t>(id)].pos - p).norm();
            if (d < best_d || (d == best_d && id < best)) {
              best_d = d;
              best = id;
            }
          }
        }
      }
      // Every bucket beyond this ring is at least ring * bucket away.
      if (best >= 0 && best_d <= ring * bucket_) break;
    }
    return best;
  }

 private:
  std::pair<int, int> key(const Vec2& p) const {
    const int bx = std::clamp(static_cast<int>(std::floor((p.x() - x0_) / bucket_)), 0, nbx_ - 1);
    const int bz = std::clamp(static_cast<int>(std::floor((p.y() - z0_) / bucket_)), 0, nbz_ - 1);
    return {bx, bz};
  }
  std::size_t bucket_index(std::pair<int, int> k) const {
    return static_cast<std::size_t>(k.second * nbx_ + k.first);
  }

  double x0_, z0_, bucket_;
  int nbx_ = 1, nbz_ = 1;
  std::vector<std::vector<int>> buckets_;
};

int crowding(const std::vector<Node>& nodes, int parent, const Vec2& p, double radius) {
  int count = 0;
  for (int c : nodes[static_cast<std::size_t>(parent)].children) {
    if ((nodes[static_cast<std::size_t>(c)].pos - p).norm() < radius) ++count;
  }
  return count;
}

void shift_subtree_cost(std::vector<Node>& nodes, int root, double delta) {
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    auto& n = nodes[static_cast<std::size_t>(id)];
    n.cost += delta;
    stack.insert(stack.end(), n.children.begin(), n.children.end());
  }
}

Rect sampling_window(const OccupancyGrid& grid, const Vec2& start, const Vec2& goal,
                     double margin) {
  const Rect ext = grid.extent();
  Rect w;
  w.x_min = std::max(ext.x_min, std::min(start.x(), goal.x()) - margin);
  w.x_max = std::min(ext.x_max, std::max(start.x(), goal.x()) + margin);
  w.z_min = ext.z_min;
  w.z_max = ext.z_max;
  return w;
}

}  // namespace

std::optional<Path> rrt_star_ar(const OccupancyGrid& grid, const Vec2& start,
                                const Vec2& goal, const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (grid.occupied_at(start)) return std::nullopt;

  const Rect window = sampling_window(grid, start, goal, cfg.sample_margin_x);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> ux(window.x_min, window.x_max);
  std::uniform_real_distribution<double> uz(window.z_min, window.z_max);

  std::vector<Node> nodes;
  nodes.reserve(static_cast<std::size_t>(cfg.samples_per_run) + 1);
  nodes.push_back({start, -1, 0.0, {}});
  SpatialHash hash(window, cfg.neighbor_radius);
  hash.insert(0, start);
  std::vector<int> goal_nodes;

  auto node = [&](int id) -> Node& { return nodes[static_cast<std::size_t>(id)]; };
  auto penalized = [&](int parent, const Vec2& p) {
    return node(parent).cost + (p - node(parent).pos).norm() +
           cfg.ar_penalty_cost * crowding(nodes, parent, p, cfg.ar_penalty_radius);
  };

  for (int s = 0; s < cfg.samples_per_run; ++s) {
    Vec2 sample;
    if (unit(rng) < cfg.goal_bias) {
      sample = goal;
    } else {
      const double x = ux(rng);
      const double z = uz(rng);
      sample = Vec2(x, z);
    }
    const int near_id = hash.nearest(sample, nodes);
    const Vec2 from = node(near_id).pos;
    const double d = (sample - from).norm();
    if (d <= 0.0) continue;
    const Vec2 p = d > cfg.step_size ? Vec2(from + (sample - from) * (cfg.step_size / d)) : sample;
    if (!segment_collision_free(grid, from, p)) continue;

    std::vector<int> near = hash.within(p, cfg.neighbor_radius, nodes);
    if (std::find(near.begin(), near.end(), near_id) == near.end()) {
      near.insert(std::upper_bound(near.begin(), near.end(), near_id), near_id);
    }

    int parent = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int q : near) {
      const double c = penalized(q, p);
      if (c < best_cost && (q == near_id || segment_collision_free(grid, node(q).pos, p))) {
        best_cost = c;
        parent = q;
      }
    }
    if (parent < 0) continue;

    const int id = static_cast<int>(nodes.size());
    nodes.push_back({p, parent, best_cost, {}});
    node(parent).children.push_back(id);
    hash.insert(id, p);

    for (int q : near) {
      if (q == parent || q == 0) continue;
      const double c = penalized(id, node(q).pos);
      if (c + 1e-12 < node(q).cost && segment_collision_free(grid, p, node(q).pos)) {
        auto& siblings = node(node(q).parent).children;
        siblings.erase(std::find(siblings.begin(), siblings.end(), q));
        node(q).parent = id;
        node(id).children.push_back(q);
        shift_subtree_cost(nodes, q, c - node(q).cost);
      }
    }

    if ((p - goal).norm() <= cfg.goal_tolerance && segment_collision_free(grid, p, goal)) {
      goal_nodes.push_back(id);
    }
  }

  int best = -1;
  double best_total = std::numeric_limits<double>::infinity();
  for (int g : goal_nodes) {
    const double total = node(g).cost + (node(g).pos - goal).norm();
    if (total < best_total) {
      best_total = total;
      best = g;
    }
  }
  if (best < 0) return std::nullopt;

  std::vector<Vec2> wps;
  for (int id = best; id >= 0; id = node(id).parent) wps.push_back(node(id).pos);
  std::reverse(wps.begin(), wps.end());
  if ((wps.back() - goal).norm() > 0.0) wps.push_back(goal);
  if (wps.size() < 2) wps.push_back(goal);
  return Path::from_waypoints(std::move(wps));
}

std::vector<Path> plan_paths(const OccupancyGrid& grid, const Vec2& start,
                             const Vec2& goal, const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (grid.occupied_at(start)) {
    throw Error(ErrorCode::NoPathFound, "start cell is occupied");
  }
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(cfg.num_runs));
  for (auto& s : seeds) s = rng();

  std::vector<Path> paths;
  for (auto seed : seeds) {
    Rng run_rng(seed);
    if (auto p = rrt_star_ar(grid, start, goal, cfg, run_rng)) paths.push_back(std::move(*p));
  }
  if (paths.empty()) {
    throw Error(ErrorCode::NoPathFound, "no run reached the goal");
  }
  std::stable_sort(paths.begin(), paths.end(),
                   [](const Path& a, const Path& b) { return a.length < b.length; });
  return paths;
}

void write_paths(std::ostream& out, const std::vector<Path>& paths) {
  out.precision(10);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (i > 0) out << '\n';
    for (const auto& w : paths[i].waypoints) out << w.x() << ' ' << w.y() << '\n';
  }
}

}  // namespace mpp
