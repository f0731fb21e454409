#include "mpp/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mpp/error.hpp"

namespace mpp {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

template <typename E>
struct EnumNames {
  std::vector<std::pair<E, std::string_view>> names;
};

const EnumNames<PlannerMode> kModes{{{PlannerMode::Mpp, to_string(PlannerMode::Mpp)},
                                     {PlannerMode::RrtOnly, to_string(PlannerMode::RrtOnly)}}};
const EnumNames<BaselineTracker> kTrackers{
    {{BaselineTracker::Direct, to_string(BaselineTracker::Direct)},
     {BaselineTracker::Pursuit, to_string(BaselineTracker::Pursuit)}}};

// Visits every configurable field as (section, key, value). The writer and
// the reader share this list so the two directions cannot drift apart.
template <typename V>
void visit_fields(V& v, ScenarioConfig& c, std::string& field_file) {
  v("scenario", "n_obstacles", c.n_obstacles);
  v("scenario", "n_paths", c.n_paths);
  v("scenario", "seed", c.seed);
  v.enumeration("scenario", "mode", c.mode, kModes);
  v("scenario", "field_file", field_file);

  SimConfig& s = c.sim;
  v("sim", "replan_period", s.replan_period);
  v("sim", "horizon", s.horizon);
  v("sim", "dt_plan", s.dt_plan);
  v("sim", "dt_sim", s.dt_sim);
  v("sim", "cruise_speed", s.cruise_speed);
  v("sim", "goal_distance", s.goal_distance);
  v("sim", "success_x", s.success_x);
  v("sim", "max_time", s.max_time);
  v("sim", "theta_limit_deg", s.theta_limit_deg);
  v("sim", "gamma_limit_deg", s.gamma_limit_deg);
  v("sim", "min_airspeed", s.min_airspeed);
  v("sim", "sensor_noise", s.sensor_noise);
  v("sim", "initial_sigma_v", s.initial_sigma_v);
  v("sim", "initial_sigma_angle", s.initial_sigma_angle);
  v.enumeration("sim", "baseline_tracker", s.baseline_tracker, kTrackers);
  v("sim", "pursuit_lookahead", s.pursuit_lookahead);
  v("sim", "pursuit_max_gamma_deg", s.pursuit_max_gamma_deg);

  AircraftParams& a = c.aircraft;
  v("aircraft", "m", a.m);
  v("aircraft", "I_yy", a.I_yy);
  v("aircraft", "g", a.g);
  v("aircraft", "rho", a.rho);
  v("aircraft", "S", a.S);
  v("aircraft", "c", a.c);
  v("aircraft", "C_L0", a.C_L0);
  v("aircraft", "C_Lalpha", a.C_Lalpha);
  v("aircraft", "C_D0", a.C_D0);
  v("aircraft", "K", a.K);
  v("aircraft", "C_M0", a.C_M0);
  v("aircraft", "C_Malpha", a.C_Malpha);
  v("aircraft", "C_Malphadot", a.C_Malphadot);
  v("aircraft", "C_Mdelta_e", a.C_Mdelta_e);
  v("aircraft", "thrust_gamma_sign", a.thrust_gamma_sign);

  v.diagonal("lqr", "Q_diag", c.lqr.Q);
  v("lqr", "R", c.lqr.R);

  v("sensors", "sigma_v", c.sensors.sigma_v);
  v("sensors", "sigma_theta", c.sensors.sigma_theta);
  v.vector("ekf", "process_noise_diag", c.process_noise_diag);

  FieldConfig& f = c.field;
  v.rect("field", "bounds", f.bounds);
  v.rect("field", "spawn", f.spawn);
  v.vector("field", "start", f.start);
  v.vector("field", "goal", f.goal);
  v("field", "obstacle_radius", f.obstacle_radius);
  v("field", "clearance", f.clearance);

  v("lidar", "num_rays", c.lidar.num_rays);
  v("lidar", "fov", c.lidar.fov);
  v("lidar", "max_range", c.lidar.max_range);
  v("lidar", "range_error_coeff", c.lidar.range_error_coeff);

  v("grid", "resolution", c.grid.resolution);
  v("grid", "x_margin", c.grid.x_margin);
  v("grid", "inflation", c.grid.inflation);
  v("grid", "planner_clearance", c.grid.planner_clearance);
  v("grid", "hit_depth", c.grid.hit_depth);

  PlannerConfig& p = c.planner;
  v("planner", "samples_per_run", p.samples_per_run);
  v("planner", "step_size", p.step_size);
  v("planner", "neighbor_radius", p.neighbor_radius);
  v("planner", "goal_tolerance", p.goal_tolerance);
  v("planner", "ar_penalty_radius", p.ar_penalty_radius);
  v("planner", "ar_penalty_cost", p.ar_penalty_cost);
  v("planner", "goal_bias", p.goal_bias);
  v("planner", "sample_margin_x", p.sample_margin_x);

  v("corridor", "padding", c.corridor.padding);
  v("corridor", "max_ray", c.corridor.max_ray);
  v("corridor", "num_directions", c.corridor.num_directions);

  v.diagonal("qp", "control_penalty_diag", c.weights.C_ctrl);
  v("qp", "thrust_heavier", c.weights.thrust_heavier);
  v("qp", "terminal_weight", c.weights.terminal_weight);
  v("qp", "rotational_algebraic", c.assembly.rotational_algebraic);
  v("qp", "thrust_bound", c.assembly.thrust_bound);
  v("qp", "link_adjacent", c.assembly.link_adjacent);
  v("qp", "tol", c.solver.tol);
  v("qp", "max_iters", c.solver.max_iters);
  v("qp", "regularization", c.solver.regularization);
  v("qp", "infeasibility_tol", c.solver.infeasibility_tol);
}

struct Writer {
  json doc = json::object();

  template <typename T>
  void operator()(const char* sec, const char* key, const T& value) {
    doc[sec][key] = value;
  }
  template <typename E>
  void enumeration(const char* sec, const char* key, const E& value, const EnumNames<E>& names) {
    for (const auto& [e, name] : names.names)
      if (e == value) doc[sec][key] = std::string(name);
  }
  template <typename M>
  void diagonal(const char* sec, const char* key, const M& m) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) arr.push_back(m(i, i));
    doc[sec][key] = arr;
  }
  template <typename Vec>
  void vector(const char* sec, const char* key, const Vec& vec) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < vec.size(); ++i) arr.push_back(vec(i));
    doc[sec][key] = arr;
  }
  void rect(const char* sec, const char* key, const Rect& r) {
    doc[sec][key] = {
        {"x_min", r.x_min}, {"x_max", r.x_max}, {"z_min", r.z_min}, {"z_max", r.z_max}};
  }
};

struct Reader {
  const json& doc;

  const json* find(const char* sec, const char* key) const {
    auto s = doc.find(sec);
    if (s == doc.end()) return nullptr;
    auto k = s->find(key);
    return k == s->end() ? nullptr : &*k;
  }
  static std::string where(const char* sec, const char* key) {
    return std::string(sec) + "." + key;
  }

  template <typename T>
  void operator()(const char* sec, const char* key, T& value) {
    const json* j = find(sec, key);
    if (!j) return;
    if constexpr (std::is_same_v<T, bool>) {
      if (!j->is_boolean()) invalid(where(sec, key) + " must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j->is_string()) invalid(where(sec, key) + " must be a string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!j->is_number_integer()) invalid(where(sec, key) + " must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (j->is_number_integer() && !j->is_number_unsigned()) {
          invalid(where(sec, key) + " must be non-negative");
        }
      }
    } else {
      if (!j->is_number()) invalid(where(sec, key) + " must be a number");
    }
    value = j->get<T>();
  }
  template <typename E>
  void enumeration(const char* sec, const char* key, E& value, const EnumNames<E>& names) {
    const json* j = find(sec, key);
    if (!j) return;
    if (j->is_string()) {
      for (const auto& [e, name] : names.names) {
        if (j->get<std::string>() == name) {
          value = e;
          return;
        }
      }
    }
    std::string allowed;
    for (const auto& [e, name] : names.names) {
      allowed += (allowed.empty() ? "" : "|") + std::string(name);
    }
    invalid(where(sec, key) + " must be one of " + allowed);
  }
  std::vector<double> numbers(const char* sec, const char* key, std::size_t n) {
    const json* j = find(sec, key);
    std::vector<double> out;
    if (!j) return out;
    if (!j->is_array() || j->size() != n) {
      invalid(where(sec, key) + " must be an array of " + std::to_string(n) + " numbers");
    }
    for (const auto& e : *j) {
      if (!e.is_number()) invalid(where(sec, key) + " must contain numbers only");
      out.push_back(e.get<double>());
    }
    return out;
  }
  template <typename M>
  void diagonal(const char* sec, const char* key, M& m) {
    const auto vals = numbers(sec, key, static_cast<std::size_t>(m.rows()));
    if (vals.empty()) return;
    m.setZero();
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, i) = vals[static_cast<std::size_t>(i)];
  }
  template <typename Vec>
  void vector(const char* sec, const char* key, Vec& vec) {
    const auto vals = numbers(sec, key, static_cast<std::size_t>(vec.size()));
    for (std::size_t i = 0; i < vals.size(); ++i) vec(static_cast<Eigen::Index>(i)) = vals[i];
  }
  void rect(const char* sec, const char* key, Rect& r) {
    const json* j = find(sec, key);
    if (!j) return;
    if (!j->is_object()) invalid(where(sec, key) + " must be an object");
    Reader sub{json{{"r", *j}}};
    sub("r", "x_min", r.x_min);
    sub("r", "x_max", r.x_max);
    sub("r", "z_min", r.z_min);
    sub("r", "z_max", r.z_max);
  }
};

// Every key of `doc` must exist in `schema` at the same place.
void check_known_keys(const json& doc, const json& schema, const std::string& prefix) {
  if (!doc.is_object()) {
    invalid((prefix.empty() ? std::string("config") : prefix) + " must be an object");
  }
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    auto s = schema.find(it.key());
    if (s == schema.end()) invalid("unknown config key '" + path + "'");
    if (s->is_object()) check_known_keys(*it, *s, path);
  }
}

}  // namespace

std::string config_to_json(const ScenarioConfig& cfg, int indent) {
  ScenarioConfig copy = cfg;
  std::string field_file;
  Writer w;
  visit_fields(w, copy, field_file);
  return w.doc.dump(indent);
}

ScenarioConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(std::string("malformed JSON: ") + e.what());
  }
  ScenarioConfig defaults;
  std::string unused;
  Writer schema;
  visit_fields(schema, defaults, unused);
  check_known_keys(doc, schema.doc, "");

  ScenarioConfig cfg;
  std::string field_file;
  Reader r{doc};
  visit_fields(r, cfg, field_file);
  if (!field_file.empty()) {
    std::filesystem::path p(field_file);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    std::ifstream in(p);
    if (!in) invalid("cannot open field_file '" + p.string() + "'");
    try {
      cfg.field_override = read_field(in, cfg.field.bounds);
    } catch (const Error& e) {
      invalid(std::string("field_file: ") + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), path.parent_path());
}

}  // namespace mpp
