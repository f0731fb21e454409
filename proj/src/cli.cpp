#include "mpp/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mpp/config.hpp"
#include "mpp/error.hpp"
#include "mpp/sim_harness.hpp"

namespace mpp {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  std::ofstream f(dir / name);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + (dir / name).string());
  return f;
}

ScenarioConfig base_config(const std::string& config_path) {
  return config_path.empty() ? ScenarioConfig{} : load_config(config_path);
}

void write_summary(std::ostream& out, const ScenarioConfig& cfg, const RunResult& r) {
  double total_ms = 0.0;
  for (const auto& c : r.cycles) total_ms += c.planner_ms;
  out << "{\n"
      << "  \"outcome\": \"" << to_string(r.outcome) << "\",\n"
      << "  \"final_x\": " << r.final_x << ",\n"
      << "  \"final_t\": " << r.final_t << ",\n"
      << "  \"seed\": " << cfg.seed << ",\n"
      << "  \"n_obstacles\": " << cfg.n_obstacles << ",\n"
      << "  \"n_paths\": " << cfg.n_paths << ",\n"
      << "  \"mode\": \"" << to_string(cfg.mode) << "\",\n"
      << "  \"cycles\": " << r.cycles.size() << ",\n"
      << "  \"mean_planner_ms\": " << (r.cycles.empty() ? 0.0 : total_ms / r.cycles.size())
      << "\n}\n";
}

// Reference knots of every cycle, for plotting the re-planned references.
void write_references(std::ostream& out, const RunResult& r) {
  out << "cycle_t,knot,x,z,v,theta,theta_dot,gamma\n";
  out.precision(12);
  for (const auto& c : r.cycles) {
    for (std::size_t k = 0; k < c.reference_knots.size(); ++k) {
      const auto& s = c.reference_knots[k];
      out << c.t << ',' << k << ',' << s.x << ',' << s.z << ',' << s.v << ',' << s.theta << ','
          << s.theta_dot << ',' << s.gamma << '\n';
    }
  }
}

void write_grid(std::ostream& out, const OccupancyGrid& g) {
  out << "# origin " << g.origin().x() << ' ' << g.origin().y() << " resolution "
      << g.resolution() << " nx " << g.nx() << " nz " << g.nz() << "\n# occupied ix iz\n";
  for (int iz = 0; iz < g.nz(); ++iz)
    for (int ix = 0; ix < g.nx(); ++ix)
      if (g.occupied(ix, iz)) out << ix << ' ' << iz << '\n';
}

int run_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const fs::path& out_dir, std::ostream& out) {
  ScenarioConfig cfg = base_config(config_path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  const RunResult r = run_closed_loop(cfg, true);
  fs::create_directories(out_dir);
  {
    auto f = open_out(out_dir, "state_log.csv");
    write_state_log(f, r);
  }
  {
    auto f = open_out(out_dir, "cycles.csv");
    write_cycle_log(f, r);
  }
  {
    auto f = open_out(out_dir, "references.csv");
    write_references(f, r);
  }
  {
    auto f = open_out(out_dir, "field.txt");
    write_field(f, r.field);
  }
  {
    auto f = open_out(out_dir, "summary.json");
    write_summary(f, cfg, r);
  }
  out << to_string(r.outcome) << " final_x=" << r.final_x << " t=" << r.final_t << '\n';
  return r.outcome == Outcome::Success ? kExitOk : kExitScenarioFailure;
}

int run_montecarlo(const std::string& config_path, const std::vector<int>& obstacles,
                   const std::vector<int>& paths, const std::vector<std::string>& modes,
                   int trials, std::optional<std::uint64_t> seed, int threads,
                   const fs::path& out_dir, std::ostream& out) {
  ScenarioConfig cfg = base_config(config_path);
  cfg.validate();
  std::vector<SweepCell> cells;
  for (const auto& m : modes) {
    const PlannerMode mode = m == "rrt_only" ? PlannerMode::RrtOnly : PlannerMode::Mpp;
    for (int o : obstacles)
      for (int p : paths) cells.push_back({o, p, mode});
  }
  const SweepResult sweep = monte_carlo(cfg, cells, trials, seed.value_or(cfg.seed), threads);
  fs::create_directories(out_dir);
  auto f = open_out(out_dir, "sweep.csv");
  write_sweep_csv(f, sweep);
  write_sweep_csv(out, sweep);
  return kExitOk;
}

int run_plan(const std::string& config_path, std::optional<std::uint64_t> seed,
             const fs::path& out_dir, std::ostream& out) {
  ScenarioConfig cfg = base_config(config_path);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  const CycleDump d = first_planning_cycle(cfg);
  fs::create_directories(out_dir);
  {
    auto f = open_out(out_dir, "field.txt");
    write_field(f, d.field);
  }
  {
    auto f = open_out(out_dir, "lidar.csv");
    f << "angle,range,hit\n";
    for (const auto& r : d.scan) f << r.angle << ',' << r.range << ',' << r.hit << '\n';
  }
  {
    auto f = open_out(out_dir, "grid.txt");
    write_grid(f, d.grid);
  }
  {
    auto f = open_out(out_dir, "paths.txt");
    write_paths(f, d.paths);
  }
  {
    auto f = open_out(out_dir, "corridors.txt");
    for (std::size_t k = 0; k < d.refine.corridors.size(); ++k) {
      f << "# candidate " << k << ' ' << to_string(d.refine.reports[k].status) << '\n';
      if (!d.refine.constraints[k].G_rows.empty()) {
        write_corridor(f, d.refine.corridors[k], d.refine.constraints[k]);
      }
    }
  }
  {
    auto f = open_out(out_dir, "qp_reports.txt");
    write_candidate_reports(f, d.refine.reports);
  }
  {
    auto f = open_out(out_dir, "qp.txt");
    for (std::size_t k = 0; k < d.qps.size(); ++k) {
      if (d.qps[k].Qbar.size() == 0) continue;
      f << "## candidate " << k << '\n';
      write_qp(f, d.qps[k]);
    }
  }
  if (d.refine.best) {
    auto f = open_out(out_dir, "trajectory.csv");
    write_trajectory(f, *d.refine.best);
  }
  out << d.paths.size() << " paths, selected candidate "
      << (d.refine.best ? std::to_string(d.refine.best->candidate) : std::string("none"))
      << '\n';
  return d.refine.best ? kExitOk : kExitScenarioFailure;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Model predictive planning simulation lab", "mpp_cli"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  std::string config_path;
  app.add_flag("--print-config", print_config,
               "Print the configuration (defaults, or --config merged over them) as JSON");
  app.add_option("--config", config_path, "Scenario configuration file (JSON)")
      ->check(CLI::ExistingFile);

  std::string sim_config, mc_config, plan_config;
  std::optional<std::uint64_t> sim_seed, mc_seed, plan_seed;
  std::string sim_out, mc_out, plan_out;

  auto* sim = app.add_subcommand("simulate", "Run one closed-loop scenario");
  sim->add_option("--config", sim_config, "Scenario configuration file (JSON)")
      ->check(CLI::ExistingFile);
  sim->add_option("--seed", sim_seed, "Scenario seed (overrides the config)");
  sim->add_option("--out", sim_out, "Output directory")->required();

  std::vector<int> obstacles{20}, paths{1, 25};
  std::vector<std::string> modes{"mpp"};
  int trials = 100;
  int threads = 1;
  auto* mc = app.add_subcommand("montecarlo", "Success-rate sweep over obstacle and path counts");
  mc->add_option("--config", mc_config, "Scenario configuration file (JSON)")
      ->check(CLI::ExistingFile);
  mc->add_option("--obstacles", obstacles, "Obstacle counts, comma separated")
      ->delimiter(',')
      ->check(CLI::NonNegativeNumber);
  mc->add_option("--paths", paths, "Candidate path counts, comma separated")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  mc->add_option("--modes", modes, "Planner modes: mpp, rrt_only (comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember({"mpp", "rrt_only"}));
  mc->add_option("--trials", trials, "Trials per cell")->check(CLI::PositiveNumber);
  mc->add_option("--seed", mc_seed, "Base seed (default: config seed)");
  mc->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  mc->add_option("--out", mc_out, "Output directory")->required();

  auto* plan = app.add_subcommand("plan", "Dump every stage of the first planning cycle");
  plan->add_option("--config", plan_config, "Scenario configuration file (JSON)")
      ->check(CLI::ExistingFile);
  plan->add_option("--seed", plan_seed, "Scenario seed (overrides the config)");
  plan->add_option("--out", plan_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitConfigError;
  }

  try {
    if (print_config) {
      out << config_to_json(base_config(config_path)) << '\n';
      return kExitOk;
    }
    auto pick = [&](const std::string& local) { return local.empty() ? config_path : local; };
    if (*sim) return run_simulate(pick(sim_config), sim_seed, sim_out, out);
    if (*mc) {
      return run_montecarlo(pick(mc_config), obstacles, paths, modes, trials, mc_seed, threads,
                            mc_out, out);
    }
    if (*plan) return run_plan(pick(plan_config), plan_seed, plan_out, out);
    err << "a subcommand is required\n\n" << app.help();
    return kExitConfigError;
  } catch (const Error& e) {
    err << to_string(e.code()) << ": " << e.what() << '\n';
    if (e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::InvalidArgument) {
      return kExitConfigError;
    }
    return kExitScenarioFailure;
  }
}

}  // namespace mpp
