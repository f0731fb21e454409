#include <catch_amalgamated.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mpp/cli.hpp"
#include "mpp/world_perception.hpp"

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mpp_cli");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = mpp::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mpp_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("help exits cleanly") {
  const auto r = run_cli({"--help"});
  CHECK(r.code == mpp::kExitOk);
  CHECK(r.out.find("simulate") != std::string::npos);
  CHECK(r.out.find("montecarlo") != std::string::npos);
}

TEST_CASE("unknown flag exits 2 with usage") {
  const auto r = run_cli({"--frobnicate"});
  CHECK(r.code == mpp::kExitConfigError);
  CHECK(r.err.find("Usage") != std::string::npos);
  const auto sub = run_cli({"plan", "--out", "x", "--bogus", "1"});
  CHECK(sub.code == mpp::kExitConfigError);
}

TEST_CASE("missing subcommand or required option exits 2") {
  CHECK(run_cli({}).code == mpp::kExitConfigError);
  CHECK(run_cli({"simulate"}).code == mpp::kExitConfigError);
  CHECK(run_cli({"montecarlo", "--out", "x", "--trials", "0"}).code == mpp::kExitConfigError);
  CHECK(run_cli({"montecarlo", "--out", "x", "--modes", "astar"}).code ==
        mpp::kExitConfigError);
}

TEST_CASE("print-config emits every default as JSON") {
  const auto r = run_cli({"--print-config"});
  REQUIRE(r.code == mpp::kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("scenario").at("n_paths").get<int>() == 25);
  CHECK(j.at("scenario").at("n_obstacles").get<int>() == 20);
  CHECK(j.contains("planner"));
  CHECK(j.contains("corridor"));
  CHECK(j.contains("qp"));
}

TEST_CASE("config errors exit 2") {
  const fs::path dir = scratch_dir("badcfg");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "bad.json");
    f << "{\"scenario\": {\"n_paths\": \"many\"}}";
  }
  {
    std::ofstream f(dir / "unknown.json");
    f << "{\"warp_drive\": true}";
  }
  const auto bad = run_cli({"simulate", "--config", (dir / "bad.json").string(), "--out",
                            (dir / "o").string()});
  CHECK(bad.code == mpp::kExitConfigError);
  CHECK_FALSE(bad.err.empty());
  const auto unknown = run_cli({"--print-config", "--config", (dir / "unknown.json").string()});
  CHECK(unknown.code == mpp::kExitConfigError);
  const auto missing = run_cli({"plan", "--config", (dir / "none.json").string(), "--out",
                                (dir / "o").string()});
  CHECK(missing.code == mpp::kExitConfigError);
  fs::remove_all(dir);
}

TEST_CASE("config file values are merged over defaults") {
  const fs::path dir = scratch_dir("merge");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "cfg.json");
    f << "{\"scenario\": {\"n_paths\": 7}}";
  }
  const auto r = run_cli({"--print-config", "--config", (dir / "cfg.json").string()});
  REQUIRE(r.code == mpp::kExitOk);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("scenario").at("n_paths").get<int>() == 7);
  CHECK(j.at("scenario").at("n_obstacles").get<int>() == 20);
  fs::remove_all(dir);
}

TEST_CASE("plan writes non-empty dumps from every stage") {
  const fs::path dir = scratch_dir("plan");
  const auto r = run_cli({"plan", "--seed", "3", "--out", dir.string()});
  REQUIRE(r.code == mpp::kExitOk);
  for (const char* name : {"field.txt", "lidar.csv", "grid.txt", "paths.txt", "corridors.txt",
                           "qp_reports.txt", "qp.txt", "trajectory.csv"}) {
    INFO(name);
    REQUIRE(fs::exists(dir / name));
    CHECK(fs::file_size(dir / name) > 0);
  }
  CHECK(count_lines(slurp(dir / "lidar.csv")) == 1 + mpp::LidarConfig{}.num_rays);
  fs::remove_all(dir);
}

TEST_CASE("montecarlo on an empty field writes a one-row sweep at rate 1") {
  const fs::path dir = scratch_dir("mc");
  const auto r = run_cli({"montecarlo", "--trials", "10", "--obstacles", "0", "--paths", "1",
                          "--threads", "2", "--out", dir.string()});
  REQUIRE(r.code == mpp::kExitOk);
  const std::string csv = slurp(dir / "sweep.csv");
  REQUIRE(count_lines(csv) == 2);
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "n_obstacles,n_paths,trials,successes,rate,ci_low,ci_high,mode");
  CHECK(row.rfind("0,1,10,10,1,", 0) == 0);
  CHECK(row.substr(row.size() - 4) == ",mpp");
  fs::remove_all(dir);
}

TEST_CASE("simulate writes the state log and summary") {
  const fs::path dir = scratch_dir("sim");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "cfg.json");
    f << "{\"scenario\": {\"n_obstacles\": 0, \"n_paths\": 5}}";
  }
  const auto r = run_cli({"simulate", "--config", (dir / "cfg.json").string(), "--seed", "4",
                          "--out", (dir / "o").string()});
  CHECK(r.code == mpp::kExitOk);
  const std::string log = slurp(dir / "o" / "state_log.csv");
  REQUIRE_FALSE(log.empty());
  CHECK(log.rfind("t,x,z,v,theta,theta_dot,gamma,", 0) == 0);
  CHECK(count_lines(log) > 1000);
  const auto summary = nlohmann::json::parse(slurp(dir / "o" / "summary.json"));
  CHECK(summary.at("outcome").get<std::string>() == "Success");
  CHECK(summary.at("seed").get<int>() == 4);
  for (const char* name : {"cycles.csv", "references.csv", "field.txt"}) {
    CHECK(fs::file_size(dir / "o" / name) > 0);
  }
  fs::remove_all(dir);
}
