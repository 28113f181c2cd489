#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "proxsplit/cli.hpp"

using namespace proxsplit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path source_dir() {
  const char* s = std::getenv("PROXSPLIT_SOURCE_DIR");
  return s ? fs::path(s) : fs::current_path();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("proxsplit_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run_cmd(const std::string& cmd, const fs::path& config, const fs::path& out_dir) {
  cli::Options opt;
  opt.config = config;
  opt.out = out_dir;
  std::ostringstream out, err;
  const int code = cli::run(cmd, opt, out, err);
  return {code, out.str(), err.str()};
}

Outcome run_json(const std::string& cmd, const json& cfg, const fs::path& dir) {
  const auto path = dir / "config.json";
  std::ofstream(path) << cfg.dump(2);
  return run_cmd(cmd, path, dir / "out");
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("solve the lasso fixture with fista") {
  const auto dir = scratch("solve");
  const auto r = run_cmd("solve", source_dir() / "configs/solve_lasso.json", dir / "out");
  REQUIRE(r.code == cli::ok);
  const auto summary = read_json(dir / "out/summary.json");
  REQUIRE(summary.contains("expected_objective"));
  CHECK(std::abs(summary["objective"].get<double>() - summary["expected_objective"].get<double>()) <=
        1e-6);
  for (const char* k : {"termination", "iterations", "wall_time_s", "initial_objective"})
    CHECK(summary.contains(k));
  const auto rows = read_csv(dir / "out/trace.csv");
  REQUIRE(rows.size() > 1);
  CHECK(rows[0][0] == "n");
  CHECK(rows[0][1] == "objective");
  CHECK(rows[0][2] == "residual");
  CHECK(rows[1][0] == "1");
  const auto resolved = read_json(dir / "out/config.resolved.json");
  CHECK(resolved["solver"].contains("residual_tol"));
  CHECK(fs::exists(dir / "out/solution.csv"));
}

TEST_CASE("zero iterations give an empty trace") {
  const auto dir = scratch("zero");
  json cfg = {{"problem", {{"kind", "lasso"}, {"fixture", "lasso"}}},
              {"recipe", "fb"},
              {"solver", {{"max_iter", 0}}}};
  const auto r = run_json("solve", cfg, dir);
  CHECK(r.code == cli::ok);
  const auto rows = read_csv(dir / "out/trace.csv");
  CHECK(rows.size() == 1);
  CHECK(read_json(dir / "out/summary.json")["termination"] == "iter_cap");
}

TEST_CASE("config errors exit 1 with the offending field") {
  const auto dir = scratch("bad");
  json cfg = {{"problem", {{"kind", "lasso"}, {"fixture", "lasso"}}},
              {"recipe", "newton"},
              {"solver", {{"max_iter", 5}}}};
  auto r = run_json("solve", cfg, dir);
  CHECK(r.code == cli::config_error);
  CHECK(r.err.find("newton") != std::string::npos);

  cfg["recipe"] = "fb";
  cfg["solver"]["max_itr"] = 5;
  r = run_json("solve", cfg, dir);
  CHECK(r.code == cli::config_error);
  CHECK(r.err.find("max_itr") != std::string::npos);

  cfg["solver"].erase("max_itr");
  cfg["problem"]["kind"] = "sudoku";
  CHECK(run_json("solve", cfg, dir).code == cli::config_error);

  CHECK(run_cmd("solve", dir / "missing.json", dir / "out").code == cli::config_error);
  CHECK(run_cmd("launch", dir / "config.json", dir / "out").code == cli::config_error);

  // Step sizes beyond 2/L are rejected before iterating.
  json big = {{"problem", {{"kind", "lasso"}, {"params", {{"A", {{1.0}}}, {"y", {1.0}}}}, {"lambda", 0.1}}},
              {"recipe", "fb"},
              {"solver", {{"gamma", 3.0}}}};
  CHECK(run_json("solve", big, dir).code == cli::config_error);
}

TEST_CASE("objectives beyond the finite range exit 2") {
  const auto dir = scratch("diverge");
  json cfg = {{"problem", {{"kind", "lasso"}, {"params", {{"A", {{1.0}}}, {"y", {1e13}}}}, {"lambda", 1.0}}},
              {"recipe", "fb"},
              {"solver", {{"max_iter", 10}}}};
  const auto r = run_json("solve", cfg, dir);
  CHECK(r.code == cli::diverged);
  CHECK(read_json(dir / "out/summary.json")["termination"] == "diverged");
}

TEST_CASE("certify suites") {
  const auto dir = scratch("certify");
  auto r = run_cmd("certify", source_dir() / "configs/certify_default.json", dir / "default");
  CHECK(r.code == cli::ok);
  const auto report = read_json(dir / "default/report.json");
  CHECK(report["pass"] == true);
  CHECK(report["n_checks"].get<int>() > 50);

  r = run_cmd("certify", source_dir() / "configs/certify_controls.json", dir / "controls");
  CHECK(r.code == cli::certification_failure);
  // Every control must contribute at least one named failure.
  const auto failed = read_json(dir / "controls/report.json")["failed"];
  std::set<std::string> flagged;
  for (const auto& f : failed) {
    const auto name = f.get<std::string>();
    flagged.insert(name.substr(0, name.find(" :: ")));
  }
  CHECK(flagged.size() == 8);
  for (const auto& n : flagged) CHECK(n.rfind("control_", 0) == 0);
  CHECK(r.out.find("FAIL") != std::string::npos);

  r = run_cmd("certify", source_dir() / "configs/certify_equivalence.json", dir / "eq");
  CHECK(r.code == cli::ok);

  // Same seed, same report (wall times are not part of it).
  const auto again = run_cmd("certify", source_dir() / "configs/certify_equivalence.json",
                             dir / "eq2");
  CHECK(slurp(dir / "eq/report.json") == slurp(dir / "eq2/report.json"));
  (void)again;
}

TEST_CASE("generate is deterministic and loadable") {
  const auto dir = scratch("generate");
  json cfg = {{"kind", "step_image"}, {"rows", 8}, {"cols", 8}, {"noise", 0.1}, {"seed", 21},
              {"problem", {{"kind", "tv_denoise"}, {"lambda", 0.1}}}};
  std::ofstream(dir / "gen.json") << cfg.dump();
  REQUIRE(run_cmd("generate", dir / "gen.json", dir / "a").code == cli::ok);
  REQUIRE(run_cmd("generate", dir / "gen.json", dir / "b").code == cli::ok);
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    CAPTURE(e.path().filename().string());
    CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));
  }

  json solve = {{"problem", {{"kind", "tv_denoise"}, {"fixture", (dir / "a").string()}}},
                {"recipe", "cp"},
                {"solver", {{"max_iter", 200}}}};
  CHECK(run_json("solve", solve, dir).code == cli::ok);

  cfg["kind"] = "fractal";
  std::ofstream(dir / "gen.json") << cfg.dump();
  CHECK(run_cmd("generate", dir / "gen.json", dir / "c").code == cli::config_error);
}

TEST_CASE("compare recipes") {
  const auto dir = scratch("compare");
  auto r = run_cmd("compare", source_dir() / "configs/compare_lasso.json", dir / "lasso");
  CHECK(r.code == cli::ok);
  const auto rows = read_csv(dir / "lasso/comparison.csv");
  REQUIRE(rows.size() > 10);
  CHECK(rows[0] == std::vector<std::string>{"n", "fb", "fista", "gap_to_best"});
  // FISTA stays below FB from n = 5 while FB is still far from the optimum.
  // Once FB is within 1e-8 it converges linearly on this full-rank instance
  // and the oscillating FISTA column can sit above it by ~1e-9.
  const double Jstar =
      read_json(source_dir() / "fixtures/lasso/manifest.json")["expected"]["objective"];
  int compared = 0;
  for (std::size_t i = 5; i < rows.size(); ++i) {
    if (rows[i][1].empty() || rows[i][2].empty()) continue;
    const double fb = std::stod(rows[i][1]), fista = std::stod(rows[i][2]);
    if (fb - Jstar <= 1e-8) break;
    CAPTURE(i);
    CHECK(fista <= fb);
    ++compared;
  }
  CHECK(compared > 50);

  json single = {{"problem", {{"kind", "lasso"}, {"fixture", "lasso"}}},
                 {"recipes", {"fb"}},
                 {"solver", {{"max_iter", 20}}}};
  r = run_json("compare", single, dir);
  CHECK(r.code == cli::ok);
  const auto one = read_csv(dir / "out/comparison.csv");
  CHECK(one[0] == std::vector<std::string>{"n", "fb", "gap_to_best"});
  CHECK(one.size() == 21);

  r = run_cmd("compare", source_dir() / "configs/compare_tv_denoise.json", dir / "tv");
  CHECK(r.code == cli::ok);
}

TEST_CASE("serialization helpers") {
  CHECK(cli::format_double(0.1) == "0.10000000000000001");
  CHECK(cli::format_double(std::nan("")) == "nan");
  CHECK(cli::format_double(-INFINITY) == "-inf");
  SolverTrace t;
  t.push(1.5, 0.25);
  t.set_extra("gamma", 0.5);
  t.push(1.0, 0.125);
  t.set_extra("gamma", 0.5);
  std::ostringstream os;
  cli::write_trace_csv(t, os);
  CHECK(os.str() == "n,objective,residual,gamma\n1,1.5,0.25,0.5\n2,1,0.125,0.5\n");
}

TEST_CASE("tool binary exit codes") {
  const char* tool = std::getenv("PROXSPLIT_TOOL");
  if (!tool) return;
  const auto dir = scratch("tool");
  const std::string base = std::string("\"") + tool + "\" ";
  auto status = [](const std::string& cmd) {
    const int s = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  CHECK(status(base + "frobnicate x.json") == 1);
  CHECK(status(base + "solve") == 1);
  CHECK(status(base + "certify " + (source_dir() / "configs/certify_controls.json").string() +
               " --out " + (dir / "c").string()) == 3);
  CHECK(status(base + "certify " + (source_dir() / "configs/certify_equivalence.json").string() +
               " --out " + (dir / "e").string() + " --seed 3") == 0);
}
