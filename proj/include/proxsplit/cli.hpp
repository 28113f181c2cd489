#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "proxsplit/certify.hpp"
#include "proxsplit/funcs.hpp"
#include "proxsplit/problems.hpp"
#include "proxsplit/solvers.hpp"

namespace proxsplit::cli {

enum ExitCode : int { ok = 0, config_error = 1, diverged = 2, certification_failure = 3 };

struct Options {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
};

/// Dispatches solve | certify | compare | generate. Never throws; errors are
/// printed to `err` and mapped to exit codes.
int run(const std::string& command, const Options& opt, std::ostream& out,
        std::ostream& err);

int cmd_solve(const Options& opt, std::ostream& out);
int cmd_certify(const Options& opt, std::ostream& out);
int cmd_compare(const Options& opt, std::ostream& out);
int cmd_generate(const Options& opt, std::ostream& out);

// ---- serialization ---------------------------------------------------------

/// "%.17g"; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

/// Header "n,objective,residual[,extras...]"; one row per record, n from 1.
void write_trace_csv(const SolverTrace& trace, std::ostream& os);
void write_trace_csv(const SolverTrace& trace, const std::filesystem::path& path);

/// Column-aligned objectives, n from 1, plus gap_to_best: the smallest
/// objective in the row minus the best final objective. Shorter runs leave
/// empty cells.
void write_comparison_csv(const std::vector<RecipeResult>& results,
                          const std::filesystem::path& path);

nlohmann::json to_json(const SolverConfig& cfg);

// ---- config parsing ----------------------------------------------------------

/// Reads the "solver" object; unknown or mistyped fields raise ConfigError
/// naming the field path.
SolverConfig parse_solver_config(const nlohmann::json& j, const std::string& path);

LinearOperator parse_operator(const nlohmann::json& j, const std::string& path);
SmoothFn parse_smooth(const nlohmann::json& j, const std::string& path);
ProxFn parse_prox(const nlohmann::json& j, const std::string& path);

/// Builds the instance described by a "problem" object. Relative fixture
/// paths resolve against fixture_root(default root).
struct LoadedProblem {
  ProblemInstance instance;
  std::optional<Fixture> fixture;
  std::optional<double> expected_objective;
  std::optional<Vector> expected_x;
};
LoadedProblem load_problem(const nlohmann::json& j, const std::string& path,
                           std::uint64_t seed);

/// Default fixture root compiled into the binary.
std::filesystem::path default_fixture_root();

}  // namespace proxsplit::cli
