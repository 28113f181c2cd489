#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "proxsplit/certify.hpp"
#include "proxsplit/funcs.hpp"
#include "proxsplit/linops.hpp"
#include "proxsplit/solvers.hpp"

namespace proxsplit {

struct RecipeResult {
  std::string recipe;
  SolverTrace trace;
  Vector x;           // primal solution
  double objective;   // primal objective at x
};

using Recipe = std::function<RecipeResult(const SolverConfig&)>;

/// A problem with one primal objective and several solver recipes. Every
/// recipe reports its solution in the primal space.
struct ProblemInstance {
  std::string name;
  Index dim = 0;
  std::function<double(const Vector&)> objective;
  std::map<std::string, Recipe> recipes;
  std::map<std::string, double> metadata;
  std::vector<std::string> warnings;
  std::optional<Optimum> reference;
  Vector x0;

  std::vector<std::string> recipe_names() const;
  /// Throws ConfigError naming the available recipes.
  RecipeResult run(const std::string& recipe, const SolverConfig& cfg) const;
};

/// (1/2)|A x - y|^2 + lambda |x|_1. Recipes: fb, fista, fista_beta, vfista,
/// dr, cp. vfista needs `alpha`, the strong convexity modulus of the data
/// term; it is never inferred from |A|.
ProblemInstance build_lasso(const LinearOperator& A, const Vector& y,
                            double lambda, std::optional<double> alpha = {});

/// (1/2)|x - y|^2 + lambda |grad x|_1 (anisotropic). Recipes: dr (extended
/// variable (x, z) with z = grad x), ppxa, cp, dual_fb, condat.
ProblemInstance build_tv_denoise(const ImageGrid& y, double lambda);

/// (1/2)|A x - y|^2 + lambda |grad x|_1 on a rows x cols grid. Recipes:
/// condat, cp (K = [A; grad]).
ProblemInstance build_tv_inverse(const LinearOperator& A, const Vector& y,
                                 Index rows, Index cols, double lambda,
                                 Boundary boundary = Boundary::neumann);

/// |x - y|_1 + lambda |grad x|_1. Recipes: cp, dr (extended variable).
ProblemInstance build_tvl1(const ImageGrid& y, double lambda);

/// (1/2)|grad x - v|^2 restricted to gradient entries of pixels in omega,
/// subject to x = target outside omega. Recipe: projected_gradient.
ProblemInstance build_poisson_editing(const Vector& source_grad,
                                      const ImageGrid& target,
                                      const std::vector<bool>& omega);

/// (1/2)|A x - y|^2 + lambda |T x|_1 for orthogonal T. Recipes: fb, fista.
ProblemInstance build_wavelet_reg(const LinearOperator& A, const Vector& y,
                                  double lambda, const LinearOperator& T);

/// Orthonormal multilevel Haar transform on R^n, n a power of two.
LinearOperator haar_operator(Index n);

/// Agreement of recipe objectives: max over recipes of
/// (J_recipe - J_best) / max(1, |J_best|).
struct Agreement {
  std::map<std::string, double> objectives;
  double best = 0.0;
  double worst_relative = 0.0;
};
Agreement compare_recipes(const std::vector<RecipeResult>& results);

// ---- synthetic data ---------------------------------------------------------

enum class SyntheticKind { step_image, ramp, sparse_vector, blur_kernel, mask_pattern };
SyntheticKind parse_synthetic_kind(const std::string& s);
std::string to_string(SyntheticKind k);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::step_image;
  Index rows = 8;
  Index cols = 8;
  double noise = 0.0;
  std::uint64_t seed = 0;
  double density = 0.1;     // sparse_vector
  Index measurements = 0;   // sparse_vector; 0 means rows
  double keep = 0.5;        // mask_pattern
};

/// Ground truth, operator data, and observation. For images, truth and
/// observed are row-major grids; for sparse_vector the operator is a
/// Gaussian matrix with entries N(0, 1/m) and truth has length rows * cols.
struct SyntheticData {
  SyntheticSpec spec;
  Vector truth;
  Vector observed;
  std::optional<Matrix> matrix;          // sparse_vector
  std::optional<Matrix> kernel;          // blur_kernel
  std::optional<std::vector<bool>> mask; // mask_pattern
  /// The forward operator (identity for step_image and ramp).
  LinearOperator forward() const;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// ---- image and fixture IO ---------------------------------------------------

/// Binary PGM (P5, maxval <= 255), pixels scaled to [0, 1].
ImageGrid read_pgm(const std::filesystem::path& path);
/// Pixels are clamped to [0, 1] and quantized to 255 levels.
void write_pgm(const std::filesystem::path& path, const ImageGrid& img);
/// One image row per line, comma separated, written with 17 significant digits.
ImageGrid read_csv_grid(const std::filesystem::path& path);
void write_csv_grid(const std::filesystem::path& path, const ImageGrid& img);

struct Fixture {
  std::filesystem::path dir;
  nlohmann::json manifest;
  SyntheticData data;
};

/// Writes manifest.json and CSV payloads. `extra` is merged into the
/// manifest (problem parameters, expected objectives).
void write_fixture(const std::filesystem::path& dir, const SyntheticData& data,
                   const nlohmann::json& extra = nlohmann::json::object());
Fixture load_fixture(const std::filesystem::path& dir);

/// PROXSPLIT_FIXTURES if set, otherwise `fallback`.
std::filesystem::path fixture_root(const std::filesystem::path& fallback);

}  // namespace proxsplit
