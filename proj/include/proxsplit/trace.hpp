#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "proxsplit/linops.hpp"

namespace proxsplit {

enum class Termination { tol_reached, iter_cap, diverged };
std::string_view to_string(Termination t);

enum class Inertia { none, fista_t, fista_beta, vfista };
std::string_view to_string(Inertia m);
Inertia parse_inertia(std::string_view s);

/// Relaxation sequence: constant c, or harmonic c / (n + 1) for n = 0, 1, ...
struct Relaxation {
  enum class Kind { constant, harmonic };
  Kind kind = Kind::constant;
  double value = 1.0;

  static Relaxation constant(double c) { return {Kind::constant, c}; }
  static Relaxation harmonic(double c) { return {Kind::harmonic, c}; }
  double at(int n) const {
    return kind == Kind::constant ? value : value / static_cast<double>(n + 1);
  }
};

/// Per-coordinate bounds of a box B1 x B2 used for partial gap evaluation.
struct GapBox {
  Vector x_lo, x_hi;
  Vector y_lo, y_hi;
};

struct SolverConfig {
  std::optional<double> gamma;
  std::optional<double> sigma;
  std::optional<double> tau;
  Inertia inertia = Inertia::none;
  double beta = 4.0;  // fista_beta; must exceed 3
  std::optional<Relaxation> relaxation;  // mu_n for DR, lambda_n for KM
  int max_iter = 1000;
  double residual_tol = 0.0;   // 0 disables
  double objective_tol = 0.0;  // 0 disables
  std::uint64_t seed = 0;
  int thin = 0;  // keep full iterates every `thin` steps; 0 keeps none
  double rho = 1.0;
  double backtrack_gamma0 = 1.0;
  double backtrack_shrink = 0.5;
  std::optional<GapBox> gap_box;

  void validate() const;
};

struct Snapshot {
  int n = 0;
  Vector x;
  std::map<std::string, Vector> aux;
};

/// Per-iteration record stream. Record k (0-based) describes iterate
/// n = k + 1: objective J(x_n) and residual |x_n - x_{n-1}|.
class SolverTrace {
 public:
  std::string algorithm;
  double initial_objective = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> objective;
  std::vector<double> residual;
  std::vector<Snapshot> snapshots;
  std::map<std::string, Vector> final_vectors;
  std::map<std::string, double> summary;
  Termination termination = Termination::iter_cap;
  std::string message;

  std::size_t size() const { return objective.size(); }

  /// Appends a record; extras set afterwards attach to it.
  void push(double obj, double res);
  /// Sets column `name` for the latest record (earlier rows get NaN).
  void set_extra(const std::string& name, double value);
  bool has_column(std::string_view name) const;
  const std::vector<double>& column(std::string_view name) const;
  const std::vector<std::pair<std::string, std::vector<double>>>& extras() const {
    return extras_;
  }

  const Vector& solution() const;
  const Vector& final_vector(const std::string& name) const;

 private:
  std::vector<std::pair<std::string, std::vector<double>>> extras_;
};

}  // namespace proxsplit
