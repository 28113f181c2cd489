#include "proxsplit/trace.hpp"

#include <cmath>

#include "proxsplit/errors.hpp"

namespace proxsplit {

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::tol_reached: return "tol_reached";
    case Termination::iter_cap: return "iter_cap";
    case Termination::diverged: return "diverged";
  }
  return "unknown";
}

std::string_view to_string(Inertia m) {
  switch (m) {
    case Inertia::none: return "none";
    case Inertia::fista_t: return "fista_t";
    case Inertia::fista_beta: return "fista_beta";
    case Inertia::vfista: return "vfista";
  }
  return "unknown";
}

Inertia parse_inertia(std::string_view s) {
  if (s == "none") return Inertia::none;
  if (s == "fista_t") return Inertia::fista_t;
  if (s == "fista_beta") return Inertia::fista_beta;
  if (s == "vfista") return Inertia::vfista;
  throw ConfigError("unknown inertia mode '" + std::string(s) + "'");
}

void SolverConfig::validate() const {
  auto positive = [](const std::optional<double>& v, const char* name) {
    if (v && (!(*v > 0.0) || !std::isfinite(*v)))
      throw ConfigError(std::string(name) + " must be > 0");
  };
  positive(gamma, "gamma");
  positive(sigma, "sigma");
  positive(tau, "tau");
  if (inertia == Inertia::fista_beta && !(beta > 3.0))
    throw ConfigError("fista_beta needs beta > 3");
  if (max_iter < 0) throw ConfigError("max_iter must be >= 0");
  if (residual_tol < 0.0 || objective_tol < 0.0)
    throw ConfigError("tolerances must be >= 0");
  if (thin < 0) throw ConfigError("thin must be >= 0");
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in (0, 1]");
  if (!(backtrack_gamma0 > 0.0))
    throw ConfigError("backtracking initial step must be > 0");
  if (!(backtrack_shrink > 0.0 && backtrack_shrink < 1.0))
    throw ConfigError("backtracking shrink must lie in (0, 1)");
  if (relaxation && !(relaxation->value >= 0.0))
    throw ConfigError("relaxation must be >= 0");
}

void SolverTrace::push(double obj, double res) {
  objective.push_back(obj);
  residual.push_back(res);
}

void SolverTrace::set_extra(const std::string& name, double value) {
  if (objective.empty()) throw ConfigError("set_extra before any record");
  for (auto& [n, col] : extras_) {
    if (n == name) {
      col.resize(objective.size(), std::numeric_limits<double>::quiet_NaN());
      col.back() = value;
      return;
    }
  }
  std::vector<double> col(objective.size(),
                          std::numeric_limits<double>::quiet_NaN());
  col.back() = value;
  extras_.emplace_back(name, std::move(col));
}

bool SolverTrace::has_column(std::string_view name) const {
  if (name == "objective" || name == "residual") return true;
  for (const auto& [n, col] : extras_)
    if (n == name) return true;
  return false;
}

const std::vector<double>& SolverTrace::column(std::string_view name) const {
  if (name == "objective") return objective;
  if (name == "residual") return residual;
  for (const auto& [n, col] : extras_)
    if (n == name) return col;
  throw ConfigError("trace has no column '" + std::string(name) + "'");
}

const Vector& SolverTrace::solution() const { return final_vector("x"); }

const Vector& SolverTrace::final_vector(const std::string& name) const {
  auto it = final_vectors.find(name);
  if (it == final_vectors.end())
    throw ConfigError("trace has no final vector '" + name + "'");
  return it->second;
}

}  // namespace proxsplit
