#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "proxsplit/funcs.hpp"
#include "proxsplit/trace.hpp"

namespace proxsplit {

using VectorMap = std::function<Vector(const Vector&)>;

enum class GdMode { fixed, backtracking, optimal_quadratic };

/// Default step 1/L. Fixed mode needs gamma < 2/L.
SolverTrace gradient_descent(const SmoothFn& f, const Vector& x0,
                             const SolverConfig& cfg,
                             GdMode mode = GdMode::fixed);

/// x_{n+1} = Proj_C(x_n - gamma grad f(x_n)); C given as an indicator prox.
SolverTrace projected_gradient(const SmoothFn& f, const ProxFn& C,
                               const Vector& x0, const SolverConfig& cfg);

/// x_{n+1} = prox_{gamma g}(x_n). Column "decrease_margin" holds
/// g(x_n) - g(x_{n+1}) - |x_n - x_{n+1}|^2 / (2 gamma).
SolverTrace proximal_point(const ProxFn& g, const Vector& x0,
                           const SolverConfig& cfg);

/// Forward-Backward with optional inertia (cfg.inertia).
SolverTrace forward_backward(const SmoothFn& f, const ProxFn& g,
                             const Vector& x0, const SolverConfig& cfg);

/// Forward-Backward for nonconvex f and g with the sufficient-decrease and
/// relative-error monitors recorded per step. Throws SolverError when the
/// decrease margin drops below -1e-8.
SolverTrace nonconvex_forward_backward(const SmoothFn& f, const ProxFn& g,
                                       const Vector& x0,
                                       const SolverConfig& cfg);

/// x_{n+1} = x_n + lambda_n (T x_n - x_n); default lambda = 1/2.
SolverTrace krasnoselskii_mann(const VectorMap& T, const Vector& x0,
                               const SolverConfig& cfg);

/// y_n = prox_{gamma g}(x_n), z_n = prox_{gamma f}(2 y_n - x_n),
/// x_{n+1} = x_n + mu_n (z_n - y_n). The reported solution is y.
SolverTrace douglas_rachford(const ProxFn& f, const ProxFn& g,
                             const Vector& x0, const SolverConfig& cfg);

struct PpxaTerm {
  ProxFn fn;
  std::optional<LinearOperator> op;  // term is fn(op x); none means identity
};

/// Parallel proximal algorithm: Douglas-Rachford on the product space with
/// the consensus constraint. With operators the product-space variables are
/// (x, L_2 x, ...) and the projection solves (Id + sum L_i* L_i) p = rhs.
/// The first term must act on x directly.
SolverTrace ppxa(const std::vector<PpxaTerm>& terms, const Vector& x0,
                 const SolverConfig& cfg);

/// argmin_x f(x) + (gamma/2) |A x - v|^2.
using AdmmStep = std::function<Vector(const Vector& v, double gamma)>;

struct AdmmBlock {
  ProxFn fn;
  LinearOperator A;
  AdmmStep step;
};

/// Block whose step is a prox; requires A* A = c Id (checked on samples).
AdmmBlock admm_prox_block(const ProxFn& fn, const LinearOperator& A);
/// Block for fn carrying quadratic data; the step is solved by CG.
AdmmBlock admm_quadratic_block(const ProxFn& fn, const LinearOperator& A);

/// min f(x) + g(y) s.t. A x + B y = b. Extra column "primal_residual".
SolverTrace admm(const AdmmBlock& f, const AdmmBlock& g, const Vector& b,
                 const Vector& y0, const Vector& z0, const SolverConfig& cfg);

/// Primal-dual iteration with over-relaxation theta = 1. Final vectors "x",
/// "y", "x_avg", "y_avg" (ergodic means over n = 1..N). With cfg.gap_box the
/// column "gap" holds the partial gap of the ergodic means.
SolverTrace chambolle_pock(const SaddleProblem& prob, const Vector& x0,
                           const Vector& y0, const SolverConfig& cfg);
/// Same iteration without over-relaxation.
SolverTrace arrow_hurwicz(const SaddleProblem& prob, const Vector& x0,
                          const Vector& y0, const SolverConfig& cfg);

struct DualTerm {
  ProxFn h;  // primal-side function; its conjugate prox comes from Moreau
  LinearOperator L;
};

/// min f(x) + g(x) + sum h_i(L_i x). Order per step: primal then duals.
SolverTrace condat(const SmoothFn& f, const ProxFn& g,
                   const std::vector<DualTerm>& terms, const Vector& x0,
                   const std::vector<Vector>& u0, const SolverConfig& cfg);

namespace detail {
/// Chambolle-Pock without the tau*sigma*|K|^2 < 1 test. The DR equivalence
/// runs exactly on the boundary tau*sigma = 1 with K = Id.
SolverTrace chambolle_pock_unchecked(const SaddleProblem& prob,
                                     const Vector& x0, const Vector& y0,
                                     const SolverConfig& cfg);
}  // namespace detail

/// Partial primal-dual gap over the box; requires closed-form inner problems.
double partial_gap(const SaddleProblem& prob, const Vector& x, const Vector& y,
                   const GapBox& box);

}  // namespace proxsplit
