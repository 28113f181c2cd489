#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "proxsplit/linops.hpp"

namespace proxsplit {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// (lambda/2) |A x - b|^2, kept alongside functions built by make_quadratic.
struct QuadraticData {
  LinearOperator A;
  Vector b;
  double lambda = 1.0;
};

struct SmoothFn {
  std::string name;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  double lipschitz = 0.0;
  std::optional<double> strong_convexity;
  bool convex = true;
  std::optional<QuadraticData> quadratic;

  double eval(const Vector& x) const { return value(x); }
  Vector grad(const Vector& x) const { return gradient(x); }
};

/// argmin over lo <= z <= hi of phi(z) + <c, z>.
using BoxLinearArgmin =
    std::function<Vector(const Vector& c, const Vector& lo, const Vector& hi)>;

struct ProxFn {
  std::string name;
  std::function<double(const Vector&)> value;  // may return kInf
  std::function<Vector(const Vector&, double)> prox_map;
  std::optional<double> strong_convexity;
  std::optional<double> weak_convexity;
  bool convex = true;
  Index dim = 0;  // 0: any length

  // Optional structure. Empty when not available for this function.
  std::function<Vector(Index n)> minimizer;  // some minimizer of length n
  std::function<double(const Vector&)> conjugate_value;
  // prox_{gamma f*} by a closed form that does not go through prox_map.
  std::function<Vector(const Vector&, double)> conjugate_prox;
  BoxLinearArgmin box_argmin;
  BoxLinearArgmin conjugate_box_argmin;
  std::optional<QuadraticData> quadratic;

  double eval(const Vector& x) const;
  /// prox_{gamma f}(x). Validates gamma > 0 and the input length.
  Vector prox(const Vector& x, double gamma) const;
};

// ---- smooth functions ------------------------------------------------------

struct Quadratic {
  SmoothFn smooth;
  ProxFn prox;
};

/// f(x) = (lambda/2) |A x - b|^2 as a smooth oracle and a prox oracle.
/// `alpha` overrides the strong convexity modulus; it is inferred only when
/// A is diagonal (identity, scale, mask).
Quadratic make_quadratic(const LinearOperator& A, const Vector& b,
                         double lambda, std::optional<double> alpha = {});

SmoothFn zero_smooth();

/// f(x) = sum (x_i^2 - 1)^2 / 4. Nonconvex; `lipschitz` is a declared bound
/// that holds on |x_i| <= sqrt((L + 1) / 3).
SmoothFn double_well(double lipschitz = 3.32);

// ---- prox catalogue ---------------------------------------------------------

/// Componentwise soft threshold at t.
Vector soft_threshold(const Vector& x, double t);

ProxFn zero_function();
/// lambda * |x|_1.
ProxFn l1_norm(double lambda);
/// (lambda/2) |x - y|^2.
ProxFn sq_distance(const Vector& y, double lambda = 1.0);
/// Indicator of [lo, hi] (componentwise, same bounds everywhere).
ProxFn box(double lo, double hi);
/// Indicator of prod [lo_i, hi_i]; infinite bounds allowed.
ProxFn box(const Vector& lo, const Vector& hi);
/// Indicator of {|x|_inf <= r}.
ProxFn linf_ball(double r);
/// Indicator of {(x1, x2) : x2 = K x1} on stacked vectors.
ProxFn affine_graph(const LinearOperator& K);
/// Indicator of {x_1 = ... = x_M} for M equal blocks.
ProxFn consensus(Index blocks);
/// lambda * |x - y|_1.
ProxFn l1_residual(const Vector& y, double lambda = 1.0);
/// lambda * #{i : x_i != 0}. Nonconvex; ties resolve to zero.
ProxFn hard_threshold(double lambda);

/// f*, with prox_{gamma f*}(x) = x - gamma prox_{f/gamma}(x / gamma).
ProxFn conjugate(const ProxFn& f);
Vector prox_conjugate(const ProxFn& f, const Vector& x, double gamma);

struct Block {
  ProxFn fn;
  std::vector<Index> indices;
};
/// Contiguous indices [offset, offset + len).
std::vector<Index> index_range(Index offset, Index len);
/// Sum of f_k(x restricted to block k). Blocks must partition 0..n-1.
ProxFn separable(std::vector<Block> parts);

/// x -> inner(T x) for orthogonal T, prox = T* inner.prox(T x).
ProxFn composed_orthogonal(const LinearOperator& T, const ProxFn& inner,
                           std::uint64_t seed = 0);

/// x -> f(K x). Supported when K is a scalar multiple of the identity or f
/// carries quadratic data.
ProxFn compose_with(const ProxFn& f, const LinearOperator& K);

/// min_{x in E} max_{y in F} <K x, y> - f*(y) + g(x).
struct SaddleProblem {
  ProxFn f_star;
  ProxFn g;
  LinearOperator K;
  std::optional<ProxFn> f_primal;

  double lagrangian(const Vector& x, const Vector& y) const;
  /// f(K x) + g(x); needs f_primal.
  double primal_objective(const Vector& x) const;
};

}  // namespace proxsplit
