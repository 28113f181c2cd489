#pragma once

#include <functional>

#include "proxsplit/linops.hpp"

namespace proxsplit {

struct CgResult {
  Vector x;
  int iterations = 0;
  double residual = 0.0;
};

/// Conjugate gradient for a symmetric positive (semi)definite map.
/// Stops at absolute residual `tol`; throws SolverError carrying the final
/// residual after `max_iter` iterations (default 10 * dim).
CgResult conjugate_gradient(const std::function<Vector(const Vector&)>& map,
                            const Vector& rhs, const Vector& x0,
                            double tol = 1e-10, int max_iter = -1);

/// Solves (shift * Id + c * A*A) p = rhs.
CgResult solve_normal(const LinearOperator& A, double shift, double c,
                      const Vector& rhs, const Vector& x0, double tol = 1e-10);

}  // namespace proxsplit
