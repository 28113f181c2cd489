#include "proxsplit/cg.hpp"

#include <cmath>

#include "proxsplit/errors.hpp"

namespace proxsplit {

CgResult conjugate_gradient(const std::function<Vector(const Vector&)>& map,
                            const Vector& rhs, const Vector& x0, double tol,
                            int max_iter) {
  if (rhs.size() != x0.size())
    throw DimensionError("cg: rhs length " + std::to_string(rhs.size()) +
                         " vs start length " + std::to_string(x0.size()));
  if (max_iter < 0) max_iter = static_cast<int>(10 * rhs.size());
  CgResult res;
  res.x = x0;
  Vector r = rhs - map(res.x);
  double rr = r.squaredNorm();
  res.residual = std::sqrt(rr);
  if (res.residual <= tol) return res;
  Vector p = r;
  for (int k = 1; k <= max_iter; ++k) {
    const Vector ap = map(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) {
      // Semidefinite direction with nonzero residual: cannot progress.
      throw SolverError("cg: non-positive curvature", res.residual);
    }
    const double alpha = rr / pap;
    res.x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    res.iterations = k;
    res.residual = std::sqrt(rr_next);
    if (res.residual <= tol) return res;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  // Recompute the true residual; the recursive one drifts.
  res.residual = (rhs - map(res.x)).norm();
  if (res.residual <= tol) return res;
  throw SolverError("cg: no convergence after " + std::to_string(max_iter) +
                        " iterations, residual " + std::to_string(res.residual),
                    res.residual);
}

CgResult solve_normal(const LinearOperator& A, double shift, double c,
                      const Vector& rhs, const Vector& x0, double tol) {
  auto map = [&](const Vector& v) -> Vector {
    return shift * v + c * A.adjoint_apply(A.apply(v));
  };
  return conjugate_gradient(map, rhs, x0, tol);
}

}  // namespace proxsplit
