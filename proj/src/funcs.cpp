#include "proxsplit/funcs.hpp"

#include <algorithm>
#include <cmath>

#include "proxsplit/cg.hpp"
#include "proxsplit/errors.hpp"
#include "proxsplit/random.hpp"

namespace proxsplit {

namespace {

// Relative slack for membership tests of indicator functions. Averages of
// feasible points can leave the set by a few ulps.
constexpr double kMemberTol = 1e-12;

void check_gamma(double gamma, const std::string& who) {
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw ConfigError(who + ": step must be a positive finite number");
}

void check_len(const ProxFn& f, const Vector& x) {
  if (f.dim > 0 && x.size() != f.dim)
    throw DimensionError(f.name + ": expects length " + std::to_string(f.dim) +
                         ", got " + std::to_string(x.size()));
}

double clamp(double v, double lo, double hi) {
  return std::min(std::max(v, lo), hi);
}

// Endpoint minimizing c * z over [lo, hi].
double linear_end(double c, double lo, double hi) {
  if (lo > hi) throw ConfigError("empty interval in box minimization");
  double z = c > 0.0 ? lo : (c < 0.0 ? hi : clamp(0.0, lo, hi));
  if (!std::isfinite(z)) throw ConfigError("box minimization is unbounded");
  return z;
}

// Best of a few candidates for a convex piecewise-linear scalar function.
template <class Phi>
double best_candidate(std::initializer_list<double> cands, Phi phi) {
  double best = *cands.begin();
  double bv = phi(best);
  for (double z : cands) {
    if (!std::isfinite(z)) throw ConfigError("box minimization is unbounded");
    const double v = phi(z);
    if (v < bv) {
      bv = v;
      best = z;
    }
  }
  return best;
}

void check_box_args(const Vector& c, const Vector& lo, const Vector& hi) {
  if (lo.size() != c.size() || hi.size() != c.size())
    throw DimensionError("box minimization: bound lengths " +
                         std::to_string(lo.size()) + "/" +
                         std::to_string(hi.size()) + " vs " +
                         std::to_string(c.size()));
}

// (lambda/2) sum (d_i x_i - b_i)^2, the diagonal case of make_quadratic.
ProxFn diagonal_quadratic(const Vector& d, const Vector& b, double lambda,
                          std::string name) {
  ProxFn f;
  f.name = std::move(name);
  f.dim = d.size();
  f.value = [d, b, lambda](const Vector& x) {
    return 0.5 * lambda * (d.cwiseProduct(x) - b).squaredNorm();
  };
  f.prox_map = [d, b, lambda](const Vector& x, double gamma) {
    const double gl = gamma * lambda;
    Vector p(x.size());
    for (Index i = 0; i < x.size(); ++i)
      p[i] = (x[i] + gl * d[i] * b[i]) / (1.0 + gl * d[i] * d[i]);
    return p;
  };
  const double dmin = d.cwiseAbs().minCoeff();
  f.strong_convexity = lambda * dmin * dmin;
  if (dmin > 0.0)
    f.minimizer = [d, b](Index) -> Vector { return b.cwiseQuotient(d); };
  f.conjugate_value = [d, b, lambda](const Vector& u) {
    double s = 0.0;
    for (Index i = 0; i < u.size(); ++i) {
      if (d[i] != 0.0) {
        s += u[i] * b[i] / d[i] + u[i] * u[i] / (2.0 * lambda * d[i] * d[i]);
      } else {
        if (std::abs(u[i]) > kMemberTol) return kInf;
        s -= 0.5 * lambda * b[i] * b[i];
      }
    }
    return s;
  };
  f.conjugate_prox = [d, b, lambda](const Vector& x, double gamma) {
    Vector u = Vector::Zero(x.size());
    for (Index i = 0; i < x.size(); ++i)
      if (d[i] != 0.0) {
        const double a = lambda * d[i] * d[i];
        u[i] = (x[i] - gamma * b[i] / d[i]) * a / (a + gamma);
      }
    return u;
  };
  f.box_argmin = [d, b, lambda](const Vector& c, const Vector& lo,
                                const Vector& hi) {
    check_box_args(c, lo, hi);
    Vector z(c.size());
    for (Index i = 0; i < c.size(); ++i) {
      if (d[i] != 0.0)
        z[i] = clamp(b[i] / d[i] - c[i] / (lambda * d[i] * d[i]), lo[i], hi[i]);
      else
        z[i] = linear_end(c[i], lo[i], hi[i]);
    }
    return z;
  };
  f.conjugate_box_argmin = [d, b, lambda](const Vector& c, const Vector& lo,
                                          const Vector& hi) {
    check_box_args(c, lo, hi);
    Vector u(c.size());
    for (Index i = 0; i < c.size(); ++i) {
      if (d[i] != 0.0) {
        u[i] = clamp(-lambda * d[i] * (b[i] + c[i] * d[i]), lo[i], hi[i]);
      } else {
        if (lo[i] > 0.0 || hi[i] < 0.0)
          throw ConfigError("box excludes the conjugate domain");
        u[i] = 0.0;
      }
    }
    return u;
  };
  return f;
}

std::optional<Vector> diagonal_of(const LinearOperator& A) {
  if (A.in_dim() != A.out_dim()) return std::nullopt;
  if (auto c = A.scalar()) return Vector::Constant(A.in_dim(), *c);
  if (const Vector* w = A.mask_weights()) return *w;
  if (const Matrix* m = A.matrix()) {
    Matrix off = *m;
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() == 0.0) return Vector(m->diagonal());
  }
  return std::nullopt;
}

// Support function of prod [lo_i, hi_i] evaluated coordinatewise.
double support_term(double u, double lo, double hi) {
  if (u > 0.0) return u * hi;
  if (u < 0.0) return u * lo;
  return 0.0;
}

ProxFn make_box(Vector lo, Vector hi, bool broadcast, std::string name) {
  if (lo.size() != hi.size())
    throw DimensionError("box bounds have lengths " + std::to_string(lo.size()) +
                         " and " + std::to_string(hi.size()));
  for (Index i = 0; i < lo.size(); ++i)
    if (std::isnan(lo[i]) || std::isnan(hi[i]) || lo[i] > hi[i])
      throw ConfigError("box needs lo <= hi");
  ProxFn f;
  f.name = std::move(name);
  f.dim = broadcast ? 0 : lo.size();
  auto L = [lo, broadcast](Index i) { return broadcast ? lo[0] : lo[i]; };
  auto H = [hi, broadcast](Index i) { return broadcast ? hi[0] : hi[i]; };
  f.value = [L, H](const Vector& x) {
    for (Index i = 0; i < x.size(); ++i) {
      const double tol = kMemberTol * (1.0 + std::abs(x[i]));
      if (x[i] < L(i) - tol || x[i] > H(i) + tol) return kInf;
    }
    return 0.0;
  };
  f.prox_map = [L, H](const Vector& x, double) {
    Vector p(x.size());
    for (Index i = 0; i < x.size(); ++i) p[i] = clamp(x[i], L(i), H(i));
    return p;
  };
  f.minimizer = [L, H](Index n) {
    Vector p(n);
    for (Index i = 0; i < n; ++i) p[i] = clamp(0.0, L(i), H(i));
    return p;
  };
  f.conjugate_value = [L, H](const Vector& u) {
    double s = 0.0;
    for (Index i = 0; i < u.size(); ++i) s += support_term(u[i], L(i), H(i));
    return s;
  };
  f.conjugate_prox = [L, H](const Vector& x, double gamma) {
    Vector u(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      const double up = x[i] - gamma * H(i), dn = x[i] - gamma * L(i);
      u[i] = up > 0.0 ? up : (dn < 0.0 ? dn : 0.0);
    }
    return u;
  };
  f.box_argmin = [L, H](const Vector& c, const Vector& lo2, const Vector& hi2) {
    check_box_args(c, lo2, hi2);
    Vector z(c.size());
    for (Index i = 0; i < c.size(); ++i)
      z[i] = linear_end(c[i], std::max(L(i), lo2[i]), std::min(H(i), hi2[i]));
    return z;
  };
  f.conjugate_box_argmin = [L, H](const Vector& c, const Vector& lo2,
                                  const Vector& hi2) {
    check_box_args(c, lo2, hi2);
    Vector u(c.size());
    for (Index i = 0; i < c.size(); ++i) {
      const double l = L(i), h = H(i), ci = c[i];
      u[i] = best_candidate({lo2[i], hi2[i], clamp(0.0, lo2[i], hi2[i])},
                            [&](double z) { return support_term(z, l, h) + ci * z; });
    }
    return u;
  };
  return f;
}

}  // namespace

double ProxFn::eval(const Vector& x) const {
  check_len(*this, x);
  return value(x);
}

Vector ProxFn::prox(const Vector& x, double gamma) const {
  check_gamma(gamma, name);
  check_len(*this, x);
  return prox_map(x, gamma);
}

Quadratic make_quadratic(const LinearOperator& A, const Vector& b,
                         double lambda, std::optional<double> alpha) {
  if (b.size() != A.out_dim())
    throw DimensionError("quadratic: b has length " + std::to_string(b.size()) +
                         ", operator output is " + std::to_string(A.out_dim()));
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ConfigError("quadratic: scale must be > 0");
  require_finite(b, "quadratic b");
  Quadratic q;
  const QuadraticData data{A, b, lambda};
  const auto diag = diagonal_of(A);

  SmoothFn& s = q.smooth;
  s.name = "quadratic";
  s.quadratic = data;
  s.value = [A, b, lambda](const Vector& x) {
    return 0.5 * lambda * (A.apply(x) - b).squaredNorm();
  };
  s.gradient = [A, b, lambda](const Vector& x) -> Vector {
    return lambda * A.adjoint_apply(A.apply(x) - b);
  };
  if (diag) {
    const double dmax = diag->cwiseAbs().maxCoeff();
    const double dmin = diag->cwiseAbs().minCoeff();
    s.lipschitz = lambda * dmax * dmax;
    s.strong_convexity = lambda * dmin * dmin;
  } else {
    LinearOperator copy = A;
    const double n = operator_norm(copy, 1e-12).value;
    s.lipschitz = lambda * n * n;
  }
  if (alpha) {
    if (*alpha < 0.0) throw ConfigError("quadratic: alpha must be >= 0");
    s.strong_convexity = *alpha;
  }

  if (diag) {
    q.prox = diagonal_quadratic(*diag, b, lambda, "quadratic");
  } else {
    ProxFn& f = q.prox;
    f.name = "quadratic";
    f.dim = A.in_dim();
    f.value = s.value;
    f.prox_map = [A, b, lambda](const Vector& x, double gamma) {
      const double gl = gamma * lambda;
      const Vector rhs = x + gl * A.adjoint_apply(b);
      return solve_normal(A, 1.0, gl, rhs, x).x;
    };
  }
  q.prox.quadratic = data;
  if (alpha) q.prox.strong_convexity = *alpha;
  return q;
}

SmoothFn zero_smooth() {
  SmoothFn s;
  s.name = "zero";
  s.value = [](const Vector&) { return 0.0; };
  s.gradient = [](const Vector& x) -> Vector { return Vector::Zero(x.size()); };
  s.lipschitz = 0.0;
  return s;
}

SmoothFn double_well(double lipschitz) {
  SmoothFn s;
  s.name = "double_well";
  s.convex = false;
  s.lipschitz = lipschitz;
  s.value = [](const Vector& x) {
    double v = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
      const double t = x[i] * x[i] - 1.0;
      v += 0.25 * t * t;
    }
    return v;
  };
  s.gradient = [](const Vector& x) -> Vector {
    return x.array() * (x.array().square() - 1.0);
  };
  return s;
}

Vector soft_threshold(const Vector& x, double t) {
  Vector p(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double a = std::abs(x[i]) - t;
    p[i] = a > 0.0 ? std::copysign(a, x[i]) : 0.0;
  }
  return p;
}

ProxFn zero_function() {
  ProxFn f;
  f.name = "zero";
  f.value = [](const Vector&) { return 0.0; };
  f.prox_map = [](const Vector& x, double) { return x; };
  f.minimizer = [](Index n) -> Vector { return Vector::Zero(n); };
  f.conjugate_value = [](const Vector& u) {
    return u.cwiseAbs().maxCoeff() <= kMemberTol ? 0.0 : kInf;
  };
  f.conjugate_prox = [](const Vector& x, double) -> Vector {
    return Vector::Zero(x.size());
  };
  f.box_argmin = [](const Vector& c, const Vector& lo, const Vector& hi) {
    check_box_args(c, lo, hi);
    Vector z(c.size());
    for (Index i = 0; i < c.size(); ++i) z[i] = linear_end(c[i], lo[i], hi[i]);
    return z;
  };
  f.conjugate_box_argmin = [](const Vector& c, const Vector& lo,
                              const Vector& hi) {
    check_box_args(c, lo, hi);
    if ((lo.array() > 0.0).any() || (hi.array() < 0.0).any())
      throw ConfigError("box excludes the conjugate domain");
    return Vector::Zero(c.size()).eval();
  };
  return f;
}

ProxFn l1_norm(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ConfigError("l1: weight must be >= 0");
  ProxFn f;
  f.name = "l1";
  f.value = [lambda](const Vector& x) { return lambda * x.lpNorm<1>(); };
  f.prox_map = [lambda](const Vector& x, double gamma) {
    return soft_threshold(x, lambda * gamma);
  };
  f.minimizer = [](Index n) -> Vector { return Vector::Zero(n); };
  f.conjugate_value = [lambda](const Vector& u) {
    return u.cwiseAbs().maxCoeff() <= lambda * (1.0 + kMemberTol) + kMemberTol
               ? 0.0
               : kInf;
  };
  f.conjugate_prox = [lambda](const Vector& x, double) -> Vector {
    return x.cwiseMax(-lambda).cwiseMin(lambda);
  };
  f.box_argmin = [lambda](const Vector& c, const Vector& lo, const Vector& hi) {
    check_box_args(c, lo, hi);
    Vector z(c.size());
    for (Index i = 0; i < c.size(); ++i) {
      const double ci = c[i];
      z[i] = best_candidate({lo[i], hi[i], clamp(0.0, lo[i], hi[i])},
                            [&](double t) { return lambda * std::abs(t) + ci * t; });
    }
    return z;
  };
  f.conjugate_box_argmin = [lambda](const Vector& c, const Vector& lo,
                                    const Vector& hi) {
    check_box_args(c, lo, hi);
    Vector u(c.size());
    for (Index i = 0; i < c.size(); ++i)
      u[i] = linear_end(c[i], std::max(-lambda, lo[i]), std::min(lambda, hi[i]));
    return u;
  };
  return f;
}

ProxFn sq_distance(const Vector& y, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("sq_distance: scale must be > 0");
  require_finite(y, "sq_distance center");
  ProxFn f = diagonal_quadratic(Vector::Ones(y.size()), y, lambda, "sq_distance");
  f.quadratic = QuadraticData{LinearOperator::identity(y.size()), y, lambda};
  return f;
}

ProxFn box(double lo, double hi) {
  return make_box(Vector::Constant(1, lo), Vector::Constant(1, hi), true, "box");
}

ProxFn box(const Vector& lo, const Vector& hi) {
  return make_box(lo, hi, false, "box");
}

ProxFn linf_ball(double r) {
  if (!(r >= 0.0)) throw ConfigError("linf_ball: radius must be >= 0");
  return make_box(Vector::Constant(1, -r), Vector::Constant(1, r), true,
                  "linf_ball");
}

ProxFn affine_graph(const LinearOperator& K) {
  ProxFn f;
  f.name = "affine_graph";
  const Index n = K.in_dim(), m = K.out_dim();
  f.dim = n + m;
  f.value = [K, n, m](const Vector& x) {
    const Vector r = x.tail(m) - K.apply(x.head(n));
    return r.norm() <= 1e-8 * (1.0 + x.norm()) ? 0.0 : kInf;
  };
  f.prox_map = [K, n, m](const Vector& x, double) {
    const Vector x1 = x.head(n);
    const Vector rhs = x1 + K.adjoint_apply(x.tail(m));
    Vector p(n + m);
    p.head(n) = solve_normal(K, 1.0, 1.0, rhs, x1).x;
    p.tail(m) = K.apply(p.head(n));
    return p;
  };
  f.minimizer = [](Index len) -> Vector { return Vector::Zero(len); };
  return f;
}

ProxFn consensus(Index blocks) {
  if (blocks < 1) throw ConfigError("consensus: need at least one block");
  ProxFn f;
  f.name = "consensus";
  auto block_len = [blocks](const Vector& x) {
    if (x.size() % blocks != 0)
      throw DimensionError("consensus: length " + std::to_string(x.size()) +
                           " not divisible into " + std::to_string(blocks) +
                           " blocks");
    return x.size() / blocks;
  };
  auto mean = [blocks, block_len](const Vector& x) {
    const Index d = block_len(x);
    Vector m = Vector::Zero(d);
    for (Index k = 0; k < blocks; ++k) m += x.segment(k * d, d);
    return Vector(m / static_cast<double>(blocks));
  };
  f.value = [blocks, block_len, mean](const Vector& x) {
    const Index d = block_len(x);
    const Vector m = mean(x);
    double dev = 0.0;
    for (Index k = 0; k < blocks; ++k)
      dev = std::max(dev, (x.segment(k * d, d) - m).cwiseAbs().maxCoeff());
    return dev <= 1e-10 * (1.0 + x.cwiseAbs().maxCoeff()) ? 0.0 : kInf;
  };
  f.prox_map = [blocks, block_len, mean](const Vector& x, double) {
    const Index d = block_len(x);
    const Vector m = mean(x);
    Vector p(x.size());
    for (Index k = 0; k < blocks; ++k) p.segment(k * d, d) = m;
    return p;
  };
  f.minimizer = [](Index len) -> Vector { return Vector::Zero(len); };
  f.conjugate_value = [blocks, mean](const Vector& u) {
    return mean(u).cwiseAbs().maxCoeff() * static_cast<double>(blocks) <=
                   1e-10 * (1.0 + u.cwiseAbs().maxCoeff())
               ? 0.0
               : kInf;
  };
  f.conjugate_prox = [blocks, mean](const Vector& x, double) {
    const Vector m = mean(x);
    const Index d = m.size();
    Vector p(x.size());
    for (Index k = 0; k < blocks; ++k) p.segment(k * d, d) = x.segment(k * d, d) - m;
    return p;
  };
  return f;
}

ProxFn l1_residual(const Vector& y, double lambda) {
  require_finite(y, "l1_residual center");
  if (!(lambda >= 0.0)) throw ConfigError("l1_residual: weight must be >= 0");
  ProxFn f;
  f.name = "l1_residual";
  f.dim = y.size();
  f.value = [y, lambda](const Vector& x) { return lambda * (x - y).lpNorm<1>(); };
  f.prox_map = [y, lambda](const Vector& x, double gamma) -> Vector {
    return y + soft_threshold(x - y, lambda * gamma);
  };
  f.minimizer = [y](Index) { return y; };
  f.conjugate_value = [y, lambda](const Vector& u) {
    if (u.cwiseAbs().maxCoeff() > lambda * (1.0 + kMemberTol) + kMemberTol)
      return kInf;
    return u.dot(y);
  };
  f.conjugate_prox = [y, lambda](const Vector& x, double gamma) -> Vector {
    return (x - gamma * y).cwiseMax(-lambda).cwiseMin(lambda);
  };
  f.box_argmin = [y, lambda](const Vector& c, const Vector& lo,
                             const Vector& hi) {
    check_box_args(c, lo, hi);
    Vector z(c.size());
    for (Index i = 0; i < c.size(); ++i) {
      const double ci = c[i], yi = y[i];
      z[i] = best_candidate(
          {lo[i], hi[i], clamp(yi, lo[i], hi[i])},
          [&](double t) { return lambda * std::abs(t - yi) + ci * t; });
    }
    return z;
  };
  f.conjugate_box_argmin = [y, lambda](const Vector& c, const Vector& lo,
                                       const Vector& hi) {
    check_box_args(c, lo, hi);
    Vector u(c.size());
    for (Index i = 0; i < c.size(); ++i)
      u[i] = linear_end(c[i] + y[i], std::max(-lambda, lo[i]),
                        std::min(lambda, hi[i]));
    return u;
  };
  return f;
}

ProxFn hard_threshold(double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("hard_threshold: weight must be > 0");
  ProxFn f;
  f.name = "hard_threshold";
  f.convex = false;
  f.value = [lambda](const Vector& x) {
    return lambda * static_cast<double>((x.array() != 0.0).count());
  };
  f.prox_map = [lambda](const Vector& x, double gamma) {
    const double t = 2.0 * lambda * gamma;
    Vector p(x.size());
    for (Index i = 0; i < x.size(); ++i) p[i] = x[i] * x[i] > t ? x[i] : 0.0;
    return p;
  };
  f.minimizer = [](Index n) -> Vector { return Vector::Zero(n); };
  return f;
}

Vector prox_conjugate(const ProxFn& f, const Vector& x, double gamma) {
  check_gamma(gamma, "conj(" + f.name + ")");
  return x - gamma * f.prox(x / gamma, 1.0 / gamma);
}

ProxFn conjugate(const ProxFn& f) {
  if (!f.convex)
    throw ConfigError("conjugate of non-convex " + f.name + " is not supported");
  ProxFn g;
  g.name = "conj(" + f.name + ")";
  g.dim = f.dim;
  if (f.conjugate_value) {
    g.value = f.conjugate_value;
  } else {
    const std::string nm = g.name;
    g.value = [nm](const Vector&) -> double {
      throw ConfigError(nm + ": no closed-form value");
    };
  }
  g.prox_map = [f](const Vector& x, double gamma) {
    return prox_conjugate(f, x, gamma);
  };
  g.conjugate_value = f.value;
  g.conjugate_prox = f.prox_map;
  g.box_argmin = f.conjugate_box_argmin;
  g.conjugate_box_argmin = f.box_argmin;
  if (f.quadratic && f.quadratic->A.scalar()) {
    const double c = *f.quadratic->A.scalar();
    if (c != 0.0) g.strong_convexity = 1.0 / (f.quadratic->lambda * c * c);
  }
  return g;
}

std::vector<Index> index_range(Index offset, Index len) {
  std::vector<Index> idx(static_cast<std::size_t>(len));
  for (Index i = 0; i < len; ++i) idx[static_cast<std::size_t>(i)] = offset + i;
  return idx;
}

namespace {

Vector gather(const Vector& x, const std::vector<Index>& idx) {
  Vector v(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) v[static_cast<Index>(k)] = x[idx[k]];
  return v;
}

void scatter(Vector& x, const std::vector<Index>& idx, const Vector& v) {
  for (std::size_t k = 0; k < idx.size(); ++k) x[idx[k]] = v[static_cast<Index>(k)];
}

}  // namespace

ProxFn separable(std::vector<Block> parts) {
  if (parts.empty()) throw ConfigError("separable: no blocks");
  Index n = 0;
  for (const auto& p : parts) n += static_cast<Index>(p.indices.size());
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (parts[k].indices.empty())
      throw ConfigError("separable: block " + std::to_string(k) + " is empty");
    for (Index i : parts[k].indices) {
      if (i < 0 || i >= n)
        throw ConfigError("separable: index " + std::to_string(i) +
                          " outside 0.." + std::to_string(n - 1));
      if (seen[static_cast<std::size_t>(i)]++)
        throw ConfigError("separable: index " + std::to_string(i) +
                          " appears in more than one block");
    }
    const Index fd = parts[k].fn.dim;
    if (fd > 0 && fd != static_cast<Index>(parts[k].indices.size()))
      throw DimensionError("separable: block " + std::to_string(k) + " has " +
                           std::to_string(parts[k].indices.size()) +
                           " indices, function expects " + std::to_string(fd));
  }
  ProxFn f;
  f.name = "separable[";
  for (std::size_t k = 0; k < parts.size(); ++k)
    f.name += (k ? "," : "") + parts[k].fn.name;
  f.name += "]";
  f.dim = n;
  bool convex = true, all_alpha = true, all_min = true, all_conj = true,
       all_box = true, all_cbox = true, all_cprox = true;
  double alpha = kInf;
  for (const auto& p : parts) {
    convex = convex && p.fn.convex;
    if (p.fn.strong_convexity)
      alpha = std::min(alpha, *p.fn.strong_convexity);
    else
      all_alpha = false;
    all_min = all_min && static_cast<bool>(p.fn.minimizer);
    all_conj = all_conj && static_cast<bool>(p.fn.conjugate_value);
    all_cprox = all_cprox && static_cast<bool>(p.fn.conjugate_prox);
    all_box = all_box && static_cast<bool>(p.fn.box_argmin);
    all_cbox = all_cbox && static_cast<bool>(p.fn.conjugate_box_argmin);
  }
  f.convex = convex;
  if (all_alpha) f.strong_convexity = alpha;

  auto sum_over = [parts](auto pick) {
    return [parts, pick](const Vector& x) {
      double s = 0.0;
      for (const auto& p : parts) {
        s += pick(p.fn)(gather(x, p.indices));
        if (s == kInf) return kInf;
      }
      return s;
    };
  };
  f.value = sum_over([](const ProxFn& g) { return g.value; });
  f.prox_map = [parts](const Vector& x, double gamma) {
    Vector out(x.size());
    for (const auto& p : parts)
      scatter(out, p.indices, p.fn.prox(gather(x, p.indices), gamma));
    return out;
  };
  if (all_min)
    f.minimizer = [parts, n](Index) {
      Vector out(n);
      for (const auto& p : parts)
        scatter(out, p.indices,
                p.fn.minimizer(static_cast<Index>(p.indices.size())));
      return out;
    };
  if (all_conj)
    f.conjugate_value = sum_over([](const ProxFn& g) { return g.conjugate_value; });
  if (all_cprox)
    f.conjugate_prox = [parts](const Vector& x, double gamma) {
      Vector out(x.size());
      for (const auto& p : parts)
        scatter(out, p.indices, p.fn.conjugate_prox(gather(x, p.indices), gamma));
      return out;
    };
  auto box_over = [parts](auto pick) -> BoxLinearArgmin {
    return [parts, pick](const Vector& c, const Vector& lo, const Vector& hi) {
      check_box_args(c, lo, hi);
      Vector out(c.size());
      for (const auto& p : parts)
        scatter(out, p.indices,
                pick(p.fn)(gather(c, p.indices), gather(lo, p.indices),
                           gather(hi, p.indices)));
      return out;
    };
  };
  if (all_box) f.box_argmin = box_over([](const ProxFn& g) { return g.box_argmin; });
  if (all_cbox)
    f.conjugate_box_argmin =
        box_over([](const ProxFn& g) { return g.conjugate_box_argmin; });
  return f;
}

ProxFn composed_orthogonal(const LinearOperator& T, const ProxFn& inner,
                           std::uint64_t seed) {
  if (T.in_dim() != T.out_dim())
    throw DimensionError("orthogonal operator must be square: " +
                         std::to_string(T.out_dim()) + "x" +
                         std::to_string(T.in_dim()));
  Rng rng(seed);
  for (int t = 0; t < 20; ++t) {
    const Vector v = rng.gaussian_vector(T.in_dim());
    const double e1 = (T.adjoint_apply(T.apply(v)) - v).norm();
    const double e2 = (T.apply(T.adjoint_apply(v)) - v).norm();
    if (e1 > 1e-8 * v.norm() || e2 > 1e-8 * v.norm())
      throw ConfigError("operator " + T.describe() + " is not orthogonal");
  }
  ProxFn f;
  f.name = inner.name + " o " + T.describe();
  f.dim = T.in_dim();
  f.convex = inner.convex;
  f.strong_convexity = inner.strong_convexity;
  f.weak_convexity = inner.weak_convexity;
  f.value = [T, inner](const Vector& x) { return inner.eval(T.apply(x)); };
  f.prox_map = [T, inner](const Vector& x, double gamma) {
    return T.adjoint_apply(inner.prox(T.apply(x), gamma));
  };
  if (inner.minimizer)
    f.minimizer = [T, inner](Index n) {
      return T.adjoint_apply(inner.minimizer(n));
    };
  if (inner.conjugate_value)
    f.conjugate_value = [T, inner](const Vector& u) {
      return inner.conjugate_value(T.apply(u));
    };
  if (inner.conjugate_prox)
    f.conjugate_prox = [T, inner](const Vector& x, double gamma) {
      return T.adjoint_apply(inner.conjugate_prox(T.apply(x), gamma));
    };
  return f;
}

ProxFn compose_with(const ProxFn& f, const LinearOperator& K) {
  if (auto c = K.scalar(); c && K.in_dim() == K.out_dim()) {
    const double s = *c;
    ProxFn g;
    g.name = f.name + " o " + K.describe();
    g.dim = K.in_dim();
    g.convex = f.convex;
    g.value = [f, s](const Vector& x) { return f.eval(s * x); };
    g.prox_map = [f, s](const Vector& x, double gamma) -> Vector {
      if (s == 0.0) return x;
      return f.prox(s * x, s * s * gamma) / s;
    };
    if (f.quadratic)
      g.quadratic = QuadraticData{
          LinearOperator::compose({f.quadratic->A, K}), f.quadratic->b,
          f.quadratic->lambda};
    return g;
  }
  if (f.quadratic) {
    const auto& q = *f.quadratic;
    if (q.A.in_dim() != K.out_dim())
      throw DimensionError("compose_with: operator output " +
                           std::to_string(K.out_dim()) + " vs function input " +
                           std::to_string(q.A.in_dim()));
    ProxFn g = make_quadratic(LinearOperator::compose({q.A, K}), q.b, q.lambda).prox;
    g.name = f.name + " o " + K.describe();
    return g;
  }
  throw ConfigError("compose_with: no prox available for " + f.name + " o " +
                    K.describe());
}

double SaddleProblem::lagrangian(const Vector& x, const Vector& y) const {
  return K.apply(x).dot(y) - f_star.eval(y) + g.eval(x);
}

double SaddleProblem::primal_objective(const Vector& x) const {
  if (!f_primal) throw ConfigError("saddle problem has no primal f");
  return f_primal->eval(K.apply(x)) + g.eval(x);
}

}  // namespace proxsplit
