#include "proxsplit/solvers.hpp"

#include <cmath>

#include "proxsplit/cg.hpp"
#include "proxsplit/errors.hpp"
#include "proxsplit/random.hpp"

namespace proxsplit {

namespace {

constexpr double kDivergeAbove = 1e12;
constexpr double kStepSlack = 1e-12;

void check_start(const Vector& x0, Index expected, const std::string& who) {
  require_finite(x0, who + " start");
  if (expected > 0 && x0.size() != expected)
    throw DimensionError(who + ": start has length " +
                         std::to_string(x0.size()) + ", expected " +
                         std::to_string(expected));
}

// Shared bookkeeping for all iterative schemes.
class Run {
 public:
  Run(const SolverConfig& cfg, std::string algorithm) : cfg_(cfg) {
    cfg.validate();
    trace_.algorithm = std::move(algorithm);
  }

  SolverTrace& trace() { return trace_; }

  void start(double obj, const Vector& x,
             std::map<std::string, Vector> aux = {}) {
    trace_.initial_objective = obj;
    prev_obj_ = obj;
    if (cfg_.thin > 0) trace_.snapshots.push_back({0, x, std::move(aux)});
  }

  void record(double obj, const Vector& x_new, const Vector& x_old) {
    trace_.push(obj, (x_new - x_old).norm());
  }

  void extra(const std::string& name, double v) { trace_.set_extra(name, v); }

  void snapshot(int n, const Vector& x, std::map<std::string, Vector> aux = {}) {
    if (cfg_.thin > 0 && n % cfg_.thin == 0)
      trace_.snapshots.push_back({n, x, std::move(aux)});
  }

  // Divergence and stopping tests on the latest record. `other` is an
  // additional residual that must also be small (dual variables).
  bool stop(const Vector& x_new, double other = 0.0) {
    const double obj = trace_.objective.back();
    const double res = trace_.residual.back();
    if (std::isnan(obj) || (std::isfinite(obj) && std::abs(obj) > kDivergeAbove) ||
        !x_new.allFinite()) {
      trace_.termination = Termination::diverged;
      trace_.message = "objective or iterate left the finite range at n=" +
                       std::to_string(trace_.size());
      return true;
    }
    bool done = false;
    const double scale = 1.0 + x_new.norm();
    if (cfg_.residual_tol > 0.0 && res <= cfg_.residual_tol * scale &&
        other <= cfg_.residual_tol * scale)
      done = true;
    if (cfg_.objective_tol > 0.0 && std::isfinite(obj) &&
        std::isfinite(prev_obj_) &&
        std::abs(obj - prev_obj_) <= cfg_.objective_tol * (1.0 + std::abs(obj)))
      done = true;
    prev_obj_ = obj;
    if (done) {
      trace_.termination = Termination::tol_reached;
      trace_.message = "tolerance reached at n=" + std::to_string(trace_.size());
    }
    return done;
  }

  SolverTrace finish(std::map<std::string, Vector> finals) {
    if (trace_.termination == Termination::iter_cap)
      trace_.message = "iteration cap " + std::to_string(cfg_.max_iter);
    trace_.final_vectors = std::move(finals);
    trace_.summary["iterations"] = static_cast<double>(trace_.size());
    if (!trace_.objective.empty())
      trace_.summary["final_objective"] = trace_.objective.back();
    else
      trace_.summary["final_objective"] = trace_.initial_objective;
    return std::move(trace_);
  }

 private:
  const SolverConfig& cfg_;
  SolverTrace trace_;
  double prev_obj_ = 0.0;
};

double default_step(const SmoothFn& f, const SolverConfig& cfg,
                    const std::string& who) {
  if (cfg.gamma) return *cfg.gamma;
  if (f.lipschitz > 0.0) return 1.0 / f.lipschitz;
  throw ConfigError(who + ": gamma is required when L = 0");
}

void require_step_below(double gamma, double bound, const std::string& who,
                        const std::string& what) {
  if (!(gamma < bound))
    throw ConfigError(who + ": gamma = " + std::to_string(gamma) +
                      " violates gamma < " + what + " = " +
                      std::to_string(bound));
}

}  // namespace

// ---------------------------------------------------------------------------

SolverTrace gradient_descent(const SmoothFn& f, const Vector& x0,
                             const SolverConfig& cfg, GdMode mode) {
  Run run(cfg, "gradient_descent");
  check_start(x0, 0, "gradient_descent");
  const double L = f.lipschitz;
  double gamma = 0.0;
  if (mode == GdMode::fixed) {
    gamma = default_step(f, cfg, "gradient_descent");
    if (L > 0.0) require_step_below(gamma, 2.0 / L, "gradient_descent", "2/L");
  } else if (mode == GdMode::optimal_quadratic) {
    if (!f.quadratic)
      throw ConfigError("optimal_quadratic step needs a function from make_quadratic");
  }
  Vector x = x0;
  run.start(f.eval(x), x);
  for (int n = 0; n < cfg.max_iter; ++n) {
    const Vector g = f.grad(x);
    const double gg = g.squaredNorm();
    double step = gamma;
    int shrinks = 0;
    if (mode == GdMode::backtracking) {
      step = cfg.backtrack_gamma0;
      const double fx = f.eval(x);
      // At a stationary point the strict test can never pass; keep gamma0.
      while (gg > 0.0 && !(fx - f.eval(x - step * g) > 0.5 * step * gg)) {
        step *= cfg.backtrack_shrink;
        if (++shrinks > 200 || step == 0.0)
          throw SolverError("backtracking found no acceptable step", std::sqrt(gg));
      }
    } else if (mode == GdMode::optimal_quadratic) {
      const auto& q = *f.quadratic;
      const double denom = q.lambda * q.A.apply(g).squaredNorm();
      step = denom > 0.0 ? gg / denom : 0.0;
    }
    Vector x_new = x - step * g;
    run.record(f.eval(x_new), x_new, x);
    run.extra("gamma", step);
    if (mode == GdMode::backtracking) run.extra("shrinks", shrinks);
    run.snapshot(n + 1, x_new);
    const bool stop = run.stop(x_new);
    x = std::move(x_new);
    if (stop) break;
  }
  return run.finish({{"x", x}});
}

SolverTrace projected_gradient(const SmoothFn& f, const ProxFn& C,
                               const Vector& x0, const SolverConfig& cfg) {
  Run run(cfg, "projected_gradient");
  check_start(x0, C.dim, "projected_gradient");
  const double gamma = default_step(f, cfg, "projected_gradient");
  if (f.lipschitz > 0.0)
    require_step_below(gamma, 2.0 / f.lipschitz, "projected_gradient", "2/L");
  auto J = [&](const Vector& x) { return f.eval(x) + C.eval(x); };
  Vector x = x0;
  run.start(J(x), x);
  for (int n = 0; n < cfg.max_iter; ++n) {
    Vector x_new = C.prox(x - gamma * f.grad(x), gamma);
    run.record(J(x_new), x_new, x);
    run.snapshot(n + 1, x_new);
    const bool stop = run.stop(x_new);
    x = std::move(x_new);
    if (stop) break;
  }
  return run.finish({{"x", x}});
}

SolverTrace proximal_point(const ProxFn& g, const Vector& x0,
                           const SolverConfig& cfg) {
  Run run(cfg, "proximal_point");
  check_start(x0, g.dim, "proximal_point");
  const double gamma = cfg.gamma.value_or(1.0);
  Vector x = x0;
  double gx = g.eval(x);
  run.start(gx, x);
  for (int n = 0; n < cfg.max_iter; ++n) {
    Vector x_new = g.prox(x, gamma);
    const double g_new = g.eval(x_new);
    run.record(g_new, x_new, x);
    const double step = (x_new - x).squaredNorm();
    run.extra("decrease_margin", gx - g_new - step / (2.0 * gamma));
    run.snapshot(n + 1, x_new);
    const bool stop = run.stop(x_new);
    x = std::move(x_new);
    gx = g_new;
    if (stop) break;
  }
  return run.finish({{"x", x}});
}

namespace {

// Shared by the convex and nonconvex entry points so both produce identical
// iterates.
SolverTrace fb_impl(const SmoothFn& f, const ProxFn& g, const Vector& x0,
                    const SolverConfig& cfg, bool monitor) {
  const std::string who = monitor ? "nonconvex_forward_backward" : "forward_backward";
  Run run(cfg, who);
  check_start(x0, g.dim, who);
  const double L = f.lipschitz;
  const double gamma = default_step(f, cfg, who);
  double q = 0.0;  // vfista coefficient

  if (monitor) {
    if (cfg.inertia != Inertia::none)
      throw ConfigError(who + ": inertia is not supported");
    if (L > 0.0) {
      if (g.weak_convexity)
        require_step_below(gamma, 2.0 / (L + *g.weak_convexity), who, "2/(L+alpha_w)");
      else
        require_step_below(gamma, 1.0 / L, who, "1/L");
    }
  } else {
    switch (cfg.inertia) {
      case Inertia::none:
        if (L > 0.0) require_step_below(gamma, 2.0 / L, who, "2/L");
        break;
      case Inertia::fista_t:
      case Inertia::fista_beta:
        if (L > 0.0) require_step_below(gamma, (1.0 + kStepSlack) / L, who, "(1/L)+");
        break;
      case Inertia::vfista: {
        const double alpha =
            f.strong_convexity.value_or(0.0) + g.strong_convexity.value_or(0.0);
        if (!(alpha > 0.0))
          throw ConfigError(who + ": vfista needs a known strong convexity modulus");
        if (!(L > 0.0)) throw ConfigError(who + ": vfista needs L > 0");
        if (std::abs(gamma * L - 1.0) > kStepSlack)
          throw ConfigError(who + ": vfista requires gamma = 1/L");
        q = (std::sqrt(L) - std::sqrt(alpha)) / (std::sqrt(L) + std::sqrt(alpha));
        break;
      }
    }
  }

  auto J = [&](const Vector& x) { return f.eval(x) + g.eval(x); };
  auto T = [&](const Vector& y) { return g.prox(y - gamma * f.grad(y), gamma); };

  Vector x = x0, x_prev = x0;
  double Jx = J(x);
  run.start(Jx, x);
  double t = 1.0;
  for (int n = 0; n < cfg.max_iter; ++n) {
    double coef = 0.0;
    double t_next = 1.0;
    if (n > 0) {
      switch (cfg.inertia) {
        case Inertia::none: break;
        case Inertia::fista_t:
          t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
          coef = (t - 1.0) / t_next;
          break;
        case Inertia::fista_beta:
          coef = static_cast<double>(n) / (static_cast<double>(n) + cfg.beta);
          break;
        case Inertia::vfista: coef = q; break;
      }
    }
    const Vector y = coef != 0.0 ? Vector(x + coef * (x - x_prev)) : x;
    Vector x_new = T(y);
    const double J_new = J(x_new);
    run.record(J_new, x_new, x);
    if (cfg.inertia != Inertia::none) run.extra("inertia", coef);
    if (cfg.inertia == Inertia::fista_t) {
      run.extra("t", n > 0 ? t_next : 1.0);
      if (n > 0) t = t_next;
    }
    if (monitor) {
      const double d2 = (x_new - x).squaredNorm();
      const double margin = Jx - J_new - (1.0 / (2.0 * gamma) - 0.5 * L) * d2;
      run.extra("h1_margin", margin);
      run.extra("h2_witness", std::sqrt(d2) / gamma);
      run.extra("subgradient_norm",
                ((x - x_new) / gamma + f.grad(x_new) - f.grad(x)).norm());
      if (margin < -1e-8)
        throw SolverError("sufficient-decrease violated at n=" +
                              std::to_string(n + 1) + " (margin " +
                              std::to_string(margin) + ")",
                          margin);
    }
    run.snapshot(n + 1, x_new);
    const bool stop = run.stop(x_new);
    x_prev = std::move(x);
    x = std::move(x_new);
    Jx = J_new;
    if (stop) break;
  }
  return run.finish({{"x", x}});
}

}  // namespace

SolverTrace forward_backward(const SmoothFn& f, const ProxFn& g,
                             const Vector& x0, const SolverConfig& cfg) {
  return fb_impl(f, g, x0, cfg, false);
}

SolverTrace nonconvex_forward_backward(const SmoothFn& f, const ProxFn& g,
                                       const Vector& x0,
                                       const SolverConfig& cfg) {
  return fb_impl(f, g, x0, cfg, true);
}

SolverTrace krasnoselskii_mann(const VectorMap& T, const Vector& x0,
                               const SolverConfig& cfg) {
  Run run(cfg, "krasnoselskii_mann");
  check_start(x0, 0, "krasnoselskii_mann");
  const Relaxation lam = cfg.relaxation.value_or(Relaxation::constant(0.5));
  if (lam.value < 0.0 || lam.at(0) > 1.0)
    throw ConfigError("krasnoselskii_mann: lambda_n must lie in [0, 1]");
  Vector x = x0;
  Vector Tx = T(x);
  if (Tx.size() != x.size())
    throw DimensionError("krasnoselskii_mann: map changes length");
  // The objective column holds the fixed-point residual |T x_n - x_n|.
  run.start((Tx - x).norm(), x);
  for (int n = 0; n < cfg.max_iter; ++n) {
    const double l = lam.at(n);
    Vector x_new = x + l * (Tx - x);
    Vector Tx_new = T(x_new);
    run.record((Tx_new - x_new).norm(), x_new, x);
    run.extra("lambda", l);
    run.snapshot(n + 1, x_new);
    const bool stop = run.stop(x_new);
    x = std::move(x_new);
    Tx = std::move(Tx_new);
    if (stop) break;
  }
  return run.finish({{"x", x}});
}

namespace {

SolverTrace dr_impl(const ProxFn& f, const ProxFn& g, const Vector& x0,
                    const SolverConfig& cfg, const std::string& who,
                    const std::function<double(const Vector&)>& J) {
  Run run(cfg, who);
  const double gamma = cfg.gamma.value_or(1.0);
  const Relaxation mu = cfg.relaxation.value_or(Relaxation::constant(1.0));
  if (mu.value < 0.0 || mu.at(0) > 2.0)
    throw ConfigError(who + ": mu_n must lie in [0, 2]");
  Vector x = x0;
  Vector y = g.prox(x, gamma);
  run.start(J(y), x, {{"y", y}});
  for (int n = 0; n < cfg.max_iter; ++n) {
    const double m = mu.at(n);
    const Vector z = f.prox(2.0 * y - x, gamma);
    Vector x_new = x + m * (z - y);
    Vector y_new = g.prox(x_new, gamma);
    run.record(J(y_new), x_new, x);
    run.extra("mu", m);
    run.snapshot(n + 1, x_new, {{"y", y_new}, {"z", z}});
    const bool stop = run.stop(x_new);
    x = std::move(x_new);
    y = std::move(y_new);
    if (stop) break;
  }
  return run.finish({{"x", y}, {"state", x}});
}

}  // namespace

SolverTrace douglas_rachford(const ProxFn& f, const ProxFn& g,
                             const Vector& x0, const SolverConfig& cfg) {
  const Index d = f.dim > 0 ? f.dim : g.dim;
  check_start(x0, d, "douglas_rachford");
  return dr_impl(f, g, x0, cfg, "douglas_rachford",
                 [&](const Vector& y) { return f.eval(y) + g.eval(y); });
}

SolverTrace ppxa(const std::vector<PpxaTerm>& terms, const Vector& x0,
                 const SolverConfig& cfg) {
  const std::size_t M = terms.size();
  if (M < 2) throw ConfigError("ppxa needs at least two terms");
  if (terms[0].op) throw ConfigError("ppxa: the first term must act on x directly");
  check_start(x0, terms[0].fn.dim, "ppxa");
  const Index n = x0.size();

  bool any_op = false;
  std::vector<LinearOperator> ops;
  std::vector<Block> blocks;
  Index offset = 0;
  for (std::size_t i = 0; i < M; ++i) {
    LinearOperator op = terms[i].op ? *terms[i].op : LinearOperator::identity(n);
    if (terms[i].op) {
      any_op = true;
      if (op.in_dim() != n)
        throw DimensionError("ppxa: term " + std::to_string(i) + " operator input " +
                             std::to_string(op.in_dim()) + " vs x length " +
                             std::to_string(n));
    }
    blocks.push_back({terms[i].fn, index_range(offset, op.out_dim())});
    offset += op.out_dim();
    ops.push_back(std::move(op));
  }
  const Index total = offset;
  const ProxFn ftilde = separable(std::move(blocks));

  ProxFn gtilde;
  if (!any_op) {
    gtilde = consensus(static_cast<Index>(M));
  } else {
    gtilde.name = "graph_consensus";
    gtilde.dim = total;
    // Projection onto {X : x_i = L_i x_1}.
    gtilde.prox_map = [ops, n](const Vector& X, double) {
      Vector rhs = X.head(n);
      Index at = n;
      for (std::size_t i = 1; i < ops.size(); ++i) {
        rhs += ops[i].adjoint_apply(X.segment(at, ops[i].out_dim()));
        at += ops[i].out_dim();
      }
      auto map = [&](const Vector& v) -> Vector {
        Vector out = v;
        for (std::size_t i = 1; i < ops.size(); ++i)
          out += ops[i].adjoint_apply(ops[i].apply(v));
        return out;
      };
      const Vector p1 = conjugate_gradient(map, rhs, X.head(n)).x;
      Vector P(X.size());
      P.head(n) = p1;
      at = n;
      for (std::size_t i = 1; i < ops.size(); ++i) {
        P.segment(at, ops[i].out_dim()) = ops[i].apply(p1);
        at += ops[i].out_dim();
      }
      return P;
    };
    gtilde.value = [](const Vector&) { return 0.0; };
  }

  Vector X0(total);
  offset = 0;
  for (const auto& op : ops) {
    X0.segment(offset, op.out_dim()) = op.apply(x0);
    offset += op.out_dim();
  }
  auto J = [&](const Vector& Y) {
    const Vector x = Y.head(n);
    double s = 0.0;
    for (std::size_t i = 0; i < M; ++i) s += terms[i].fn.eval(ops[i].apply(x));
    return s;
  };
  SolverTrace t = dr_impl(ftilde, gtilde, X0, cfg, "ppxa", J);
  t.final_vectors["product"] = t.final_vectors.at("x");
  t.final_vectors["x"] = Vector(t.final_vectors.at("product").head(n));
  return t;
}

// ---------------------------------------------------------------------------

AdmmBlock admm_prox_block(const ProxFn& fn, const LinearOperator& A) {
  double c = 1.0;
  if (auto s = A.scalar()) {
    c = (*s) * (*s);
  } else {
    Rng rng(0x5eed);
    const Vector v = rng.gaussian_vector(A.in_dim());
    c = A.apply(v).squaredNorm() / v.squaredNorm();
    for (int t = 0; t < 5; ++t) {
      const Vector w = rng.gaussian_vector(A.in_dim());
      if ((A.adjoint_apply(A.apply(w)) - c * w).norm() > 1e-10 * (1.0 + c) * w.norm())
        throw ConfigError("admm prox step needs A*A = c Id; " + A.describe() +
                          " does not qualify");
    }
  }
  if (!(c > 0.0)) throw ConfigError("admm prox step needs A*A = c Id with c > 0");
  AdmmBlock b{fn, A, {}};
  b.step = [fn, A, c](const Vector& v, double gamma) {
    return fn.prox(A.adjoint_apply(v) / c, 1.0 / (gamma * c));
  };
  return b;
}

AdmmBlock admm_quadratic_block(const ProxFn& fn, const LinearOperator& A) {
  if (!fn.quadratic) throw ConfigError("admm quadratic step needs quadratic data");
  const QuadraticData q = *fn.quadratic;
  if (q.A.in_dim() != A.in_dim())
    throw DimensionError("admm quadratic step: operator inputs " +
                         std::to_string(q.A.in_dim()) + " vs " +
                         std::to_string(A.in_dim()));
  AdmmBlock b{fn, A, {}};
  b.step = [q, A](const Vector& v, double gamma) {
    auto map = [&](const Vector& x) -> Vector {
      return q.lambda * q.A.adjoint_apply(q.A.apply(x)) +
             gamma * A.adjoint_apply(A.apply(x));
    };
    const Vector rhs = q.lambda * q.A.adjoint_apply(q.b) + gamma * A.adjoint_apply(v);
    return conjugate_gradient(map, rhs, Vector::Zero(A.in_dim())).x;
  };
  return b;
}

SolverTrace admm(const AdmmBlock& f, const AdmmBlock& g, const Vector& b,
                 const Vector& y0, const Vector& z0, const SolverConfig& cfg) {
  Run run(cfg, "admm");
  const LinearOperator& A = f.A;
  const LinearOperator& B = g.A;
  if (A.out_dim() != B.out_dim() || b.size() != A.out_dim())
    throw DimensionError("admm: constraint spaces differ: A " +
                         std::to_string(A.out_dim()) + ", B " +
                         std::to_string(B.out_dim()) + ", b " +
                         std::to_string(b.size()));
  check_start(y0, B.in_dim(), "admm y");
  check_start(z0, A.out_dim(), "admm z");
  if (!f.step || !g.step) throw ConfigError("admm: both blocks need a step");
  const double gamma = cfg.gamma.value_or(1.0);

  Vector y = y0, z = z0, x = Vector::Zero(A.in_dim());
  // x_0 is never used by the iteration; the residual column tracks the
  // state (y, z) that drives it.
  run.start(std::numeric_limits<double>::quiet_NaN(), y, {{"z", z}});
  for (int n = 0; n < cfg.max_iter; ++n) {
    x = f.step(b - B.apply(y) - z / gamma, gamma);
    Vector y_new = g.step(b - A.apply(x) - z / gamma, gamma);
    const Vector r = A.apply(x) + B.apply(y_new) - b;
    Vector z_new = z + gamma * r;
    const double state = std::sqrt((y_new - y).squaredNorm() + (z_new - z).squaredNorm());
    run.trace().push(f.fn.eval(x) + g.fn.eval(y_new), state);
    run.extra("primal_residual", r.norm());
    run.snapshot(n + 1, x, {{"y", y_new}, {"z", z_new}});
    y = std::move(y_new);
    z = std::move(z_new);
    if (run.stop(x)) break;
  }
  return run.finish({{"x", x}, {"y", y}, {"z", z}});
}

// ---------------------------------------------------------------------------

double partial_gap(const SaddleProblem& prob, const Vector& x, const Vector& y,
                   const GapBox& box) {
  if (!prob.f_star.box_argmin || !prob.g.box_argmin)
    throw ConfigError("partial gap needs closed-form box minimization for " +
                      prob.f_star.name + " and " + prob.g.name);
  const Vector Kx = prob.K.apply(x);
  const Vector Kty = prob.K.adjoint_apply(y);
  const Vector y_best = prob.f_star.box_argmin(-Kx, box.y_lo, box.y_hi);
  const Vector x_best = prob.g.box_argmin(Kty, box.x_lo, box.x_hi);
  return prob.lagrangian(x, y_best) - prob.lagrangian(x_best, y);
}

namespace {

SolverTrace pd_impl(const SaddleProblem& prob, const Vector& x0,
                    const Vector& y0, const SolverConfig& cfg, double theta,
                    const std::string& who, bool enforce_step = true) {
  Run run(cfg, who);
  check_start(x0, prob.K.in_dim(), who + " x");
  check_start(y0, prob.K.out_dim(), who + " y");
  const double Knorm = norm_of(prob.K);
  const double def = Knorm > 0.0 ? 0.99 / Knorm : 1.0;
  const double sigma = cfg.sigma.value_or(def);
  const double tau = cfg.tau.value_or(def);
  if (enforce_step && !(tau * sigma * Knorm * Knorm < 1.0))
    throw ConfigError(who + ": tau*sigma*|K|^2 = " +
                      std::to_string(tau * sigma * Knorm * Knorm) +
                      " must be < 1 (|K| estimate " + std::to_string(Knorm) + ")");
  auto J = [&](const Vector& x, const Vector& y) {
    return prob.f_primal ? prob.primal_objective(x) : prob.lagrangian(x, y);
  };
  Vector x = x0, xbar = x0, y = y0;
  Vector xsum = Vector::Zero(x0.size()), ysum = Vector::Zero(y0.size());
  run.start(J(x, y), x, {{"y", y}});
  for (int n = 0; n < cfg.max_iter; ++n) {
    Vector y_new = prob.f_star.prox(y + sigma * prob.K.apply(xbar), sigma);
    Vector x_new = prob.g.prox(x - tau * prob.K.adjoint_apply(y_new), tau);
    xbar = x_new + theta * (x_new - x);
    xsum += x_new;
    ysum += y_new;
    const double count = static_cast<double>(n + 1);
    run.record(J(x_new, y_new), x_new, x);
    const double dual_res = (y_new - y).norm();
    run.extra("dual_residual", dual_res);
    if (cfg.gap_box)
      run.extra("gap", partial_gap(prob, xsum / count, ysum / count, *cfg.gap_box));
    if (cfg.thin > 0 && (n + 1) % cfg.thin == 0)
      run.snapshot(n + 1, x_new,
                   {{"y", y_new}, {"x_avg", xsum / count}, {"y_avg", ysum / count}});
    const bool stop = run.stop(x_new, dual_res);
    x = std::move(x_new);
    y = std::move(y_new);
    if (stop) break;
  }
  const double N = std::max<double>(1.0, static_cast<double>(run.trace().size()));
  run.trace().summary["sigma"] = sigma;
  run.trace().summary["tau"] = tau;
  run.trace().summary["operator_norm"] = Knorm;
  return run.finish({{"x", x},
                     {"y", y},
                     {"x_avg", run.trace().size() ? Vector(xsum / N) : x0},
                     {"y_avg", run.trace().size() ? Vector(ysum / N) : y0}});
}

}  // namespace

SolverTrace chambolle_pock(const SaddleProblem& prob, const Vector& x0,
                           const Vector& y0, const SolverConfig& cfg) {
  return pd_impl(prob, x0, y0, cfg, 1.0, "chambolle_pock");
}

SolverTrace arrow_hurwicz(const SaddleProblem& prob, const Vector& x0,
                          const Vector& y0, const SolverConfig& cfg) {
  return pd_impl(prob, x0, y0, cfg, 0.0, "arrow_hurwicz");
}

SolverTrace detail::chambolle_pock_unchecked(const SaddleProblem& prob,
                                             const Vector& x0, const Vector& y0,
                                             const SolverConfig& cfg) {
  return pd_impl(prob, x0, y0, cfg, 1.0, "chambolle_pock", false);
}

SolverTrace condat(const SmoothFn& f, const ProxFn& g,
                   const std::vector<DualTerm>& terms, const Vector& x0,
                   const std::vector<Vector>& u0, const SolverConfig& cfg) {
  Run run(cfg, "condat");
  check_start(x0, g.dim, "condat");
  const std::size_t M = terms.size();
  if (!u0.empty() && u0.size() != M)
    throw DimensionError("condat: " + std::to_string(u0.size()) +
                         " dual starts for " + std::to_string(M) + " terms");
  std::vector<Vector> u;
  std::vector<LinearOperator> blocks;
  for (std::size_t i = 0; i < M; ++i) {
    const auto& Li = terms[i].L;
    if (Li.in_dim() != x0.size())
      throw DimensionError("condat: term " + std::to_string(i) + " operator input " +
                           std::to_string(Li.in_dim()) + " vs x length " +
                           std::to_string(x0.size()));
    if (u0.empty()) {
      u.push_back(Vector::Zero(Li.out_dim()));
    } else {
      if (u0[i].size() != Li.out_dim())
        throw DimensionError("condat: dual start " + std::to_string(i) +
                             " has length " + std::to_string(u0[i].size()) +
                             ", expected " + std::to_string(Li.out_dim()));
      u.push_back(u0[i]);
    }
    blocks.push_back(Li);
  }
  double S2 = 0.0;  // |sum L_i* L_i| = |stack|^2
  if (M > 0) S2 = std::pow(norm_of(LinearOperator::stack(blocks)), 2);
  const double Lf = f.lipschitz;
  const double sigma = cfg.sigma.value_or(S2 > 0.0 ? 1.0 / std::sqrt(S2) : 1.0);
  const double denom = 0.5 * Lf + sigma * S2;
  const double tau = cfg.tau.value_or(denom > 0.0 ? 0.99 / denom : 1.0);
  if (!(tau * denom < 1.0))
    throw ConfigError("condat: tau*(L/2 + sigma*|sum L_i*L_i|) = " +
                      std::to_string(tau * denom) + " must be < 1");
  const double rho = cfg.rho;

  auto J = [&](const Vector& x) {
    double s = f.eval(x) + g.eval(x);
    for (const auto& t : terms) s += t.h.eval(t.L.apply(x));
    return s;
  };
  Vector x = x0;
  run.start(J(x), x);
  for (int n = 0; n < cfg.max_iter; ++n) {
    Vector v = x - tau * f.grad(x);
    for (std::size_t i = 0; i < M; ++i) v -= tau * terms[i].L.adjoint_apply(u[i]);
    const Vector xt = g.prox(v, tau);
    Vector x_new = rho * xt + (1.0 - rho) * x;
    const Vector xe = 2.0 * xt - x;
    double dual_sq = 0.0;
    for (std::size_t i = 0; i < M; ++i) {
      const Vector ut =
          prox_conjugate(terms[i].h, u[i] + sigma * terms[i].L.apply(xe), sigma);
      Vector u_new = rho * ut + (1.0 - rho) * u[i];
      dual_sq += (u_new - u[i]).squaredNorm();
      u[i] = std::move(u_new);
    }
    run.record(J(x_new), x_new, x);
    run.extra("dual_residual", std::sqrt(dual_sq));
    if (cfg.thin > 0 && (n + 1) % cfg.thin == 0) {
      std::map<std::string, Vector> aux;
      for (std::size_t i = 0; i < M; ++i) aux["u" + std::to_string(i)] = u[i];
      run.snapshot(n + 1, x_new, std::move(aux));
    }
    const bool stop = run.stop(x_new, std::sqrt(dual_sq));
    x = std::move(x_new);
    if (stop) break;
  }
  run.trace().summary["sigma"] = sigma;
  run.trace().summary["tau"] = tau;
  std::map<std::string, Vector> finals{{"x", x}};
  for (std::size_t i = 0; i < M; ++i) finals["u" + std::to_string(i)] = u[i];
  return run.finish(std::move(finals));
}

}  // namespace proxsplit
