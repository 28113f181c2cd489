#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "proxsplit/errors.hpp"
#include "proxsplit/solvers.hpp"

using namespace proxsplit;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

double max_diff(const Vector& a, const Vector& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

SmoothFn half_sq(Index n) {
  return make_quadratic(LinearOperator::identity(n), Vector::Zero(n), 1.0).smooth;
}

SmoothFn anisotropic() {
  Matrix D = Matrix::Zero(2, 2);
  D(0, 0) = 1;
  D(1, 1) = std::sqrt(10.0);
  return make_quadratic(LinearOperator::dense(D), vec({0, 0}), 1.0, 1.0).smooth;
}

SolverConfig cfg_iters(int n, double gamma = 0.0) {
  SolverConfig c;
  c.max_iter = n;
  if (gamma > 0) c.gamma = gamma;
  return c;
}

}  // namespace

TEST_CASE("gradient descent single steps") {
  auto c = cfg_iters(1, 1.0);
  c.thin = 1;
  auto t = gradient_descent(half_sq(1), vec({5}), c);
  CHECK(t.solution()[0] == 0.0);
  CHECK(t.initial_objective == 12.5);

  auto t2 = gradient_descent(anisotropic(), vec({1, 1}), cfg_iters(1, 0.1));
  CHECK(max_diff(t2.solution(), vec({0.9, 0})) < 1e-15);
  CHECK(t2.objective[0] == doctest::Approx(0.405));
  CHECK(t2.objective[0] <= 0.9 * 5.5);
}

TEST_CASE("gradient descent step validation and divergence") {
  CHECK_THROWS_AS(gradient_descent(half_sq(1), vec({1}), cfg_iters(5, 2.0)), ConfigError);
  SmoothFn quartic;
  quartic.name = "quartic";
  quartic.value = [](const Vector& x) { return x.array().pow(4).sum(); };
  quartic.gradient = [](const Vector& x) { return Vector(4 * x.array().pow(3)); };
  quartic.convex = true;
  auto t = gradient_descent(quartic, vec({10}), cfg_iters(50, 1.0));
  CHECK(t.termination == Termination::diverged);
  CHECK(t.size() < 50);
}

TEST_CASE("backtracking accepts the first step passing the decrease test") {
  // Oracle: for f = x^2/2 the test f(x) - f(x - g x) > g x^2 / 2 holds iff
  // g < 1, so 10, 5, 2.5, 1.25 are rejected and 0.625 accepted.
  SolverConfig c = cfg_iters(30);
  c.backtrack_gamma0 = 10.0;
  c.backtrack_shrink = 0.5;
  auto t = gradient_descent(half_sq(1), vec({3}), c, GdMode::backtracking);
  CHECK(t.column("gamma")[0] == 0.625);
  CHECK(t.column("shrinks")[0] == 4.0);
  CHECK(std::abs(t.solution()[0]) < 1e-6);
}

TEST_CASE("exact line search on a quadratic") {
  auto t = gradient_descent(anisotropic(), vec({1, 1}), cfg_iters(1), GdMode::optimal_quadratic);
  // Oracle: gamma = |g|^2 / (g' H g) with H = diag(1, 10), g = (1, 10).
  const double gamma = 101.0 / 1001.0;
  CHECK(t.column("gamma")[0] == doctest::Approx(gamma).epsilon(1e-14));
  CHECK_THROWS_AS(gradient_descent(double_well(), vec({1}), cfg_iters(1), GdMode::optimal_quadratic),
                  ConfigError);
}

TEST_CASE("projected gradient") {
  auto f = make_quadratic(LinearOperator::identity(2), vec({2, 2}), 1.0).smooth;
  auto t = projected_gradient(f, box(0, 1), vec({0, 0}), cfg_iters(100, 0.5));
  CHECK(max_diff(t.solution(), vec({1, 1})) < 1e-12);
  // Variational inequality on sampled feasible points.
  const Vector x = t.solution();
  const Vector g = f.grad(x);
  for (double a : {0.0, 0.3, 1.0})
    for (double b : {0.0, 0.7, 1.0}) CHECK(g.dot(vec({a, b}) - x) >= -1e-6);

  auto fixed = projected_gradient(f, box(0, 1), vec({1, 1}), cfg_iters(3, 0.5));
  CHECK(fixed.residual[0] == 0.0);

  auto free = projected_gradient(f, zero_function(), vec({-1, 4}), cfg_iters(20, 0.3));
  auto gd = gradient_descent(f, vec({-1, 4}), cfg_iters(20, 0.3));
  CHECK(free.objective == gd.objective);
}

TEST_CASE("proximal point examples") {
  auto t = proximal_point(l1_norm(1.0), vec({10}), cfg_iters(15, 1.0));
  for (int k = 0; k < 15; ++k) CHECK(t.objective[k] == std::max(0.0, 10.0 - (k + 1)));
  for (double m : t.column("decrease_margin")) CHECK(m >= -1e-12);

  auto still = proximal_point(l1_norm(1.0), vec({0}), cfg_iters(5, 1.0));
  for (double r : still.residual) CHECK(r == 0.0);

  auto c = cfg_iters(10, 1.0);
  c.thin = 1;
  auto half = proximal_point(sq_distance(vec({0})), vec({8}), c);
  for (const auto& s : half.snapshots) CHECK(s.x[0] == doctest::Approx(8.0 / std::pow(2.0, s.n)));
}

TEST_CASE("forward-backward on a separable lasso") {
  auto f = make_quadratic(LinearOperator::identity(2), vec({3, 0.5}), 1.0).smooth;
  auto t = forward_backward(f, l1_norm(1.0), vec({0, 0}), cfg_iters(50, 1.0));
  CHECK(max_diff(t.solution(), vec({2, 0})) < 1e-14);

  // Descent: J(x_n) non-increasing for FB.
  auto g = forward_backward(f, l1_norm(1.0), vec({-4, 7}), cfg_iters(50, 1.5));
  for (std::size_t k = 1; k < g.size(); ++k) CHECK(g.objective[k] <= g.objective[k - 1] + 1e-12);

  auto plain = forward_backward(anisotropic(), zero_function(), vec({1, 1}), cfg_iters(40, 0.1));
  auto gd = gradient_descent(anisotropic(), vec({1, 1}), cfg_iters(40, 0.1));
  CHECK(plain.objective == gd.objective);
}

TEST_CASE("fista t sequence and inertial variants") {
  auto f = make_quadratic(LinearOperator::identity(2), vec({3, 0.5}), 1.0).smooth;
  SolverConfig c = cfg_iters(5, 1.0);
  c.inertia = Inertia::fista_t;
  auto t = forward_backward(f, l1_norm(1.0), vec({0, 0}), c);
  const auto& ts = t.column("t");
  CHECK(ts[0] == 1.0);
  CHECK(ts[1] == doctest::Approx((1 + std::sqrt(5.0)) / 2).epsilon(1e-15));
  for (std::size_t k = 1; k < ts.size(); ++k)
    CHECK(ts[k] * ts[k] - ts[k] - ts[k - 1] * ts[k - 1] == doctest::Approx(0.0).epsilon(1e-12));

  c.inertia = Inertia::fista_beta;
  c.beta = 2.0;
  CHECK_THROWS_AS(forward_backward(f, l1_norm(1.0), vec({0, 0}), c), ConfigError);

  // A non-diagonal operator carries no inferred modulus.
  c.inertia = Inertia::vfista;
  Matrix U(2, 2);
  U << 1, 1, 0, 1;
  auto unknown = make_quadratic(LinearOperator::dense(U), vec({3, 0.5}), 1.0);
  CHECK_THROWS_AS(forward_backward(unknown.smooth, l1_norm(1.0), vec({0, 0}), c), ConfigError);
  auto strongly = make_quadratic(LinearOperator::identity(2), vec({3, 0.5}), 1.0, 1.0).smooth;
  c.max_iter = 30;
  auto v = forward_backward(strongly, l1_norm(1.0), vec({0, 0}), c);
  CHECK(max_diff(v.solution(), vec({2, 0})) < 1e-12);
}

TEST_CASE("nonconvex forward-backward") {
  auto dw = nonconvex_forward_backward(double_well(), zero_function(), vec({0.5}),
                                       cfg_iters(2000, 0.1));
  CHECK(dw.solution()[0] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(std::abs(double_well().grad(dw.solution())[0]) < 1e-8);

  auto f = make_quadratic(LinearOperator::identity(1), vec({3}), 1.0).smooth;
  auto ht = nonconvex_forward_backward(f, hard_threshold(1.0), vec({0.2}), cfg_iters(50, 0.5));
  for (double m : ht.column("h1_margin")) CHECK(m >= -1e-8);
  CHECK(ht.solution()[0] == doctest::Approx(3.0));

  auto g = make_quadratic(LinearOperator::identity(2), vec({3, 0.5}), 1.0).smooth;
  auto a = nonconvex_forward_backward(g, l1_norm(1.0), vec({-1, 1}), cfg_iters(30, 0.9));
  auto b = forward_backward(g, l1_norm(1.0), vec({-1, 1}), cfg_iters(30, 0.9));
  CHECK(a.objective == b.objective);
  CHECK(a.residual == b.residual);
}

TEST_CASE("krasnoselskii-mann on a rotation") {
  const VectorMap rot = [](const Vector& x) { return vec({-x[1], x[0]}); };
  SolverConfig c = cfg_iters(100);
  c.relaxation = Relaxation::constant(0.5);
  auto t = krasnoselskii_mann(rot, vec({1, 0}), c);
  for (std::size_t k = 1; k < t.size(); ++k) CHECK(t.objective[k] < t.objective[k - 1]);
  CHECK(t.objective.back() <= 1e-8);
  // Oracle: the averaged map has spectral radius sqrt(2)/2.
  CHECK(t.objective[9] == doctest::Approx(std::sqrt(2.0) * std::pow(std::sqrt(0.5), 10)));

  c.relaxation = Relaxation::constant(1.0);
  auto orbit = krasnoselskii_mann(rot, vec({1, 0}), c);
  for (double r : orbit.objective) CHECK(r == doctest::Approx(std::sqrt(2.0)));

  c.relaxation = Relaxation::constant(0.0);
  auto frozen = krasnoselskii_mann(rot, vec({1, 0}), c);
  for (double r : frozen.residual) CHECK(r == 0.0);

  c.relaxation = Relaxation::constant(0.5);
  auto id = krasnoselskii_mann([](const Vector& x) { return x; }, vec({3, 4}), c);
  for (double r : id.residual) CHECK(r == 0.0);

  c.relaxation = Relaxation::constant(1.5);
  CHECK_THROWS_AS(krasnoselskii_mann(rot, vec({1, 0}), c), ConfigError);
}

TEST_CASE("douglas-rachford") {
  auto f = sq_distance(vec({0}));
  auto g = sq_distance(vec({4}));
  auto t = douglas_rachford(f, g, vec({-7}), cfg_iters(200, 1.0));
  CHECK(t.solution()[0] == doctest::Approx(2.0).epsilon(1e-12));

  auto same = douglas_rachford(sq_distance(vec({1})), sq_distance(vec({1})), vec({1}),
                               cfg_iters(10, 1.0));
  for (double r : same.residual) CHECK(r == 0.0);

  // Two-sequence form written out independently.
  auto h = l1_norm(1.0);
  auto q = sq_distance(vec({3, -1}));
  const double gamma = 0.7;
  SolverConfig c = cfg_iters(25, gamma);
  c.thin = 1;
  auto dr = douglas_rachford(h, q, vec({0.5, 2}), c);
  Vector x = vec({0.5, 2});
  for (int n = 1; n <= 25; ++n) {
    const Vector y = q.prox(x, gamma);
    const Vector z = h.prox(2 * y - x, gamma);
    x = x + (z - y);
    CHECK(max_diff(dr.snapshots[n].x, x) < 1e-14);
  }
  c.relaxation = Relaxation::constant(2.5);
  CHECK_THROWS_AS(douglas_rachford(h, q, vec({0, 0}), c), ConfigError);
}

TEST_CASE("ppxa") {
  auto t = ppxa({{sq_distance(vec({1.5})), {}}, {sq_distance(vec({1.5})), {}}}, vec({-2}),
                cfg_iters(100, 1.0));
  CHECK(t.solution()[0] == doctest::Approx(1.5).epsilon(1e-12));

  auto s = ppxa({{l1_norm(1.0), {}}, {sq_distance(vec({3})), {}}}, vec({0}), cfg_iters(400, 1.0));
  CHECK(s.solution()[0] == doctest::Approx(2.0).epsilon(1e-10));

  auto dr = douglas_rachford(l1_norm(1.0), sq_distance(vec({3})), vec({0}), cfg_iters(400, 1.0));
  CHECK(std::abs(s.solution()[0] - dr.solution()[0]) <= 1e-6);

  // With an operator: |x - 1|^2/2 + |2x|_1 on a scalar, solution 0 since
  // the subgradient 2 exceeds the pull 1.
  auto w = ppxa({{sq_distance(vec({1})), {}}, {l1_norm(1.0), LinearOperator::scale(2.0, 1)}},
                vec({5}), cfg_iters(2000, 1.0));
  CHECK(std::abs(w.solution()[0]) < 1e-8);

  CHECK_THROWS_AS(ppxa({{l1_norm(1.0), {}}}, vec({0}), cfg_iters(1)), ConfigError);
}

TEST_CASE("admm") {
  const auto I = LinearOperator::identity(1);
  const auto mI = LinearOperator::scale(-1.0, 1);
  auto f = l1_norm(1.0);
  auto g = sq_distance(vec({3}));
  SolverConfig c = cfg_iters(200, 1.0);
  c.thin = 1;
  auto t = admm(admm_prox_block(f, I), admm_prox_block(g, mI), vec({0}), vec({0}), vec({0}), c);
  CHECK(t.final_vector("x")[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(t.final_vector("y")[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(t.column("primal_residual").back() < 1e-10);

  // Simplified recursion written out by hand.
  const double gamma = 1.0;
  Vector y = vec({0}), z = vec({0});
  for (int n = 1; n <= 20; ++n) {
    const Vector x = f.prox(y - z / gamma, 1.0 / gamma);
    y = g.prox(x + z / gamma, 1.0 / gamma);
    z = z + gamma * (x - y);
    CHECK(max_diff(t.snapshots[n].x, x) < 1e-14);
    CHECK(max_diff(t.snapshots[n].aux.at("y"), y) < 1e-14);
  }

  // Shifted constraint x - y = c with g(y + c): x unchanged, y moves by -c.
  const double shift = 0.75;
  auto s = admm(admm_prox_block(f, I), admm_prox_block(sq_distance(vec({3 - shift})), mI),
                vec({shift}), vec({0}), vec({0}), c);
  CHECK(s.final_vector("x")[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(s.final_vector("y")[0] == doctest::Approx(2.0 - shift).epsilon(1e-10));
}

TEST_CASE("chambolle-pock") {
  SaddleProblem prob{conjugate(l1_norm(1.0)), sq_distance(vec({2})), LinearOperator::identity(1),
                     l1_norm(1.0)};
  SolverConfig c = cfg_iters(20);
  c.sigma = 0.5;
  c.tau = 0.5;
  c.thin = 1;
  auto still = chambolle_pock(prob, vec({1}), vec({1}), c);
  for (const auto& s : still.snapshots) {
    CHECK(s.x[0] == 1.0);
    CHECK(s.aux.at("y")[0] == 1.0);
  }

  c.max_iter = 3000;
  c.thin = 0;
  auto run = chambolle_pock(prob, vec({0}), vec({0}), c);
  CHECK(run.solution()[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(run.final_vector("y")[0] == doctest::Approx(1.0).epsilon(1e-9));

  c.sigma = 1.0;
  c.tau = 1.0;
  CHECK_THROWS_AS(chambolle_pock(prob, vec({0}), vec({0}), c), ConfigError);

  // K = 0 decouples into two proximal point chains.
  SaddleProblem zero{sq_distance(vec({-1})), sq_distance(vec({2})),
                     LinearOperator::dense(Matrix::Zero(1, 1)), {}};
  SolverConfig d = cfg_iters(10);
  d.sigma = 0.3;
  d.tau = 0.6;
  d.thin = 1;
  auto dec = chambolle_pock(zero, vec({5}), vec({4}), d);
  SolverConfig px = cfg_iters(10, 0.6);
  px.thin = 1;
  SolverConfig py = cfg_iters(10, 0.3);
  py.thin = 1;
  auto xs = proximal_point(sq_distance(vec({2})), vec({5}), px);
  auto ys = proximal_point(sq_distance(vec({-1})), vec({4}), py);
  for (int n = 1; n <= 10; ++n) {
    CHECK(dec.snapshots[n].x[0] == doctest::Approx(xs.snapshots[n].x[0]).epsilon(1e-15));
    CHECK(dec.snapshots[n].aux.at("y")[0] == doctest::Approx(ys.snapshots[n].x[0]).epsilon(1e-15));
  }
  auto ah = arrow_hurwicz(zero, vec({5}), vec({4}), d);
  for (int n = 1; n <= 10; ++n) CHECK(ah.snapshots[n].x[0] == dec.snapshots[n].x[0]);
}

TEST_CASE("arrow-hurwicz with a strongly convex primal term") {
  SaddleProblem prob{conjugate(l1_norm(1.0)), sq_distance(vec({2, -0.5, 3})),
                     LinearOperator::identity(3), l1_norm(1.0)};
  SolverConfig c = cfg_iters(20000);
  c.sigma = 0.5;
  c.tau = 0.5;
  c.residual_tol = 1e-10;
  auto t = arrow_hurwicz(prob, Vector::Zero(3), Vector::Zero(3), c);
  CHECK(t.termination == Termination::tol_reached);
  CHECK(max_diff(t.solution(), vec({1, 0, 2})) < 1e-8);
}

TEST_CASE("condat") {
  // No dual terms, g = 0: plain gradient descent with step tau.
  auto f = anisotropic();
  SolverConfig c = cfg_iters(30);
  c.tau = 0.15;
  auto t = condat(f, zero_function(), {}, vec({1, 1}), {}, c);
  auto gd = gradient_descent(f, vec({1, 1}), cfg_iters(30, 0.15));
  for (std::size_t k = 0; k < t.size(); ++k)
    CHECK(t.objective[k] == doctest::Approx(gd.objective[k]).epsilon(1e-14));

  // One term with L = Id against the primal-dual iteration started from
  // (x0, y1): both produce x_n.
  const Vector y = vec({2, -0.3});
  SaddleProblem prob{conjugate(l1_norm(1.0)), sq_distance(y), LinearOperator::identity(2),
                     l1_norm(1.0)};
  SolverConfig p = cfg_iters(40);
  p.sigma = 0.5;
  p.tau = 0.9;
  p.thin = 1;
  const Vector x0 = vec({0.4, 1}), y0 = vec({0.1, -0.2});
  auto cp = chambolle_pock(prob, x0, y0, p);
  const Vector y1 = cp.snapshots[1].aux.at("y");
  auto cd = condat(zero_smooth(), sq_distance(y), {{l1_norm(1.0), LinearOperator::identity(2)}},
                   x0, {y1}, p);
  for (int n = 1; n <= 39; ++n) {
    CHECK(max_diff(cd.snapshots[n].x, cp.snapshots[n].x) < 1e-13);
    CHECK(max_diff(cd.snapshots[n].aux.at("u0"), cp.snapshots[n + 1].aux.at("y")) < 1e-13);
  }
  p.tau = 2.5;
  CHECK_THROWS_AS(condat(zero_smooth(), sq_distance(y), {{l1_norm(1.0), LinearOperator::identity(2)}},
                         x0, {y1}, p),
                  ConfigError);
}

TEST_CASE("trace bookkeeping") {
  SolverConfig c = cfg_iters(0, 1.0);
  auto empty = gradient_descent(half_sq(1), vec({3}), c);
  CHECK(empty.size() == 0);
  CHECK(empty.termination == Termination::iter_cap);
  CHECK(empty.solution()[0] == 3.0);

  c.max_iter = 10;
  c.thin = 3;
  c.gamma = 0.5;
  auto t = gradient_descent(half_sq(1), vec({3}), c);
  std::vector<int> ns;
  for (const auto& s : t.snapshots) ns.push_back(s.n);
  CHECK(ns == std::vector<int>{0, 3, 6, 9});
  CHECK(t.residual[0] == doctest::Approx(1.5));

  c.residual_tol = 1e-3;
  c.max_iter = 1000;
  auto stop = gradient_descent(half_sq(1), vec({3}), c);
  CHECK(stop.termination == Termination::tol_reached);
  CHECK(stop.residual.back() <= 1e-3 * (1 + std::abs(stop.solution()[0])));
}
