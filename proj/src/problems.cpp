#include "proxsplit/problems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "proxsplit/errors.hpp"
#include "proxsplit/random.hpp"

namespace proxsplit {

namespace fs = std::filesystem;

std::vector<std::string> ProblemInstance::recipe_names() const {
  std::vector<std::string> names;
  for (const auto& [k, v] : recipes) names.push_back(k);
  return names;
}

RecipeResult ProblemInstance::run(const std::string& recipe,
                                  const SolverConfig& cfg) const {
  auto it = recipes.find(recipe);
  if (it == recipes.end()) {
    std::string known;
    for (const auto& n : recipe_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("problem " + name + " has no recipe '" + recipe +
                      "' (available: " + known + ")");
  }
  return it->second(cfg);
}

namespace {

using Objective = std::function<double(const Vector&)>;

RecipeResult finish(const std::string& recipe, SolverTrace trace, Vector x,
                    const Objective& J) {
  RecipeResult r{recipe, std::move(trace), std::move(x), 0.0};
  r.objective = J(r.x);
  return r;
}

SolverConfig with_inertia(SolverConfig cfg, Inertia m) {
  cfg.inertia = m;
  return cfg;
}

double tv(const LinearOperator& G, const Vector& x) {
  return G.apply(x).lpNorm<1>();
}

void check_image(const ImageGrid& y, const std::string& who) {
  if (y.rows < 1 || y.cols < 1 || y.pixels.size() != y.rows * y.cols)
    throw DimensionError(who + ": image " + std::to_string(y.rows) + "x" +
                         std::to_string(y.cols) + " with " +
                         std::to_string(y.pixels.size()) + " pixels");
}

void check_lambda(double lambda, const std::string& who) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ConfigError(who + ": lambda must be finite and >= 0");
}

// Douglas-Rachford on (x, z) with z = K x; f acts on the stacked vector.
Recipe extended_dr(ProxFn data, ProxFn reg, LinearOperator K, Vector start,
                   Objective J) {
  const Index n = K.in_dim();
  const Index m = K.out_dim();
  ProxFn ftilde = separable({{data, index_range(0, n)}, {reg, index_range(n, m)}});
  ProxFn gtilde = affine_graph(K);
  return [=](const SolverConfig& cfg) {
    Vector X0(n + m);
    X0 << start, K.apply(start);
    SolverTrace t = douglas_rachford(ftilde, gtilde, X0, cfg);
    Vector x = t.solution().head(n);
    return finish("dr", std::move(t), std::move(x), J);
  };
}

}  // namespace

ProblemInstance build_lasso(const LinearOperator& A, const Vector& y,
                            double lambda, std::optional<double> alpha) {
  check_lambda(lambda, "lasso");
  if (y.size() != A.out_dim())
    throw DimensionError("lasso: y has length " + std::to_string(y.size()) +
                         ", A maps to " + std::to_string(A.out_dim()));
  const Quadratic q = make_quadratic(A, y, 1.0, alpha);
  const ProxFn g = l1_norm(lambda);
  const Index n = A.in_dim();
  ProblemInstance p;
  p.name = "lasso";
  p.dim = n;
  p.x0 = Vector::Zero(n);
  const SmoothFn f = q.smooth;
  Objective J = [f, g](const Vector& x) { return f.eval(x) + g.eval(x); };
  p.objective = J;
  p.metadata["lambda"] = lambda;
  p.metadata["lipschitz"] = f.lipschitz;
  if (alpha) p.metadata["alpha"] = *alpha;
  const Vector x0 = p.x0;

  auto fb_like = [=](const std::string& name, Inertia m) -> Recipe {
    return [=](const SolverConfig& cfg) {
      SolverTrace t = forward_backward(f, g, x0, with_inertia(cfg, m));
      Vector x = t.solution();
      return finish(name, std::move(t), std::move(x), J);
    };
  };
  p.recipes["fb"] = fb_like("fb", Inertia::none);
  p.recipes["fista"] = fb_like("fista", Inertia::fista_t);
  p.recipes["fista_beta"] = fb_like("fista_beta", Inertia::fista_beta);
  p.recipes["vfista"] = [=](const SolverConfig& cfg) {
    if (!alpha)
      throw ConfigError("lasso: vfista needs a user-supplied strong convexity modulus");
    SolverTrace t = forward_backward(f, g, x0, with_inertia(cfg, Inertia::vfista));
    Vector x = t.solution();
    return finish("vfista", std::move(t), std::move(x), J);
  };
  const ProxFn fprox = q.prox;
  p.recipes["dr"] = [=](const SolverConfig& cfg) {
    SolverTrace t = douglas_rachford(fprox, g, x0, cfg);
    Vector x = t.solution();
    return finish("dr", std::move(t), std::move(x), J);
  };
  const ProxFn data = sq_distance(y);
  const SaddleProblem sp{conjugate(data), g, A, data};
  p.recipes["cp"] = [=](const SolverConfig& cfg) {
    SolverTrace t = chambolle_pock(sp, x0, Vector::Zero(A.out_dim()), cfg);
    Vector x = t.solution();
    return finish("cp", std::move(t), std::move(x), J);
  };
  return p;
}

ProblemInstance build_tv_denoise(const ImageGrid& y, double lambda) {
  check_image(y, "tv_denoise");
  check_lambda(lambda, "tv_denoise");
  const Index n = y.size();
  LinearOperator G = LinearOperator::grad2d(y.rows, y.cols, y.boundary);
  operator_norm(G);
  const Vector obs = y.pixels;
  Objective J = [G, obs, lambda](const Vector& x) {
    return 0.5 * (x - obs).squaredNorm() + lambda * tv(G, x);
  };
  ProblemInstance p;
  p.name = "tv_denoise";
  p.dim = n;
  p.x0 = obs;
  p.objective = J;
  p.metadata["lambda"] = lambda;
  p.metadata["rows"] = static_cast<double>(y.rows);
  p.metadata["cols"] = static_cast<double>(y.cols);

  const ProxFn data = sq_distance(obs);
  const ProxFn reg = l1_norm(lambda);
  p.recipes["dr"] = extended_dr(data, reg, G, obs, J);
  p.recipes["ppxa"] = [=](const SolverConfig& cfg) {
    SolverTrace t = ppxa({{data, std::nullopt}, {reg, G}}, obs, cfg);
    Vector x = t.solution();
    return finish("ppxa", std::move(t), std::move(x), J);
  };
  const SaddleProblem sp{linf_ball(lambda), data, G, reg};
  p.recipes["cp"] = [=](const SolverConfig& cfg) {
    SolverTrace t = chambolle_pock(sp, obs, Vector::Zero(G.out_dim()), cfg);
    Vector x = t.solution();
    return finish("cp", std::move(t), std::move(x), J);
  };
  // Dual: min_p (1/2)|y + grad* p|^2 + i_B(p), then x = y + grad* p.
  const Quadratic dual = make_quadratic(LinearOperator::adjoint_of(G), -obs, 1.0);
  const SmoothFn fd = dual.smooth;
  const ProxFn ball = linf_ball(lambda);
  p.recipes["dual_fb"] = [=](const SolverConfig& cfg) {
    SolverConfig c = cfg;
    c.thin = 1;
    SolverTrace t = forward_backward(fd, ball, Vector::Zero(G.out_dim()), c);
    // Report the primal objective of y + grad* p_n; the dual one moves to extras.
    const std::vector<double> dual_obj = t.objective;
    t.initial_objective = J(obs);
    for (const auto& s : t.snapshots)
      if (s.n >= 1) t.objective[static_cast<std::size_t>(s.n - 1)] = J(obs + G.adjoint_apply(s.x));
    if (cfg.thin != 1) {
      std::vector<Snapshot> kept;
      for (auto& s : t.snapshots)
        if (cfg.thin > 0 && s.n % cfg.thin == 0) kept.push_back(std::move(s));
      t.snapshots = std::move(kept);
    }
    Vector x = obs + G.adjoint_apply(t.solution());
    t.final_vectors["p"] = t.solution();
    t.summary["final_objective"] = t.objective.empty() ? t.initial_objective : t.objective.back();
    t.summary["dual_objective"] = dual_obj.empty() ? std::nan("") : dual_obj.back();
    return finish("dual_fb", std::move(t), std::move(x), J);
  };
  const SmoothFn fid = make_quadratic(LinearOperator::identity(n), obs, 1.0).smooth;
  const ProxFn zero = zero_function();
  p.recipes["condat"] = [=](const SolverConfig& cfg) {
    SolverTrace t = condat(fid, zero, {{reg, G}}, obs, {}, cfg);
    Vector x = t.solution();
    return finish("condat", std::move(t), std::move(x), J);
  };
  return p;
}

ProblemInstance build_tv_inverse(const LinearOperator& A, const Vector& y,
                                 Index rows, Index cols, double lambda,
                                 Boundary boundary) {
  check_lambda(lambda, "tv_inverse");
  const Index n = rows * cols;
  if (A.in_dim() != n || A.out_dim() != y.size())
    throw DimensionError("tv_inverse: A is " + std::to_string(A.out_dim()) + "x" +
                         std::to_string(A.in_dim()) + ", grid has " +
                         std::to_string(n) + " pixels, y has " +
                         std::to_string(y.size()));
  LinearOperator G = LinearOperator::grad2d(rows, cols, boundary);
  operator_norm(G);
  const Quadratic q = make_quadratic(A, y, 1.0);
  const SmoothFn f = q.smooth;
  Objective J = [f, G, lambda](const Vector& x) { return f.eval(x) + lambda * tv(G, x); };
  ProblemInstance p;
  p.name = "tv_inverse";
  p.dim = n;
  p.x0 = A.adjoint_apply(y);
  p.objective = J;
  p.metadata["lambda"] = lambda;
  p.metadata["rows"] = static_cast<double>(rows);
  p.metadata["cols"] = static_cast<double>(cols);
  const Vector x0 = p.x0;
  const ProxFn reg = l1_norm(lambda);
  const ProxFn zero = zero_function();
  p.recipes["condat"] = [=](const SolverConfig& cfg) {
    SolverTrace t = condat(f, zero, {{reg, G}}, x0, {}, cfg);
    Vector x = t.solution();
    return finish("condat", std::move(t), std::move(x), J);
  };
  LinearOperator K = LinearOperator::stack({A, G});
  operator_norm(K);
  const Index m = A.out_dim();
  const ProxFn F = separable({{sq_distance(y), index_range(0, m)},
                              {reg, index_range(m, G.out_dim())}});
  const SaddleProblem sp{conjugate(F), zero, K, F};
  p.recipes["cp"] = [=](const SolverConfig& cfg) {
    SolverTrace t = chambolle_pock(sp, x0, Vector::Zero(K.out_dim()), cfg);
    Vector x = t.solution();
    return finish("cp", std::move(t), std::move(x), J);
  };
  return p;
}

ProblemInstance build_tvl1(const ImageGrid& y, double lambda) {
  check_image(y, "tvl1");
  check_lambda(lambda, "tvl1");
  LinearOperator G = LinearOperator::grad2d(y.rows, y.cols, y.boundary);
  operator_norm(G);
  const Vector obs = y.pixels;
  Objective J = [G, obs, lambda](const Vector& x) {
    return (x - obs).lpNorm<1>() + lambda * tv(G, x);
  };
  ProblemInstance p;
  p.name = "tvl1";
  p.dim = y.size();
  p.x0 = obs;
  p.objective = J;
  p.metadata["lambda"] = lambda;
  const ProxFn data = l1_residual(obs, 1.0);
  const ProxFn reg = l1_norm(lambda);
  const SaddleProblem sp{linf_ball(lambda), data, G, reg};
  p.recipes["cp"] = [=](const SolverConfig& cfg) {
    SolverTrace t = chambolle_pock(sp, obs, Vector::Zero(G.out_dim()), cfg);
    Vector x = t.solution();
    return finish("cp", std::move(t), std::move(x), J);
  };
  p.recipes["dr"] = extended_dr(data, reg, G, obs, J);
  return p;
}

ProblemInstance build_poisson_editing(const Vector& source_grad,
                                      const ImageGrid& target,
                                      const std::vector<bool>& omega) {
  check_image(target, "poisson_editing");
  const Index n = target.size();
  if (static_cast<Index>(omega.size()) != n)
    throw DimensionError("poisson_editing: mask has " + std::to_string(omega.size()) +
                         " entries for " + std::to_string(n) + " pixels");
  if (source_grad.size() != 2 * n)
    throw DimensionError("poisson_editing: source gradient has length " +
                         std::to_string(source_grad.size()) + ", expected " +
                         std::to_string(2 * n));
  ProblemInstance p;
  p.name = "poisson_editing";
  p.dim = n;
  p.x0 = target.pixels;
  const Index R = target.rows, C = target.cols;
  Index inside = 0;
  bool touches_border = false;
  for (Index r = 0; r < R; ++r)
    for (Index c = 0; c < C; ++c)
      if (omega[static_cast<std::size_t>(r * C + c)]) {
        ++inside;
        if (r == 0 || c == 0 || r == R - 1 || c == C - 1) touches_border = true;
      }
  if (inside == n) p.warnings.push_back("region covers the full grid; constraint is vacuous");
  else if (touches_border) p.warnings.push_back("region touches the grid border");
  if (inside == 0) p.warnings.push_back("region is empty; solution is the target");
  p.metadata["region_pixels"] = static_cast<double>(inside);

  // Keep gradient entries with an endpoint in the region.
  auto in = [&](Index r, Index c) { return omega[static_cast<std::size_t>(r * C + c)]; };
  std::vector<bool> keep(static_cast<std::size_t>(2 * n), false);
  for (Index r = 0; r < R; ++r)
    for (Index c = 0; c < C; ++c) {
      const Index i = r * C + c;
      keep[static_cast<std::size_t>(i)] = in(r, c) || (c + 1 < C && in(r, c + 1));
      keep[static_cast<std::size_t>(n + i)] = in(r, c) || (r + 1 < R && in(r + 1, c));
    }
  const LinearOperator M = LinearOperator::mask(keep);
  const LinearOperator MG =
      LinearOperator::compose({M, LinearOperator::grad2d(R, C, target.boundary)});
  const Vector b = M.apply(source_grad);
  Vector lo(n), hi(n);
  for (Index i = 0; i < n; ++i) {
    const bool free = omega[static_cast<std::size_t>(i)];
    lo[i] = free ? -kInf : target.pixels[i];
    hi[i] = free ? kInf : target.pixels[i];
  }
  const ProxFn D = box(lo, hi);
  const Vector x0 = p.x0;
  if (inside == 0) {
    const Vector t = target.pixels;
    p.objective = [D](const Vector& x) { return D.eval(x); };
    p.recipes["projected_gradient"] = [t](const SolverConfig& cfg) {
      SolverTrace tr;
      tr.algorithm = "projected_gradient";
      tr.initial_objective = 0.0;
      tr.termination = cfg.max_iter > 0 ? Termination::tol_reached : Termination::iter_cap;
      tr.message = "empty region";
      tr.final_vectors["x"] = t;
      tr.summary["iterations"] = 0.0;
      tr.summary["final_objective"] = 0.0;
      return RecipeResult{"projected_gradient", std::move(tr), t, 0.0};
    };
    return p;
  }
  const SmoothFn f = make_quadratic(MG, b, 1.0).smooth;
  Objective J = [f, D](const Vector& x) { return f.eval(x) + D.eval(x); };
  p.objective = J;
  p.metadata["lipschitz"] = f.lipschitz;
  p.recipes["projected_gradient"] = [=](const SolverConfig& cfg) {
    SolverTrace t = projected_gradient(f, D, x0, cfg);
    Vector x = t.solution();
    return finish("projected_gradient", std::move(t), std::move(x), J);
  };
  return p;
}

ProblemInstance build_wavelet_reg(const LinearOperator& A, const Vector& y,
                                  double lambda, const LinearOperator& T) {
  check_lambda(lambda, "wavelet_reg");
  if (T.in_dim() != A.in_dim())
    throw DimensionError("wavelet_reg: transform acts on " + std::to_string(T.in_dim()) +
                         ", A on " + std::to_string(A.in_dim()));
  const SmoothFn f = make_quadratic(A, y, 1.0).smooth;
  const ProxFn g = composed_orthogonal(T, l1_norm(lambda));
  Objective J = [f, g](const Vector& x) { return f.eval(x) + g.eval(x); };
  ProblemInstance p;
  p.name = "wavelet_reg";
  p.dim = A.in_dim();
  p.x0 = Vector::Zero(p.dim);
  p.objective = J;
  p.metadata["lambda"] = lambda;
  const Vector x0 = p.x0;
  p.recipes["fb"] = [=](const SolverConfig& cfg) {
    SolverTrace t = forward_backward(f, g, x0, with_inertia(cfg, Inertia::none));
    Vector x = t.solution();
    return finish("fb", std::move(t), std::move(x), J);
  };
  p.recipes["fista"] = [=](const SolverConfig& cfg) {
    SolverTrace t = forward_backward(f, g, x0, with_inertia(cfg, Inertia::fista_t));
    Vector x = t.solution();
    return finish("fista", std::move(t), std::move(x), J);
  };
  return p;
}

LinearOperator haar_operator(Index n) {
  if (n < 1 || (n & (n - 1)) != 0)
    throw ConfigError("haar transform needs a power-of-two length, got " +
                      std::to_string(n));
  Matrix H = Matrix::Ones(1, 1);
  const double s = 1.0 / std::sqrt(2.0);
  while (H.rows() < n) {
    const Index h = H.rows();
    Matrix next = Matrix::Zero(2 * h, 2 * h);
    for (Index i = 0; i < h; ++i)
      for (Index j = 0; j < h; ++j) {
        next(i, 2 * j) = s * H(i, j);
        next(i, 2 * j + 1) = s * H(i, j);
      }
    for (Index i = 0; i < h; ++i) {
      next(h + i, 2 * i) = s;
      next(h + i, 2 * i + 1) = -s;
    }
    H = std::move(next);
  }
  LinearOperator T = LinearOperator::dense(H);
  T.set_cached_norm(1.0);
  return T;
}

Agreement compare_recipes(const std::vector<RecipeResult>& results) {
  Agreement a;
  if (results.empty()) return a;
  a.best = kInf;
  for (const auto& r : results) {
    a.objectives[r.recipe] = r.objective;
    a.best = std::min(a.best, r.objective);
  }
  for (const auto& r : results)
    a.worst_relative = std::max(a.worst_relative, (r.objective - a.best) /
                                                      std::max(1.0, std::abs(a.best)));
  return a;
}

// ---------------------------------------------------------------------------

SyntheticKind parse_synthetic_kind(const std::string& s) {
  if (s == "step_image") return SyntheticKind::step_image;
  if (s == "ramp") return SyntheticKind::ramp;
  if (s == "sparse_vector") return SyntheticKind::sparse_vector;
  if (s == "blur_kernel") return SyntheticKind::blur_kernel;
  if (s == "mask_pattern") return SyntheticKind::mask_pattern;
  throw ConfigError("unknown synthetic kind '" + s + "'");
}

std::string to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::step_image: return "step_image";
    case SyntheticKind::ramp: return "ramp";
    case SyntheticKind::sparse_vector: return "sparse_vector";
    case SyntheticKind::blur_kernel: return "blur_kernel";
    case SyntheticKind::mask_pattern: return "mask_pattern";
  }
  return "unknown";
}

namespace {

Vector step_image(Index rows, Index cols) {
  Vector v(rows * cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) v[r * cols + c] = c >= cols / 2 ? 1.0 : 0.0;
  return v;
}

Matrix blur3() {
  Matrix k(3, 3);
  k << 1, 2, 1, 2, 4, 2, 1, 2, 1;
  return k / 16.0;
}

}  // namespace

LinearOperator SyntheticData::forward() const {
  const Index n = spec.rows * spec.cols;
  switch (spec.kind) {
    case SyntheticKind::sparse_vector: return LinearOperator::dense(*matrix);
    case SyntheticKind::blur_kernel:
      return LinearOperator::circular_conv(spec.rows, spec.cols, *kernel, 1, 1);
    case SyntheticKind::mask_pattern: return LinearOperator::mask(*mask);
    default: return LinearOperator::identity(n);
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.rows < 1 || spec.cols < 1) throw ConfigError("synthetic dims must be positive");
  if (spec.noise < 0.0) throw ConfigError("synthetic noise must be >= 0");
  Rng rng(spec.seed);
  SyntheticData d;
  d.spec = spec;
  const Index n = spec.rows * spec.cols;
  switch (spec.kind) {
    case SyntheticKind::step_image:
      d.truth = step_image(spec.rows, spec.cols);
      d.observed = d.truth + rng.gaussian_vector(n, spec.noise);
      break;
    case SyntheticKind::ramp: {
      d.truth.resize(n);
      for (Index r = 0; r < spec.rows; ++r)
        for (Index c = 0; c < spec.cols; ++c)
          d.truth[r * spec.cols + c] =
              spec.cols > 1 ? static_cast<double>(c) / static_cast<double>(spec.cols - 1)
                            : 0.0;
      d.observed = d.truth + rng.gaussian_vector(n, spec.noise);
      break;
    }
    case SyntheticKind::sparse_vector: {
      if (!(spec.density >= 0.0 && spec.density <= 1.0))
        throw ConfigError("sparse_vector density must lie in [0, 1]");
      const Index m = spec.measurements > 0 ? spec.measurements : n;
      const Index k = static_cast<Index>(std::llround(spec.density * static_cast<double>(n)));
      std::vector<Index> idx(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
      for (Index i = 0; i < k; ++i) {
        const Index j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      }
      d.truth = Vector::Zero(n);
      for (Index i = 0; i < k; ++i) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        d.truth[idx[static_cast<std::size_t>(i)]] = sign * (1.0 + rng.uniform());
      }
      Matrix A(m, n);
      const double s = 1.0 / std::sqrt(static_cast<double>(m));
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) A(i, j) = s * rng.gaussian();
      d.observed = A * d.truth + rng.gaussian_vector(m, spec.noise);
      d.matrix = std::move(A);
      break;
    }
    case SyntheticKind::blur_kernel: {
      d.truth = step_image(spec.rows, spec.cols);
      d.kernel = blur3();
      d.observed = d.forward().apply(d.truth) + rng.gaussian_vector(n, spec.noise);
      break;
    }
    case SyntheticKind::mask_pattern: {
      std::vector<bool> keep(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) keep[static_cast<std::size_t>(i)] = rng.uniform() < spec.keep;
      d.truth = step_image(spec.rows, spec.cols);
      d.mask = keep;
      d.observed = d.forward().apply(d.truth + rng.gaussian_vector(n, spec.noise));
      break;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------

ImageGrid read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5") throw IoError(path.string() + ": not a binary PGM (P5)");
  auto next_int = [&](const char* what) {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    long v = -1;
    if (!(in >> v)) throw IoError(path.string() + ": malformed header (" + what + ")");
    return v;
  };
  const long w = next_int("width");
  const long h = next_int("height");
  const long maxval = next_int("maxval");
  if (w < 1 || h < 1) throw IoError(path.string() + ": bad dimensions");
  if (maxval < 1 || maxval > 255)
    throw IoError(path.string() + ": maxval must lie in [1, 255]");
  in.get();  // single whitespace after the header
  std::vector<unsigned char> buf(static_cast<std::size_t>(w * h));
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (in.gcount() != static_cast<std::streamsize>(buf.size()))
    throw IoError(path.string() + ": truncated pixel data");
  Vector px(w * h);
  for (long i = 0; i < w * h; ++i)
    px[i] = static_cast<double>(buf[static_cast<std::size_t>(i)]) / static_cast<double>(maxval);
  return ImageGrid(h, w, std::move(px));
}

void write_pgm(const fs::path& path, const ImageGrid& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.cols << ' ' << img.rows << "\n255\n";
  for (Index i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img.pixels[i], 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ImageGrid read_csv_grid(const fs::path& path) {
  const Matrix m = load_matrix_csv(path);
  Vector px(m.size());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) px[r * m.cols() + c] = m(r, c);
  return ImageGrid(m.rows(), m.cols(), std::move(px));
}

void write_csv_grid(const fs::path& path, const ImageGrid& img) {
  Matrix m(img.rows, img.cols);
  for (Index r = 0; r < img.rows; ++r)
    for (Index c = 0; c < img.cols; ++c) m(r, c) = img.at(r, c);
  save_matrix_csv(path, m);
}

namespace {

Matrix as_column(const Vector& v) { return Matrix(v); }

Vector flatten(const Matrix& m) {
  Vector v(m.size());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
  return v;
}

Matrix grid_of(const Vector& v, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = v[r * cols + c];
  return m;
}

}  // namespace

void write_fixture(const fs::path& dir, const SyntheticData& data,
                   const nlohmann::json& extra) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create fixture directory " + dir.string());
  const auto& s = data.spec;
  nlohmann::json m;
  m["kind"] = to_string(s.kind);
  m["rows"] = s.rows;
  m["cols"] = s.cols;
  m["noise"] = s.noise;
  m["seed"] = s.seed;
  nlohmann::json files;
  const bool vec = s.kind == SyntheticKind::sparse_vector;
  if (vec) {
    m["density"] = s.density;
    m["measurements"] = data.matrix->rows();
    save_matrix_csv(dir / "truth.csv", as_column(data.truth));
    save_matrix_csv(dir / "observed.csv", as_column(data.observed));
    save_matrix_csv(dir / "matrix.csv", *data.matrix);
    files["matrix"] = "matrix.csv";
  } else {
    save_matrix_csv(dir / "truth.csv", grid_of(data.truth, s.rows, s.cols));
    save_matrix_csv(dir / "observed.csv", grid_of(data.observed, s.rows, s.cols));
  }
  files["truth"] = "truth.csv";
  files["observed"] = "observed.csv";
  if (data.kernel) {
    save_matrix_csv(dir / "kernel.csv", *data.kernel);
    files["kernel"] = "kernel.csv";
  }
  if (data.mask) {
    m["keep"] = s.keep;
    Vector mv(s.rows * s.cols);
    for (Index i = 0; i < mv.size(); ++i) mv[i] = (*data.mask)[static_cast<std::size_t>(i)];
    save_matrix_csv(dir / "mask.csv", grid_of(mv, s.rows, s.cols));
    files["mask"] = "mask.csv";
  }
  m["files"] = files;
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << m.dump(2) << '\n';
}

Fixture load_fixture(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("no manifest.json in " + dir.string());
  Fixture f;
  f.dir = dir;
  try {
    f.manifest = nlohmann::json::parse(in);
    auto& s = f.data.spec;
    s.kind = parse_synthetic_kind(f.manifest.at("kind").get<std::string>());
    s.rows = f.manifest.at("rows").get<Index>();
    s.cols = f.manifest.at("cols").get<Index>();
    s.noise = f.manifest.value("noise", 0.0);
    s.seed = f.manifest.value("seed", std::uint64_t{0});
    s.density = f.manifest.value("density", 0.1);
    s.measurements = f.manifest.value("measurements", Index{0});
    s.keep = f.manifest.value("keep", 0.5);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + "/manifest.json: " + e.what());
  }
  auto& d = f.data;
  const auto& files = f.manifest.at("files");
  auto path = [&](const char* key) { return dir / files.at(key).get<std::string>(); };
  const Index n = d.spec.rows * d.spec.cols;
  d.truth = flatten(load_matrix_csv(path("truth")));
  d.observed = flatten(load_matrix_csv(path("observed")));
  if (d.truth.size() != n)
    throw IoError(dir.string() + ": truth has " + std::to_string(d.truth.size()) +
                  " entries, manifest says " + std::to_string(n));
  if (files.contains("matrix")) {
    d.matrix = load_matrix_csv(path("matrix"));
    if (d.matrix->cols() != n || d.matrix->rows() != d.observed.size())
      throw IoError(dir.string() + ": matrix shape does not match the data");
  }
  if (files.contains("kernel")) d.kernel = load_matrix_csv(path("kernel"));
  if (files.contains("mask")) {
    const Vector mv = flatten(load_matrix_csv(path("mask")));
    if (mv.size() != n) throw IoError(dir.string() + ": mask size mismatch");
    std::vector<bool> keep(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) keep[static_cast<std::size_t>(i)] = mv[i] != 0.0;
    d.mask = keep;
  }
  if (d.spec.kind == SyntheticKind::sparse_vector && !d.matrix)
    throw IoError(dir.string() + ": sparse_vector fixture without matrix.csv");
  if (d.spec.kind != SyntheticKind::sparse_vector && d.observed.size() != n)
    throw IoError(dir.string() + ": observed size mismatch");
  return f;
}

fs::path fixture_root(const fs::path& fallback) {
  if (const char* env = std::getenv("PROXSPLIT_FIXTURES"); env && *env) return env;
  return fallback;
}

}  // namespace proxsplit
