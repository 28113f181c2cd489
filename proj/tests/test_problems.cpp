#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "proxsplit/errors.hpp"
#include "proxsplit/problems.hpp"
#include "proxsplit/random.hpp"

using namespace proxsplit;
namespace fs = std::filesystem;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector x(static_cast<Index>(v.size()));
  Index i = 0;
  for (double a : v) x[i++] = a;
  return x;
}

double max_diff(const Vector& a, const Vector& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

SolverConfig tight(int iters = 20000, double tol = 1e-12) {
  SolverConfig c;
  c.max_iter = iters;
  c.residual_tol = tol;
  return c;
}

std::vector<RecipeResult> run_all(const ProblemInstance& p, const SolverConfig& c) {
  std::vector<RecipeResult> out;
  for (const auto& name : p.recipe_names()) {
    if (name == "vfista" && !p.metadata.count("alpha")) continue;
    out.push_back(p.run(name, c));
  }
  return out;
}

Matrix materialize(const LinearOperator& op) {
  Matrix M(op.out_dim(), op.in_dim());
  for (Index j = 0; j < op.in_dim(); ++j) M.col(j) = op.apply(Vector::Unit(op.in_dim(), j));
  return M;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("proxsplit_problems_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("lasso with identity operator") {
  auto p = build_lasso(LinearOperator::identity(3), vec({3, 0.5, -2}), 1.0, 1.0);
  const auto names = p.recipe_names();
  CHECK(names.size() == 6);
  for (const auto& r : run_all(p, tight())) {
    CAPTURE(r.recipe);
    CHECK(max_diff(r.x, vec({2, 0, -1})) < 1e-6);
    CHECK(r.objective == doctest::Approx(p.objective(r.x)).epsilon(1e-15));
  }
  auto huge = build_lasso(LinearOperator::identity(3), vec({3, 0.5, -2}), 1e6);
  CHECK(huge.run("fista", tight(200)).x.norm() == 0.0);

  auto plain = build_lasso(LinearOperator::identity(3), vec({3, 0.5, -2}), 1.0);
  CHECK_THROWS_AS(plain.run("vfista", tight(10)), ConfigError);
  CHECK_THROWS_AS(plain.run("nonsense", tight(10)), ConfigError);
}

TEST_CASE("lasso without regularization is least squares") {
  Matrix A = Matrix::Random(6, 4);
  Rng rng(3);
  const Vector y = rng.gaussian_vector(6);
  auto p = build_lasso(LinearOperator::dense(A), y, 0.0);
  const Vector ls = (A.transpose() * A).ldlt().solve(A.transpose() * y);
  CHECK(max_diff(p.run("fb", tight(200000, 1e-14)).x, ls) < 1e-6);
}

TEST_CASE("recipe objectives agree at shared probe points") {
  const ImageGrid y(3, 3, vec({0, 1, 0, 2, 0, 1, 0, 0, 3}));
  auto p = build_tv_denoise(y, 0.2);
  Rng rng(8);
  for (int t = 0; t < 5; ++t) {
    const Vector x = rng.gaussian_vector(9);
    // Oracle written directly from the definition.
    const auto G = LinearOperator::grad2d(3, 3);
    const double J = 0.5 * (x - y.pixels).squaredNorm() + 0.2 * G.apply(x).lpNorm<1>();
    CHECK(p.objective(x) == doctest::Approx(J).epsilon(1e-12));
  }
}

TEST_CASE("tv denoise recipes") {
  const ImageGrid flat = ImageGrid::filled(4, 4, 0.7);
  auto p = build_tv_denoise(flat, 0.3);
  CHECK(p.recipe_names().size() == 5);
  for (const auto& r : run_all(p, tight(5000))) {
    CAPTURE(r.recipe);
    CHECK(max_diff(r.x, flat.pixels) < 1e-8);
  }

  // 1-d step with a small weight: recipes agree.
  const ImageGrid step(1, 8, vec({0, 0, 0, 0, 1, 1, 1, 1}));
  auto s = build_tv_denoise(step, 0.1);
  const auto rs = run_all(s, tight(20000));
  const auto agree = compare_recipes(rs);
  CHECK(agree.worst_relative <= 1e-4);
  // Oracle: each plateau of 4 pixels moves toward the other by lambda / 4.
  for (const auto& r : rs) {
    CAPTURE(r.recipe);
    CHECK(r.x[0] == doctest::Approx(0.025).epsilon(1e-4));
    CHECK(r.x[7] == doctest::Approx(0.975).epsilon(1e-4));
  }

  // Large weight on a zero-mean image: constant at the mean.
  const ImageGrid zm(2, 3, vec({1, -2, 0.5, 0.5, -1, 1}));
  auto big = build_tv_denoise(zm, 100.0);
  for (const auto& r : run_all(big, tight(20000))) {
    CAPTURE(r.recipe);
    CHECK(r.x.lpNorm<Eigen::Infinity>() < 1e-5);
  }
}

TEST_CASE("dual recovery matches the primal-dual solution") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::step_image;
  spec.noise = 0.1;
  spec.seed = 11;
  const auto data = generate_synthetic(spec);
  auto p = build_tv_denoise(ImageGrid(8, 8, data.observed), 0.1);
  const auto dual = p.run("dual_fb", tight(20000, 1e-13));
  const auto cp = p.run("cp", tight(20000, 1e-13));
  CHECK(max_diff(dual.x, cp.x) <= 1e-4);
  const Vector& pstar = dual.trace.final_vector("p");
  const Vector rec = data.observed + LinearOperator::grad2d(8, 8).adjoint_apply(pstar);
  CHECK(max_diff(rec, dual.x) < 1e-12);
  CHECK(pstar.lpNorm<Eigen::Infinity>() <= 0.1 + 1e-12);
}

TEST_CASE("tv inverse problems") {
  const ImageGrid y(3, 3, vec({0, 0, 1, 0, 1, 1, 1, 1, 1}));
  auto inv = build_tv_inverse(LinearOperator::identity(9), y.pixels, 3, 3, 0.15);
  auto den = build_tv_denoise(y, 0.15);
  const auto ref = den.run("dual_fb", tight(50000, 1e-14));
  for (const auto& r : run_all(inv, tight(50000, 1e-13))) {
    CAPTURE(r.recipe);
    CHECK(max_diff(r.x, ref.x) < 1e-5);
  }

  SyntheticSpec spec;
  spec.kind = SyntheticKind::mask_pattern;
  spec.noise = 0.0;
  spec.seed = 5;
  const auto data = generate_synthetic(spec);
  auto masked = build_tv_inverse(data.forward(), data.observed, 8, 8, 0.1);
  const auto rs = run_all(masked, tight(30000));
  CHECK(compare_recipes(rs).worst_relative <= 1e-4);

  // lambda = 0 with an invertible operator reduces to a linear solve.
  Matrix A = Matrix::Identity(4, 4) * 2 + Matrix::Random(4, 4) * 0.3;
  const Vector b = vec({1, -1, 2, 0.5});
  auto ls = build_tv_inverse(LinearOperator::dense(A), b, 2, 2, 0.0);
  CHECK(max_diff(ls.run("condat", tight(100000, 1e-14)).x, A.lu().solve(b)) < 1e-6);
}

TEST_CASE("tv-l1") {
  const ImageGrid flat = ImageGrid::filled(3, 3, -0.4);
  auto p = build_tvl1(flat, 0.5);
  for (const auto& r : run_all(p, tight(20000))) CHECK(max_diff(r.x, flat.pixels) < 1e-6);

  // Three pixels against a brute force grid that contains the data values.
  const ImageGrid y(1, 3, vec({0, 1, 5}));
  const double lambda = 0.4;
  auto q = build_tvl1(y, lambda);
  double best = kInf;
  const double h = 0.05;
  for (int i = 0; i <= 120; ++i)
    for (int j = 0; j <= 120; ++j)
      for (int k = 0; k <= 120; ++k) {
        const double a = -0.5 + i * h, b = -0.5 + j * h, c = -0.5 + k * h;
        const double v = std::abs(a) + std::abs(b - 1) + std::abs(c - 5) +
                         lambda * (std::abs(b - a) + std::abs(c - b));
        best = std::min(best, v);
      }
  const auto rs = run_all(q, tight(200000, 1e-13));
  for (const auto& r : rs) {
    CAPTURE(r.recipe);
    CHECK(std::abs(r.objective - best) <= 1e-4);
  }
  CHECK(compare_recipes(rs).worst_relative <= 1e-4);
}

TEST_CASE("poisson editing") {
  const Index R = 5, C = 5, n = R * C;
  const auto G = LinearOperator::grad2d(R, C);
  std::vector<bool> omega(n, false);
  for (Index r = 1; r < 4; ++r)
    for (Index c = 1; c < 4; ++c) omega[r * C + c] = true;

  Rng rng(2);
  const ImageGrid target(R, C, rng.uniform_vector(n, 0, 1));
  auto same = build_poisson_editing(G.apply(target.pixels), target, omega);
  CHECK(max_diff(same.run("projected_gradient", tight(5000)).x, target.pixels) < 1e-8);

  // Flat target with a ramp source: oracle is the constrained least squares
  // problem solved densely over the interior pixels.
  const ImageGrid flat = ImageGrid::filled(R, C, 0.0);
  Vector ramp(n);
  for (Index r = 0; r < R; ++r)
    for (Index c = 0; c < C; ++c) ramp[r * C + c] = 0.5 * c;
  const Vector v = G.apply(ramp);
  auto p = build_poisson_editing(v, flat, omega);
  CHECK(p.warnings.empty());
  const auto res = p.run("projected_gradient", tight(20000, 1e-14));

  const Matrix D = materialize(G);
  std::vector<Index> rows, inside;
  for (Index i = 0; i < n; ++i)
    if (omega[i]) inside.push_back(i);
  for (Index k = 0; k < D.rows(); ++k)
    for (Index i : inside)
      if (D(k, i) != 0.0) {
        rows.push_back(k);
        break;
      }
  Matrix Dk(rows.size(), inside.size());
  Vector vk(rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = 0; b < inside.size(); ++b) Dk(a, b) = D(rows[a], inside[b]);
    vk[a] = v[rows[a]];
  }
  const Vector xin = Dk.colPivHouseholderQr().solve(vk);
  for (std::size_t b = 0; b < inside.size(); ++b) CHECK(res.x[inside[b]] == doctest::Approx(xin[b]).epsilon(1e-6));
  for (Index i = 0; i < n; ++i)
    if (!omega[i]) CHECK(res.x[i] == 0.0);

  auto empty = build_poisson_editing(v, target, std::vector<bool>(n, false));
  const auto e = empty.run("projected_gradient", tight(10));
  CHECK(max_diff(e.x, target.pixels) == 0.0);
  CHECK(e.trace.size() == 0);

  auto full = build_poisson_editing(v, target, std::vector<bool>(n, true));
  CHECK_FALSE(full.warnings.empty());
}

TEST_CASE("wavelet regularization") {
  const auto T = haar_operator(4);
  const Matrix H = materialize(T);
  CHECK((H * H.transpose() - Matrix::Identity(4, 4)).norm() < 1e-14);
  CHECK_THROWS(haar_operator(6));

  const Vector y = vec({4, 2, -1, 3});
  const double lambda = 0.5;
  auto p = build_wavelet_reg(LinearOperator::identity(4), y, lambda, T);
  const Vector expect = H.transpose() * soft_threshold(H * y, lambda);
  for (const auto& r : run_all(p, tight(2000))) {
    CAPTURE(r.recipe);
    CHECK(max_diff(r.x, expect) < 1e-10);
  }

  auto id = build_wavelet_reg(LinearOperator::identity(3), vec({3, 0.5, -2}), 1.0,
                              LinearOperator::identity(3));
  CHECK(max_diff(id.run("fb", tight(200)).x, vec({2, 0, -1})) < 1e-12);

  auto ls = build_wavelet_reg(LinearOperator::identity(4), y, 0.0, T);
  CHECK(max_diff(ls.run("fista", tight(200)).x, y) < 1e-10);
}

TEST_CASE("synthetic generation") {
  for (auto kind : {SyntheticKind::step_image, SyntheticKind::ramp, SyntheticKind::sparse_vector,
                    SyntheticKind::blur_kernel, SyntheticKind::mask_pattern}) {
    SyntheticSpec spec;
    spec.kind = kind;
    spec.seed = 9;
    spec.noise = 0.0;
    if (kind == SyntheticKind::sparse_vector) {
      spec.rows = 32;
      spec.cols = 1;
      spec.measurements = 20;
    }
    const auto d = generate_synthetic(spec);
    CAPTURE(to_string(kind));
    CHECK(max_diff(d.observed, d.forward().apply(d.truth)) < 1e-14);
    CHECK(parse_synthetic_kind(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_synthetic_kind("fractal"), ConfigError);

  SyntheticSpec sp;
  sp.kind = SyntheticKind::sparse_vector;
  sp.rows = 100;
  sp.cols = 1;
  sp.density = 0.1;
  sp.seed = 4;
  const auto d = generate_synthetic(sp);
  CHECK((d.truth.array() != 0.0).count() == 10);

  SyntheticSpec noisy;
  noisy.noise = 0.2;
  noisy.seed = 77;
  const auto a = generate_synthetic(noisy), b = generate_synthetic(noisy);
  CHECK(a.observed == b.observed);
  noisy.seed = 78;
  CHECK(generate_synthetic(noisy).observed != a.observed);
}

TEST_CASE("image and fixture io") {
  const auto dir = scratch("io");
  fs::create_directories(dir);
  Rng rng(1);
  const ImageGrid img(3, 4, rng.uniform_vector(12, -5, 5));
  write_csv_grid(dir / "g.csv", img);
  const auto back = read_csv_grid(dir / "g.csv");
  CHECK(back.rows == 3);
  CHECK(back.cols == 4);
  CHECK(back.pixels == img.pixels);

  const ImageGrid unit(5, 7, rng.uniform_vector(35, 0, 1));
  write_pgm(dir / "g.pgm", unit);
  const auto pgm = read_pgm(dir / "g.pgm");
  CHECK(pgm.rows == 5);
  CHECK(pgm.cols == 7);
  CHECK(max_diff(pgm.pixels, unit.pixels) <= 1.0 / 255);

  const std::string bytes = slurp(dir / "g.pgm");
  {
    std::ofstream out(dir / "short.pgm", std::ios::binary);
    out << bytes.substr(0, bytes.size() - 5);
  }
  CHECK_THROWS_AS(read_pgm(dir / "short.pgm"), IoError);
  {
    std::ofstream out(dir / "bad.csv");
    out << "1,2,3\n4,5\n";
  }
  CHECK_THROWS_AS(read_csv_grid(dir / "bad.csv"), IoError);

  SyntheticSpec spec;
  spec.kind = SyntheticKind::blur_kernel;
  spec.noise = 0.05;
  spec.seed = 3;
  const auto data = generate_synthetic(spec);
  write_fixture(dir / "fx", data, {{"problem", {{"lambda", 0.1}}}});
  const auto fx = load_fixture(dir / "fx");
  CHECK(fx.data.observed == data.observed);
  CHECK(fx.data.truth == data.truth);
  CHECK(fx.manifest["problem"]["lambda"] == 0.1);
  write_fixture(dir / "fx2", data, {{"problem", {{"lambda", 0.1}}}});
  for (const char* f : {"manifest.json", "truth.csv", "observed.csv", "kernel.csv"})
    CHECK(slurp(dir / "fx" / f) == slurp(dir / "fx2" / f));
  CHECK_THROWS_AS(load_fixture(dir / "missing"), IoError);
  fs::remove_all(dir);
}
