#include "proxsplit/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "proxsplit/errors.hpp"

#ifndef PROXSPLIT_DEFAULT_FIXTURES
#define PROXSPLIT_DEFAULT_FIXTURES "fixtures"
#endif

namespace proxsplit::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::filesystem::path default_fixture_root() { return PROXSPLIT_DEFAULT_FIXTURES; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- json field access -------------------------------------------------------

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void allow_only(const json& j, const std::string& path,
                std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(path, "expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) bad(join(path, it.key()), "unknown field");
}

const json& need(const json& j, const std::string& path, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) bad(join(path, key), "missing field");
  return j.at(key);
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) bad(path, "expected a number");
  return v.get<double>();
}

double number(const json& j, const std::string& path, const std::string& key,
              std::optional<double> def = {}) {
  if (!j.contains(key)) {
    if (def) return *def;
    bad(join(path, key), "missing field");
  }
  return as_number(j.at(key), join(path, key));
}

std::optional<double> maybe_number(const json& j, const std::string& path,
                                   const std::string& key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return as_number(j.at(key), join(path, key));
}

long long integer(const json& j, const std::string& path, const std::string& key,
                  std::optional<long long> def = {}) {
  if (!j.contains(key)) {
    if (def) return *def;
    bad(join(path, key), "missing field");
  }
  const json& v = j.at(key);
  if (!v.is_number_integer()) bad(join(path, key), "expected an integer");
  return v.get<long long>();
}

std::string text(const json& j, const std::string& path, const std::string& key,
                 std::optional<std::string> def = {}) {
  if (!j.contains(key)) {
    if (def) return *def;
    bad(join(path, key), "missing field");
  }
  const json& v = j.at(key);
  if (!v.is_string()) bad(join(path, key), "expected a string");
  return v.get<std::string>();
}

bool flag(const json& j, const std::string& path, const std::string& key, bool def) {
  if (!j.contains(key)) return def;
  if (!j.at(key).is_boolean()) bad(join(path, key), "expected true or false");
  return j.at(key).get<bool>();
}

Vector as_vector(const json& v, const std::string& path) {
  if (v.is_number()) return Vector::Constant(1, v.get<double>());
  if (!v.is_array()) bad(path, "expected an array of numbers");
  Vector out(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out[static_cast<Index>(i)] = as_number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

Vector vector_field(const json& j, const std::string& path, const std::string& key) {
  return as_vector(need(j, path, key), join(path, key));
}

Matrix as_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty() || !v[0].is_array())
    bad(path, "expected a non-empty array of rows");
  const std::size_t cols = v[0].size();
  Matrix m(static_cast<Index>(v.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < v.size(); ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (!v[r].is_array() || v[r].size() != cols)
      bad(rp, "rows must all have " + std::to_string(cols) + " entries");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) =
          as_number(v[r][c], rp + "[" + std::to_string(c) + "]");
  }
  return m;
}

Vector flatten_rows(const Matrix& m) {
  Vector v(m.size());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
  return v;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

void write_text(const fs::path& path, const std::string& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << s;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

json read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace

// ---- serialization ---------------------------------------------------------

void write_trace_csv(const SolverTrace& t, std::ostream& os) {
  os << "n,objective,residual";
  for (const auto& [name, col] : t.extras()) os << ',' << name;
  os << '\n';
  for (std::size_t k = 0; k < t.size(); ++k) {
    os << (k + 1) << ',' << format_double(t.objective[k]) << ','
       << format_double(t.residual[k]);
    for (const auto& [name, col] : t.extras())
      os << ',' << format_double(k < col.size() ? col[k] : std::nan(""));
    os << '\n';
  }
}

void write_trace_csv(const SolverTrace& t, const fs::path& path) {
  std::ostringstream ss;
  write_trace_csv(t, ss);
  write_text(path, ss.str());
}

void write_comparison_csv(const std::vector<RecipeResult>& results, const fs::path& path) {
  double best = kInf;
  std::size_t rows = 0;
  for (const auto& r : results) {
    best = std::min(best, r.objective);
    rows = std::max(rows, r.trace.size());
  }
  std::ostringstream ss;
  ss << 'n';
  for (const auto& r : results) ss << ',' << r.recipe;
  ss << ",gap_to_best\n";
  for (std::size_t k = 0; k < rows; ++k) {
    ss << (k + 1);
    double row_min = kInf;
    for (const auto& r : results) {
      ss << ',';
      if (k < r.trace.size()) {
        ss << format_double(r.trace.objective[k]);
        if (!std::isnan(r.trace.objective[k])) row_min = std::min(row_min, r.trace.objective[k]);
      }
    }
    ss << ',' << format_double(row_min - best) << '\n';
  }
  write_text(path, ss.str());
}

json to_json(const SolverConfig& c) {
  json j;
  j["gamma"] = c.gamma ? json(*c.gamma) : json(nullptr);
  j["sigma"] = c.sigma ? json(*c.sigma) : json(nullptr);
  j["tau"] = c.tau ? json(*c.tau) : json(nullptr);
  j["inertia"] = std::string(to_string(c.inertia));
  j["beta"] = c.beta;
  if (c.relaxation)
    j["relaxation"] = {{"kind", c.relaxation->kind == Relaxation::Kind::constant ? "constant"
                                                                                  : "harmonic"},
                       {"value", c.relaxation->value}};
  else
    j["relaxation"] = nullptr;
  j["max_iter"] = c.max_iter;
  j["residual_tol"] = c.residual_tol;
  j["objective_tol"] = c.objective_tol;
  j["seed"] = c.seed;
  j["thin"] = c.thin;
  j["rho"] = c.rho;
  j["backtrack_gamma0"] = c.backtrack_gamma0;
  j["backtrack_shrink"] = c.backtrack_shrink;
  return j;
}

// ---- config parsing ----------------------------------------------------------

SolverConfig parse_solver_config(const json& j, const std::string& path) {
  SolverConfig c;
  if (j.is_null()) return c;
  allow_only(j, path, {"gamma", "sigma", "tau", "inertia", "beta", "relaxation", "max_iter",
                       "residual_tol", "objective_tol", "seed", "thin", "rho",
                       "backtrack_gamma0", "backtrack_shrink"});
  c.gamma = maybe_number(j, path, "gamma");
  c.sigma = maybe_number(j, path, "sigma");
  c.tau = maybe_number(j, path, "tau");
  if (j.contains("inertia")) {
    try {
      c.inertia = parse_inertia(text(j, path, "inertia"));
    } catch (const ConfigError& e) {
      bad(join(path, "inertia"), e.what());
    }
  }
  c.beta = number(j, path, "beta", c.beta);
  if (j.contains("relaxation") && !j.at("relaxation").is_null()) {
    const std::string rp = join(path, "relaxation");
    const json& r = j.at("relaxation");
    if (r.is_number()) {
      c.relaxation = Relaxation::constant(r.get<double>());
    } else {
      allow_only(r, rp, {"kind", "value"});
      const std::string kind = text(r, rp, "kind", "constant");
      const double v = number(r, rp, "value");
      if (kind == "constant") c.relaxation = Relaxation::constant(v);
      else if (kind == "harmonic") c.relaxation = Relaxation::harmonic(v);
      else bad(join(rp, "kind"), "expected constant or harmonic");
    }
  }
  c.max_iter = static_cast<int>(integer(j, path, "max_iter", c.max_iter));
  c.residual_tol = number(j, path, "residual_tol", c.residual_tol);
  c.objective_tol = number(j, path, "objective_tol", c.objective_tol);
  c.seed = static_cast<std::uint64_t>(integer(j, path, "seed", 0));
  c.thin = static_cast<int>(integer(j, path, "thin", c.thin));
  c.rho = number(j, path, "rho", c.rho);
  c.backtrack_gamma0 = number(j, path, "backtrack_gamma0", c.backtrack_gamma0);
  c.backtrack_shrink = number(j, path, "backtrack_shrink", c.backtrack_shrink);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    bad(path, e.what());
  }
  return c;
}

namespace {

// Later keys win; used for per-recipe overrides.
json merged(json base, const json& over) {
  if (base.is_null()) base = json::object();
  if (over.is_object())
    for (auto it = over.begin(); it != over.end(); ++it) base[it.key()] = it.value();
  return base;
}

}  // namespace

LinearOperator parse_operator(const json& j, const std::string& path) {
  if (j.is_array()) return LinearOperator::dense(as_matrix(j, path));
  if (!j.is_object() || j.size() != 1)
    bad(path, "expected rows or one of {identity, diag, matrix, haar, grad2d, scale}");
  const auto it = j.begin();
  const std::string key = it.key();
  const std::string kp = join(path, key);
  if (key == "identity") return LinearOperator::identity(static_cast<Index>(integer(j, path, key)));
  if (key == "diag") return LinearOperator::dense(Matrix(as_vector(it.value(), kp).asDiagonal()));
  if (key == "matrix") return LinearOperator::dense(as_matrix(it.value(), kp));
  if (key == "haar") return haar_operator(static_cast<Index>(integer(j, path, key)));
  if (key == "grad2d") {
    const Vector d = as_vector(it.value(), kp);
    if (d.size() != 2) bad(kp, "expected [rows, cols]");
    return LinearOperator::grad2d(static_cast<Index>(d[0]), static_cast<Index>(d[1]));
  }
  if (key == "scale") {
    const Vector d = as_vector(it.value(), kp);
    if (d.size() != 2) bad(kp, "expected [c, n]");
    return LinearOperator::scale(d[0], static_cast<Index>(d[1]));
  }
  bad(kp, "unknown operator kind");
}

namespace {

struct QuadraticSpec {
  LinearOperator A;
  Vector b;
  double lambda;
  std::optional<double> alpha;
};

QuadraticSpec parse_quadratic(const json& j, const std::string& path) {
  LinearOperator A = parse_operator(need(j, path, "A"), join(path, "A"));
  Vector b = j.contains("b") ? vector_field(j, path, "b") : Vector::Zero(A.out_dim());
  return {A, b, number(j, path, "lambda", 1.0), maybe_number(j, path, "alpha")};
}

}  // namespace

SmoothFn parse_smooth(const json& j, const std::string& path) {
  const std::string type = text(j, path, "type");
  SmoothFn f;
  if (type == "quadratic") {
    allow_only(j, path, {"type", "A", "b", "lambda", "alpha", "declare"});
    const auto q = parse_quadratic(j, path);
    f = make_quadratic(q.A, q.b, q.lambda, q.alpha).smooth;
  } else if (type == "double_well") {
    allow_only(j, path, {"type", "lipschitz", "declare"});
    f = double_well(number(j, path, "lipschitz", 3.32));
  } else if (type == "zero") {
    allow_only(j, path, {"type", "declare"});
    f = zero_smooth();
  } else {
    bad(join(path, "type"), "unknown smooth function '" + type + "'");
  }
  if (j.contains("declare")) {
    // Overrides the declared constants; used to build negative controls.
    const std::string dp = join(path, "declare");
    const json& d = j.at("declare");
    allow_only(d, dp, {"lipschitz", "strong_convexity", "convex"});
    f.lipschitz = number(d, dp, "lipschitz", f.lipschitz);
    if (d.contains("strong_convexity")) f.strong_convexity = maybe_number(d, dp, "strong_convexity");
    f.convex = flag(d, dp, "convex", f.convex);
    f.name += " (declared)";
  }
  return f;
}

ProxFn parse_prox(const json& j, const std::string& path) {
  const std::string type = text(j, path, "type");
  ProxFn f;
  auto fields = [&](std::initializer_list<const char*> extra) {
    std::vector<const char*> keys{"type", "declare", "scale_prox"};
    keys.insert(keys.end(), extra.begin(), extra.end());
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!ok.count(it.key())) bad(join(path, it.key()), "unknown field");
  };
  if (type == "zero") {
    fields({});
    f = zero_function();
  } else if (type == "l1_norm") {
    fields({"lambda"});
    f = l1_norm(number(j, path, "lambda", 1.0));
  } else if (type == "sq_distance") {
    fields({"y", "lambda"});
    f = sq_distance(vector_field(j, path, "y"), number(j, path, "lambda", 1.0));
  } else if (type == "box") {
    fields({"lo", "hi"});
    const json& lo = need(j, path, "lo");
    const json& hi = need(j, path, "hi");
    if (lo.is_number() && hi.is_number()) f = box(lo.get<double>(), hi.get<double>());
    else f = box(as_vector(lo, join(path, "lo")), as_vector(hi, join(path, "hi")));
  } else if (type == "linf_ball") {
    fields({"r"});
    f = linf_ball(number(j, path, "r", 1.0));
  } else if (type == "consensus") {
    fields({"blocks"});
    f = consensus(static_cast<Index>(integer(j, path, "blocks")));
  } else if (type == "l1_residual") {
    fields({"y", "lambda"});
    f = l1_residual(vector_field(j, path, "y"), number(j, path, "lambda", 1.0));
  } else if (type == "hard_threshold") {
    fields({"lambda"});
    f = hard_threshold(number(j, path, "lambda", 1.0));
  } else if (type == "quadratic") {
    fields({"A", "b", "lambda", "alpha"});
    const auto q = parse_quadratic(j, path);
    f = make_quadratic(q.A, q.b, q.lambda, q.alpha).prox;
  } else if (type == "conjugate") {
    fields({"of"});
    f = conjugate(parse_prox(need(j, path, "of"), join(path, "of")));
  } else if (type == "composed_orthogonal") {
    fields({"T", "inner"});
    f = composed_orthogonal(parse_operator(need(j, path, "T"), join(path, "T")),
                            parse_prox(need(j, path, "inner"), join(path, "inner")));
  } else {
    bad(join(path, "type"), "unknown prox function '" + type + "'");
  }
  if (j.contains("declare")) {
    const std::string dp = join(path, "declare");
    const json& d = j.at("declare");
    allow_only(d, dp, {"strong_convexity", "convex"});
    if (d.contains("strong_convexity")) f.strong_convexity = maybe_number(d, dp, "strong_convexity");
    f.convex = flag(d, dp, "convex", f.convex);
    f.name += " (declared)";
  }
  if (j.contains("scale_prox")) {
    // Deliberately wrong prox: c * prox. Negative control only.
    const double c = number(j, path, "scale_prox");
    auto inner = f.prox_map;
    f.prox_map = [inner, c](const Vector& x, double g) -> Vector { return c * inner(x, g); };
    f.conjugate_prox = nullptr;
    f.name += " (scaled prox)";
  }
  return f;
}

// ---- problems ------------------------------------------------------------------

namespace {

fs::path resolve_fixture(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute()) return path;
  return fixture_root(default_fixture_root()) / path;
}

SyntheticSpec parse_synthetic(const json& j, const std::string& path, std::uint64_t seed) {
  allow_only(j, path, {"kind", "rows", "cols", "noise", "seed", "density", "measurements", "keep"});
  SyntheticSpec s;
  try {
    s.kind = parse_synthetic_kind(text(j, path, "kind"));
  } catch (const ConfigError& e) {
    bad(join(path, "kind"), e.what());
  }
  s.rows = static_cast<Index>(integer(j, path, "rows", s.rows));
  s.cols = static_cast<Index>(integer(j, path, "cols", s.cols));
  s.noise = number(j, path, "noise", s.noise);
  s.seed = static_cast<std::uint64_t>(integer(j, path, "seed", static_cast<long long>(seed)));
  s.density = number(j, path, "density", s.density);
  s.measurements = static_cast<Index>(integer(j, path, "measurements", 0));
  s.keep = number(j, path, "keep", s.keep);
  if (s.rows < 1 || s.cols < 1) bad(path, "rows and cols must be positive");
  if (s.noise < 0.0) bad(join(path, "noise"), "must be >= 0");
  return s;
}

ImageGrid grid_field(const json& j, const std::string& path, const std::string& key,
                     Boundary b) {
  const Matrix m = as_matrix(need(j, path, key), join(path, key));
  return ImageGrid(m.rows(), m.cols(), flatten_rows(m), b);
}

}  // namespace

LoadedProblem load_problem(const json& j, const std::string& path, std::uint64_t seed) {
  allow_only(j, path, {"kind", "fixture", "synthetic", "params", "lambda", "alpha", "boundary"});
  const std::string kind = text(j, path, "kind");
  static const std::set<std::string> kinds{"lasso", "tv_denoise", "tv_inverse", "tvl1",
                                           "poisson_editing", "wavelet_reg"};
  if (!kinds.count(kind))
    bad(join(path, "kind"), "unknown problem '" + kind +
                                "' (lasso, tv_denoise, tv_inverse, tvl1, poisson_editing, wavelet_reg)");
  Boundary boundary = Boundary::neumann;
  if (j.contains("boundary")) {
    const std::string b = text(j, path, "boundary");
    if (b == "periodic") boundary = Boundary::periodic;
    else if (b != "neumann") bad(join(path, "boundary"), "expected neumann or periodic");
  }

  LoadedProblem lp;
  std::optional<SyntheticData> data;
  json manifest_problem = json::object();
  const int sources = j.contains("fixture") + j.contains("synthetic") + j.contains("params");
  if (sources != 1) bad(path, "give exactly one of fixture, synthetic, params");
  if (j.contains("fixture")) {
    const fs::path dir = resolve_fixture(text(j, path, "fixture"));
    try {
      lp.fixture = load_fixture(dir);
    } catch (const IoError& e) {
      bad(join(path, "fixture"), e.what());
    }
    data = lp.fixture->data;
    const json& m = lp.fixture->manifest;
    if (m.contains("problem") && m.at("problem").is_object()) manifest_problem = m.at("problem");
    if (m.contains("expected") && m.at("expected").is_object()) {
      const json& e = m.at("expected");
      if (e.contains("objective") && e.at("objective").is_number())
        lp.expected_objective = e.at("objective").get<double>();
      if (e.contains("x")) lp.expected_x = as_vector(e.at("x"), dir.string() + ":expected.x");
    }
  } else if (j.contains("synthetic")) {
    data = generate_synthetic(parse_synthetic(j.at("synthetic"), join(path, "synthetic"), seed));
  }

  auto lambda = [&]() {
    if (j.contains("lambda")) return number(j, path, "lambda");
    if (manifest_problem.contains("lambda") && manifest_problem.at("lambda").is_number())
      return manifest_problem.at("lambda").get<double>();
    bad(join(path, "lambda"), "missing field (not in config or fixture manifest)");
  };
  std::optional<double> alpha = maybe_number(j, path, "alpha");
  if (!alpha && manifest_problem.contains("alpha") && manifest_problem.at("alpha").is_number())
    alpha = manifest_problem.at("alpha").get<double>();

  const std::string pp = join(path, "params");
  const json params = j.contains("params") ? j.at("params") : json::object();

  try {
    if (kind == "lasso" || kind == "wavelet_reg") {
      LinearOperator A = LinearOperator::identity(1);
      Vector y;
      if (data) {
        A = data->matrix ? LinearOperator::dense(*data->matrix) : data->forward();
        y = data->observed;
      } else {
        allow_only(params, pp, {"A", "y", "T"});
        y = vector_field(params, pp, "y");
        A = params.contains("A") ? parse_operator(params.at("A"), join(pp, "A"))
                                 : LinearOperator::identity(y.size());
      }
      if (kind == "lasso") {
        lp.instance = build_lasso(A, y, lambda(), alpha);
      } else {
        LinearOperator T = params.contains("T") ? parse_operator(params.at("T"), join(pp, "T"))
                                                : haar_operator(A.in_dim());
        lp.instance = build_wavelet_reg(A, y, lambda(), T);
      }
    } else if (kind == "tv_denoise" || kind == "tvl1") {
      ImageGrid img;
      if (data) {
        img = ImageGrid(data->spec.rows, data->spec.cols, data->observed, boundary);
      } else {
        allow_only(params, pp, {"image"});
        img = grid_field(params, pp, "image", boundary);
      }
      lp.instance = kind == "tv_denoise" ? build_tv_denoise(img, lambda()) : build_tvl1(img, lambda());
    } else if (kind == "tv_inverse") {
      if (!data) {
        allow_only(params, pp, {"A", "y", "rows", "cols"});
        const Index rows = static_cast<Index>(integer(params, pp, "rows"));
        const Index cols = static_cast<Index>(integer(params, pp, "cols"));
        lp.instance = build_tv_inverse(parse_operator(need(params, pp, "A"), join(pp, "A")),
                                       vector_field(params, pp, "y"), rows, cols, lambda(),
                                       boundary);
      } else {
        lp.instance = build_tv_inverse(data->forward(), data->observed, data->spec.rows,
                                       data->spec.cols, lambda(), boundary);
      }
    } else {  // poisson_editing
      if (data) bad(path, "poisson_editing takes params {source, target, omega}");
      allow_only(params, pp, {"source", "target", "omega"});
      const ImageGrid src = grid_field(params, pp, "source", boundary);
      const ImageGrid tgt = grid_field(params, pp, "target", boundary);
      const ImageGrid om = grid_field(params, pp, "omega", boundary);
      if (src.rows != tgt.rows || src.cols != tgt.cols || om.rows != tgt.rows ||
          om.cols != tgt.cols)
        bad(pp, "source, target and omega must share dimensions");
      std::vector<bool> omega(static_cast<std::size_t>(om.size()));
      for (Index i = 0; i < om.size(); ++i) omega[static_cast<std::size_t>(i)] = om.pixels[i] != 0.0;
      const Vector grad = LinearOperator::grad2d(src.rows, src.cols, boundary).apply(src.pixels);
      lp.instance = build_poisson_editing(grad, tgt, omega);
    }
  } catch (const DimensionError& e) {
    bad(path, e.what());
  }
  if (lp.expected_objective)
    lp.instance.reference = Optimum{lp.expected_x.value_or(Vector()), *lp.expected_objective};
  return lp;
}

// ---- commands ------------------------------------------------------------------

namespace {

struct Common {
  json config;
  fs::path out;
  std::uint64_t seed = 0;
};

Common load_common(const Options& opt, std::initializer_list<const char*> keys) {
  Common c;
  c.config = read_config(opt.config);
  allow_only(c.config, "", keys);
  c.seed = opt.seed ? *opt.seed
                    : static_cast<std::uint64_t>(integer(c.config, "", "seed", 0));
  if (opt.out) c.out = *opt.out;
  else c.out = text(c.config, "", "output", "output");
  c.config["seed"] = c.seed;
  c.config["output"] = c.out.string();
  return c;
}

SolverConfig solver_from(const json& cfg, const std::string& path, std::uint64_t seed) {
  SolverConfig s = parse_solver_config(cfg.contains(path) ? cfg.at(path) : json(), path);
  if (!(cfg.contains(path) && cfg.at(path).contains("seed"))) s.seed = seed;
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

json summary_of(const RecipeResult& r, double wall) {
  json s;
  s["recipe"] = r.recipe;
  s["algorithm"] = r.trace.algorithm;
  s["termination"] = std::string(to_string(r.trace.termination));
  s["message"] = r.trace.message;
  s["iterations"] = r.trace.size();
  s["initial_objective"] = r.trace.initial_objective;
  s["objective"] = r.objective;
  json extra = json::object();
  for (const auto& [k, v] : r.trace.summary) extra[k] = std::isfinite(v) ? json(v) : json(format_double(v));
  s["solver"] = extra;
  s["wall_time_s"] = wall;
  return s;
}

}  // namespace

int cmd_solve(const Options& opt, std::ostream& out) {
  Common c = load_common(opt, {"problem", "recipe", "solver", "output", "seed"});
  LoadedProblem lp = load_problem(need(c.config, "", "problem"), "problem", c.seed);
  const std::string recipe = text(c.config, "", "recipe");
  SolverConfig cfg = solver_from(c.config, "solver", c.seed);
  c.config["solver"] = to_json(cfg);

  ensure_dir(c.out);
  write_json(c.out / "config.resolved.json", c.config);
  const auto t0 = std::chrono::steady_clock::now();
  RecipeResult r;
  try {
    r = lp.instance.run(recipe, cfg);
  } catch (const ConfigError& e) {
    bad("recipe", e.what());
  } catch (const SolverError& e) {
    json s{{"recipe", recipe}, {"termination", "diverged"}, {"message", e.what()}};
    write_json(c.out / "summary.json", s);
    out << "diverged: " << e.what() << '\n';
    return diverged;
  }
  const double wall = seconds_since(t0);
  write_trace_csv(r.trace, c.out / "trace.csv");
  save_matrix_csv(c.out / "solution.csv", Matrix(r.x));
  json s = summary_of(r, wall);
  s["problem"] = lp.instance.name;
  s["warnings"] = lp.instance.warnings;
  if (lp.expected_objective) {
    s["expected_objective"] = *lp.expected_objective;
    s["gap_to_expected"] = r.objective - *lp.expected_objective;
  }
  write_json(c.out / "summary.json", s);
  for (const auto& w : lp.instance.warnings) out << "warning: " << w << '\n';
  out << lp.instance.name << '/' << recipe << ": " << to_string(r.trace.termination)
      << " after " << r.trace.size() << " iterations, objective "
      << format_double(r.objective) << '\n';
  return r.trace.termination == Termination::diverged ? diverged : ok;
}

int cmd_compare(const Options& opt, std::ostream& out) {
  Common c = load_common(opt, {"problem", "recipes", "solver", "per_recipe", "agreement_tol",
                               "output", "seed"});
  LoadedProblem lp = load_problem(need(c.config, "", "problem"), "problem", c.seed);
  const json& names = need(c.config, "", "recipes");
  if (!names.is_array() || names.empty()) bad("recipes", "expected a non-empty array of recipe names");
  const json base = c.config.contains("solver") ? c.config.at("solver") : json::object();
  const json per = c.config.contains("per_recipe") ? c.config.at("per_recipe") : json::object();
  if (!per.is_object()) bad("per_recipe", "expected an object keyed by recipe");
  std::vector<RecipeResult> results;
  json resolved_per = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string rp = "recipes[" + std::to_string(i) + "]";
    if (!names[i].is_string()) bad(rp, "expected a recipe name");
    const std::string name = names[i].get<std::string>();
    for (const auto& r : results)
      if (r.recipe == name) bad(rp, "duplicate recipe '" + name + "'");
    const json sj = merged(base, per.contains(name) ? per.at(name) : json::object());
    SolverConfig cfg = parse_solver_config(sj, per.contains(name) ? "per_recipe." + name : "solver");
    if (!sj.contains("seed")) cfg.seed = c.seed;
    resolved_per[name] = to_json(cfg);
    try {
      results.push_back(lp.instance.run(name, cfg));
    } catch (const ConfigError& e) {
      bad(rp, e.what());
    } catch (const SolverError& e) {
      out << name << " diverged: " << e.what() << '\n';
      return diverged;
    }
  }
  c.config["per_recipe"] = resolved_per;
  ensure_dir(c.out);
  write_json(c.out / "config.resolved.json", c.config);
  write_comparison_csv(results, c.out / "comparison.csv");
  const Agreement a = compare_recipes(results);
  json s;
  s["problem"] = lp.instance.name;
  s["best"] = a.best;
  s["worst_relative"] = a.worst_relative;
  s["objectives"] = a.objectives;
  json terms = json::object();
  bool any_diverged = false;
  for (const auto& r : results) {
    terms[r.recipe] = std::string(to_string(r.trace.termination));
    any_diverged = any_diverged || r.trace.termination == Termination::diverged;
  }
  s["termination"] = terms;
  const auto tol = maybe_number(c.config, "", "agreement_tol");
  if (tol) s["agreement_pass"] = a.worst_relative <= *tol;
  write_json(c.out / "summary.json", s);
  for (const auto& r : results)
    out << r.recipe << ": objective " << format_double(r.objective) << " ("
        << to_string(r.trace.termination) << ")\n";
  out << "worst relative gap to best: " << format_double(a.worst_relative) << '\n';
  if (any_diverged) return diverged;
  if (tol && !(a.worst_relative <= *tol)) return certification_failure;
  return ok;
}

int cmd_generate(const Options& opt, std::ostream& out) {
  Common c = load_common(opt, {"kind", "rows", "cols", "noise", "seed", "density",
                               "measurements", "keep", "problem", "reference", "output"});
  json spec_json = c.config;
  for (const char* k : {"problem", "reference", "output"}) spec_json.erase(k);
  const SyntheticSpec spec = parse_synthetic(spec_json, "", c.seed);
  const SyntheticData data = generate_synthetic(spec);
  json extra = json::object();
  if (c.config.contains("problem")) {
    const json& p = c.config.at("problem");
    allow_only(p, "problem", {"kind", "lambda", "alpha", "boundary"});
    extra["problem"] = p;
    if (p.contains("alpha") && p.at("alpha") == "auto") {
      // Smallest eigenvalue of A^T A, the strong convexity modulus of the data term.
      if (!data.matrix) bad("problem.alpha", "auto needs a sparse_vector matrix");
      Eigen::SelfAdjointEigenSolver<Matrix> es(data.matrix->transpose() * *data.matrix,
                                               Eigen::EigenvaluesOnly);
      const double a = es.eigenvalues()[0];
      if (!(a > 0.0)) bad("problem.alpha", "A^T A is singular; no strong convexity");
      extra["problem"]["alpha"] = a;
    }
  }
  if (c.config.contains("reference")) {
    const json& ref = c.config.at("reference");
    allow_only(ref, "reference", {"method", "recipe", "solver"});
    const std::string method = text(ref, "reference", "method", "recipe");
    json expected;
    if (method == "min_norm") {
      // f = (1/2)|A x - y|^2 with A of full row rank: x* = A^T (A A^T)^{-1} y, f* = 0.
      if (!data.matrix) bad("reference.method", "min_norm needs a sparse_vector matrix");
      const Matrix& A = *data.matrix;
      Eigen::LDLT<Matrix> ldlt(A * A.transpose());
      if (ldlt.info() != Eigen::Success) bad("reference.method", "A A^T is singular");
      const Vector xs = A.transpose() * ldlt.solve(data.observed);
      expected["x"] = vector_json(xs);
      expected["objective"] = 0.5 * (A * xs - data.observed).squaredNorm();
      expected["method"] = "min_norm";
    } else if (method == "recipe") {
      if (!extra.contains("problem")) bad("reference", "recipe reference needs a problem");
      // Build the instance from the in-memory data through a temporary bundle.
      write_fixture(c.out, data, extra);
      json pj = extra["problem"];
      pj["fixture"] = fs::absolute(c.out).string();
      pj.erase("lambda");
      pj.erase("alpha");
      pj.erase("boundary");
      pj["boundary"] = extra["problem"].value("boundary", "neumann");
      LoadedProblem lp = load_problem(pj, "problem", c.seed);
      const std::string recipe = text(ref, "reference", "recipe");
      SolverConfig cfg = parse_solver_config(ref.contains("solver") ? ref.at("solver") : json(),
                                             "reference.solver");
      RecipeResult r = lp.instance.run(recipe, cfg);
      expected["x"] = vector_json(r.x);
      expected["objective"] = r.objective;
      expected["method"] = "recipe";
      expected["recipe"] = recipe;
      expected["iterations"] = r.trace.size();
      expected["termination"] = std::string(to_string(r.trace.termination));
    } else {
      bad("reference.method", "expected min_norm or recipe");
    }
    extra["expected"] = expected;
  }
  write_fixture(c.out, data, extra);
  out << "wrote " << to_string(spec.kind) << " fixture to " << c.out.string() << '\n';
  return ok;
}

// ---- certify ---------------------------------------------------------------------

namespace {

struct CheckContext {
  std::uint64_t seed;
  std::string name;
};

std::vector<CheckReport> labelled(std::vector<CheckReport> rs, const std::string& name) {
  for (auto& r : rs) r.instance = name;
  return rs;
}

Vector x0_for(const json& j, const std::string& path, Index n) {
  if (!j.contains("x0")) return Vector::Zero(n);
  Vector x = vector_field(j, path, "x0");
  if (x.size() != n) bad(join(path, "x0"), "expected length " + std::to_string(n));
  return x;
}

// Smooth part from "smooth" or from a lasso-type fixture (1/2)|A x - y|^2.
struct SmoothSource {
  SmoothFn f;
  Index n = 0;
  std::optional<Optimum> opt;
};

SmoothSource smooth_source(const json& j, const std::string& path, std::uint64_t seed) {
  SmoothSource s;
  if (j.contains("problem")) {
    LoadedProblem lp = load_problem(j.at("problem"), join(path, "problem"), seed);
    if (!lp.fixture || !lp.fixture->data.matrix)
      bad(join(path, "problem"), "needs a fixture carrying a matrix");
    const auto& d = lp.fixture->data;
    s.f = make_quadratic(LinearOperator::dense(*d.matrix), d.observed, 1.0).smooth;
    s.n = d.matrix->cols();
    if (lp.expected_objective && lp.expected_x) s.opt = Optimum{*lp.expected_x, *lp.expected_objective};
  } else {
    s.f = parse_smooth(need(j, path, "smooth"), join(path, "smooth"));
    s.n = s.f.quadratic ? s.f.quadratic->A.in_dim() : static_cast<Index>(integer(j, path, "dim", 2));
  }
  if (j.contains("optimum")) {
    const std::string op = join(path, "optimum");
    const json& o = j.at("optimum");
    allow_only(o, op, {"x", "value"});
    s.opt = Optimum{vector_field(o, op, "x"), number(o, op, "value")};
  }
  return s;
}

std::vector<CheckReport> run_gd(const json& j, const std::string& path, const CheckContext& ctx) {
  allow_only(j, path, {"check", "name", "smooth", "problem", "dim", "optimum", "x0", "max_iter",
                       "gamma", "expect_failure"});
  SmoothSource s = smooth_source(j, path, ctx.seed);
  if (!s.opt) bad(path, "needs an optimum (config or fixture expected values)");
  const Vector x0 = x0_for(j, path, s.n);
  SolverConfig cfg;
  cfg.max_iter = static_cast<int>(integer(j, path, "max_iter", 10000));
  cfg.gamma = maybe_number(j, path, "gamma");
  cfg.thin = 1;
  cfg.seed = ctx.seed;
  const SolverTrace t = gradient_descent(s.f, x0, cfg);
  const double L = s.f.lipschitz;
  const double gamma = cfg.gamma.value_or(1.0 / L);
  std::vector<CheckReport> out;
  out.push_back(check_descent_inequality(t, L, gamma, DescentScheme::gradient));
  if (std::abs(gamma * L - 1.0) < 1e-12) {
    out.push_back(check_lyapunov_gd(t, L, *s.opt));
    out.push_back(check_rate_bound(t, s.opt->value,
                                   gd_sublinear_bound(L, (x0 - s.opt->x).squaredNorm()),
                                   "gd_sublinear_rate"));
  }
  if (s.f.strong_convexity && *s.f.strong_convexity > 0.0) {
    const double gap0 = s.f.eval(x0) - s.opt->value;
    out.push_back(check_rate_bound(t, s.opt->value,
                                   gd_linear_bound(*s.f.strong_convexity, L, gap0),
                                   "gd_linear_rate"));
  }
  return labelled(std::move(out), ctx.name);
}

std::vector<CheckReport> run_fista(const json& j, const std::string& path, const CheckContext& ctx) {
  allow_only(j, path, {"check", "name", "problem", "max_iter", "variant", "expect_failure"});
  LoadedProblem lp = load_problem(need(j, path, "problem"), join(path, "problem"), ctx.seed);
  if (lp.instance.name != "lasso") bad(join(path, "problem"), "expected a lasso problem");
  if (!lp.expected_objective || !lp.expected_x)
    bad(join(path, "problem"), "fixture carries no expected objective and solution");
  const std::string variant = text(j, path, "variant", "fista");
  SolverConfig cfg;
  cfg.max_iter = static_cast<int>(integer(j, path, "max_iter", 10000));
  cfg.seed = ctx.seed;
  const double L = lp.instance.metadata.at("lipschitz");
  const double gamma = 1.0 / L;
  cfg.gamma = gamma;
  const Vector& x0 = lp.instance.x0;
  const double d0 = (x0 - *lp.expected_x).squaredNorm();
  const double Jstar = *lp.expected_objective;
  std::vector<CheckReport> out;
  if (variant == "fista") {
    RecipeResult r = lp.instance.run("fista", cfg);
    out.push_back(check_rate_bound(r.trace, Jstar, fista_bound(gamma, d0), "fista_rate"));
    out.push_back(check_t_sequence(r.trace));
    std::vector<double> gaps;
    for (double v : r.trace.objective) gaps.push_back(v - Jstar);
    const RateFit fit = fit_rate(gaps, RateModel::inv_n2);
    CheckReport fr;
    fr.check = "fista_fitted_constant";
    const double theory = 2.0 * d0 / gamma;
    fr.metrics["fitted_constant"] = fit.constant;
    fr.metrics["theorem_constant"] = theory;
    fr.metrics["points"] = fit.used;
    if (fit.used < 2) fr.fail("fewer than two positive gaps to fit");
    else fr.observe(theory - fit.constant, slack_for(theory), "fit");
    out.push_back(fr);
  } else if (variant == "vfista") {
    if (!lp.instance.metadata.count("alpha")) bad(join(path, "problem"), "vfista needs alpha");
    const double alpha = lp.instance.metadata.at("alpha");
    RecipeResult r = lp.instance.run("vfista", cfg);
    const double gap0 = lp.instance.objective(x0) - Jstar;
    out.push_back(check_rate_bound(r.trace, Jstar, vfista_bound(alpha, L, gap0), "vfista_rate"));
  } else {
    bad(join(path, "variant"), "expected fista or vfista");
  }
  return labelled(std::move(out), ctx.name);
}

std::vector<CheckReport> run_contraction(const json& j, const std::string& path,
                                         const CheckContext& ctx) {
  allow_only(j, path, {"check", "name", "smooth", "prox", "gamma", "pairs", "dim", "scale",
                       "expect_failure"});
  const double gamma = number(j, path, "gamma");
  const int pairs = static_cast<int>(integer(j, path, "pairs", 1000));
  const double scale = number(j, path, "scale", 3.0);
  CheckReport r;
  if (j.contains("smooth")) {
    const SmoothFn f = parse_smooth(j.at("smooth"), join(path, "smooth"));
    if (!f.strong_convexity) bad(join(path, "smooth"), "needs a strong convexity modulus");
    const Index n = f.quadratic ? f.quadratic->A.in_dim() : static_cast<Index>(integer(j, path, "dim", 4));
    const double bound = std::sqrt(std::max(0.0, 1.0 - gamma * *f.strong_convexity));
    const double ratio = gradient_step_ratio(f, gamma, pairs, ctx.seed, n, scale);
    r.check = "gradient_step_contraction";
    r.metrics["ratio"] = ratio;
    r.metrics["bound"] = bound;
    r.observe(bound - ratio, 1e-10, "max over pairs");
  } else {
    const ProxFn f = parse_prox(need(j, path, "prox"), join(path, "prox"));
    if (!f.strong_convexity) bad(join(path, "prox"), "needs a strong convexity modulus");
    const Index n = f.dim > 0 ? f.dim : static_cast<Index>(integer(j, path, "dim", 4));
    const double bound = 1.0 / (1.0 + *f.strong_convexity * gamma);
    const double ratio = prox_ratio(f, gamma, pairs, ctx.seed, n, scale);
    r.check = "prox_contraction";
    r.metrics["ratio"] = ratio;
    r.metrics["bound"] = bound;
    r.observe(bound - ratio, 1e-10, "max over pairs");
  }
  r.instance = ctx.name;
  return {r};
}

std::vector<CheckReport> run_properties(const json& j, const std::string& path,
                                        const CheckContext& ctx) {
  allow_only(j, path, {"check", "name", "smooth", "prox", "trials", "dim", "scale", "gammas",
                       "expect_failure"});
  PropertyOptions po;
  po.seed = ctx.seed;
  po.trials = static_cast<int>(integer(j, path, "trials", po.trials));
  po.dim = static_cast<Index>(integer(j, path, "dim", po.dim));
  po.scale = number(j, path, "scale", po.scale);
  if (j.contains("gammas")) {
    const Vector g = vector_field(j, path, "gammas");
    po.gammas.assign(g.data(), g.data() + g.size());
  }
  if (j.contains("smooth"))
    return labelled(property_suite(parse_smooth(j.at("smooth"), join(path, "smooth")), po), ctx.name);
  return labelled(property_suite(parse_prox(need(j, path, "prox"), join(path, "prox")), po), ctx.name);
}

std::vector<CheckReport> run_equivalence(const json& j, const std::string& path,
                                         const CheckContext& ctx, bool admm) {
  allow_only(j, path, {"check", "name", "f", "g", "K", "gammas", "w0", "iters", "threshold",
                       "expect_failure"});
  const ProxFn f = parse_prox(need(j, path, "f"), join(path, "f"));
  const ProxFn g = parse_prox(need(j, path, "g"), join(path, "g"));
  const Vector w0 = vector_field(j, path, "w0");
  const int iters = static_cast<int>(integer(j, path, "iters", 50));
  const double thr = number(j, path, "threshold", 1e-8);
  const Vector gammas = vector_field(j, path, "gammas");
  std::vector<CheckReport> out;
  for (Index i = 0; i < gammas.size(); ++i) {
    CheckReport r;
    if (admm) {
      const LinearOperator K = j.contains("K") ? parse_operator(j.at("K"), join(path, "K"))
                                               : LinearOperator::identity(w0.size());
      r = dr_admm_equivalence(f, g, K, gammas[i], w0, iters, thr);
    } else {
      r = dr_cp_equivalence(f, g, gammas[i], w0, iters, thr);
    }
    r.instance = ctx.name + " gamma=" + format_double(gammas[i]);
    out.push_back(std::move(r));
  }
  return out;
}

// Saddle problem from {f_star, g, K, f_primal} or from a TV denoise problem.
struct SaddleSource {
  SaddleProblem prob;
  Vector x0, y0;
};

SaddleSource saddle_source(const json& j, const std::string& path, std::uint64_t seed) {
  auto finish = [&](SaddleSource s) {
    if (j.contains("x0")) s.x0 = vector_field(j, path, "x0");
    if (j.contains("y0")) s.y0 = vector_field(j, path, "y0");
    return s;
  };
  if (j.contains("problem")) {
    LoadedProblem lp = load_problem(j.at("problem"), join(path, "problem"), seed);
    if (lp.instance.name != "tv_denoise") bad(join(path, "problem"), "expected tv_denoise");
    const double lambda = lp.instance.metadata.at("lambda");
    const Index R = static_cast<Index>(lp.instance.metadata.at("rows"));
    const Index C = static_cast<Index>(lp.instance.metadata.at("cols"));
    LinearOperator G = LinearOperator::grad2d(R, C);
    operator_norm(G);
    const Vector obs = lp.instance.x0;
    return finish({SaddleProblem{linf_ball(lambda), sq_distance(obs), G, l1_norm(lambda)}, obs,
                   Vector::Zero(G.out_dim())});
  }
  const json& sj = need(j, path, "saddle");
  const std::string sp = join(path, "saddle");
  allow_only(sj, sp, {"f_star", "g", "K", "f_primal"});
  LinearOperator K = parse_operator(need(sj, sp, "K"), join(sp, "K"));
  operator_norm(K);
  SaddleProblem prob{parse_prox(need(sj, sp, "f_star"), join(sp, "f_star")),
                     parse_prox(need(sj, sp, "g"), join(sp, "g")), K, std::nullopt};
  if (sj.contains("f_primal")) prob.f_primal = parse_prox(sj.at("f_primal"), join(sp, "f_primal"));
  return finish({prob, Vector::Zero(K.in_dim()), Vector::Zero(K.out_dim())});
}

std::vector<CheckReport> run_cp(const json& j, const std::string& path, const CheckContext& ctx) {
  allow_only(j, path, {"check", "name", "problem", "saddle", "x0", "y0", "saddle_point",
                       "horizons", "sigma", "tau", "reference_iter", "box", "form",
                       "expect_failure"});
  SaddleSource s = saddle_source(j, path, ctx.seed);
  std::vector<int> horizons{10, 100, 1000};
  if (j.contains("horizons")) {
    const Vector h = vector_field(j, path, "horizons");
    horizons.clear();
    for (Index i = 0; i < h.size(); ++i) horizons.push_back(static_cast<int>(h[i]));
  }
  SolverConfig cfg;
  cfg.sigma = maybe_number(j, path, "sigma");
  cfg.tau = maybe_number(j, path, "tau");
  cfg.seed = ctx.seed;
  SaddlePoint sp;
  if (j.contains("saddle_point")) {
    const json& o = j.at("saddle_point");
    const std::string op = join(path, "saddle_point");
    allow_only(o, op, {"x", "y"});
    sp = {vector_field(o, op, "x"), vector_field(o, op, "y")};
  } else {
    // High-accuracy reference run of the same iteration.
    SolverConfig rc = cfg;
    rc.max_iter = static_cast<int>(integer(j, path, "reference_iter", 50000));
    const SolverTrace ref = chambolle_pock(s.prob, s.x0, s.y0, rc);
    sp = {ref.final_vector("x"), ref.final_vector("y")};
  }
  // "stated": averages of (x_n, y_n) from (x_0, y_0); "shifted": iterates
  // paired as (x_n, y_{n+1}) from (x_0, y_1).
  const std::string form = text(j, path, "form", "both");
  if (form != "stated" && form != "shifted" && form != "both")
    bad(join(path, "form"), "expected stated, shifted or both");
  cfg.max_iter = *std::max_element(horizons.begin(), horizons.end()) + 1;
  cfg.thin = 1;
  const SolverTrace t = chambolle_pock(s.prob, s.x0, s.y0, cfg);
  std::vector<CheckReport> out;
  if (form != "shifted") out.push_back(check_cp_gap(s.prob, t, s.x0, s.y0, sp, horizons));
  if (form != "stated") out.push_back(check_cp_gap_shifted(s.prob, t, s.x0, sp, horizons));
  out.push_back(check_cp_boundedness(t, s.x0, s.y0, sp));
  if (j.contains("box")) {
    const json& b = j.at("box");
    const std::string bp = join(path, "box");
    allow_only(b, bp, {"x_lo", "x_hi", "y_lo", "y_hi"});
    GapBox box{vector_field(b, bp, "x_lo"), vector_field(b, bp, "x_hi"),
               vector_field(b, bp, "y_lo"), vector_field(b, bp, "y_hi")};
    out.push_back(check_cp_box_gap(s.prob, t, s.x0, s.y0, box, horizons));
  }
  return labelled(std::move(out), ctx.name);
}

std::vector<CheckReport> run_admm_consensus(const json& j, const std::string& path,
                                            const CheckContext& ctx) {
  allow_only(j, path, {"check", "name", "targets", "lambda", "gamma", "max_iter",
                       "residual_threshold", "objective_tol", "expect_failure"});
  // min sum_i (1/2)|x_i - a_i|^2 + lambda |y|_1  s.t.  x_i = y.
  const json& tj = need(j, path, "targets");
  if (!tj.is_array() || tj.size() < 2) bad(join(path, "targets"), "need at least two blocks");
  std::vector<Vector> a;
  for (std::size_t i = 0; i < tj.size(); ++i)
    a.push_back(as_vector(tj[i], join(path, "targets") + "[" + std::to_string(i) + "]"));
  const Index d = a[0].size();
  const Index M = static_cast<Index>(a.size());
  Vector stacked(M * d), mean = Vector::Zero(d);
  for (Index i = 0; i < M; ++i) {
    if (a[static_cast<std::size_t>(i)].size() != d) bad(join(path, "targets"), "blocks differ in length");
    stacked.segment(i * d, d) = a[static_cast<std::size_t>(i)];
    mean += a[static_cast<std::size_t>(i)] / static_cast<double>(M);
  }
  const double lambda = number(j, path, "lambda", 0.0);
  const Vector ystar = soft_threshold(mean, lambda / static_cast<double>(M));
  double fstar = lambda * ystar.lpNorm<1>();
  for (const auto& ai : a) fstar += 0.5 * (ystar - ai).squaredNorm();

  std::vector<LinearOperator> negs(static_cast<std::size_t>(M), LinearOperator::scale(-1.0, d));
  const LinearOperator B = LinearOperator::stack(negs);
  const AdmmBlock fb = admm_prox_block(sq_distance(stacked), LinearOperator::identity(M * d));
  const AdmmBlock gb = admm_prox_block(lambda > 0.0 ? l1_norm(lambda) : zero_function(), B);
  SolverConfig cfg;
  cfg.gamma = number(j, path, "gamma", 1.0);
  cfg.max_iter = static_cast<int>(integer(j, path, "max_iter", 5000));
  cfg.seed = ctx.seed;
  const SolverTrace t = admm(fb, gb, Vector::Zero(M * d), Vector::Zero(d), Vector::Zero(M * d), cfg);
  std::vector<CheckReport> out;
  out.push_back(check_reaches(t.column("primal_residual"),
                              number(j, path, "residual_threshold", 1e-6), cfg.max_iter,
                              "admm_primal_residual"));
  CheckReport obj;
  obj.check = "admm_objective";
  const double tol = number(j, path, "objective_tol", 1e-6);
  const double last = t.objective.empty() ? std::nan("") : t.objective.back();
  obj.metrics["final_objective"] = last;
  obj.metrics["reference"] = fstar;
  if (std::isnan(last)) obj.fail("no iterations");
  else obj.observe(tol - std::abs(last - fstar), 0.0, "final");
  out.push_back(obj);
  return labelled(std::move(out), ctx.name);
}

std::vector<CheckReport> run_kl(const json& j, const std::string& path, const CheckContext& ctx) {
  allow_only(j, path, {"check", "name", "smooth", "prox", "x0", "gamma", "L", "horizons",
                       "expect_failure"});
  const SmoothFn f = j.contains("smooth") ? parse_smooth(j.at("smooth"), join(path, "smooth"))
                                          : zero_smooth();
  const ProxFn g = j.contains("prox") ? parse_prox(j.at("prox"), join(path, "prox")) : zero_function();
  const Vector x0 = vector_field(j, path, "x0");
  const double gamma = number(j, path, "gamma");
  const double L = number(j, path, "L", f.lipschitz);
  KlOptions ko;
  if (j.contains("horizons")) {
    const Vector h = vector_field(j, path, "horizons");
    ko.horizons.clear();
    for (Index i = 0; i < h.size(); ++i) ko.horizons.push_back(static_cast<int>(h[i]));
  }
  SolverConfig cfg;
  cfg.gamma = gamma;
  cfg.max_iter = *std::max_element(ko.horizons.begin(), ko.horizons.end());
  cfg.seed = ctx.seed;
  CheckReport r;
  try {
    const SolverTrace t = nonconvex_forward_backward(f, g, x0, cfg);
    r = kl_monitor(t, gamma, L, ko);
  } catch (const SolverError& e) {
    r.check = "kl_monitor";
    r.fail(e.what());
  }
  r.instance = ctx.name;
  return {r};
}

std::vector<CheckReport> run_km(const json& j, const std::string& path, const CheckContext& ctx) {
  allow_only(j, path, {"check", "name", "map", "x0", "lambda", "max_iter", "threshold",
                       "expect_failure"});
  const LinearOperator T = parse_operator(need(j, path, "map"), join(path, "map"));
  const Vector x0 = vector_field(j, path, "x0");
  SolverConfig cfg;
  cfg.relaxation = Relaxation::constant(number(j, path, "lambda", 0.5));
  cfg.max_iter = static_cast<int>(integer(j, path, "max_iter", 100));
  cfg.seed = ctx.seed;
  const SolverTrace t =
      krasnoselskii_mann([T](const Vector& x) { return T.apply(x); }, x0, cfg);
  std::vector<CheckReport> out;
  // The objective column of a KM trace is |T x_n - x_n|.
  out.push_back(check_monotone(t.objective, "km_fixed_point_residual", true));
  out.push_back(check_reaches(t.objective, number(j, path, "threshold", 1e-8), cfg.max_iter,
                              "km_reaches_threshold"));
  return labelled(std::move(out), ctx.name);
}

std::vector<CheckReport> run_cross(const json& j, const std::string& path, const CheckContext& ctx) {
  allow_only(j, path, {"check", "name", "problem", "recipes", "solver", "per_recipe", "tol",
                       "solution_tol", "expect_failure"});
  LoadedProblem lp = load_problem(need(j, path, "problem"), join(path, "problem"), ctx.seed);
  const json& names = need(j, path, "recipes");
  if (!names.is_array() || names.empty()) bad(join(path, "recipes"), "expected recipe names");
  const json base = j.contains("solver") ? j.at("solver") : json::object();
  const json per = j.contains("per_recipe") ? j.at("per_recipe") : json::object();
  std::vector<RecipeResult> results;
  for (const auto& n : names) {
    const std::string name = n.get<std::string>();
    SolverConfig cfg = parse_solver_config(merged(base, per.contains(name) ? per.at(name) : json()),
                                           join(path, "solver"));
    cfg.seed = ctx.seed;
    try {
      results.push_back(lp.instance.run(name, cfg));
    } catch (const ConfigError& e) {
      bad(join(path, "recipes"), e.what());
    }
  }
  const Agreement a = compare_recipes(results);
  CheckReport r;
  r.check = "cross_recipe_agreement";
  r.instance = ctx.name;
  for (const auto& [k, v] : a.objectives) r.metrics["objective_" + k] = v;
  r.metrics["worst_relative"] = a.worst_relative;
  r.observe(number(j, path, "tol", 1e-4) - a.worst_relative, 0.0, "worst recipe");
  std::vector<CheckReport> out{r};
  if (j.contains("solution_tol")) {
    CheckReport s;
    s.check = "cross_recipe_solution";
    s.instance = ctx.name;
    const double tol = number(j, path, "solution_tol");
    for (std::size_t i = 1; i < results.size(); ++i) {
      const double d = (results[i].x - results[0].x).lpNorm<Eigen::Infinity>();
      s.metrics["max_diff_" + results[i].recipe] = d;
      s.observe(tol - d, 0.0, results[i].recipe + " vs " + results[0].recipe);
    }
    out.push_back(s);
  }
  return out;
}

std::vector<CheckReport> run_fixture_objective(const json& j, const std::string& path,
                                               const CheckContext& ctx) {
  allow_only(j, path, {"check", "name", "problem", "recipe", "solver", "tol", "expect_failure"});
  LoadedProblem lp = load_problem(need(j, path, "problem"), join(path, "problem"), ctx.seed);
  if (!lp.expected_objective) bad(join(path, "problem"), "fixture has no expected objective");
  SolverConfig cfg = parse_solver_config(j.contains("solver") ? j.at("solver") : json(),
                                         join(path, "solver"));
  cfg.seed = ctx.seed;
  const RecipeResult res = lp.instance.run(text(j, path, "recipe"), cfg);
  CheckReport r;
  r.check = "fixture_objective";
  r.instance = ctx.name;
  r.metrics["objective"] = res.objective;
  r.metrics["expected"] = *lp.expected_objective;
  r.observe(number(j, path, "tol", 1e-6) - std::abs(res.objective - *lp.expected_objective), 0.0,
            "final");
  return {r};
}

std::vector<CheckReport> run_check(const json& j, const std::string& path, const CheckContext& ctx) {
  const std::string kind = text(j, path, "check");
  if (kind == "gd_certificate") return run_gd(j, path, ctx);
  if (kind == "fista_certificate") return run_fista(j, path, ctx);
  if (kind == "contraction") return run_contraction(j, path, ctx);
  if (kind == "properties") return run_properties(j, path, ctx);
  if (kind == "dr_cp") return run_equivalence(j, path, ctx, false);
  if (kind == "dr_admm") return run_equivalence(j, path, ctx, true);
  if (kind == "cp_gap") return run_cp(j, path, ctx);
  if (kind == "admm_consensus") return run_admm_consensus(j, path, ctx);
  if (kind == "kl_monitor") return run_kl(j, path, ctx);
  if (kind == "km") return run_km(j, path, ctx);
  if (kind == "cross_recipe") return run_cross(j, path, ctx);
  if (kind == "fixture_objective") return run_fixture_objective(j, path, ctx);
  bad(join(path, "check"), "unknown check '" + kind + "'");
}

}  // namespace

int cmd_certify(const Options& opt, std::ostream& out) {
  Common c = load_common(opt, {"suite", "output", "seed"});
  const json& suite = need(c.config, "", "suite");
  if (!suite.is_array()) bad("suite", "expected an array of checks");
  std::vector<CheckReport> all;
  json entries = json::array();
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const std::string path = "suite[" + std::to_string(i) + "]";
    const json& j = suite[i];
    if (!j.is_object()) bad(path, "expected an object");
    CheckContext ctx{c.seed, text(j, path, "name", text(j, path, "check") + "#" + std::to_string(i))};
    const bool control = flag(j, path, "expect_failure", false);
    std::vector<CheckReport> rs = run_check(j, path, ctx);
    if (control) {
      // A negative control passes when the wrapped checks flag it.
      CheckReport r;
      r.check = text(j, path, "check") + " (negative control)";
      r.instance = ctx.name;
      std::vector<std::string> flagged;
      for (const auto& x : rs)
        if (!x.pass) flagged.push_back(x.check);
      if (flagged.empty()) r.fail("control was not flagged by any check");
      for (const auto& f : flagged) r.note("flagged by " + f);
      rs = {r};
    }
    for (auto& r : rs) {
      out << (r.pass ? "PASS " : "FAIL ") << r.instance << " :: " << r.check << '\n';
      entries.push_back(to_json(r));
      all.push_back(std::move(r));
    }
  }
  json report;
  report["pass"] = all_pass(all);
  report["n_checks"] = all.size();
  json failed = json::array();
  for (const auto& r : all)
    if (!r.pass) failed.push_back(r.instance + " :: " + r.check);
  report["failed"] = failed;
  report["checks"] = entries;
  ensure_dir(c.out);
  write_json(c.out / "config.resolved.json", c.config);
  write_json(c.out / "report.json", report);
  out << all.size() - failed.size() << '/' << all.size() << " checks passed\n";
  return failed.empty() ? ok : certification_failure;
}

int run(const std::string& command, const Options& opt, std::ostream& out, std::ostream& err) {
  try {
    if (command == "solve") return cmd_solve(opt, out);
    if (command == "certify") return cmd_certify(opt, out);
    if (command == "compare") return cmd_compare(opt, out);
    if (command == "generate") return cmd_generate(opt, out);
    err << "unknown command '" << command << "' (solve, certify, compare, generate)\n";
    return config_error;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return config_error;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return diverged;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return config_error;
  }
}

}  // namespace proxsplit::cli
