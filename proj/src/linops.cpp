#include "proxsplit/linops.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "proxsplit/errors.hpp"
#include "proxsplit/random.hpp"

namespace proxsplit {

void require_finite(const Vector& x, std::string_view what) {
  if (x.size() == 0) throw DimensionError(std::string(what) + ": empty vector");
  if (!x.allFinite())
    throw DimensionError(std::string(what) + ": non-finite entry");
}

ImageGrid::ImageGrid(Index r, Index c, Vector p, Boundary b)
    : rows(r), cols(c), pixels(std::move(p)), boundary(b) {
  if (rows < 1 || cols < 1)
    throw DimensionError("image grid needs positive rows and cols");
  if (pixels.size() != rows * cols)
    throw DimensionError("image grid " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " given " +
                         std::to_string(pixels.size()) + " pixels");
}

ImageGrid ImageGrid::filled(Index r, Index c, double value, Boundary b) {
  return ImageGrid(r, c, Vector::Constant(r * c, value), b);
}

std::string_view to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::dense_matrix: return "dense_matrix";
    case OperatorKind::grad2d: return "grad2d";
    case OperatorKind::mask: return "mask";
    case OperatorKind::circular_conv: return "circular_conv";
    case OperatorKind::stack: return "stack";
    case OperatorKind::scale: return "scale";
    case OperatorKind::identity: return "identity";
    case OperatorKind::composition: return "composition";
    case OperatorKind::adjoint: return "adjoint";
    case OperatorKind::custom: return "custom";
  }
  return "unknown";
}

namespace detail {

struct OperatorImpl {
  Index in = 0;
  Index out = 0;
  OperatorKind kind = OperatorKind::custom;
  std::string name;

  virtual ~OperatorImpl() = default;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector adjoint(const Vector& y) const = 0;
  virtual const Matrix* matrix() const { return nullptr; }
  virtual const Vector* weights() const { return nullptr; }
  virtual std::optional<double> scalar() const { return std::nullopt; }
  virtual std::span<const LinearOperator> parts() const { return {}; }
};

namespace {

struct IdentityImpl final : OperatorImpl {
  Vector apply(const Vector& x) const override { return x; }
  Vector adjoint(const Vector& y) const override { return y; }
  std::optional<double> scalar() const override { return 1.0; }
};

struct ScaleImpl final : OperatorImpl {
  double c = 1.0;
  Vector apply(const Vector& x) const override { return c * x; }
  Vector adjoint(const Vector& y) const override { return c * y; }
  std::optional<double> scalar() const override { return c; }
};

struct DenseImpl final : OperatorImpl {
  Matrix m;
  Vector apply(const Vector& x) const override { return m * x; }
  Vector adjoint(const Vector& y) const override { return m.transpose() * y; }
  const Matrix* matrix() const override { return &m; }
};

struct MaskImpl final : OperatorImpl {
  Vector w;
  Vector apply(const Vector& x) const override { return w.cwiseProduct(x); }
  Vector adjoint(const Vector& y) const override { return w.cwiseProduct(y); }
  const Vector* weights() const override { return &w; }
};

struct Grad2dImpl final : OperatorImpl {
  Index rows = 0, cols = 0;
  Boundary boundary = Boundary::neumann;

  Vector apply(const Vector& x) const override {
    const Index n = rows * cols;
    Vector g = Vector::Zero(2 * n);
    const bool periodic = boundary == Boundary::periodic;
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        const Index p = r * cols + c;
        if (c + 1 < cols)
          g[p] = x[p + 1] - x[p];
        else if (periodic)
          g[p] = x[r * cols] - x[p];
        if (r + 1 < rows)
          g[n + p] = x[p + cols] - x[p];
        else if (periodic)
          g[n + p] = x[c] - x[p];
      }
    }
    return g;
  }

  Vector adjoint(const Vector& y) const override {
    const Index n = rows * cols;
    Vector d = Vector::Zero(n);
    const bool periodic = boundary == Boundary::periodic;
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) {
        const Index p = r * cols + c;
        const double u = y[p];
        const double v = y[n + p];
        if (c + 1 < cols) {
          d[p + 1] += u;
          d[p] -= u;
        } else if (periodic) {
          d[r * cols] += u;
          d[p] -= u;
        }
        if (r + 1 < rows) {
          d[p + cols] += v;
          d[p] -= v;
        } else if (periodic) {
          d[c] += v;
          d[p] -= v;
        }
      }
    }
    return d;
  }
};

struct ConvImpl final : OperatorImpl {
  Index rows = 0, cols = 0;
  Matrix k;
  Index origin_r = 0, origin_c = 0;

  static Index wrap(Index i, Index n) {
    const Index m = i % n;
    return m < 0 ? m + n : m;
  }

  Vector apply(const Vector& x) const override {
    Vector out = Vector::Zero(rows * cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (Index a = 0; a < k.rows(); ++a)
          for (Index b = 0; b < k.cols(); ++b) {
            const double w = k(a, b);
            if (w == 0.0) continue;
            acc += w * x[wrap(r - a + origin_r, rows) * cols +
                         wrap(c - b + origin_c, cols)];
          }
        out[r * cols + c] = acc;
      }
    return out;
  }

  Vector adjoint(const Vector& y) const override {
    Vector out = Vector::Zero(rows * cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (Index a = 0; a < k.rows(); ++a)
          for (Index b = 0; b < k.cols(); ++b) {
            const double w = k(a, b);
            if (w == 0.0) continue;
            acc += w * y[wrap(r + a - origin_r, rows) * cols +
                         wrap(c + b - origin_c, cols)];
          }
        out[r * cols + c] = acc;
      }
    return out;
  }
};

struct StackImpl final : OperatorImpl {
  std::vector<LinearOperator> ops;

  Vector apply(const Vector& x) const override {
    Vector out(this->out);
    Index at = 0;
    for (const auto& op : ops) {
      out.segment(at, op.out_dim()) = op.apply(x);
      at += op.out_dim();
    }
    return out;
  }

  Vector adjoint(const Vector& y) const override {
    Vector out = Vector::Zero(in);
    Index at = 0;
    for (const auto& op : ops) {
      out += op.adjoint_apply(y.segment(at, op.out_dim()));
      at += op.out_dim();
    }
    return out;
  }

  std::span<const LinearOperator> parts() const override { return ops; }
};

struct ComposeImpl final : OperatorImpl {
  std::vector<LinearOperator> ops;

  Vector apply(const Vector& x) const override {
    Vector v = x;
    for (auto it = ops.rbegin(); it != ops.rend(); ++it) v = it->apply(v);
    return v;
  }

  Vector adjoint(const Vector& y) const override {
    Vector v = y;
    for (const auto& op : ops) v = op.adjoint_apply(v);
    return v;
  }

  std::span<const LinearOperator> parts() const override { return ops; }
};

struct AdjointImpl final : OperatorImpl {
  std::vector<LinearOperator> base;  // exactly one
  Vector apply(const Vector& x) const override {
    return base[0].adjoint_apply(x);
  }
  Vector adjoint(const Vector& y) const override { return base[0].apply(y); }
  std::span<const LinearOperator> parts() const override { return base; }
};

struct CustomImpl final : OperatorImpl {
  LinearOperator::Map fwd, bwd;
  Vector apply(const Vector& x) const override { return fwd(x); }
  Vector adjoint(const Vector& y) const override { return bwd(y); }
};

template <class T>
std::shared_ptr<T> make_impl(Index in, Index out, OperatorKind kind,
                             std::string name) {
  auto p = std::make_shared<T>();
  p->in = in;
  p->out = out;
  p->kind = kind;
  p->name = std::move(name);
  return p;
}

std::string dims(Index a, Index b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

}  // namespace
}  // namespace detail

using namespace detail;

LinearOperator::LinearOperator(std::shared_ptr<const OperatorImpl> impl)
    : impl_(std::move(impl)) {}

LinearOperator LinearOperator::identity(Index n) {
  if (n < 1) throw DimensionError("identity needs dimension >= 1");
  auto p = make_impl<IdentityImpl>(n, n, OperatorKind::identity,
                                   "identity(" + std::to_string(n) + ")");
  LinearOperator op(p);
  op.cached_norm_ = 1.0;
  return op;
}

LinearOperator LinearOperator::scale(double c, Index n) {
  if (n < 1) throw DimensionError("scale needs dimension >= 1");
  if (!std::isfinite(c)) throw DimensionError("scale factor is not finite");
  auto p = make_impl<ScaleImpl>(n, n, OperatorKind::scale,
                                "scale(" + std::to_string(c) + ")");
  p->c = c;
  LinearOperator op(p);
  op.cached_norm_ = std::abs(c);
  return op;
}

LinearOperator LinearOperator::dense(Matrix m) {
  if (m.rows() < 1 || m.cols() < 1)
    throw DimensionError("dense operator needs a non-empty matrix");
  if (!m.allFinite()) throw DimensionError("dense operator: non-finite entry");
  auto p = make_impl<DenseImpl>(m.cols(), m.rows(), OperatorKind::dense_matrix,
                                "dense(" + std::to_string(m.rows()) + "x" +
                                    std::to_string(m.cols()) + ")");
  p->m = std::move(m);
  return LinearOperator(p);
}

LinearOperator LinearOperator::grad2d(Index rows, Index cols, Boundary b) {
  if (rows < 1 || cols < 1)
    throw DimensionError("grad2d needs positive rows and cols");
  auto p = make_impl<Grad2dImpl>(
      rows * cols, 2 * rows * cols, OperatorKind::grad2d,
      "grad2d(" + std::to_string(rows) + "x" + std::to_string(cols) +
          (b == Boundary::periodic ? ",periodic)" : ",neumann)"));
  p->rows = rows;
  p->cols = cols;
  p->boundary = b;
  return LinearOperator(p);
}

LinearOperator LinearOperator::mask(const std::vector<bool>& keep) {
  if (keep.empty()) throw DimensionError("mask needs a non-empty pattern");
  const auto n = static_cast<Index>(keep.size());
  auto p = make_impl<MaskImpl>(n, n, OperatorKind::mask,
                               "mask(" + std::to_string(n) + ")");
  p->w.resize(n);
  bool any = false;
  for (Index i = 0; i < n; ++i) {
    p->w[i] = keep[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    any = any || keep[static_cast<std::size_t>(i)];
  }
  LinearOperator op(p);
  op.cached_norm_ = any ? 1.0 : 0.0;
  return op;
}

LinearOperator LinearOperator::circular_conv(Index rows, Index cols,
                                             Matrix kernel, Index origin_r,
                                             Index origin_c) {
  if (rows < 1 || cols < 1)
    throw DimensionError("circular_conv needs positive rows and cols");
  if (kernel.rows() < 1 || kernel.cols() < 1)
    throw DimensionError("circular_conv needs a non-empty kernel");
  if (kernel.rows() > rows || kernel.cols() > cols)
    throw DimensionError("kernel " + dims(kernel.rows(), kernel.cols()) +
                         " larger than grid " + dims(rows, cols));
  if (!kernel.allFinite()) throw DimensionError("kernel: non-finite entry");
  auto p = make_impl<ConvImpl>(rows * cols, rows * cols,
                               OperatorKind::circular_conv,
                               "circular_conv(" + std::to_string(rows) + "x" +
                                   std::to_string(cols) + ")");
  p->rows = rows;
  p->cols = cols;
  p->k = std::move(kernel);
  p->origin_r = origin_r;
  p->origin_c = origin_c;
  return LinearOperator(p);
}

LinearOperator LinearOperator::stack(std::vector<LinearOperator> blocks) {
  if (blocks.empty()) throw DimensionError("stack needs at least one block");
  const Index in = blocks.front().in_dim();
  Index out = 0;
  std::string name = "stack[";
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].in_dim() != in)
      throw DimensionError("stack block " + std::to_string(i) +
                           " has in_dim " + dims(blocks[i].in_dim(), in));
    out += blocks[i].out_dim();
    name += (i ? ";" : "") + blocks[i].describe();
  }
  auto p = make_impl<StackImpl>(in, out, OperatorKind::stack, name + "]");
  p->ops = std::move(blocks);
  return LinearOperator(p);
}

LinearOperator LinearOperator::compose(std::vector<LinearOperator> factors) {
  if (factors.empty()) throw DimensionError("compose needs at least one factor");
  std::string name = "compose[";
  for (std::size_t i = 0; i + 1 < factors.size(); ++i) {
    if (factors[i].in_dim() != factors[i + 1].out_dim())
      throw DimensionError("compose factor " + std::to_string(i) +
                           " in_dim does not match next out_dim: " +
                           dims(factors[i].in_dim(), factors[i + 1].out_dim()));
  }
  for (std::size_t i = 0; i < factors.size(); ++i)
    name += (i ? " o " : "") + factors[i].describe();
  auto p = make_impl<ComposeImpl>(factors.back().in_dim(),
                                  factors.front().out_dim(),
                                  OperatorKind::composition, name + "]");
  p->ops = std::move(factors);
  return LinearOperator(p);
}

LinearOperator LinearOperator::adjoint_of(const LinearOperator& op) {
  auto p = make_impl<AdjointImpl>(op.out_dim(), op.in_dim(),
                                  OperatorKind::adjoint,
                                  "adjoint[" + op.describe() + "]");
  p->base = {op};
  LinearOperator out(p);
  out.cached_norm_ = op.cached_norm_;
  return out;
}

LinearOperator LinearOperator::from_functions(Index in, Index out, Map fwd,
                                              Map bwd, std::string name) {
  if (in < 1 || out < 1) throw DimensionError("operator dims must be >= 1");
  if (!fwd || !bwd) throw DimensionError("operator needs apply and adjoint");
  auto p = make_impl<CustomImpl>(in, out, OperatorKind::custom, std::move(name));
  p->fwd = std::move(fwd);
  p->bwd = std::move(bwd);
  return LinearOperator(p);
}

Index LinearOperator::in_dim() const { return impl_->in; }
Index LinearOperator::out_dim() const { return impl_->out; }
OperatorKind LinearOperator::kind() const { return impl_->kind; }
std::string LinearOperator::describe() const { return impl_->name; }

Vector LinearOperator::apply(const Vector& x) const {
  if (x.size() != impl_->in)
    throw DimensionError(impl_->name + ": apply expects length " +
                         std::to_string(impl_->in) + ", got " +
                         std::to_string(x.size()));
  return impl_->apply(x);
}

Vector LinearOperator::adjoint_apply(const Vector& y) const {
  if (y.size() != impl_->out)
    throw DimensionError(impl_->name + ": adjoint expects length " +
                         std::to_string(impl_->out) + ", got " +
                         std::to_string(y.size()));
  return impl_->adjoint(y);
}

const Matrix* LinearOperator::matrix() const { return impl_->matrix(); }
const Vector* LinearOperator::mask_weights() const { return impl_->weights(); }
std::optional<double> LinearOperator::scalar() const { return impl_->scalar(); }
std::span<const LinearOperator> LinearOperator::blocks() const {
  return impl_->parts();
}

LinearOperator scaled(double c, const LinearOperator& op) {
  auto out = LinearOperator::compose(
      {LinearOperator::scale(c, op.out_dim()), op});
  if (op.cached_norm()) out.set_cached_norm(std::abs(c) * *op.cached_norm());
  return out;
}

NormEstimate operator_norm(LinearOperator& op, double tol, int max_iter,
                           std::uint64_t seed) {
  if (!(tol > 0.0)) throw ConfigError("operator_norm: tol must be > 0");
  if (max_iter < 1) throw ConfigError("operator_norm: max_iter must be >= 1");
  Rng rng(seed);
  Vector v = rng.gaussian_vector(op.in_dim());
  v /= v.norm();
  NormEstimate est;
  double lambda = 0.0;
  for (int k = 1; k <= max_iter; ++k) {
    Vector w = op.adjoint_apply(op.apply(v));
    const double next = v.dot(w);
    const double wn = w.norm();
    est.iterations = k;
    if (wn == 0.0) {
      lambda = 0.0;
      est.converged = true;
      break;
    }
    const bool done = k > 1 && std::abs(next - lambda) <= tol * std::abs(next);
    lambda = next;
    v = w / wn;
    if (done) {
      est.converged = true;
      break;
    }
  }
  est.value = std::sqrt(std::max(lambda, 0.0));
  op.set_cached_norm(est.value);
  return est;
}

double norm_of(const LinearOperator& op) {
  if (op.cached_norm()) return *op.cached_norm();
  LinearOperator copy = op;
  return operator_norm(copy).value;
}

AdjointReport adjoint_consistency_check(const LinearOperator& op, int trials,
                                        std::uint64_t seed, double threshold) {
  if (trials < 1) throw ConfigError("adjoint check needs trials >= 1");
  Rng rng(seed);
  AdjointReport rep;
  rep.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const Vector x = rng.gaussian_vector(op.in_dim());
    const Vector y = rng.gaussian_vector(op.out_dim());
    const double lhs = op.apply(x).dot(y);
    const double rhs = x.dot(op.adjoint_apply(y));
    const double defect = std::abs(lhs - rhs) / (1.0 + x.norm() * y.norm());
    rep.max_defect = std::max(rep.max_defect, defect);
  }
  rep.pass = rep.max_defect <= threshold;
  return rep;
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw IoError(path.string() + ": bad number '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t", used) != std::string::npos)
        throw IoError(path.string() + ": bad number '" + cell + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path.string() + ": non-rectangular CSV at row " +
                    std::to_string(rows.size() + 1));
    rows.push_back(std::move(row));
  }
  if (rows.empty() || rows.front().empty())
    throw IoError(path.string() + ": empty CSV");
  Matrix m(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

void save_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace proxsplit
