#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace proxsplit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Throws DimensionError naming `what` if any entry is NaN or infinite, or
/// if the vector is empty.
void require_finite(const Vector& x, std::string_view what);

enum class Boundary { periodic, neumann };

/// Row-major image carrier. Flattening to a Vector is the identity on
/// `pixels`, so every operator below acts on flattened grids.
struct ImageGrid {
  Index rows = 0;
  Index cols = 0;
  Vector pixels;
  Boundary boundary = Boundary::neumann;

  ImageGrid() = default;
  ImageGrid(Index rows, Index cols, Vector pixels,
            Boundary boundary = Boundary::neumann);
  static ImageGrid filled(Index rows, Index cols, double value,
                          Boundary boundary = Boundary::neumann);

  double& at(Index r, Index c) { return pixels[r * cols + c]; }
  double at(Index r, Index c) const { return pixels[r * cols + c]; }
  Index size() const { return rows * cols; }
};

enum class OperatorKind {
  dense_matrix,
  grad2d,
  mask,
  circular_conv,
  stack,
  scale,
  identity,
  composition,
  adjoint,
  custom,
};

std::string_view to_string(OperatorKind kind);

namespace detail {
struct OperatorImpl;
}

/// Linear map with its adjoint. Immutable once built; copies share the
/// underlying implementation. The norm estimate is cached per value.
class LinearOperator {
 public:
  using Map = std::function<Vector(const Vector&)>;

  static LinearOperator identity(Index n);
  static LinearOperator dense(Matrix m);
  /// Forward differences: first rows*cols entries are differences along a
  /// row (column index + 1), the next rows*cols along a column. Neumann sets
  /// the last difference to zero; periodic wraps around.
  static LinearOperator grad2d(Index rows, Index cols,
                               Boundary boundary = Boundary::neumann);
  static LinearOperator mask(const std::vector<bool>& keep);
  /// Direct circular convolution on a rows x cols grid:
  /// (k * x)[r, c] = sum_{a,b} k[a, b] x[r - a + origin_r, c - b + origin_c].
  static LinearOperator circular_conv(Index rows, Index cols, Matrix kernel,
                                      Index origin_r = 0, Index origin_c = 0);
  /// Vertical concatenation [A; B; ...]; all blocks share in_dim.
  static LinearOperator stack(std::vector<LinearOperator> blocks);
  /// c * Id on R^n.
  static LinearOperator scale(double c, Index n);
  /// factors[0] o factors[1] o ... ; the last factor is applied first.
  static LinearOperator compose(std::vector<LinearOperator> factors);
  static LinearOperator adjoint_of(const LinearOperator& op);
  static LinearOperator from_functions(Index in_dim, Index out_dim, Map apply,
                                       Map adjoint, std::string name);

  Index in_dim() const;
  Index out_dim() const;
  OperatorKind kind() const;
  std::string describe() const;

  Vector apply(const Vector& x) const;
  Vector adjoint_apply(const Vector& y) const;

  std::optional<double> cached_norm() const { return cached_norm_; }
  void set_cached_norm(double value) { cached_norm_ = value; }

  // Structural queries used by closed-form solvers.
  const Matrix* matrix() const;           // dense_matrix
  const Vector* mask_weights() const;     // mask, 0/1 entries
  std::optional<double> scalar() const;   // identity (1) and scale (c)
  std::span<const LinearOperator> blocks() const;  // stack / composition

 private:
  explicit LinearOperator(std::shared_ptr<const detail::OperatorImpl> impl);
  std::shared_ptr<const detail::OperatorImpl> impl_;
  std::optional<double> cached_norm_;
};

/// c * op, stored as compose(scale(c), op).
LinearOperator scaled(double c, const LinearOperator& op);

struct NormEstimate {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Power iteration on K*K from a seeded random start. Caches the result on
/// `op`. Stops when the relative change of the eigenvalue estimate drops
/// below `tol`; otherwise returns the last estimate with converged = false.
NormEstimate operator_norm(LinearOperator& op, double tol = 1e-8,
                           int max_iter = 10000, std::uint64_t seed = 0);

/// Cached norm if present, otherwise a fresh estimate with default settings.
double norm_of(const LinearOperator& op);

struct AdjointReport {
  double max_defect = 0.0;
  int trials = 0;
  bool pass = true;
};

/// Max over random (x, y) of |<Kx, y> - <x, K*y>| / (1 + |x||y|).
AdjointReport adjoint_consistency_check(const LinearOperator& op, int trials,
                                        std::uint64_t seed,
                                        double threshold = 1e-10);

/// Dense matrix from CSV, one row per line, comma separated.
Matrix load_matrix_csv(const std::filesystem::path& path);
void save_matrix_csv(const std::filesystem::path& path, const Matrix& m);

}  // namespace proxsplit
