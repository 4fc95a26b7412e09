#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bidca {

using Vec = Eigen::VectorXd;
using SpVec = Eigen::SparseVector<double>;
using SpMat = Eigen::SparseMatrix<double>;
using RowSpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values fed to an oracle or solver. Oracles never return
/// silent NaNs; bad input is a hard error.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

void require_finite(double v, const char* what);
void require_finite(const Vec& v, const char* what);

/// Closed box [lo, hi], entries may be -inf/+inf to drop a bound.
struct Box {
  Vec lo;
  Vec hi;

  static Box bounds(Vec lo, Vec hi);
  static Box unbounded(Eigen::Index dim);
  static Box nonnegative(Eigen::Index dim);
  static Box uniform(Eigen::Index dim, double lo, double hi);

  Eigen::Index dim() const { return lo.size(); }
  bool contains(const Vec& z, double tol = 0.0) const;
  /// Concatenation [this; other].
  Box stacked(const Box& other) const;
};

/// Componentwise clamp of z onto b. Idempotent and nonexpansive.
Vec project_box(const Vec& z, const Box& b);

/// max(1 - u, 0), the classification loss on a margin u.
double hinge(double u);
/// Subgradient of hinge; at the kink u = 1 returns 0 (a valid element).
double hinge_subgrad(double u);

/// First-order oracle for a convex function: value and one element of the
/// convex subdifferential. `smooth_modulus` >= 0 marks the function as
/// gradient-Lipschitz with that constant (required by the linearized
/// algorithm variants); negative means no smoothness is claimed.
struct ConvexOracle {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> subgrad;
  double smooth_modulus = -1.0;

  bool is_smooth() const { return smooth_modulus >= 0.0; }
  double eval(const Vec& z) const;
  Vec subgrad_at(const Vec& z) const;
};

ConvexOracle zero_oracle(Eigen::Index dim);
ConvexOracle constant_oracle(Eigen::Index dim, double c);

/// Checks the subgradient inequality f(p) >= f(z) + <xi, p - z> - tol for
/// every probe p. A failure is a result, not an error.
bool subgrad_check(const ConvexOracle& f, const Vec& z, const Vec& xi,
                   const std::vector<Vec>& probes, double tol);

/// Affine function a'z + b with a sparse coefficient vector.
struct AffineFn {
  SpVec a;
  double b = 0.0;

  static AffineFn zero(Eigen::Index dim);
  static AffineFn dense(const Vec& coeffs, double offset);

  Eigen::Index dim() const { return a.size(); }
  double eval(const Vec& z) const;
};

/// weight * max(arg(z), 0) with affine arg; weight > 0.
struct HingeTerm {
  AffineFn arg;
  double weight = 1.0;
};

/// Twice-differentiable convex function given by value/gradient/Hessian
/// callbacks. The Hessian is returned as a sparse symmetric matrix.
struct SmoothFn {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
  std::function<SpMat(const Vec&)> hess;
};

/// Structural description of a convex function as
///   smooth(z) + sum_j weight_j * max(a_j'z + b_j, 0) + linear(z).
/// This is what the subproblem builder needs to move all nonsmoothness
/// into slack variables.
struct ConvexStructure {
  Eigen::Index dim = 0;
  std::optional<SmoothFn> smooth;
  std::vector<HingeTerm> hinges;
  AffineFn linear;

  double eval(const Vec& z) const;
  /// One subdifferential element; hinge kinks contribute 0.
  Vec subgrad_at(const Vec& z) const;
  ConvexOracle oracle(double smooth_modulus = -1.0) const;
};

enum class LogLevel { off = 0, info = 1, debug = 2 };

/// Level parsed once from the BIDCA_LOG environment variable
/// (off|info|debug, default off).
LogLevel log_level();
void log_line(LogLevel level, const std::string& msg);

}  // namespace bidca
