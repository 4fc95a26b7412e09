#pragma once

#include "bidca/dc.hpp"

namespace bidca {

class LowerLevelInfeasible : public Error {
 public:
  using Error::Error;
};

/// Which sufficient condition certifies that the subdifferential of f and
/// g splits into partial subdifferentials at the points the solver visits.
/// The library trusts the declaration; it cannot verify it symbolically.
enum class PartialFormula {
  none,
  separable_sum,              // f(x,y) = f1(x) + f2(y)
  smooth_plus_x_independent,  // f = smooth + a part that does not involve x
  fully_smooth,
};

/// Bilevel program
///   min F1(x,y) - F2(x,y)  s.t.  x in X,  y solves
///   min_y { f(x,y) : g(x,y) <= 0, y in Y },
/// with F1, F2, f convex on an open set containing
/// C = {(x,y) in X x Y : g <= 0} and affine lower-level constraints g.
/// Everything lives on the stacked variable z = (x, y).
struct BilevelProblem {
  Eigen::Index dim_x = 0;
  Eigen::Index dim_y = 0;
  ConvexStructure F1;
  ConvexOracle F2;
  ConvexStructure f;
  double f_smooth_modulus = -1.0;  // L_f when f has no hinge terms
  std::vector<AffineFn> g;
  Box X, Y;
  PartialFormula attestation = PartialFormula::none;

  Eigen::Index dim() const { return dim_x + dim_y; }
  Vec stack(const Vec& x, const Vec& y) const;
  Vec x_block(const Vec& z) const { return z.head(dim_x); }
  Vec y_block(const Vec& z) const { return z.tail(dim_y); }
  bool f_is_smooth() const { return f_smooth_modulus >= 0.0 && f.hinges.empty(); }
};

struct LowerSolution {
  Vec x;
  Vec y;
  Vec gamma;           // one KKT multiplier per constraint g_i
  double value = 0.0;  // v(x) = f(x, y)
  double kkt_residual = 0.0;
};

/// Tolerance of every lower-level and certificate-feeding solve; tighter
/// than the outer tolerances it certifies.
inline constexpr double kLowerTol = 1e-8;

/// Solves the lower-level problem at fixed x and returns the minimizer
/// together with its KKT multipliers.
LowerSolution solve_lower(const BilevelProblem& p, const Vec& x,
                          double tol = kLowerTol);

/// One element of the value-function subdifferential at sol.x, assembled
/// from the lower solution:  d_x f(x, y~) + sum_i gamma_i d_x g_i(x, y~).
Vec value_subgradient(const LowerSolution& sol, const BilevelProblem& p);

/// The relaxed value-function reformulation as a DC program over z = (x,y):
/// g0 = F1, h0 = F2, g1 = f - eps, h1 = v(x-block), feasible set
/// X x Y intersected with the rows g <= 0. The h1 oracle solves the lower
/// level on demand and memoizes the most recent x (thread-safe).
DcProblem assemble_vp(const BilevelProblem& p, double eps);

struct BilevelResult {
  Vec x;
  Vec y;
  double lambda = 0.0;
  Trace trace;
  /// Lower-level re-solve at the returned x (the y the value function saw).
  LowerSolution lower;
};

BilevelResult run_bilevel(const BilevelProblem& p, double eps,
                          const DcaParams& params, DcaVariant variant,
                          const Vec& x0, const Vec& y0);

}  // namespace bidca
