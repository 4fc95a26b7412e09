#pragma once

#include "bidca/core.hpp"

namespace bidca {

class MaxIterationsError : public Error {
 public:
  using Error::Error;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class NumericalBreakdownError : public Error {
 public:
  using Error::Error;
};

/// Convex program
///   min F(z)  s.t.  A z <= b,  c_i(z) <= 0,  z in box,
/// with F and every c_i twice differentiable and convex on an open set
/// containing the feasible region. Nonsmooth terms (hinges, max) must be
/// reformulated by the caller with nonnegative slack variables so that
/// only smooth functions reach the engine.
struct SmoothConvexProgram {
  Eigen::Index dim = 0;
  SmoothFn objective;
  RowSpMat A;  // may have zero rows
  Vec b;
  std::vector<SmoothFn> convex_rows;  // general smooth convex rows
  Box box;

  Eigen::Index linear_row_count() const { return A.rows(); }
  Eigen::Index row_count() const {
    return A.rows() + static_cast<Eigen::Index>(convex_rows.size());
  }
};

struct IpOptions {
  double tol = 1e-8;
  int max_iter = 100;
  double fraction_to_boundary = 0.995;
  double kkt_regularization = 1e-10;
  /// Optional warm-start primal point; clamped strictly inside the box.
  std::optional<Vec> start;
};

/// Solution certificate: primal point, nonnegative multipliers for every
/// linear row, smooth row and finite box side, and the raw KKT residuals
/// they achieve.
struct KktCertificate {
  Vec primal;
  Vec row_duals;         // one per linear row
  Vec convex_row_duals;  // one per smooth convex row
  Vec box_lower_duals;   // zero where the bound is -inf
  Vec box_upper_duals;   // zero where the bound is +inf
  double stationarity_residual = 0.0;
  double complementarity_residual = 0.0;
  double feasibility_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
  /// Internal merit (residual norm) after each accepted step.
  std::vector<double> merit_history;

  double max_residual() const {
    return std::max({stationarity_residual, complementarity_residual,
                     feasibility_residual});
  }
};

/// Primal-dual path-following solve with Mehrotra predictor-corrector.
/// Throws MaxIterationsError, InfeasibleError or NumericalBreakdownError.
KktCertificate ip_solve(const SmoothConvexProgram& p, const IpOptions& opts = {});

/// Convenience builder for 0.5 z'Qz + c'z + c0 objectives.
SmoothFn quadratic_fn(SpMat Q, Vec c, double c0 = 0.0);

}  // namespace bidca
