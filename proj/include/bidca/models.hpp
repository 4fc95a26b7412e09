#pragma once

#include "bidca/bilevel.hpp"
#include "bidca/data_io.hpp"

namespace bidca {

struct SvmBounds {
  double lambda_lb = 1e-4;
  double lambda_ub = 1e4;
  double wbar_lb = 1e-6;
  double wbar_ub = 1.5;

  double mu_lo() const { return 1.0 / lambda_ub; }
  double mu_hi() const { return 1.0 / lambda_lb; }
};

/// Cross-validation bilevel model for linear SV classification.
/// Upper variable x = (mu, wbar) with mu = 1/lambda; lower variable
/// y = (w^1, ..., w^T, c_1, ..., c_T). Upper objective: mean validation
/// hinge loss over folds. Lower objective: per-fold ||w^t||^2/(2 mu) plus
/// training hinge losses, under -wbar <= w^t <= wbar.
struct SvmCvModel {
  Dataset train;
  FoldPlan folds;
  SvmBounds bounds;
  Eigen::Index n = 0;
  int T = 0;
  BilevelProblem problem;

  Eigen::Index dim_x() const { return 1 + n; }
  Eigen::Index dim_y() const { return (n + 1) * static_cast<Eigen::Index>(T); }
  /// Offsets inside the y block.
  Eigen::Index w_offset(int t) const { return static_cast<Eigen::Index>(t) * n; }
  Eigen::Index c_offset(int t) const {
    return n * static_cast<Eigen::Index>(T) + static_cast<Eigen::Index>(t);
  }
  Vec start_x() const;  // lambda = 1, wbar = 0.1
  Vec start_y() const;  // zeros
};

SvmCvModel build_svm_cv(const Dataset& train, const FoldPlan& plan,
                        const SvmBounds& bounds);

/// Validation hinge error Theta at a lower-level point y; shares its
/// definition, not its code path, with the upper objective oracle.
double cv_error(const Vec& y, const SvmCvModel& m);

struct Classifier {
  Vec w;
  double c = 0.0;
};

/// Final classifier fit on all of omega with the selected hyperparameters,
/// rescaled because each fold trained on only (T-1)/T of the data:
/// min (T/(T-1))/(2 mu) ||w||^2 + sum_j hinge  over  -wbar <= w <= wbar.
Classifier post_process(double mu_hat, const Vec& wbar_hat, const Dataset& omega,
                        int T = 3);

/// Misclassification rate with sign(0) = +1.
double test_error(const Classifier& clf, const Dataset& test);

/// Cross-validation bilevel model for lasso regression. Upper variable
/// x = lambda; lower variable y = (w^1, ..., w^T). Lower objective
/// sum_t sum_j (a_j'w^t - b_j)^2 / lambda + ||w^t||_1; upper objective
/// mean squared validation error.
struct LassoCvModel {
  Dataset train;
  FoldPlan folds;
  double lambda_lo = 0.0;
  double lambda_hi = 0.0;
  Eigen::Index n = 0;
  int T = 0;
  BilevelProblem problem;

  Eigen::Index dim_y() const { return n * static_cast<Eigen::Index>(T); }
  Eigen::Index w_offset(int t) const { return static_cast<Eigen::Index>(t) * n; }
  Vec start_x() const;
  Vec start_y() const;
};

LassoCvModel build_lasso_cv(const Dataset& train, const FoldPlan& plan,
                            double lambda_lo, double lambda_hi);

double lasso_cv_error(const Vec& y, const LassoCvModel& m);

/// Analytic test instances with known lower-level solution maps and
/// bilevel optima.
struct ToyInstance {
  std::string id;
  BilevelProblem problem;
  Vec x0, y0;
  Vec x_star, y_star;
  double objective_star = 0.0;
  /// Analytic value function v(x).
  std::function<double(const Vec&)> value_fn;
};

/// Catalog: "clamp" (box-clamped tracking lower level), "quadratic"
/// (smooth lower level, exercises the linearized variant), "offset"
/// (active lower-level constraint with nonzero multiplier).
ToyInstance build_toy(const std::string& id);

}  // namespace bidca
