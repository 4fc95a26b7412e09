#include <doctest.h>

#include "bidca/models.hpp"
#include "oracles.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace bidca;
namespace oracle = testing_oracles;

namespace {

Dataset tiny_dataset(Eigen::Index n, std::initializer_list<Sample> rows) {
  Dataset d;
  d.n = n;
  d.rows = rows;
  return d;
}

Sample sample(double label, std::initializer_list<std::pair<Eigen::Index, double>> fs) {
  Sample s;
  s.label = label;
  for (const auto& f : fs) s.features.push_back(f);
  return s;
}

}  // namespace

TEST_CASE("svm model dimensions match the cross-validation layout") {
  // the australian shape: n = 14, T = 3
  const Dataset data = synthetic_classification(30, 14, 7);
  const FoldPlan plan = fold_plan(data, 3, 7);
  const SvmCvModel m = build_svm_cv(data, plan, SvmBounds{});
  CHECK(m.dim_x() == 15);
  CHECK(m.dim_y() == 45);
  CHECK(m.problem.g.size() == 2 * 14 * 3);
  CHECK(m.problem.F1.hinges.size() == 30);          // one per validation use
  CHECK(m.problem.f.hinges.size() == 30 * (3 - 1));  // one per training use
  CHECK(m.problem.X.lo[0] == doctest::Approx(1e-4));
  CHECK(m.problem.X.hi[0] == doctest::Approx(1e4));
}

TEST_CASE("svm lower objective evaluates hinge contributions directly") {
  const Dataset data = tiny_dataset(1, {sample(1.0, {{1, 1.0}}), sample(-1.0, {{1, -1.0}}),
                                        sample(1.0, {{1, 0.5}}), sample(-1.0, {{1, -0.5}})});
  const FoldPlan plan = fold_plan(data, 2, 1);
  const SvmCvModel m = build_svm_cv(data, plan, SvmBounds{});
  // w = 0, c = 0, mu = 1: every training hinge contributes exactly 1
  Vec z = Vec::Zero(m.problem.dim());
  z[0] = 1.0;
  z.segment(1, m.n).setConstant(0.1);
  CHECK(m.problem.f.eval(z) == doctest::Approx(4.0));
}

TEST_CASE("svm perspective share: d f / d mu by finite differences") {
  const Dataset data = tiny_dataset(
      2, {sample(1.0, {{1, 1.0}}), sample(-1.0, {{2, -1.0}}),
          sample(1.0, {{1, 0.5}, {2, 0.2}}), sample(-1.0, {{1, -0.4}})});
  const FoldPlan plan = fold_plan(data, 2, 2);
  const SvmCvModel m = build_svm_cv(data, plan, SvmBounds{});
  Vec z = Vec::Zero(m.problem.dim());
  z[0] = 2.0;                                        // mu
  z.segment(1, m.n).setConstant(0.3);                // wbar
  z.segment(m.dim_x() + m.w_offset(0), 2) << 1.0, 1.0;  // w^1 = (1, 1)
  // analytic: -||w||^2 / (2 mu^2) = -2/8
  const Vec g = m.problem.f.subgrad_at(z);
  CHECK(g[0] == doctest::Approx(-0.25).epsilon(1e-12));
  const auto f = [&m](const Vec& p) { return m.problem.f.eval(p); };
  const Vec fd = oracle::fd_gradient(f, z, 1e-6);
  CHECK(std::abs(fd[0] - g[0]) <= 1e-8);
}

TEST_CASE("svm smooth part is positive semidefinite on the feasible box") {
  const Dataset data = synthetic_classification(12, 3, 11);
  const FoldPlan plan = fold_plan(data, 3, 11);
  const SvmCvModel m = build_svm_cv(data, plan, SvmBounds{});
  Rng rng(12);
  for (int rep = 0; rep < 100; ++rep) {
    Vec z(m.problem.dim());
    z[0] = rng.uniform(1e-2, 10.0);
    for (Eigen::Index i = 1; i < z.size(); ++i) z[i] = rng.uniform(-1.5, 1.5);
    const Eigen::MatrixXd H = Eigen::MatrixXd(m.problem.f.smooth->hess(z));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * (1.0 + es.eigenvalues().maxCoeff()));
  }
}

TEST_CASE("cv_error equals the upper oracle on random points") {
  const Dataset data = synthetic_classification(21, 4, 13);
  const FoldPlan plan = fold_plan(data, 3, 13);
  const SvmCvModel m = build_svm_cv(data, plan, SvmBounds{});
  Rng rng(13);
  for (int rep = 0; rep < 20; ++rep) {
    Vec z = Vec::Zero(m.problem.dim());
    z[0] = 1.0;
    z.segment(1, m.n).setConstant(0.5);
    Vec y(m.dim_y());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rng.uniform(-1.0, 1.0);
    z.tail(m.dim_y()) = y;
    CHECK(std::abs(cv_error(y, m) - m.problem.F1.eval(z)) <= 1e-10);
  }
}

TEST_CASE("cv_error trivial values") {
  // both points classified with margin >= 1 under w = (1), c = 0
  const Dataset data = tiny_dataset(1, {sample(1.0, {{1, 1.5}}), sample(-1.0, {{1, -1.5}}),
                                        sample(1.0, {{1, 2.0}}), sample(-1.0, {{1, -2.0}})});
  const FoldPlan plan = fold_plan(data, 2, 1);
  const SvmCvModel m = build_svm_cv(data, plan, SvmBounds{});
  Vec y = Vec::Zero(m.dim_y());
  y[m.w_offset(0)] = 1.0;
  y[m.w_offset(1)] = 1.0;
  CHECK(cv_error(y, m) == 0.0);
  // w = 0, c = 0: every validation point sits at margin 0, hinge = 1
  CHECK(cv_error(Vec::Zero(m.dim_y()), m) == doctest::Approx(1.0));
}

TEST_CASE("fold roles partition every training row") {
  const Dataset data = synthetic_classification(23, 3, 17);
  const FoldPlan plan = fold_plan(data, 3, 17);
  const SvmCvModel m = build_svm_cv(data, plan, SvmBounds{});
  // each row: one validation hinge in F1, T-1 training hinges in f
  CHECK(static_cast<Eigen::Index>(m.problem.F1.hinges.size()) == data.size());
  CHECK(static_cast<Eigen::Index>(m.problem.f.hinges.size()) == data.size() * 2);
  Eigen::Index total = 0;
  for (int t = 0; t < plan.T; ++t) total += plan.fold_size(t);
  CHECK(total == data.size());
}

TEST_CASE("svm model rejects bad inputs") {
  Dataset data = synthetic_classification(12, 2, 19);
  const FoldPlan plan = fold_plan(data, 3, 19);
  SUBCASE("label outside {-1,+1}") {
    Dataset bad = data;
    bad.rows[0].label = 3.0;
    CHECK_THROWS_AS(build_svm_cv(bad, plan, SvmBounds{}), InvalidInput);
  }
  SUBCASE("invalid bounds") {
    SvmBounds b;
    b.wbar_lb = 0.0;
    CHECK_THROWS_AS(build_svm_cv(data, plan, b), InvalidInput);
  }
  SUBCASE("plan mismatch") {
    Dataset shorter = data;
    shorter.rows.pop_back();
    CHECK_THROWS_AS(build_svm_cv(shorter, plan, SvmBounds{}), InvalidInput);
  }
}

TEST_CASE("post_process solves the rescaled full-data problem") {
  SUBCASE("separable fixture reaches zero hinge loss") {
    const Dataset data = tiny_dataset(
        2, {sample(1.0, {{1, 1.0}, {2, 1.0}}), sample(1.0, {{1, 0.8}, {2, 0.9}}),
            sample(-1.0, {{1, -1.0}, {2, -1.0}}), sample(-1.0, {{1, -0.9}, {2, -0.8}})});
    const Classifier clf = post_process(100.0, Vec::Constant(2, 1.5), data, 3);
    double loss = 0.0;
    for (const Sample& s : data.rows) {
      double dot = 0.0;
      for (const auto& [idx, val] : s.features) dot += val * clf.w[idx - 1];
      loss += hinge(s.label * (dot - clf.c));
    }
    CHECK(loss <= 1e-6);
    CHECK(test_error(clf, data) == 0.0);
  }
  SUBCASE("tiny wbar pins the weights") {
    const Dataset data = tiny_dataset(2, {sample(1.0, {{1, 1.0}}), sample(-1.0, {{1, -1.0}}),
                                          sample(1.0, {{2, 1.0}}), sample(-1.0, {{2, -1.0}})});
    const Classifier clf = post_process(1.0, Vec::Constant(2, 1e-6), data, 3);
    CHECK(clf.w.cwiseAbs().maxCoeff() <= 1e-6 + 1e-12);
  }
  SUBCASE("the T/(T-1) rescaling shows up in the optimum") {
    // two points at +-2: below the margin the optimum is w = 2/coef with
    // coef = T/(T-1)/(2 mu); for T = 3, mu = 0.1 that is w = 4/15
    const Dataset data =
        tiny_dataset(1, {sample(1.0, {{1, 2.0}}), sample(-1.0, {{1, -2.0}})});
    const Classifier clf = post_process(0.1, Vec::Constant(1, 1.5), data, 3);
    CHECK(clf.w[0] == doctest::Approx(4.0 / 15.0).epsilon(1e-5));
  }
  SUBCASE("input validation") {
    const Dataset data = tiny_dataset(1, {sample(1.0, {{1, 1.0}})});
    CHECK_THROWS_AS(post_process(0.0, Vec::Constant(1, 1.0), data, 3), InvalidInput);
    CHECK_THROWS_AS(post_process(1.0, Vec::Constant(1, 1.0), Dataset{}, 3),
                    InvalidInput);
  }
}

TEST_CASE("test_error counts misclassifications with sign(0) = +1") {
  const Dataset data = tiny_dataset(1, {sample(1.0, {{1, 1.0}}), sample(-1.0, {{1, -1.0}}),
                                        sample(1.0, {{1, 0.5}})});
  Classifier right{Vec::Constant(1, 1.0), 0.0};
  CHECK(test_error(right, data) == 0.0);
  Classifier flipped{Vec::Constant(1, -1.0), 0.0};
  CHECK(test_error(flipped, data) == 1.0);
  CHECK(test_error(right, data) + test_error(flipped, data) == 1.0);
  // the boundary case: a point exactly on the hyperplane counts as +1
  Classifier zero{Vec::Zero(1), 0.0};
  CHECK(test_error(zero, data) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(test_error(right, Dataset{}), InvalidInput);
}

TEST_CASE("lasso model evaluates objectives and derivatives") {
  const Dataset data = tiny_dataset(1, {sample(1.0, {{1, 1.0}}), sample(-1.0, {{1, -1.0}}),
                                        sample(1.0, {{1, 1.0}}), sample(-1.0, {{1, -1.0}})});
  const FoldPlan plan = fold_plan(data, 2, 5);
  const LassoCvModel m = build_lasso_cv(data, plan, 1e-3, 1e3);

  // w = 0, lambda = 1: each training residual contributes b^2 = 1
  Vec z = Vec::Zero(m.problem.dim());
  z[0] = 1.0;
  CHECK(m.problem.f.eval(z) == doctest::Approx(4.0));

  // derivative in lambda: -S / lambda^2, checked by finite differences
  z[0] = 2.0;
  z[1] = 0.3;
  z[2] = -0.1;
  const Vec g = m.problem.f.subgrad_at(z);
  const auto f = [&m](const Vec& p) { return m.problem.f.eval(p); };
  const Vec fd = oracle::fd_gradient(f, z, 1e-6);
  CHECK(std::abs(fd[0] - g[0]) <= 1e-7);

  // perfect fit: w^t = 1 reproduces every target
  Vec y(m.dim_y());
  y << 1.0, 1.0;
  CHECK(lasso_cv_error(y, m) <= 1e-12);
  Vec zfit(m.problem.dim());
  zfit << 1.0, y;
  CHECK(std::abs(lasso_cv_error(y, m) - m.problem.F1.eval(zfit)) <= 1e-10);
  CHECK_THROWS_AS(build_lasso_cv(data, plan, 0.0, 1.0), InvalidInput);
}

TEST_CASE("toy catalog matches its analytic facts") {
  SUBCASE("clamp value function") {
    const ToyInstance toy = build_toy("clamp");
    CHECK(toy.value_fn(Vec::Constant(1, 2.0)) == 1.0);
    const LowerSolution sol = solve_lower(toy.problem, Vec::Constant(1, 0.5));
    CHECK(sol.y[0] == doctest::Approx(0.5).epsilon(1e-7));  // S(0.5) = {0.5}
    // lower solve reproduces v on a few points
    for (double xv : {-1.0, 0.0, 0.7, 1.8}) {
      CHECK(solve_lower(toy.problem, Vec::Constant(1, xv)).value ==
            doctest::Approx(toy.value_fn(Vec::Constant(1, xv))).epsilon(1e-6));
    }
  }
  SUBCASE("quadratic toy tracks the interior optimum") {
    const ToyInstance toy = build_toy("quadratic");
    for (double xv : {-1.5, 0.0, 1.5}) {
      const LowerSolution sol = solve_lower(toy.problem, Vec::Constant(1, xv));
      CHECK(sol.y[0] == doctest::Approx(0.5 * xv).epsilon(1e-6));
      CHECK(std::abs(sol.value) <= 1e-8);
    }
  }
  SUBCASE("unknown id") { CHECK_THROWS_AS(build_toy("nope"), InvalidInput); }
}
