#include "bidca/models.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace bidca {

namespace {

using Triplet = Eigen::Triplet<double>;

struct SvmLayout {
  Eigen::Index n = 0;
  int T = 0;
  Eigen::Index mu() const { return 0; }
  Eigen::Index wbar(Eigen::Index i) const { return 1 + i; }
  Eigen::Index w(int t, Eigen::Index i) const {
    return 1 + n + static_cast<Eigen::Index>(t) * n + i;
  }
  Eigen::Index c(int t) const {
    return 1 + n + n * static_cast<Eigen::Index>(T) + static_cast<Eigen::Index>(t);
  }
  Eigen::Index dim() const { return 1 + n + (n + 1) * static_cast<Eigen::Index>(T); }
};

/// sum_t ||w^t||^2 / (2 mu), jointly convex for mu > 0.
SmoothFn perspective_term(SvmLayout ly) {
  SmoothFn f;
  f.value = [ly](const Vec& z) {
    const double mu = z[ly.mu()];
    if (mu <= 0.0) throw InvalidInput("perspective term requires mu > 0");
    double s = 0.0;
    for (int t = 0; t < ly.T; ++t) {
      s += z.segment(ly.w(t, 0), ly.n).squaredNorm();
    }
    return s / (2.0 * mu);
  };
  f.grad = [ly](const Vec& z) {
    const double mu = z[ly.mu()];
    if (mu <= 0.0) throw InvalidInput("perspective term requires mu > 0");
    Vec g = Vec::Zero(z.size());
    double s = 0.0;
    for (int t = 0; t < ly.T; ++t) {
      const auto wt = z.segment(ly.w(t, 0), ly.n);
      s += wt.squaredNorm();
      g.segment(ly.w(t, 0), ly.n) = wt / mu;
    }
    g[ly.mu()] = -s / (2.0 * mu * mu);
    return g;
  };
  f.hess = [ly](const Vec& z) {
    const double mu = z[ly.mu()];
    if (mu <= 0.0) throw InvalidInput("perspective term requires mu > 0");
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(ly.n) * static_cast<size_t>(ly.T) * 3 + 1);
    double s = 0.0;
    const int imu = static_cast<int>(ly.mu());
    for (int t = 0; t < ly.T; ++t) {
      for (Eigen::Index i = 0; i < ly.n; ++i) {
        const double wi = z[ly.w(t, i)];
        const int iw = static_cast<int>(ly.w(t, i));
        s += wi * wi;
        trips.emplace_back(iw, iw, 1.0 / mu);
        if (wi != 0.0) {
          trips.emplace_back(imu, iw, -wi / (mu * mu));
          trips.emplace_back(iw, imu, -wi / (mu * mu));
        }
      }
    }
    trips.emplace_back(imu, imu, s / (mu * mu * mu));
    SpMat H(z.size(), z.size());
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
  };
  return f;
}

AffineFn margin_arg(const SvmLayout& ly, const Dataset& data, Eigen::Index row, int t) {
  // 1 - b_j (a_j' w^t - c_t)
  const Sample& s = data.rows[static_cast<size_t>(row)];
  AffineFn arg = AffineFn::zero(ly.dim());
  for (const auto& [idx, val] : s.features) {
    arg.a.insert(ly.w(t, idx - 1)) = -s.label * val;
  }
  arg.a.insert(ly.c(t)) = s.label;
  arg.b = 1.0;
  return arg;
}

void validate_plan(const Dataset& train, const FoldPlan& plan) {
  if (static_cast<Eigen::Index>(plan.assignment.size()) != train.size()) {
    throw InvalidInput("fold plan does not cover the training set");
  }
  if (plan.T < 2) throw InvalidInput("need at least two folds");
  for (int t = 0; t < plan.T; ++t) {
    const Eigen::Index sz = plan.fold_size(t);
    if (sz == 0) throw InvalidInput("empty validation fold");
    if (sz == train.size()) throw InvalidInput("empty training fold");
  }
}

}  // namespace

Vec SvmCvModel::start_x() const {
  Vec x(dim_x());
  x[0] = std::clamp(1.0, bounds.mu_lo(), bounds.mu_hi());
  x.tail(n).setConstant(std::clamp(0.1, bounds.wbar_lb, bounds.wbar_ub));
  return x;
}

Vec SvmCvModel::start_y() const { return Vec::Zero(dim_y()); }

SvmCvModel build_svm_cv(const Dataset& train, const FoldPlan& plan,
                        const SvmBounds& bounds) {
  if (train.size() == 0) throw InvalidInput("build_svm_cv: empty training set");
  if (train.n == 0) throw InvalidInput("build_svm_cv: no features");
  for (const Sample& s : train.rows) {
    if (s.label != 1.0 && s.label != -1.0) {
      throw InvalidInput("build_svm_cv: labels must be -1 or +1");
    }
  }
  if (!(bounds.wbar_ub >= bounds.wbar_lb && bounds.wbar_lb > 0.0)) {
    throw InvalidInput("build_svm_cv: need wbar_ub >= wbar_lb > 0");
  }
  if (!(bounds.lambda_lb > 0.0 && bounds.lambda_ub > bounds.lambda_lb)) {
    throw InvalidInput("build_svm_cv: need 0 < lambda_lb < lambda_ub");
  }
  validate_plan(train, plan);

  SvmCvModel m;
  m.train = train;
  m.folds = plan;
  m.bounds = bounds;
  m.n = train.n;
  m.T = plan.T;

  SvmLayout ly{m.n, m.T};
  BilevelProblem& p = m.problem;
  p.dim_x = m.dim_x();
  p.dim_y = m.dim_y();

  // Upper objective: mean validation hinge loss over folds.
  p.F1.dim = ly.dim();
  p.F1.linear = AffineFn::zero(ly.dim());
  for (Eigen::Index j = 0; j < train.size(); ++j) {
    const int t = plan.assignment[static_cast<size_t>(j)];
    const double weight =
        1.0 / (static_cast<double>(plan.T) * static_cast<double>(plan.fold_size(t)));
    p.F1.hinges.push_back({margin_arg(ly, train, j, t), weight});
  }
  p.F2 = zero_oracle(ly.dim());

  // Lower objective: perspective term plus the training hinges of every fold.
  p.f.dim = ly.dim();
  p.f.linear = AffineFn::zero(ly.dim());
  p.f.smooth = perspective_term(ly);
  for (Eigen::Index j = 0; j < train.size(); ++j) {
    const int home = plan.assignment[static_cast<size_t>(j)];
    for (int t = 0; t < plan.T; ++t) {
      if (t == home) continue;
      p.f.hinges.push_back({margin_arg(ly, train, j, t), 1.0});
    }
  }
  p.f_smooth_modulus = -1.0;

  // -wbar <= w^t <= wbar, one row per side and coordinate.
  for (int t = 0; t < plan.T; ++t) {
    for (Eigen::Index i = 0; i < m.n; ++i) {
      AffineFn lo = AffineFn::zero(ly.dim());
      lo.a.insert(ly.wbar(i)) = -1.0;
      lo.a.insert(ly.w(t, i)) = -1.0;
      p.g.push_back(lo);
    }
    for (Eigen::Index i = 0; i < m.n; ++i) {
      AffineFn hi = AffineFn::zero(ly.dim());
      hi.a.insert(ly.w(t, i)) = 1.0;
      hi.a.insert(ly.wbar(i)) = -1.0;
      p.g.push_back(hi);
    }
  }

  Vec xlo(m.dim_x()), xhi(m.dim_x());
  xlo[0] = bounds.mu_lo();
  xhi[0] = bounds.mu_hi();
  xlo.tail(m.n).setConstant(bounds.wbar_lb);
  xhi.tail(m.n).setConstant(bounds.wbar_ub);
  p.X = Box::bounds(xlo, xhi);
  p.Y = Box::unbounded(m.dim_y());
  p.attestation = PartialFormula::smooth_plus_x_independent;
  return m;
}

double cv_error(const Vec& y, const SvmCvModel& m) {
  if (y.size() != m.dim_y()) throw DimensionError("cv_error: y dimension mismatch");
  double total = 0.0;
  for (int t = 0; t < m.T; ++t) {
    const auto wt = y.segment(m.w_offset(t), m.n);
    const double ct = y[m.c_offset(t)];
    double fold = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index j = 0; j < m.train.size(); ++j) {
      if (m.folds.assignment[static_cast<size_t>(j)] != t) continue;
      const Sample& s = m.train.rows[static_cast<size_t>(j)];
      double dot = 0.0;
      for (const auto& [idx, val] : s.features) dot += val * wt[idx - 1];
      fold += hinge(s.label * (dot - ct));
      ++count;
    }
    total += fold / static_cast<double>(count);
  }
  return total / static_cast<double>(m.T);
}

Classifier post_process(double mu_hat, const Vec& wbar_hat, const Dataset& omega,
                        int T) {
  if (mu_hat <= 0.0) throw InvalidInput("post_process: mu must be positive");
  if (T < 2) throw InvalidInput("post_process: need T >= 2");
  if (omega.size() == 0) throw InvalidInput("post_process: empty training set");
  if (wbar_hat.size() != omega.n) {
    throw DimensionError("post_process: wbar dimension mismatch");
  }
  const Eigen::Index n = omega.n;
  const Eigen::Index l = omega.size();
  const Eigen::Index nvar = n + 1 + l;  // w, c, hinge slacks
  const double coef =
      static_cast<double>(T) / (static_cast<double>(T - 1) * 2.0 * mu_hat);

  std::vector<Triplet> qt;
  for (Eigen::Index i = 0; i < n; ++i) {
    qt.emplace_back(static_cast<int>(i), static_cast<int>(i), 2.0 * coef);
  }
  SpMat Q(nvar, nvar);
  Q.setFromTriplets(qt.begin(), qt.end());
  Vec lin = Vec::Zero(nvar);
  lin.tail(l).setOnes();

  SmoothConvexProgram prog;
  prog.dim = nvar;
  prog.objective = quadratic_fn(std::move(Q), std::move(lin));
  std::vector<Triplet> at;
  Vec b(l);
  for (Eigen::Index j = 0; j < l; ++j) {
    const Sample& s = omega.rows[static_cast<size_t>(j)];
    for (const auto& [idx, val] : s.features) {
      at.emplace_back(static_cast<int>(j), static_cast<int>(idx - 1), -s.label * val);
    }
    at.emplace_back(static_cast<int>(j), static_cast<int>(n), s.label);
    at.emplace_back(static_cast<int>(j), static_cast<int>(n + 1 + j), -1.0);
    b[j] = -1.0;
  }
  prog.A.resize(l, nvar);
  prog.A.setFromTriplets(at.begin(), at.end());
  prog.b = b;

  Vec lo(nvar), hi(nvar);
  lo.head(n) = -wbar_hat;
  hi.head(n) = wbar_hat;
  lo[n] = -kInf;
  hi[n] = kInf;
  lo.tail(l).setZero();
  hi.tail(l).setConstant(kInf);
  prog.box = Box::bounds(std::move(lo), std::move(hi));

  IpOptions opts;
  opts.tol = 1e-8;
  KktCertificate cert = ip_solve(prog, opts);

  Classifier clf;
  clf.w = cert.primal.head(n).cwiseMax(-wbar_hat).cwiseMin(wbar_hat);
  clf.c = cert.primal[n];
  return clf;
}

double test_error(const Classifier& clf, const Dataset& test) {
  if (test.size() == 0) throw InvalidInput("test_error: empty test set");
  Eigen::Index wrong = 0;
  for (const Sample& s : test.rows) {
    double dot = 0.0;
    for (const auto& [idx, val] : s.features) {
      if (idx - 1 < clf.w.size()) dot += val * clf.w[idx - 1];
    }
    const double pred = dot - clf.c >= 0.0 ? 1.0 : -1.0;  // sign(0) = +1
    if (pred != s.label) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(test.size());
}

namespace {

/// 0.5 y'Qy + q'y + c0 accumulated from squared residuals (a'w - b)^2.
struct QuadAccum {
  std::vector<Triplet> trips;
  Vec q;
  double c0 = 0.0;

  explicit QuadAccum(Eigen::Index dim) : q(Vec::Zero(dim)) {}
  void add_residual_sq(const Sample& s, Eigen::Index offset, double weight) {
    for (const auto& [i1, v1] : s.features) {
      for (const auto& [i2, v2] : s.features) {
        trips.emplace_back(static_cast<int>(offset + i1 - 1),
                           static_cast<int>(offset + i2 - 1), 2.0 * weight * v1 * v2);
      }
      q[offset + i1 - 1] += -2.0 * weight * s.label * v1;
    }
    c0 += weight * s.label * s.label;
  }
  SpMat matrix(Eigen::Index dim) const {
    SpMat Q(dim, dim);
    Q.setFromTriplets(trips.begin(), trips.end());
    return Q;
  }
};

/// S(y)/lambda with S a nonnegative quadratic; jointly convex on lambda > 0.
SmoothFn residual_perspective(SpMat Qs, Vec qs, double cs, Eigen::Index dim_y) {
  auto Q = std::make_shared<SpMat>(std::move(Qs));
  auto q = std::make_shared<Vec>(std::move(qs));
  const Eigen::Index dim = 1 + dim_y;
  SmoothFn f;
  const auto s_of = [Q, q, cs](const Vec& y) {
    return std::max(0.5 * y.dot(*Q * y) + q->dot(y) + cs, 0.0);
  };
  f.value = [s_of, dim_y](const Vec& z) {
    const double lam = z[0];
    if (lam <= 0.0) throw InvalidInput("residual perspective requires lambda > 0");
    return s_of(z.tail(dim_y)) / lam;
  };
  f.grad = [Q, q, s_of, dim_y](const Vec& z) {
    const double lam = z[0];
    if (lam <= 0.0) throw InvalidInput("residual perspective requires lambda > 0");
    const Vec y = z.tail(dim_y);
    Vec g(1 + dim_y);
    g[0] = -s_of(y) / (lam * lam);
    g.tail(dim_y) = (*Q * y + *q) / lam;
    return g;
  };
  f.hess = [Q, q, s_of, dim_y, dim](const Vec& z) {
    const double lam = z[0];
    if (lam <= 0.0) throw InvalidInput("residual perspective requires lambda > 0");
    const Vec y = z.tail(dim_y);
    const Vec gy = *Q * y + *q;
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(Q->nonZeros()) + 2 * static_cast<size_t>(dim_y) + 1);
    trips.emplace_back(0, 0, 2.0 * s_of(y) / (lam * lam * lam));
    for (Eigen::Index i = 0; i < dim_y; ++i) {
      if (gy[i] != 0.0) {
        trips.emplace_back(0, static_cast<int>(1 + i), -gy[i] / (lam * lam));
        trips.emplace_back(static_cast<int>(1 + i), 0, -gy[i] / (lam * lam));
      }
    }
    for (Eigen::Index k = 0; k < Q->outerSize(); ++k) {
      for (SpMat::InnerIterator it(*Q, k); it; ++it) {
        trips.emplace_back(static_cast<int>(1 + it.row()), static_cast<int>(1 + it.col()),
                           it.value() / lam);
      }
    }
    SpMat H(dim, dim);
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
  };
  return f;
}

}  // namespace

Vec LassoCvModel::start_x() const {
  return Vec::Constant(1, std::clamp(1.0, lambda_lo, lambda_hi));
}

Vec LassoCvModel::start_y() const { return Vec::Zero(dim_y()); }

LassoCvModel build_lasso_cv(const Dataset& train, const FoldPlan& plan,
                            double lambda_lo, double lambda_hi) {
  if (train.size() == 0) throw InvalidInput("build_lasso_cv: empty training set");
  if (train.n == 0) throw InvalidInput("build_lasso_cv: no features");
  if (!(lambda_lo > 0.0 && lambda_hi >= lambda_lo)) {
    throw InvalidInput("build_lasso_cv: lambda box must lie strictly above zero");
  }
  validate_plan(train, plan);

  LassoCvModel m;
  m.train = train;
  m.folds = plan;
  m.lambda_lo = lambda_lo;
  m.lambda_hi = lambda_hi;
  m.n = train.n;
  m.T = plan.T;

  const Eigen::Index dim = 1 + m.dim_y();
  BilevelProblem& p = m.problem;
  p.dim_x = 1;
  p.dim_y = m.dim_y();

  // Upper objective: mean squared validation error, a plain quadratic in y.
  QuadAccum upper(dim);
  QuadAccum lower(m.dim_y());
  for (Eigen::Index j = 0; j < train.size(); ++j) {
    const Sample& s = train.rows[static_cast<size_t>(j)];
    const int home = plan.assignment[static_cast<size_t>(j)];
    const double wv = 1.0 / (static_cast<double>(plan.T) *
                             static_cast<double>(plan.fold_size(home)));
    upper.add_residual_sq(s, 1 + m.w_offset(home), wv);
    for (int t = 0; t < plan.T; ++t) {
      if (t == home) continue;
      lower.add_residual_sq(s, m.w_offset(t), 1.0);
    }
  }
  p.F1.dim = dim;
  p.F1.linear = AffineFn::zero(dim);
  p.F1.smooth = quadratic_fn(upper.matrix(dim), upper.q, upper.c0);
  p.F2 = zero_oracle(dim);

  p.f.dim = dim;
  p.f.linear = AffineFn::zero(dim);
  p.f.smooth = residual_perspective(lower.matrix(m.dim_y()), lower.q, lower.c0,
                                    m.dim_y());
  for (Eigen::Index i = 0; i < m.dim_y(); ++i) {
    AffineFn pos = AffineFn::zero(dim);
    pos.a.insert(1 + i) = 1.0;
    p.f.hinges.push_back({pos, 1.0});
    AffineFn neg = AffineFn::zero(dim);
    neg.a.insert(1 + i) = -1.0;
    p.f.hinges.push_back({neg, 1.0});
  }
  p.f_smooth_modulus = -1.0;

  p.X = Box::uniform(1, lambda_lo, lambda_hi);
  p.Y = Box::unbounded(m.dim_y());
  p.attestation = PartialFormula::smooth_plus_x_independent;
  return m;
}

double lasso_cv_error(const Vec& y, const LassoCvModel& m) {
  if (y.size() != m.dim_y()) {
    throw DimensionError("lasso_cv_error: y dimension mismatch");
  }
  double total = 0.0;
  for (int t = 0; t < m.T; ++t) {
    const auto wt = y.segment(m.w_offset(t), m.n);
    double fold = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index j = 0; j < m.train.size(); ++j) {
      if (m.folds.assignment[static_cast<size_t>(j)] != t) continue;
      const Sample& s = m.train.rows[static_cast<size_t>(j)];
      double dot = 0.0;
      for (const auto& [idx, val] : s.features) dot += val * wt[idx - 1];
      const double r = dot - s.label;
      fold += r * r;
      ++count;
    }
    total += fold / static_cast<double>(count);
  }
  return total / static_cast<double>(m.T);
}

namespace {

SpMat dense2(double a11, double a12, double a22) {
  std::vector<Triplet> t;
  if (a11 != 0.0) t.emplace_back(0, 0, a11);
  if (a12 != 0.0) {
    t.emplace_back(0, 1, a12);
    t.emplace_back(1, 0, a12);
  }
  if (a22 != 0.0) t.emplace_back(1, 1, a22);
  SpMat m(2, 2);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

ConvexStructure quadratic_structure(SpMat Q, Vec q, double c0) {
  ConvexStructure s;
  s.dim = Q.rows();
  s.linear = AffineFn::zero(s.dim);
  s.smooth = quadratic_fn(std::move(Q), std::move(q), c0);
  return s;
}

}  // namespace

ToyInstance build_toy(const std::string& id) {
  ToyInstance toy;
  toy.id = id;
  BilevelProblem& p = toy.problem;
  p.dim_x = 1;
  p.dim_y = 1;
  p.F2 = zero_oracle(2);
  p.attestation = PartialFormula::fully_smooth;

  if (id == "clamp") {
    // F = (x-1)^2 + (y-1)^2, lower level min_{y in [0,1]} (y-x)^2.
    p.F1 = quadratic_structure(dense2(2, 0, 2), (Vec(2) << -2, -2).finished(), 2.0);
    p.f = quadratic_structure(dense2(2, -2, 2), Vec::Zero(2), 0.0);
    p.f_smooth_modulus = 4.0;
    p.X = Box::uniform(1, -2.0, 2.0);
    p.Y = Box::uniform(1, 0.0, 1.0);
    toy.x0 = Vec::Constant(1, -1.5);
    toy.y0 = Vec::Constant(1, 0.5);
    toy.x_star = Vec::Constant(1, 1.0);
    toy.y_star = Vec::Constant(1, 1.0);
    toy.objective_star = 0.0;
    toy.value_fn = [](const Vec& x) {
      const double a = std::max(x[0] - 1.0, 0.0);
      const double b = std::max(-x[0], 0.0);
      return a * a + b * b;
    };
    return toy;
  }
  if (id == "quadratic") {
    // F = (x-1)^2 + (y-0.5)^2, lower level min_{y in [-1,1]} (y-0.5x)^2;
    // the unconstrained tracker stays interior, so v = 0 on X.
    p.F1 = quadratic_structure(dense2(2, 0, 2), (Vec(2) << -2, -1).finished(), 1.25);
    p.f = quadratic_structure(dense2(0.5, -1, 2), Vec::Zero(2), 0.0);
    p.f_smooth_modulus = 2.5;
    p.X = Box::uniform(1, -2.0, 2.0);
    p.Y = Box::uniform(1, -1.0, 1.0);
    toy.x0 = Vec::Constant(1, -1.0);
    toy.y0 = Vec::Constant(1, -0.5);
    toy.x_star = Vec::Constant(1, 1.0);
    toy.y_star = Vec::Constant(1, 0.5);
    toy.objective_star = 0.0;
    toy.value_fn = [](const Vec&) { return 0.0; };
    return toy;
  }
  if (id == "offset") {
    // F = x^2 + (y-1)^2, lower level min_y (y-2)^2 s.t. y <= x; the
    // constraint is active on all of X, so the multiplier is never zero.
    p.F1 = quadratic_structure(dense2(2, 0, 2), (Vec(2) << 0, -2).finished(), 1.0);
    p.f = quadratic_structure(dense2(0, 0, 2), (Vec(2) << 0, -4).finished(), 4.0);
    p.f_smooth_modulus = 2.0;
    AffineFn row = AffineFn::zero(2);
    row.a.insert(0) = -1.0;
    row.a.insert(1) = 1.0;
    p.g.push_back(row);
    p.X = Box::uniform(1, -1.0, 1.5);
    p.Y = Box::uniform(1, -10.0, 10.0);
    toy.x0 = Vec::Constant(1, 1.0);
    toy.y0 = Vec::Constant(1, 0.0);
    toy.x_star = Vec::Constant(1, 0.5);
    toy.y_star = Vec::Constant(1, 0.5);
    toy.objective_star = 0.5;
    toy.value_fn = [](const Vec& x) { return (x[0] - 2.0) * (x[0] - 2.0); };
    return toy;
  }
  throw InvalidInput("build_toy: unknown toy id '" + id + "'");
}

}  // namespace bidca
