#include <doctest.h>

#include "bidca/data_io.hpp"
#include "bidca/ip.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace bidca;
namespace oracle = testing_oracles;

namespace {

SmoothConvexProgram quadratic_program(SpMat Q, Vec c, Box box) {
  SmoothConvexProgram p;
  p.dim = box.dim();
  p.objective = quadratic_fn(std::move(Q), std::move(c));
  p.box = std::move(box);
  return p;
}

SpMat identity(Eigen::Index n, double scale = 1.0) {
  SpMat Q(n, n);
  Q.setIdentity();
  return scale * Q;
}

void add_row(SmoothConvexProgram& p, const Vec& a, double b) {
  std::vector<Eigen::Triplet<double>> trips;
  const Eigen::Index r = p.A.rows();
  RowSpMat A(r + 1, p.dim);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (RowSpMat::InnerIterator it(p.A, i); it; ++it) {
      trips.emplace_back(static_cast<int>(i), static_cast<int>(it.col()), it.value());
    }
  }
  for (Eigen::Index j = 0; j < p.dim; ++j) {
    if (a[j] != 0.0) trips.emplace_back(static_cast<int>(r), static_cast<int>(j), a[j]);
  }
  A.setFromTriplets(trips.begin(), trips.end());
  p.A = std::move(A);
  Vec bb(r + 1);
  bb << p.b, b;
  p.b = std::move(bb);
}

}  // namespace

TEST_CASE("one-dimensional KKT by hand: min (z-1)^2 s.t. z <= 0.5") {
  SmoothConvexProgram p =
      quadratic_program(identity(1, 2.0), Vec::Constant(1, -2.0), Box::unbounded(1));
  p.b = Vec(0);
  add_row(p, Vec::Constant(1, 1.0), 0.5);
  const KktCertificate cert = ip_solve(p);
  CHECK(cert.primal[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(cert.row_duals[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(cert.max_residual() <= 1e-7);
}

TEST_CASE("interior optimum: min z^2 over [-1, 1]") {
  const SmoothConvexProgram p =
      quadratic_program(identity(1, 2.0), Vec::Zero(1), Box::uniform(1, -1.0, 1.0));
  const KktCertificate cert = ip_solve(p);
  CHECK(std::abs(cert.primal[0]) <= 1e-7);
  CHECK(cert.box_lower_duals.cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(cert.box_upper_duals.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("six-point SVM training QP matches the brute-force grid") {
  const Dataset data = oracle::six_point_fixture();
  const double mu = 1.0;
  const double wbar = 1.5;
  const Eigen::Index l = data.size();
  const Eigen::Index nvar = 2 + 1 + l;  // w, c, hinge slacks

  SmoothConvexProgram p;
  p.dim = nvar;
  SpMat Q(nvar, nvar);
  Q.insert(0, 0) = 1.0 / mu;
  Q.insert(1, 1) = 1.0 / mu;
  Vec lin = Vec::Zero(nvar);
  lin.tail(l).setOnes();
  p.objective = quadratic_fn(Q, lin);
  p.b = Vec(0);
  p.A.resize(0, nvar);
  for (Eigen::Index j = 0; j < l; ++j) {
    const Sample& s = data.rows[static_cast<size_t>(j)];
    Vec row = Vec::Zero(nvar);
    for (const auto& [idx, val] : s.features) row[idx - 1] = -s.label * val;
    row[2] = s.label;
    row[3 + j] = -1.0;
    add_row(p, row, -1.0);
  }
  Vec lo = Vec::Zero(nvar), hi = Vec::Constant(nvar, kInf);
  lo.head(2).setConstant(-wbar);
  hi.head(2).setConstant(wbar);
  lo[2] = -kInf;
  const Box box = Box::bounds(lo, hi);
  p.box = box;

  const KktCertificate cert = ip_solve(p);
  CHECK(cert.max_residual() <= 1e-7);

  // grid oracle: w on a 1e-3 lattice, the offset minimized exactly
  Vec best_w(2);
  double best_val = kInf, best_c = 0.0;
  const Eigen::Index steps = 3001;
  for (Eigen::Index iw = 0; iw < steps; ++iw) {
    for (Eigen::Index jw = 0; jw < steps; ++jw) {
      Vec w(2);
      w[0] = -wbar + 1e-3 * static_cast<double>(iw);
      w[1] = -wbar + 1e-3 * static_cast<double>(jw);
      double c = 0.0;
      const double v = oracle::svm_primal_best_c(data, w, mu, &c);
      if (v < best_val) {
        best_val = v;
        best_w = w;
        best_c = c;
      }
    }
  }
  CHECK(std::abs(cert.primal[0] - best_w[0]) <= 1e-2);
  CHECK(std::abs(cert.primal[1] - best_w[1]) <= 1e-2);
  CHECK(std::abs(cert.primal[2] - best_c) <= 2e-2);
  CHECK(cert.objective <= best_val + 1e-6);

  // dual correctness: relaxing an active upper bound by delta must move the
  // optimal value by -dual * delta
  const double delta = 1e-5;
  for (Eigen::Index i = 0; i < 2; ++i) {
    SmoothConvexProgram pp = p;
    Vec hi2 = box.hi;
    hi2[i] += delta;
    pp.box = Box::bounds(box.lo, hi2);
    const KktCertificate pert = ip_solve(pp);
    const double slope = (pert.objective - cert.objective) / delta;
    CHECK(std::abs(slope + cert.box_upper_duals[i]) <= 1e-3);
  }
}

TEST_CASE("agrees with projected gradient on random box QPs") {
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.next_below(4));
    // diagonal-dominant PSD quadratic
    Eigen::MatrixXd M(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) M(i, j) = rng.uniform(-0.3, 0.3);
    }
    Eigen::MatrixXd Qd = M.transpose() * M + Eigen::MatrixXd::Identity(d, d);
    Vec c(d);
    for (Eigen::Index i = 0; i < d; ++i) c[i] = rng.uniform(-2.0, 2.0);
    Vec lo(d), hi(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double a = rng.uniform(-1.5, 1.5), b = rng.uniform(-1.5, 1.5);
      lo[i] = std::min(a, b);
      hi[i] = std::max(a, b);
    }
    const Box box = Box::bounds(lo, hi);
    const SmoothConvexProgram p = quadratic_program(Qd.sparseView(), c, box);
    const KktCertificate cert = ip_solve(p);

    const auto f = [&](const Vec& z) { return 0.5 * z.dot(Qd * z) + c.dot(z); };
    const auto g = [&](const Vec& z) { return Vec(Qd * z + c); };
    const double L = Qd.operatorNorm();
    const Vec ref = oracle::projected_gradient(f, g, box, Vec::Zero(d), 1.0 / L);
    CHECK((cert.primal - ref).norm() <= 1e-6);
  }
}

TEST_CASE("complementarity products stay below tolerance") {
  Rng rng(32);
  for (int rep = 0; rep < 5; ++rep) {
    const Eigen::Index d = 3;
    SmoothConvexProgram p = quadratic_program(identity(d), Vec::Constant(d, -1.0),
                                              Box::uniform(d, -2.0, 0.8));
    p.b = Vec(0);
    Vec a(d);
    for (Eigen::Index i = 0; i < d; ++i) a[i] = rng.uniform(0.2, 1.0);
    add_row(p, a, rng.uniform(0.5, 1.5));
    const KktCertificate cert = ip_solve(p);
    const double scale = 1.0 + p.b.cwiseAbs().maxCoeff();
    CHECK(cert.row_duals.minCoeff() >= 0.0);
    CHECK(cert.complementarity_residual <= 1e-8 * scale);
    const double slack = p.b[0] - a.dot(cert.primal);
    CHECK(cert.row_duals[0] * slack <= 1e-8 * scale);
  }
}

TEST_CASE("merit is non-increasing over five-step windows") {
  const Dataset data = oracle::six_point_fixture();
  SmoothConvexProgram p;
  const Eigen::Index l = data.size();
  p.dim = 3 + l;
  SpMat Q(p.dim, p.dim);
  Q.insert(0, 0) = 0.5;
  Q.insert(1, 1) = 0.5;
  Vec lin = Vec::Zero(p.dim);
  lin.tail(l).setOnes();
  p.objective = quadratic_fn(Q, lin);
  p.b = Vec(0);
  p.A.resize(0, p.dim);
  for (Eigen::Index j = 0; j < l; ++j) {
    const Sample& s = data.rows[static_cast<size_t>(j)];
    Vec row = Vec::Zero(p.dim);
    for (const auto& [idx, val] : s.features) row[idx - 1] = -s.label * val;
    row[2] = s.label;
    row[3 + j] = -1.0;
    add_row(p, row, -1.0);
  }
  Vec lo = Vec::Zero(p.dim), hi = Vec::Constant(p.dim, kInf);
  lo.head(3).setConstant(-kInf);
  p.box = Box::bounds(lo, hi);

  const KktCertificate cert = ip_solve(p);
  REQUIRE(cert.merit_history.size() >= 5);
  for (size_t k = 4; k < cert.merit_history.size(); ++k) {
    CHECK(cert.merit_history[k] <=
          cert.merit_history[k - 4] * (1.0 + 1e-9) + 1e-12);
  }
}

TEST_CASE("solver failure modes") {
  SUBCASE("iteration cap") {
    SmoothConvexProgram p = quadratic_program(identity(2), Vec::Constant(2, -1.0),
                                              Box::uniform(2, -1.0, 1.0));
    IpOptions opts;
    opts.max_iter = 1;
    CHECK_THROWS_AS(ip_solve(p, opts), MaxIterationsError);
  }
  SUBCASE("empty box") {
    SmoothConvexProgram p = quadratic_program(identity(1), Vec::Zero(1),
                                              Box::uniform(1, 0.0, 1.0));
    p.box.lo[0] = 2.0;  // bypass the Box validator on purpose
    CHECK_THROWS_AS(ip_solve(p), InfeasibleError);
  }
  SUBCASE("bad tolerance") {
    SmoothConvexProgram p = quadratic_program(identity(1), Vec::Zero(1),
                                              Box::uniform(1, -1.0, 1.0));
    IpOptions opts;
    opts.tol = 0.0;
    CHECK_THROWS_AS(ip_solve(p, opts), InvalidInput);
  }
}

TEST_CASE("warm start stays inside the box and converges") {
  SmoothConvexProgram p = quadratic_program(identity(3, 2.0), Vec::Constant(3, 1.0),
                                            Box::uniform(3, -0.2, 0.2));
  IpOptions opts;
  opts.start = Vec::Constant(3, -5.0);
  const KktCertificate cert = ip_solve(p, opts);
  CHECK((cert.primal - Vec::Constant(3, -0.2)).norm() <= 1e-6);
}
