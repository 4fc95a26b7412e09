#include "bidca/verify.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

namespace bidca::verify {

namespace {

Vec random_in_box(Rng& rng, const Box& box, double fallback = 2.0) {
  Vec z(box.dim());
  for (Eigen::Index i = 0; i < box.dim(); ++i) {
    const double lo = std::isfinite(box.lo[i]) ? box.lo[i] : -fallback;
    const double hi = std::isfinite(box.hi[i]) ? box.hi[i] : fallback;
    z[i] = rng.uniform(lo, hi);
  }
  return z;
}

bool check_projection(std::string& detail) {
  Rng rng(11, 7);
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.next_below(6));
    Vec lo(d), hi(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double a = rng.uniform(-2.0, 2.0);
      const double b = rng.uniform(-2.0, 2.0);
      lo[i] = std::min(a, b);
      hi[i] = std::max(a, b);
    }
    const Box box = Box::bounds(lo, hi);
    Vec z1(d), z2(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      z1[i] = rng.uniform(-5.0, 5.0);
      z2[i] = rng.uniform(-5.0, 5.0);
    }
    const Vec p1 = project_box(z1, box);
    const Vec p2 = project_box(z2, box);
    if ((project_box(p1, box) - p1).norm() > 0.0) {
      detail = "projection not idempotent";
      return false;
    }
    if ((p1 - p2).norm() > (z1 - z2).norm() + 1e-12) {
      detail = "projection not nonexpansive";
      return false;
    }
  }
  return true;
}

bool check_hinge_convexity(std::string& detail) {
  Rng rng(12, 7);
  for (int rep = 0; rep < 1000; ++rep) {
    const double u = rng.uniform(-4.0, 4.0);
    const double v = rng.uniform(-4.0, 4.0);
    if (hinge(0.5 * (u + v)) > 0.5 * (hinge(u) + hinge(v)) + 1e-12) {
      detail = "midpoint inequality violated";
      return false;
    }
  }
  return true;
}

bool oracle_subgrad_sweep(const ConvexOracle& f, const Box& domain, uint64_t seed,
                          int pairs, double tol, std::string& detail) {
  Rng rng(seed, 3);
  for (int rep = 0; rep < pairs; ++rep) {
    const Vec z = random_in_box(rng, domain);
    const Vec probe = random_in_box(rng, domain);
    const Vec xi = f.subgrad_at(z);
    if (!subgrad_check(f, z, xi, {probe}, tol)) {
      std::ostringstream oss;
      oss << "subgradient inequality violated at pair " << rep;
      detail = oss.str();
      return false;
    }
  }
  return true;
}

bool check_model_oracles(std::string& detail) {
  for (const char* id : {"clamp", "quadratic", "offset"}) {
    const ToyInstance toy = build_toy(id);
    const Box dom = toy.problem.X.stacked(toy.problem.Y);
    if (!oracle_subgrad_sweep(toy.problem.F1.oracle(), dom, 101, 100, 1e-9, detail) ||
        !oracle_subgrad_sweep(toy.problem.f.oracle(), dom, 102, 100, 1e-9, detail)) {
      detail = std::string(id) + ": " + detail;
      return false;
    }
  }
  const Dataset data = synthetic_classification(24, 3, 5);
  const FoldPlan plan = fold_plan(data, 3, 5);
  const SvmCvModel svm = build_svm_cv(data, plan, SvmBounds{});
  const Box dom = svm.problem.X.stacked(Box::uniform(svm.dim_y(), -1.0, 1.0));
  if (!oracle_subgrad_sweep(svm.problem.F1.oracle(), dom, 103, 100, 1e-9, detail) ||
      !oracle_subgrad_sweep(svm.problem.f.oracle(), dom, 104, 100, 1e-9, detail)) {
    detail = "svm: " + detail;
    return false;
  }
  const LassoCvModel lasso = build_lasso_cv(data, plan, 1e-2, 1e2);
  const Box ldom = lasso.problem.X.stacked(Box::uniform(lasso.dim_y(), -1.0, 1.0));
  if (!oracle_subgrad_sweep(lasso.problem.F1.oracle(), ldom, 105, 100, 1e-9, detail) ||
      !oracle_subgrad_sweep(lasso.problem.f.oracle(), ldom, 106, 100, 1e-9, detail)) {
    detail = "lasso: " + detail;
    return false;
  }
  return true;
}

/// The checker itself must catch a deliberately corrupted oracle.
bool check_planted_fault(std::string& detail) {
  const ToyInstance toy = build_toy("clamp");
  const ConvexOracle f = toy.problem.f.oracle();
  Rng rng(13, 3);
  const Box dom = toy.problem.X.stacked(toy.problem.Y);
  int caught = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const Vec z = random_in_box(rng, dom);
    const Vec probe = random_in_box(rng, dom);
    const Vec xi = 2.0 * f.subgrad_at(z) + Vec::Constant(2, 0.3);
    if (!subgrad_check(f, z, xi, {probe}, 1e-9)) ++caught;
  }
  if (caught == 0) {
    detail = "scaled subgradient fixture was never rejected";
    return false;
  }
  return true;
}

bool check_dual_sensitivity(std::string& detail) {
  // min 0.5||z - z0||^2 s.t. a'z <= b: perturbing b by delta moves the
  // optimal value by -dual * delta + o(delta).
  Rng rng(14, 3);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.next_below(3));
    Vec z0(d), a(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      z0[i] = rng.uniform(-1.0, 1.0);
      a[i] = rng.uniform(-1.0, 1.0);
    }
    if (a.norm() < 0.3) continue;
    const double b = a.dot(z0) - rng.uniform(0.2, 1.0);  // active at optimum

    const auto solve_val = [&](double rhs) {
      SmoothConvexProgram prog;
      prog.dim = d;
      SpMat Q(d, d);
      Q.setIdentity();
      prog.objective = quadratic_fn(Q, -z0, 0.5 * z0.squaredNorm());
      std::vector<Eigen::Triplet<double>> t;
      for (Eigen::Index i = 0; i < d; ++i) {
        if (a[i] != 0.0) t.emplace_back(0, static_cast<int>(i), a[i]);
      }
      prog.A.resize(1, d);
      prog.A.setFromTriplets(t.begin(), t.end());
      prog.b = Vec::Constant(1, rhs);
      prog.box = Box::unbounded(d);
      return ip_solve(prog, IpOptions{});
    };

    const KktCertificate base = solve_val(b);
    const double delta = 1e-5;
    const KktCertificate up = solve_val(b + delta);
    const double drop = (up.objective - base.objective) / delta;
    if (std::abs(drop + base.row_duals[0]) > 1e-3) {
      std::ostringstream oss;
      oss << "dual " << base.row_duals[0] << " vs finite-difference slope " << -drop;
      detail = oss.str();
      return false;
    }
  }
  return true;
}

bool check_value_function(std::string& detail) {
  for (const char* id : {"clamp", "offset"}) {
    const ToyInstance toy = build_toy(id);
    Rng rng(15, 3);
    for (int rep = 0; rep < 50; ++rep) {
      const Vec x1 = random_in_box(rng, toy.problem.X);
      const Vec x2 = random_in_box(rng, toy.problem.X);
      const double v1 = solve_lower(toy.problem, x1).value;
      const double v2 = solve_lower(toy.problem, x2).value;
      for (double theta : {0.25, 0.5, 0.75}) {
        const Vec xm = theta * x1 + (1.0 - theta) * x2;
        const double vm = solve_lower(toy.problem, xm).value;
        if (vm > theta * v1 + (1.0 - theta) * v2 + 1e-6) {
          detail = std::string(id) + ": convexity inequality violated";
          return false;
        }
      }
    }
    for (int rep = 0; rep < 20; ++rep) {
      const Vec x = random_in_box(rng, toy.problem.X);
      const LowerSolution sol = solve_lower(toy.problem, x);
      const Vec xi = value_subgradient(sol, toy.problem);
      const Vec probe = random_in_box(rng, toy.problem.X);
      const double vp = solve_lower(toy.problem, probe).value;
      if (vp < sol.value + xi.dot(probe - x) - 1e-6) {
        detail = std::string(id) + ": value subgradient inequality violated";
        return false;
      }
    }
  }
  return true;
}

bool check_parser_roundtrip(std::string& detail, int lines) {
  Rng rng(16, 3);
  std::ostringstream corpus;
  corpus << "# fuzz corpus\n";
  for (int i = 0; i < lines; ++i) {
    corpus << (rng.next_below(2) == 0 ? "+1" : "-1");
    Eigen::Index idx = 0;
    const int nf = static_cast<int>(rng.next_below(8));
    for (int jf = 0; jf < nf; ++jf) {
      idx += 1 + static_cast<Eigen::Index>(rng.next_below(5));
      corpus << ' ' << idx << ':' << rng.uniform(-3.0, 3.0);
    }
    corpus << '\n';
  }
  std::istringstream in1(corpus.str());
  const Dataset d1 = parse_libsvm(in1);
  std::istringstream in2(serialize_libsvm(d1));
  const Dataset d2 = parse_libsvm(in2);
  if (d1.n != d2.n || d1.size() != d2.size()) {
    detail = "shape changed across round-trip";
    return false;
  }
  for (Eigen::Index i = 0; i < d1.size(); ++i) {
    const auto& r1 = d1.rows[static_cast<size_t>(i)];
    const auto& r2 = d2.rows[static_cast<size_t>(i)];
    if (r1.label != r2.label || r1.features != r2.features) {
      detail = "row changed across round-trip";
      return false;
    }
  }
  return true;
}

bool check_split_determinism(std::string& detail) {
  const Dataset d = synthetic_classification(57, 4, 9);
  const auto [tr1, te1] = split(d, 42, 0.5);
  const auto [tr2, te2] = split(d, 42, 0.5);
  if (serialize_libsvm(tr1) != serialize_libsvm(tr2) ||
      serialize_libsvm(te1) != serialize_libsvm(te2)) {
    detail = "identical seeds produced different splits";
    return false;
  }
  const FoldPlan p1 = fold_plan(tr1, 3, 42);
  const FoldPlan p2 = fold_plan(tr2, 3, 42);
  if (p1.assignment != p2.assignment) {
    detail = "identical seeds produced different fold plans";
    return false;
  }
  return true;
}

bool check_ip_merit_monotone(std::string& detail) {
  const Dataset data = synthetic_classification(30, 3, 21);
  const FoldPlan plan = fold_plan(data, 3, 21);
  const SvmCvModel svm = build_svm_cv(data, plan, SvmBounds{});
  const LowerSolution sol = solve_lower(svm.problem, svm.start_x());
  (void)sol;
  // The merit history itself is checked through the certificate path: any
  // 5-step window of the lower solve must not increase.
  SmoothConvexProgram prog;
  prog.dim = 3;
  SpMat Q(3, 3);
  Q.setIdentity();
  prog.objective = quadratic_fn(Q, Vec::Constant(3, -1.0));
  prog.box = Box::uniform(3, -0.25, 0.25);
  const KktCertificate cert = ip_solve(prog, IpOptions{});
  for (size_t k = 4; k < cert.merit_history.size(); ++k) {
    if (cert.merit_history[k] > cert.merit_history[k - 4] * (1.0 + 1e-9) + 1e-12) {
      detail = "merit increased over a 5-step window";
      return false;
    }
  }
  return true;
}

bool check_decrease_on_synthetic_run(std::string& detail) {
  const Dataset data = synthetic_classification(36, 4, 33);
  const FoldPlan plan = fold_plan(data, 3, 33);
  const SvmCvModel svm = build_svm_cv(data, plan, SvmBounds{});
  DcaParams params;
  params.rho = 1e-2;
  params.beta0 = 1.0;
  params.delta_beta = 5.0;
  params.tol = 1e-2;
  params.stopping = StoppingRule::paper;
  params.check_decrease = true;
  const BilevelResult res = run_bilevel(svm.problem, 1e-2, params,
                                        DcaVariant::ip_dca, svm.start_x(),
                                        svm.start_y());
  if (res.trace.decrease_violations != 0) {
    std::ostringstream oss;
    oss << res.trace.decrease_violations << " sufficient-decrease violations";
    detail = oss.str();
    return false;
  }
  if (res.trace.beta_final >= 1e6) {
    detail = "penalty parameter hit the ceiling";
    return false;
  }
  return true;
}

bool check_value_subgradient_fd(std::string& detail) {
  const Dataset data = synthetic_classification(24, 3, 55);
  const FoldPlan plan = fold_plan(data, 3, 55);
  const SvmCvModel svm = build_svm_cv(data, plan, SvmBounds{});
  Rng rng(17, 3);
  const double h = 1e-5;
  for (int rep = 0; rep < 5; ++rep) {
    Vec x = svm.start_x();
    x[0] = rng.uniform(0.5, 2.0);
    for (Eigen::Index i = 1; i < x.size(); ++i) x[i] = rng.uniform(0.05, 0.5);
    const LowerSolution sol = solve_lower(svm.problem, x);
    const Vec xi = value_subgradient(sol, svm.problem);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (solve_lower(svm.problem, xp).value -
                         solve_lower(svm.problem, xm).value) /
                        (2.0 * h);
      if (std::abs(fd - xi[i]) > 1e-3) {
        std::ostringstream oss;
        oss << "coordinate " << i << ": subgradient " << xi[i]
            << " vs finite difference " << fd;
        detail = oss.str();
        return false;
      }
    }
  }
  return true;
}

}  // namespace

bool Report::all_pass() const {
  for (const Item& it : items) {
    if (!it.pass) return false;
  }
  return true;
}

Report run(const std::string& scope) {
  if (scope != "fast" && scope != "full") {
    throw InvalidInput("verify: scope must be 'fast' or 'full'");
  }
  Report report;
  const auto add = [&report](const std::string& name, bool (*fn)(std::string&)) {
    Item item;
    item.name = name;
    try {
      item.pass = fn(item.detail);
    } catch (const std::exception& e) {
      item.pass = false;
      item.detail = e.what();
    }
    report.items.push_back(std::move(item));
  };

  add("projection idempotent+nonexpansive", check_projection);
  add("hinge midpoint convexity", check_hinge_convexity);
  add("model oracle subgradients", check_model_oracles);
  add("planted-fault oracle rejected", check_planted_fault);
  add("interior-point dual sensitivity", check_dual_sensitivity);
  add("interior-point merit monotone", check_ip_merit_monotone);
  add("value function convex + subgradients", check_value_function);
  add("split/fold determinism", check_split_determinism);
  {
    Item item;
    item.name = "libsvm parser round-trip";
    try {
      item.pass = check_parser_roundtrip(item.detail, scope == "full" ? 1000 : 200);
    } catch (const std::exception& e) {
      item.pass = false;
      item.detail = e.what();
    }
    report.items.push_back(std::move(item));
  }
  if (scope == "full") {
    add("sufficient decrease on synthetic run", check_decrease_on_synthetic_run);
    add("value subgradient vs finite differences", check_value_subgradient_fd);
  }
  return report;
}

void print(const Report& report, std::ostream& out) {
  for (const Item& it : report.items) {
    out << (it.pass ? "PASS" : "FAIL") << "  " << it.name;
    if (!it.pass && !it.detail.empty()) out << "  (" << it.detail << ")";
    out << '\n';
  }
  out << (report.all_pass() ? "verification passed" : "verification FAILED") << '\n';
}

}  // namespace bidca::verify
