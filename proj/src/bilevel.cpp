#include "bidca/bilevel.hpp"

#include <memory>
#include <mutex>
#include <sstream>

namespace bidca {

namespace {

using Triplet = Eigen::Triplet<double>;

Vec dense_of(const SpVec& a, Eigen::Index dim) {
  Vec v = Vec::Zero(dim);
  for (SpVec::InnerIterator it(a); it; ++it) v[it.index()] = it.value();
  return v;
}

SpMat lower_right_block(const SpMat& H, Eigen::Index offset, Eigen::Index dim) {
  std::vector<Triplet> trips;
  for (Eigen::Index k = 0; k < H.outerSize(); ++k) {
    for (SpMat::InnerIterator it(H, k); it; ++it) {
      if (it.row() >= offset && it.col() >= offset) {
        trips.emplace_back(static_cast<int>(it.row() - offset),
                           static_cast<int>(it.col() - offset), it.value());
      }
    }
  }
  SpMat B(dim, dim);
  B.setFromTriplets(trips.begin(), trips.end());
  return B;
}

}  // namespace

Vec BilevelProblem::stack(const Vec& x, const Vec& y) const {
  if (x.size() != dim_x || y.size() != dim_y) {
    throw DimensionError("bilevel stack: block dimension mismatch");
  }
  Vec z(dim());
  z << x, y;
  return z;
}

LowerSolution solve_lower(const BilevelProblem& p, const Vec& x, double tol) {
  if (x.size() != p.dim_x) throw DimensionError("solve_lower: x dimension mismatch");
  require_finite(x, "solve_lower x");
  if (!p.X.contains(x, 1e-9)) {
    throw InvalidInput("solve_lower: x outside the upper-level box");
  }

  const Eigen::Index ny = p.dim_y;
  const Eigen::Index nh = static_cast<Eigen::Index>(p.f.hinges.size());
  const Eigen::Index ng = static_cast<Eigen::Index>(p.g.size());
  const Eigen::Index nvar = ny + nh;

  // f restricted to y at this x: smooth part via block extraction, hinges
  // as slack rows, the y-share of the linear part in the objective.
  SmoothConvexProgram prog;
  prog.dim = nvar;
  {
    auto fp = std::make_shared<ConvexStructure>(p.f);
    auto xc = std::make_shared<Vec>(x);
    const Eigen::Index nx = p.dim_x;
    Vec lin_y = dense_of(p.f.linear.a, p.dim()).tail(ny);
    Vec hinge_w(nh);
    for (Eigen::Index j = 0; j < nh; ++j) hinge_w[j] = p.f.hinges[j].weight;
    SmoothFn obj;
    obj.value = [fp, xc, nx, ny, nh, lin_y, hinge_w](const Vec& zeta) {
      Vec z(nx + ny);
      z << *xc, zeta.head(ny);
      double v = lin_y.dot(zeta.head(ny));
      if (fp->smooth) v += fp->smooth->value(z);
      for (Eigen::Index j = 0; j < nh; ++j) v += hinge_w[j] * zeta[ny + j];
      return v;
    };
    obj.grad = [fp, xc, nx, ny, nh, lin_y, hinge_w](const Vec& zeta) {
      Vec z(nx + ny);
      z << *xc, zeta.head(ny);
      Vec g(ny + nh);
      g.head(ny) = lin_y;
      if (fp->smooth) g.head(ny) += fp->smooth->grad(z).tail(ny);
      g.tail(nh) = hinge_w;
      return g;
    };
    obj.hess = [fp, xc, nx, ny, nh](const Vec& zeta) {
      SpMat H(ny + nh, ny + nh);
      if (fp->smooth) {
        Vec z(nx + ny);
        z << *xc, zeta.head(ny);
        SpMat B = lower_right_block(fp->smooth->hess(z), nx, ny);
        std::vector<Triplet> trips;
        for (Eigen::Index k = 0; k < B.outerSize(); ++k) {
          for (SpMat::InnerIterator it(B, k); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
          }
        }
        H.setFromTriplets(trips.begin(), trips.end());
      }
      return H;
    };
    prog.objective = obj;
  }

  // Rows: g first (their duals are the KKT multipliers), then hinge rows.
  std::vector<Triplet> trips;
  Vec b(ng + nh);
  for (Eigen::Index r = 0; r < ng; ++r) {
    const AffineFn& gi = p.g[r];
    if (gi.dim() != p.dim()) throw DimensionError("solve_lower: g row dimension");
    double cst = gi.b;
    for (SpVec::InnerIterator it(gi.a); it; ++it) {
      if (it.index() < p.dim_x) {
        cst += it.value() * x[it.index()];
      } else {
        trips.emplace_back(static_cast<int>(r), static_cast<int>(it.index() - p.dim_x),
                           it.value());
      }
    }
    b[r] = -cst;
  }
  for (Eigen::Index j = 0; j < nh; ++j) {
    const AffineFn& arg = p.f.hinges[j].arg;
    double cst = arg.b;
    for (SpVec::InnerIterator it(arg.a); it; ++it) {
      if (it.index() < p.dim_x) {
        cst += it.value() * x[it.index()];
      } else {
        trips.emplace_back(static_cast<int>(ng + j),
                           static_cast<int>(it.index() - p.dim_x), it.value());
      }
    }
    trips.emplace_back(static_cast<int>(ng + j), static_cast<int>(ny + j), -1.0);
    b[ng + j] = -cst;
  }
  prog.A.resize(ng + nh, nvar);
  prog.A.setFromTriplets(trips.begin(), trips.end());
  prog.b = b;
  prog.box = p.Y.stacked(Box::nonnegative(nh));

  IpOptions opts;
  opts.tol = tol;
  KktCertificate cert;
  try {
    cert = ip_solve(prog, opts);
  } catch (const InfeasibleError& err) {
    std::ostringstream oss;
    oss << "lower level infeasible at x = [" << x.transpose() << "]: " << err.what();
    throw LowerLevelInfeasible(oss.str());
  }

  LowerSolution sol;
  sol.x = x;
  sol.y = project_box(cert.primal.head(ny), p.Y);
  sol.gamma = cert.row_duals.head(ng);
  sol.value = p.f.eval(p.stack(x, sol.y));
  sol.kkt_residual = cert.max_residual();
  return sol;
}

Vec value_subgradient(const LowerSolution& sol, const BilevelProblem& p) {
  if (p.attestation == PartialFormula::none) {
    throw InvalidInput(
        "value_subgradient: partial-derivative-formula attestation missing");
  }
  if (sol.gamma.size() != static_cast<Eigen::Index>(p.g.size())) {
    throw DimensionError("value_subgradient: multiplier count mismatch");
  }
  const Vec z = p.stack(sol.x, sol.y);
  Vec xi = p.f.subgrad_at(z).head(p.dim_x);
  for (size_t i = 0; i < p.g.size(); ++i) {
    if (sol.gamma[static_cast<Eigen::Index>(i)] == 0.0) continue;
    xi += sol.gamma[static_cast<Eigen::Index>(i)] *
          dense_of(p.g[i].a, p.dim()).head(p.dim_x);
  }
  return xi;
}

namespace {

/// Most-recent-x cache for the value-function oracle; exact-x hits reuse
/// the lower solve done earlier in the same outer iteration.
struct LowerMemo {
  std::mutex mutex;
  bool filled = false;
  Vec x;
  LowerSolution sol;
};

LowerSolution memoized_lower(const std::shared_ptr<LowerMemo>& memo,
                             const BilevelProblem& p, const Vec& x) {
  {
    std::lock_guard<std::mutex> lock(memo->mutex);
    if (memo->filled && memo->x.size() == x.size() && memo->x == x) {
      return memo->sol;
    }
  }
  LowerSolution sol = solve_lower(p, x, kLowerTol);
  {
    std::lock_guard<std::mutex> lock(memo->mutex);
    memo->filled = true;
    memo->x = x;
    memo->sol = sol;
  }
  return sol;
}

}  // namespace

DcProblem assemble_vp(const BilevelProblem& p, double eps) {
  if (eps < 0.0) throw InvalidInput("assemble_vp: eps must be nonnegative");
  if (p.F1.dim != p.dim() || p.f.dim != p.dim()) {
    throw DimensionError("assemble_vp: structure dimension mismatch");
  }

  DcProblem d;
  d.dim = p.dim();
  d.g0_structure = p.F1;
  d.g0 = p.F1.oracle();
  d.h0 = p.F2;

  ConvexStructure g1 = p.f;
  g1.linear.b -= eps;
  d.g1_structure = g1;
  d.g1 = g1.oracle(p.f_is_smooth() ? p.f_smooth_modulus : -1.0);

  auto memo = std::make_shared<LowerMemo>();
  auto prob = std::make_shared<BilevelProblem>(p);
  ConvexOracle h1;
  h1.value = [memo, prob](const Vec& z) {
    return memoized_lower(memo, *prob, prob->x_block(z)).value;
  };
  h1.subgrad = [memo, prob](const Vec& z) {
    LowerSolution sol = memoized_lower(memo, *prob, prob->x_block(z));
    Vec xi = Vec::Zero(prob->dim());
    xi.head(prob->dim_x) = value_subgradient(sol, *prob);
    return xi;
  };
  d.h1 = h1;

  d.sigma = p.X.stacked(p.Y);

  const Eigen::Index ng = static_cast<Eigen::Index>(p.g.size());
  std::vector<Triplet> trips;
  d.coupling_b = Vec(ng);
  for (Eigen::Index r = 0; r < ng; ++r) {
    for (SpVec::InnerIterator it(p.g[r].a); it; ++it) {
      trips.emplace_back(static_cast<int>(r), static_cast<int>(it.index()), it.value());
    }
    d.coupling_b[r] = -p.g[r].b;
  }
  d.coupling_A.resize(ng, d.dim);
  d.coupling_A.setFromTriplets(trips.begin(), trips.end());
  return d;
}

BilevelResult run_bilevel(const BilevelProblem& p, double eps, const DcaParams& params,
                          DcaVariant variant, const Vec& x0, const Vec& y0) {
  if (variant == DcaVariant::ipl_dca && !p.f_is_smooth()) {
    throw InvalidInput("run_bilevel: the linearized variant requires a smooth f");
  }
  DcProblem d = assemble_vp(p, eps);
  DcResult res = run_dca(d, params, variant, p.stack(x0, y0));

  BilevelResult out;
  out.x = p.x_block(res.z);
  out.y = p.y_block(res.z);
  out.lambda = res.lambda;
  out.trace = std::move(res.trace);
  out.lower = solve_lower(p, out.x, kLowerTol);
  return out;
}

}  // namespace bidca
