#include "bidca/dc.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace bidca {

namespace {

constexpr double kActivityBand = 1e-9;   // |value| below this is "at the kink"
constexpr double kSnapScale = 1e-6;      // bound-snap tolerance, times (1+|bound|)
constexpr double kRowBandScale = 1e-7;   // coupling-row activity band

using Triplet = Eigen::Triplet<double>;

Vec dense_of(const SpVec& a, Eigen::Index dim) {
  Vec v = Vec::Zero(dim);
  for (SpVec::InnerIterator it(a); it; ++it) v[it.index()] = it.value();
  return v;
}

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

/// Kink selector for max(arg, 0): forced by activity, chosen from the dual
/// ratio inside the band.
double hinge_multiplier(double arg_value, double dual, double weight) {
  if (arg_value > kActivityBand) return 1.0;
  if (arg_value < -kActivityBand) return 0.0;
  return weight > 0.0 ? clamp01(dual / weight) : 0.0;
}

SmoothFn make_subproblem_objective(std::shared_ptr<const SlackMap> m) {
  SmoothFn f;
  f.value = [m](const Vec& zeta) {
    const Vec z = zeta.head(m->dim_z);
    double v = m->g0_linear.eval(z) - m->h0_zk - m->xi0.dot(z - m->z_k) +
               0.5 * m->rho * (z - m->z_k).squaredNorm() +
               m->beta * zeta[m->s_offset()];
    if (m->g0_smooth) v += m->g0_smooth->value(z);
    for (Eigen::Index j = 0; j < m->n_obj_hinges; ++j) {
      v += m->obj_hinges[j].weight * zeta[m->u_offset() + j];
    }
    return v;
  };
  f.grad = [m](const Vec& zeta) {
    const Vec z = zeta.head(m->dim_z);
    Vec g = Vec::Zero(m->var_count());
    Vec gz = dense_of(m->g0_linear.a, m->dim_z) - m->xi0 + m->rho * (z - m->z_k);
    if (m->g0_smooth) gz += m->g0_smooth->grad(z);
    g.head(m->dim_z) = gz;
    for (Eigen::Index j = 0; j < m->n_obj_hinges; ++j) {
      g[m->u_offset() + j] = m->obj_hinges[j].weight;
    }
    g[m->s_offset()] = m->beta;
    return g;
  };
  f.hess = [m](const Vec& zeta) {
    const Vec z = zeta.head(m->dim_z);
    std::vector<Triplet> trips;
    if (m->g0_smooth) {
      SpMat H = m->g0_smooth->hess(z);
      trips.reserve(static_cast<size_t>(H.nonZeros()) + static_cast<size_t>(m->dim_z));
      for (Eigen::Index k = 0; k < H.outerSize(); ++k) {
        for (SpMat::InnerIterator it(H, k); it; ++it) {
          trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                             it.value());
        }
      }
    }
    for (Eigen::Index i = 0; i < m->dim_z; ++i) {
      trips.emplace_back(static_cast<int>(i), static_cast<int>(i), m->rho);
    }
    SpMat H(m->var_count(), m->var_count());
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
  };
  return f;
}

SmoothFn make_gap_row(std::shared_ptr<const SlackMap> m) {
  SmoothFn f;
  f.value = [m](const Vec& zeta) {
    const Vec z = zeta.head(m->dim_z);
    double v = m->g1_smooth->value(z) + m->g1_linear.eval(z) - m->h1_zk -
               m->xi1.dot(z - m->z_k) - zeta[m->s_offset()];
    for (Eigen::Index j = 0; j < m->n_cons_hinges; ++j) {
      v += m->cons_hinges[j].weight * zeta[m->v_offset() + j];
    }
    return v;
  };
  f.grad = [m](const Vec& zeta) {
    const Vec z = zeta.head(m->dim_z);
    Vec g = Vec::Zero(m->var_count());
    g.head(m->dim_z) =
        m->g1_smooth->grad(z) + dense_of(m->g1_linear.a, m->dim_z) - m->xi1;
    for (Eigen::Index j = 0; j < m->n_cons_hinges; ++j) {
      g[m->v_offset() + j] = m->cons_hinges[j].weight;
    }
    g[m->s_offset()] = -1.0;
    return g;
  };
  f.hess = [m](const Vec& zeta) {
    const Vec z = zeta.head(m->dim_z);
    SpMat Hz = m->g1_smooth->hess(z);
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(Hz.nonZeros()));
    for (Eigen::Index k = 0; k < Hz.outerSize(); ++k) {
      for (SpMat::InnerIterator it(Hz, k); it; ++it) {
        trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
      }
    }
    SpMat H(m->var_count(), m->var_count());
    H.setFromTriplets(trips.begin(), trips.end());
    return H;
  };
  return f;
}

SlackProgram build_common(const DcProblem& p, const Vec& z_k, const Vec& xi0,
                          const Vec& xi1, double beta, double rho, bool linearized) {
  if (!p.g0_structure) {
    throw InvalidInput("subproblem: structural descriptor missing for g0");
  }
  if (!p.g1_structure) {
    throw InvalidInput("subproblem: structural descriptor missing for g1");
  }
  if (z_k.size() != p.dim || xi0.size() != p.dim || xi1.size() != p.dim) {
    throw DimensionError("subproblem: point/subgradient dimension mismatch");
  }
  if (beta <= 0.0 || rho <= 0.0) {
    throw InvalidInput("subproblem: beta and rho must be positive");
  }
  if (linearized) {
    if (!p.g1.is_smooth()) {
      throw InvalidInput("linearized subproblem: g1 carries no smoothness modulus");
    }
    if (!p.g1_structure->hinges.empty()) {
      throw InvalidInput("linearized subproblem: g1 has nonsmooth hinge terms");
    }
  }
  for (const auto& h : p.g0_structure->hinges) {
    if (h.weight <= 0.0) throw InvalidInput("subproblem: hinge weights must be positive");
  }
  for (const auto& h : p.g1_structure->hinges) {
    if (h.weight <= 0.0) throw InvalidInput("subproblem: hinge weights must be positive");
  }

  auto map = std::make_shared<SlackMap>();
  map->dim_z = p.dim;
  map->n_obj_hinges = static_cast<Eigen::Index>(p.g0_structure->hinges.size());
  map->n_cons_hinges = static_cast<Eigen::Index>(p.g1_structure->hinges.size());
  map->linearized = linearized;
  map->beta = beta;
  map->rho = rho;
  map->z_k = z_k;
  map->xi0 = xi0;
  map->xi1 = xi1;
  map->h0_zk = p.h0.eval(z_k);
  map->h1_zk = p.h1.eval(z_k);
  map->obj_hinges = p.g0_structure->hinges;
  map->cons_hinges = p.g1_structure->hinges;
  map->g0_smooth = p.g0_structure->smooth;
  map->g0_linear = p.g0_structure->linear;
  map->g1_smooth = p.g1_structure->smooth;
  map->g1_linear = p.g1_structure->linear;
  map->coupling_rows = p.coupling_count();
  if (map->g1_smooth) {
    map->g1_grad_zk = map->g1_smooth->grad(z_k);
    map->g1_smooth_zk = map->g1_smooth->value(z_k);
  } else {
    map->g1_grad_zk = Vec::Zero(p.dim);
    map->g1_smooth_zk = 0.0;
  }

  const Eigen::Index nz = map->dim_z;
  const Eigen::Index nu = map->n_obj_hinges;
  const Eigen::Index nv = map->n_cons_hinges;
  const Eigen::Index nvar = map->var_count();
  const bool convex_gap = map->gap_is_convex_row();

  SmoothConvexProgram prog;
  prog.dim = nvar;
  prog.objective = make_subproblem_objective(map);

  const Eigen::Index n_rows = nu + nv + map->coupling_rows + (convex_gap ? 0 : 1);
  std::vector<Triplet> trips;
  Vec b(n_rows);
  Eigen::Index row = 0;
  for (Eigen::Index j = 0; j < nu; ++j, ++row) {
    const AffineFn& arg = map->obj_hinges[j].arg;
    for (SpVec::InnerIterator it(arg.a); it; ++it) {
      trips.emplace_back(static_cast<int>(row), static_cast<int>(it.index()), it.value());
    }
    trips.emplace_back(static_cast<int>(row), static_cast<int>(map->u_offset() + j), -1.0);
    b[row] = -arg.b;
  }
  for (Eigen::Index j = 0; j < nv; ++j, ++row) {
    const AffineFn& arg = map->cons_hinges[j].arg;
    for (SpVec::InnerIterator it(arg.a); it; ++it) {
      trips.emplace_back(static_cast<int>(row), static_cast<int>(it.index()), it.value());
    }
    trips.emplace_back(static_cast<int>(row), static_cast<int>(map->v_offset() + j), -1.0);
    b[row] = -arg.b;
  }
  for (Eigen::Index r = 0; r < map->coupling_rows; ++r, ++row) {
    for (RowSpMat::InnerIterator it(p.coupling_A, r); it; ++it) {
      trips.emplace_back(static_cast<int>(row), static_cast<int>(it.col()), it.value());
    }
    b[row] = p.coupling_b[r];
  }
  if (!convex_gap) {
    // Affine gap row: [grad-plan + linear - xi1]'z + sum w'_j v_j - s <= -const.
    Vec coeff = dense_of(map->g1_linear.a, nz) - xi1;
    double cst = map->g1_linear.b - map->h1_zk + xi1.dot(z_k);
    if (map->g1_smooth) {
      coeff += map->g1_grad_zk;
      cst += map->g1_smooth_zk - map->g1_grad_zk.dot(z_k);
    }
    for (Eigen::Index i = 0; i < nz; ++i) {
      if (coeff[i] != 0.0) {
        trips.emplace_back(static_cast<int>(row), static_cast<int>(i), coeff[i]);
      }
    }
    for (Eigen::Index j = 0; j < nv; ++j) {
      trips.emplace_back(static_cast<int>(row), static_cast<int>(map->v_offset() + j),
                         map->cons_hinges[j].weight);
    }
    trips.emplace_back(static_cast<int>(row), static_cast<int>(map->s_offset()), -1.0);
    b[row] = -cst;
    ++row;
  }
  prog.A.resize(n_rows, nvar);
  prog.A.setFromTriplets(trips.begin(), trips.end());
  prog.b = b;
  if (convex_gap) prog.convex_rows.push_back(make_gap_row(map));
  prog.box = p.sigma.stacked(Box::nonnegative(nu + nv + 1));

  SlackProgram sp;
  sp.map = *map;
  sp.program = std::move(prog);
  sp.start.resize(nvar);
  sp.start.head(nz) = z_k;
  for (Eigen::Index j = 0; j < nu; ++j) {
    sp.start[map->u_offset() + j] = std::max(map->obj_hinges[j].arg.eval(z_k), 0.0) + 1.0;
  }
  for (Eigen::Index j = 0; j < nv; ++j) {
    sp.start[map->v_offset() + j] = std::max(map->cons_hinges[j].arg.eval(z_k), 0.0) + 1.0;
  }
  sp.start[map->s_offset()] = std::max(sp.map.gap_value(z_k), 0.0) + 1.0;
  return sp;
}

}  // namespace

Eigen::Index SlackMap::gap_linear_row() const {
  if (gap_is_convex_row()) return -1;
  return n_obj_hinges + n_cons_hinges + coupling_rows;
}

double SlackMap::gap_value(const Vec& z) const {
  double v = g1_linear.eval(z) - h1_zk - xi1.dot(z - z_k);
  if (g1_smooth) {
    if (linearized) {
      v += g1_smooth_zk + g1_grad_zk.dot(z - z_k);
    } else {
      v += g1_smooth->value(z);
    }
  }
  for (const auto& h : cons_hinges) v += h.weight * std::max(h.arg.eval(z), 0.0);
  return v;
}

Vec SlackMap::gap_smooth_gradient(const Vec& z) const {
  Vec g = dense_of(g1_linear.a, dim_z) - xi1;
  if (g1_smooth) g += linearized ? g1_grad_zk : g1_smooth->grad(z);
  return g;
}

void DcaParams::validate() const {
  if (rho <= 0.0 || sigma <= 0.0 || beta0 <= 0.0 || delta_beta <= 0.0 || tol <= 0.0 ||
      zeta0 <= 0.0 || subproblem_tol <= 0.0 || beta_max <= 0.0 || max_iter <= 0) {
    throw InvalidInput("DcaParams: all solver parameters must be positive");
  }
}

SlackProgram build_subproblem(const DcProblem& p, const Vec& z_k, const Vec& xi0,
                              const Vec& xi1, double beta, double rho) {
  return build_common(p, z_k, xi0, xi1, beta, rho, /*linearized=*/false);
}

SlackProgram build_linearized_subproblem(const DcProblem& p, const Vec& z_k,
                                         const Vec& xi0, const Vec& xi1, double beta,
                                         double rho_k) {
  return build_common(p, z_k, xi0, xi1, beta, rho_k, /*linearized=*/true);
}

double compute_t(double gap) {
  require_finite(gap, "constraint gap");
  return std::max(gap, 0.0);
}

double update_penalty(double beta_k, double t_next, double step_norm,
                      double delta_beta) {
  const double lhs = std::max(beta_k, t_next > 0.0 ? 1.0 / t_next : kInf);
  const double rhs = step_norm > 0.0 ? 1.0 / step_norm : kInf;
  return lhs < rhs ? beta_k + delta_beta : beta_k;
}

namespace {

Vec snap_to_box(const Vec& z, const Box& box) {
  Vec out = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double lo = box.lo[i], hi = box.hi[i];
    if (std::isfinite(lo) && std::abs(z[i] - lo) <= kSnapScale * (1.0 + std::abs(lo))) {
      out[i] = lo;
    } else if (std::isfinite(hi) &&
               std::abs(z[i] - hi) <= kSnapScale * (1.0 + std::abs(hi))) {
      out[i] = hi;
    } else {
      out[i] = std::clamp(z[i], lo, hi);
    }
  }
  return out;
}

/// The dual-selected subdifferential element of g0 at z (gradient of the
/// smooth and linear parts plus activity-respecting hinge combinations).
Vec g0_element(const SlackMap& m, const KktCertificate& cert, const Vec& z) {
  Vec g = dense_of(m.g0_linear.a, m.dim_z);
  if (m.g0_smooth) g += m.g0_smooth->grad(z);
  for (Eigen::Index j = 0; j < m.n_obj_hinges; ++j) {
    const HingeTerm& h = m.obj_hinges[j];
    const double tau =
        hinge_multiplier(h.arg.eval(z), cert.row_duals[m.row_u_begin() + j], h.weight);
    if (tau != 0.0) g += h.weight * tau * dense_of(h.arg.a, m.dim_z);
  }
  return g;
}

/// Subdifferential element of the true g1 at z (never the linearized plan).
Vec g1_element(const SlackMap& m, const KktCertificate& cert, const Vec& z,
               double hinge_dual_scale) {
  Vec g = dense_of(m.g1_linear.a, m.dim_z);
  if (m.g1_smooth) g += m.g1_smooth->grad(z);
  for (Eigen::Index j = 0; j < m.n_cons_hinges; ++j) {
    const HingeTerm& h = m.cons_hinges[j];
    const double dual = hinge_dual_scale > 0.0
                            ? cert.row_duals[m.row_v_begin() + j] / hinge_dual_scale
                            : 0.0;
    const double tau = hinge_multiplier(h.arg.eval(z), dual * h.weight, h.weight);
    if (tau != 0.0) g += h.weight * tau * dense_of(h.arg.a, m.dim_z);
  }
  return g;
}

/// Projects out the box normal cone coordinatewise: what remains is the
/// part no valid normal vector can cancel.
Vec finish_normal_projection(Vec rest, const Vec& z, const Box& box) {
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const bool at_lo = std::isfinite(box.lo[i]) && z[i] <= box.lo[i];
    const bool at_hi = std::isfinite(box.hi[i]) && z[i] >= box.hi[i];
    if (at_lo && at_hi) {
      rest[i] = 0.0;
    } else if (at_lo) {
      rest[i] = std::min(rest[i], 0.0);
    } else if (at_hi) {
      rest[i] = std::max(rest[i], 0.0);
    }
  }
  return rest;
}

void add_active_coupling(Vec& rest, const SlackMap& m, const KktCertificate& cert,
                         const RowSpMat& A, const Vec& b, const Vec& z) {
  for (Eigen::Index r = 0; r < m.coupling_rows; ++r) {
    double val = -b[r];
    for (RowSpMat::InnerIterator it(A, r); it; ++it) val += it.value() * z[it.col()];
    if (std::abs(val) <= kRowBandScale * (1.0 + std::abs(b[r]))) {
      const double mu = cert.row_duals[m.row_coupling_begin() + r];
      if (mu != 0.0) {
        for (RowSpMat::InnerIterator it(A, r); it; ++it) rest[it.col()] += mu * it.value();
      }
    }
  }
}

}  // namespace

namespace {

/// Moves z onto the kink manifolds of hinges (and the max-term surface)
/// that the interior point left epsilon-active: one least-norm correction
/// against the linearized active arguments. Degenerate complementarity
/// leaves the primal only sqrt(mu)-close to a kink, which would otherwise
/// dominate the certificate residual.
Vec project_onto_kinks(const SlackMap& m, const Vec& z, double band) {
  std::vector<Vec> rows;
  std::vector<double> vals;
  const auto consider = [&](const AffineFn& arg) {
    const double v = arg.eval(z);
    if (std::abs(v) <= band && v != 0.0) {
      rows.push_back(dense_of(arg.a, m.dim_z));
      vals.push_back(v);
    }
  };
  for (const HingeTerm& h : m.obj_hinges) consider(h.arg);
  for (const HingeTerm& h : m.cons_hinges) consider(h.arg);
  const double gap = m.gap_value(z);
  if (std::abs(gap) <= band && gap != 0.0) {
    Vec g = m.gap_smooth_gradient(z);
    for (const HingeTerm& h : m.cons_hinges) {
      if (h.arg.eval(z) > 0.0) g += h.weight * dense_of(h.arg.a, m.dim_z);
    }
    rows.push_back(std::move(g));
    vals.push_back(gap);
  }
  if (rows.empty() || rows.size() > 400) return z;
  Eigen::MatrixXd A(static_cast<Eigen::Index>(rows.size()), m.dim_z);
  Vec r(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    A.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    r[static_cast<Eigen::Index>(i)] = vals[i];
  }
  const Vec d = A.completeOrthogonalDecomposition().solve(-r);
  if (!d.allFinite() || d.norm() > 10.0 * band * std::sqrt(double(rows.size())) + band) {
    return z;
  }
  return z + d;
}

/// Minimizes || base + M t || over t in [0,1]^K by projected gradient;
/// the columns of M are the subgradient directions whose kink multipliers
/// are free to choose.
Vec box_least_squares(const Eigen::MatrixXd& M, const Vec& base, Vec t) {
  if (M.cols() == 0) return t;
  const double L = M.squaredNorm();
  if (L <= 0.0) return t;
  const double step = 1.0 / L;
  for (int it = 0; it < 300; ++it) {
    const Vec grad = M.transpose() * (base + M * t);
    Vec next = (t - step * grad).cwiseMax(0.0).cwiseMin(1.0);
    if ((next - t).lpNorm<Eigen::Infinity>() <= 1e-15) return next;
    t = std::move(next);
  }
  return t;
}

struct ElementChoice {
  Vec e;
  double lambda_tilde = 0.0;
  double gap = 0.0;
};

ElementChoice assemble_element(const SlackMap& m, const KktCertificate& cert,
                               const SlackProgram& sp, const Vec& z,
                               const Box& zbox, double act_band) {
  ElementChoice out;
  out.gap = m.gap_value(z);
  const double kappa = m.gap_is_convex_row() ? cert.convex_row_duals[0]
                                             : cert.row_duals[m.gap_linear_row()];
  if (out.gap > act_band) {
    out.lambda_tilde = 1.0;
  } else if (out.gap < -act_band) {
    out.lambda_tilde = 0.0;
  } else {
    out.lambda_tilde = clamp01(kappa / m.beta);
  }
  const double scale = m.beta * out.lambda_tilde;

  Vec base = dense_of(m.g0_linear.a, m.dim_z) - m.xi0 + m.rho * (z - m.z_k);
  if (m.g0_smooth) base += m.g0_smooth->grad(z);
  if (out.lambda_tilde > 0.0) base += scale * m.gap_smooth_gradient(z);

  // forced hinge shares go into the base; kink-active ones become free
  // least-squares columns seeded from the duals
  std::vector<Vec> free_cols;
  std::vector<double> free_seed;
  for (Eigen::Index j = 0; j < m.n_obj_hinges; ++j) {
    const HingeTerm& h = m.obj_hinges[j];
    const double arg = h.arg.eval(z);
    if (arg > act_band) {
      base += h.weight * dense_of(h.arg.a, m.dim_z);
    } else if (std::abs(arg) <= act_band) {
      free_cols.push_back(h.weight * dense_of(h.arg.a, m.dim_z));
      free_seed.push_back(clamp01(cert.row_duals[m.row_u_begin() + j] / h.weight));
    }
  }
  if (out.lambda_tilde > 0.0) {
    for (Eigen::Index j = 0; j < m.n_cons_hinges; ++j) {
      const HingeTerm& h = m.cons_hinges[j];
      const double arg = h.arg.eval(z);
      if (arg > act_band) {
        base += scale * h.weight * dense_of(h.arg.a, m.dim_z);
      } else if (std::abs(arg) <= act_band) {
        free_cols.push_back(scale * h.weight * dense_of(h.arg.a, m.dim_z));
        free_seed.push_back(
            clamp01(cert.row_duals[m.row_v_begin() + j] / scale));
      }
    }
  }
  // coupling rows contribute their duals where active
  {
    const Eigen::Index rbase = m.row_coupling_begin();
    for (Eigen::Index r = 0; r < m.coupling_rows; ++r) {
      double val = -sp.program.b[rbase + r];
      for (RowSpMat::InnerIterator it(sp.program.A, rbase + r); it; ++it) {
        if (it.col() < m.dim_z) val += it.value() * z[it.col()];
      }
      if (std::abs(val) <= kRowBandScale * (1.0 + std::abs(sp.program.b[rbase + r]))) {
        const double mu = cert.row_duals[rbase + r];
        if (mu != 0.0) {
          for (RowSpMat::InnerIterator it(sp.program.A, rbase + r); it; ++it) {
            if (it.col() < m.dim_z) base[it.col()] += mu * it.value();
          }
        }
      }
    }
  }

  if (!free_cols.empty()) {
    Eigen::MatrixXd M(m.dim_z, static_cast<Eigen::Index>(free_cols.size()));
    Vec seed(static_cast<Eigen::Index>(free_cols.size()));
    for (size_t c = 0; c < free_cols.size(); ++c) {
      M.col(static_cast<Eigen::Index>(c)) = free_cols[c];
      seed[static_cast<Eigen::Index>(c)] = free_seed[c];
    }
    const Vec t = box_least_squares(M, base, seed);
    base += M * t;
  }
  out.e = finish_normal_projection(std::move(base), z, zbox);
  return out;
}

}  // namespace

SubgradientCertificate extract_certificate_details(const KktCertificate& cert,
                                                   const SlackProgram& sp) {
  const SlackMap& m = sp.map;
  if (cert.primal.size() != m.var_count()) {
    throw DimensionError("certificate/slack-map dimension mismatch");
  }
  const Box zbox{sp.program.box.lo.head(m.dim_z), sp.program.box.hi.head(m.dim_z)};
  const Vec z0 = snap_to_box(cert.primal.head(m.dim_z), zbox);

  const double comp = std::max(cert.complementarity_residual, 0.0);
  const double band = std::clamp(30.0 * std::sqrt(comp), 1e-8, 1e-3);
  Vec z1 = snap_to_box(project_onto_kinks(m, z0, band), zbox);
  if (std::abs(m.gap_value(z1)) > kActivityBand) {
    // one more pass tightens the nonlinear max-term surface
    z1 = snap_to_box(project_onto_kinks(m, z1, band), zbox);
  }

  // Kink states are classified at the accuracy the solve actually reached;
  // multipliers freed this way certify a point within O(band) of z.
  const double act_band = std::clamp(30.0 * std::sqrt(comp), kActivityBand, 1e-5);
  const ElementChoice plain = assemble_element(m, cert, sp, z0, zbox, act_band);
  const ElementChoice snapped = assemble_element(m, cert, sp, z1, zbox, act_band);
  if (log_level() == LogLevel::debug) {
    std::ostringstream oss;
    oss << "extract: band " << band << " plain(gap " << plain.gap << ", lt "
        << plain.lambda_tilde << ", |e| " << plain.e.norm() << ") snapped(gap "
        << snapped.gap << ", lt " << snapped.lambda_tilde << ", |e| "
        << snapped.e.norm() << ")";
    log_line(LogLevel::debug, oss.str());
  }
  SubgradientCertificate out;
  if (snapped.e.norm() < plain.e.norm()) {
    out.z = z1;
    out.e = snapped.e;
    out.lambda_tilde = snapped.lambda_tilde;
    out.gap = snapped.gap;
  } else {
    out.z = z0;
    out.e = plain.e;
    out.lambda_tilde = plain.lambda_tilde;
    out.gap = plain.gap;
  }
  return out;
}

std::pair<Vec, Vec> extract_subgradient_certificate(const KktCertificate& cert,
                                                    const SlackProgram& sp) {
  SubgradientCertificate d = extract_certificate_details(cert, sp);
  return {std::move(d.z), std::move(d.e)};
}

KktResidual dc_kkt_residual(const DcProblem& p, const KktCertificate& cert,
                            const SlackProgram& sp, const Vec& z, double lambda) {
  const SlackMap& m = sp.map;
  Vec rest = g0_element(m, cert, z) - p.h0.subgrad_at(z);
  if (lambda != 0.0) {
    rest += lambda * (g1_element(m, cert, z, lambda) - p.h1.subgrad_at(z));
  }
  add_active_coupling(rest, m, cert, p.coupling_A, p.coupling_b, z);
  Vec e = finish_normal_projection(std::move(rest), z, p.sigma);

  KktResidual res;
  res.stationarity = e.norm();
  const double f1 = p.g1.eval(z) - p.h1.eval(z);
  res.complementarity = std::abs(lambda * f1);
  res.feasibility = std::max(f1, 0.0);
  return res;
}

DcResult run_dca(const DcProblem& p, const DcaParams& params, DcaVariant variant,
                 const Vec& z0) {
  params.validate();
  if (z0.size() != p.dim) throw DimensionError("run_dca: start dimension mismatch");
  require_finite(z0, "run_dca start");
  if (!p.sigma.contains(z0, 1e-9)) {
    throw InvalidInput("run_dca: start point outside the feasible box");
  }
  if (variant == DcaVariant::ipl_dca && !p.g1.is_smooth()) {
    throw InvalidInput("run_dca: iPL-DCA requires an L-smooth g1");
  }
  const double L = std::max(p.g1.smooth_modulus, 0.0);

  Vec z = z0;
  double beta = params.beta0;

  DcResult result;
  Trace& trace = result.trace;

  bool has_prev = false;
  double prev_phi = 0.0;        // phi_{k-1}(z^{k-1})
  double prev_beta = 0.0;
  double prev_rho = 0.0;
  double prev_zeta = 0.0;
  InexactRule prev_rule = params.criterion;
  double prev_step = 0.0;       // ||z^k - z^{k-1}||
  double prev_prev_step = 0.0;  // ||z^{k-1} - z^{k-2}||

  SlackProgram final_sp;
  KktCertificate final_cert;
  double final_lambda_tilde = 0.0;
  bool have_final = false;

  for (int k = 0; k < params.max_iter; ++k) {
    const double g0_z = p.g0.eval(z);
    const double h0_z = p.h0.eval(z);
    const double g1_z = p.g1.eval(z);
    const double h1_z = p.h1.eval(z);
    const double f0 = g0_z - h0_z;
    const double f1 = g1_z - h1_z;
    const double merit = f0 + beta * std::max(f1, 0.0);

    double violation = 0.0;
    if (has_prev && params.check_decrease) {
      const double phi_prev_here = f0 + prev_beta * std::max(f1, 0.0);
      const double allowance =
          prev_rule == InexactRule::summable
              ? prev_zeta * prev_zeta / (2.0 * prev_rho)
              : 0.25 * prev_rho * prev_prev_step * prev_prev_step;
      violation = phi_prev_here + 0.5 * prev_rho * prev_step * prev_step - allowance -
                  prev_phi;
      if (violation > params.decrease_slack) {
        ++trace.decrease_violations;
      } else {
        violation = 0.0;
      }
    }

    const Vec xi0 = p.h0.subgrad_at(z);
    const Vec xi1 = p.h1.subgrad_at(z);

    const double rho_k = variant == DcaVariant::ip_dca
                             ? params.rho
                             : 0.5 * beta * L + params.sigma;
    const double zeta_k = params.zeta(k);
    const bool use_summable =
        params.criterion == InexactRule::summable || k == 0;
    const double bound = use_summable
                             ? zeta_k
                             : (std::sqrt(2.0) / 2.0) *
                                   (variant == DcaVariant::ip_dca ? params.rho
                                                                  : params.sigma) *
                                   prev_step;

    SlackProgram sp = variant == DcaVariant::ip_dca
                          ? build_subproblem(p, z, xi0, xi1, beta, rho_k)
                          : build_linearized_subproblem(p, z, xi0, xi1, beta, rho_k);

    IpOptions ip_opts;
    ip_opts.tol = params.subproblem_tol;
    ip_opts.start = sp.start;
    KktCertificate cert;
    SubgradientCertificate details;
    bool solved = false;
    for (int attempt = 0; attempt < 3; ++attempt) {
      try {
        cert = ip_solve(sp.program, ip_opts);
      } catch (const Error& err) {
        std::ostringstream oss;
        oss << "subproblem solve failed at iteration " << k << ": " << err.what();
        throw SubproblemFailure(oss.str());
      }
      details = extract_certificate_details(cert, sp);
      if (details.e.norm() <= bound) {
        solved = true;
        break;
      }
      ip_opts.tol *= 0.1;
    }
    if (!solved) {
      std::ostringstream oss;
      oss << "subproblem certificate ||e|| = " << details.e.norm()
          << " exceeds the inexactness bound " << bound << " at iteration " << k;
      throw SubproblemFailure(oss.str());
    }

    const Vec z_next = details.z;
    const double t_next = compute_t(sp.map.gap_value(z_next));
    const double step = (z_next - z).norm();

    IterationRecord rec;
    rec.k = k;
    rec.beta = beta;
    rec.rho = rho_k;
    rec.t = t_next;
    rec.step_norm = step;
    rec.merit = merit;
    rec.e_norm = details.e.norm();
    rec.criterion_bound = bound;
    rec.decrease_violation = violation;

    const bool stop =
        params.stopping == StoppingRule::algorithm
            ? std::max(step, t_next) < params.tol
            : (t_next < params.paper_t_threshold &&
               step / (1.0 + z.norm()) < params.tol);

    if (!stop) {
      const double beta_next = update_penalty(beta, t_next, step, params.delta_beta);
      rec.penalty_increased = beta_next != beta;
      trace.iterations.push_back(rec);
      if (beta_next > params.beta_max) {
        std::ostringstream oss;
        oss << "penalty parameter " << beta_next << " exceeded the ceiling "
            << params.beta_max << " (constraint qualification suspect)";
        throw PenaltyUnbounded(oss.str());
      }
      prev_prev_step = prev_step;
      prev_step = step;
      prev_phi = merit;
      prev_beta = beta;
      prev_rho = variant == DcaVariant::ip_dca ? params.rho : params.sigma;
      prev_zeta = zeta_k;
      prev_rule = use_summable ? InexactRule::summable : InexactRule::step_proportional;
      has_prev = true;
      beta = beta_next;
      z = z_next;
      final_sp = std::move(sp);
      final_cert = std::move(cert);
      final_lambda_tilde = details.lambda_tilde;
      have_final = true;
      continue;
    }

    trace.iterations.push_back(rec);
    z = z_next;
    final_sp = std::move(sp);
    final_cert = std::move(cert);
    final_lambda_tilde = details.lambda_tilde;
    have_final = true;
    trace.termination = "converged";
    break;
  }

  if (trace.termination != "converged") {
    std::ostringstream oss;
    oss << "run_dca: no convergence within " << params.max_iter << " iterations";
    throw MaxIterationsError(oss.str());
  }

  result.z = z;
  result.lambda = beta * final_lambda_tilde;
  trace.beta_final = beta;
  if (have_final) {
    trace.final_kkt = dc_kkt_residual(p, final_cert, final_sp, z, result.lambda);
  }
  return result;
}

}  // namespace bidca
