#include "bidca/ip.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

namespace bidca {

namespace {

using Triplet = Eigen::Triplet<double>;

struct State {
  Vec z;
  Vec s;    // row slacks, > 0
  Vec lam;  // row duals, > 0
  Vec zl;   // duals of finite lower bounds (compact)
  Vec zu;   // duals of finite upper bounds (compact)
};

struct Residuals {
  Vec rd;       // dual residual, size n
  Vec rp;       // r(z) + s, size m
  Vec cs;       // s .* lam
  Vec cl;       // (z - lo) .* zl (compact)
  Vec cu;       // (hi - z) .* zu (compact)
  double grad_scale = 1.0;
  double violation = 0.0;  // max(r(z), 0) over rows and box

  double comp_inf() const {
    double c = cs.size() ? cs.cwiseAbs().maxCoeff() : 0.0;
    if (cl.size()) c = std::max(c, cl.cwiseAbs().maxCoeff());
    if (cu.size()) c = std::max(c, cu.cwiseAbs().maxCoeff());
    return c;
  }
  double merit() const {
    double m = rd.size() ? rd.cwiseAbs().maxCoeff() : 0.0;
    if (rp.size()) m += rp.cwiseAbs().maxCoeff();
    return m + comp_inf();
  }
};

struct Direction {
  Vec dz, ds, dlam, dzl, dzu;
};

double min_ratio(const Vec& x, const Vec& dx) {
  double a = kInf;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (dx[i] < 0.0) a = std::min(a, -x[i] / dx[i]);
  }
  return a;
}

}  // namespace

SmoothFn quadratic_fn(SpMat Q, Vec c, double c0) {
  auto q = std::make_shared<SpMat>(std::move(Q));
  auto lin = std::make_shared<Vec>(std::move(c));
  SmoothFn f;
  f.value = [q, lin, c0](const Vec& z) {
    return 0.5 * z.dot(*q * z) + lin->dot(z) + c0;
  };
  f.grad = [q, lin](const Vec& z) { return Vec(*q * z + *lin); };
  f.hess = [q](const Vec&) { return *q; };
  return f;
}

KktCertificate ip_solve(const SmoothConvexProgram& p, const IpOptions& opts) {
  const Eigen::Index n = p.dim;
  const Eigen::Index mA = p.A.rows();
  const Eigen::Index mC = static_cast<Eigen::Index>(p.convex_rows.size());
  const Eigen::Index m = mA + mC;

  if (p.box.dim() != n) throw DimensionError("ip_solve: box dimension mismatch");
  if (mA > 0 && p.A.cols() != n) throw DimensionError("ip_solve: A column mismatch");
  if (p.b.size() != mA) throw DimensionError("ip_solve: b size mismatch");
  if (opts.tol <= 0.0) throw InvalidInput("ip_solve: tol must be positive");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p.box.lo[i] > p.box.hi[i]) throw InfeasibleError("ip_solve: empty box");
  }

  std::vector<Eigen::Index> lo_idx, hi_idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isfinite(p.box.lo[i])) lo_idx.push_back(i);
    if (std::isfinite(p.box.hi[i])) hi_idx.push_back(i);
  }
  const Eigen::Index nl = static_cast<Eigen::Index>(lo_idx.size());
  const Eigen::Index nu = static_cast<Eigen::Index>(hi_idx.size());
  const double pair_count = static_cast<double>(m + nl + nu);

  const auto eval_rows = [&](const Vec& z) {
    Vec r(m);
    if (mA > 0) r.head(mA) = p.A * z - p.b;
    for (Eigen::Index i = 0; i < mC; ++i) r[mA + i] = p.convex_rows[i].value(z);
    return r;
  };
  const auto eval_jacobian = [&](const Vec& z) {
    RowSpMat J(m, n);
    std::vector<Triplet> trips;
    trips.reserve(p.A.nonZeros() + static_cast<size_t>(mC) * static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < mA; ++i) {
      for (RowSpMat::InnerIterator it(p.A, i); it; ++it) {
        trips.emplace_back(static_cast<int>(i), static_cast<int>(it.col()), it.value());
      }
    }
    for (Eigen::Index i = 0; i < mC; ++i) {
      Vec g = p.convex_rows[i].grad(z);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (g[j] != 0.0) {
          trips.emplace_back(static_cast<int>(mA + i), static_cast<int>(j), g[j]);
        }
      }
    }
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
  };

  // Starting point: midpoint of finite boxes (or the caller's point pulled
  // strictly inside), unit duals, slacks covering the initial violation.
  State st;
  st.z.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lo = p.box.lo[i], hi = p.box.hi[i];
    double zi;
    if (std::isfinite(lo) && std::isfinite(hi)) {
      zi = 0.5 * (lo + hi);
    } else if (std::isfinite(lo)) {
      zi = lo + 1.0;
    } else if (std::isfinite(hi)) {
      zi = hi - 1.0;
    } else {
      zi = 0.0;
    }
    st.z[i] = zi;
  }
  if (opts.start) {
    if (opts.start->size() != n) throw DimensionError("ip_solve: start size mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lo = p.box.lo[i], hi = p.box.hi[i];
      double zi = (*opts.start)[i];
      if (std::isfinite(lo) && std::isfinite(hi)) {
        const double margin = 0.01 * std::min(1.0, hi - lo);
        zi = std::clamp(zi, lo + margin, hi - margin);
        if (hi == lo) zi = lo;
      } else if (std::isfinite(lo)) {
        zi = std::max(zi, lo + 1e-3 * (1.0 + std::abs(lo)));
      } else if (std::isfinite(hi)) {
        zi = std::min(zi, hi - 1e-3 * (1.0 + std::abs(hi)));
      }
      st.z[i] = zi;
    }
  }
  {
    Vec r0 = eval_rows(st.z);
    st.s = ((-r0).cwiseMax(1.0).array() + 1.0).matrix();
  }
  st.lam = Vec::Ones(m);
  st.zl = Vec::Ones(nl);
  st.zu = Vec::Ones(nu);

  Vec grad = p.objective.grad(st.z);
  Vec rows = eval_rows(st.z);
  RowSpMat J = eval_jacobian(st.z);

  const auto compute_residuals = [&](const State& w, const Vec& g, const Vec& r,
                                     const RowSpMat& Jw) {
    Residuals res;
    res.rd = g;
    if (m > 0) res.rd += Jw.transpose() * w.lam;
    for (Eigen::Index k = 0; k < nl; ++k) res.rd[lo_idx[k]] -= w.zl[k];
    for (Eigen::Index k = 0; k < nu; ++k) res.rd[hi_idx[k]] += w.zu[k];
    res.rp = r + w.s;
    res.cs = w.s.cwiseProduct(w.lam);
    res.cl.resize(nl);
    for (Eigen::Index k = 0; k < nl; ++k)
      res.cl[k] = (w.z[lo_idx[k]] - p.box.lo[lo_idx[k]]) * w.zl[k];
    res.cu.resize(nu);
    for (Eigen::Index k = 0; k < nu; ++k)
      res.cu[k] = (p.box.hi[hi_idx[k]] - w.z[hi_idx[k]]) * w.zu[k];
    res.grad_scale = 1.0 + g.cwiseAbs().maxCoeff();
    res.violation = m > 0 ? r.cwiseMax(0.0).maxCoeff() : 0.0;
    return res;
  };

  Residuals res = compute_residuals(st, grad, rows, J);

  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
  KktCertificate cert;
  cert.merit_history.reserve(opts.max_iter);

  int iter = 0;
  int stagnant = 0;
  double prev_violation = res.violation;
  for (; iter < opts.max_iter; ++iter) {
    const double mu =
        pair_count > 0.0
            ? (res.cs.sum() + res.cl.sum() + res.cu.sum()) / pair_count
            : 0.0;

    const double stat = res.rd.cwiseAbs().maxCoeff() / res.grad_scale;
    double pfeas = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double rowscale = 1.0 + (i < mA ? std::abs(p.b[i]) : 0.0);
      pfeas = std::max(pfeas, std::abs(res.rp[i]) / rowscale);
    }
    const double comp = res.comp_inf();
    if (log_level() == LogLevel::debug) {
      std::ostringstream oss;
      oss << "ip iter " << iter << ": stat " << stat << " pfeas " << pfeas
          << " comp " << comp << " mu " << mu;
      log_line(LogLevel::debug, oss.str());
    }
    if (stat <= opts.tol && pfeas <= opts.tol && comp <= opts.tol) {
      break;
    }

    // Infeasibility heuristic: dual blow-up with stalled primal violation.
    if (res.violation > 1e3 * opts.tol && res.violation > 0.999 * prev_violation) {
      ++stagnant;
    } else {
      stagnant = 0;
    }
    prev_violation = res.violation;
    if (stagnant > 25 && m > 0 && st.lam.maxCoeff() > 1e12) {
      throw InfeasibleError("ip_solve: constraints appear infeasible");
    }

    // KKT matrix  [ H + Dbox + dp   J' ; J   -(S/Lam) - dd ].
    SpMat H = p.objective.hess(st.z);
    const Eigen::Index N = n + m;
    std::vector<Triplet> trips;
    trips.reserve(static_cast<size_t>(H.nonZeros()) + static_cast<size_t>(J.nonZeros()) +
                  static_cast<size_t>(N) + 64);
    for (Eigen::Index k = 0; k < H.outerSize(); ++k) {
      for (SpMat::InnerIterator it(H, k); it; ++it) {
        if (it.row() >= it.col()) {
          trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                             it.value());
        }
      }
    }
    for (Eigen::Index i = 0; i < mC; ++i) {
      if (st.lam[mA + i] == 0.0) continue;
      SpMat Hi = p.convex_rows[i].hess(st.z);
      for (Eigen::Index k = 0; k < Hi.outerSize(); ++k) {
        for (SpMat::InnerIterator it(Hi, k); it; ++it) {
          if (it.row() >= it.col()) {
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                               st.lam[mA + i] * it.value());
          }
        }
      }
    }
    Vec dbox = Vec::Zero(n);
    for (Eigen::Index k = 0; k < nl; ++k) {
      dbox[lo_idx[k]] += st.zl[k] / (st.z[lo_idx[k]] - p.box.lo[lo_idx[k]]);
    }
    for (Eigen::Index k = 0; k < nu; ++k) {
      dbox[hi_idx[k]] += st.zu[k] / (p.box.hi[hi_idx[k]] - st.z[hi_idx[k]]);
    }

    double reg = opts.kkt_regularization;
    bool factored = false;
    SpMat K(N, N);
    for (int attempt = 0; attempt < 5 && !factored; ++attempt) {
      std::vector<Triplet> all = trips;
      for (Eigen::Index i = 0; i < n; ++i) {
        all.emplace_back(static_cast<int>(i), static_cast<int>(i), dbox[i] + reg);
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        for (RowSpMat::InnerIterator it(J, i); it; ++it) {
          all.emplace_back(static_cast<int>(n + i), static_cast<int>(it.col()),
                           it.value());
        }
        all.emplace_back(static_cast<int>(n + i), static_cast<int>(n + i),
                         -(st.s[i] / st.lam[i]) - reg);
      }
      K.setFromTriplets(all.begin(), all.end());
      ldlt.compute(K);
      if (ldlt.info() == Eigen::Success) {
        factored = true;
      } else {
        reg = std::max(reg * 100.0, 1e-8);
      }
    }
    if (!factored) {
      throw NumericalBreakdownError("ip_solve: KKT factorization failed");
    }

    const auto solve_raw = [&](const Vec& rd, const Vec& rp, const Vec& rc_s,
                               const Vec& rc_l, const Vec& rc_u) {
      Direction d;
      Vec rhs(N);
      rhs.head(n) = -rd;
      for (Eigen::Index k = 0; k < nl; ++k) {
        rhs[lo_idx[k]] += rc_l[k] / (st.z[lo_idx[k]] - p.box.lo[lo_idx[k]]);
      }
      for (Eigen::Index k = 0; k < nu; ++k) {
        rhs[hi_idx[k]] -= rc_u[k] / (p.box.hi[hi_idx[k]] - st.z[hi_idx[k]]);
      }
      for (Eigen::Index i = 0; i < m; ++i) {
        rhs[n + i] = -rp[i] - rc_s[i] / st.lam[i];
      }

      Vec sol = ldlt.solve(rhs);
      if (!sol.allFinite()) {
        throw NumericalBreakdownError("ip_solve: singular KKT solve");
      }
      d.dz = sol.head(n);
      d.dlam = sol.tail(m);
      d.ds = m > 0 ? Vec(-rp - J * d.dz) : Vec(0);
      d.dzl.resize(nl);
      for (Eigen::Index k = 0; k < nl; ++k) {
        const double gap = st.z[lo_idx[k]] - p.box.lo[lo_idx[k]];
        d.dzl[k] = (rc_l[k] - st.zl[k] * d.dz[lo_idx[k]]) / gap;
      }
      d.dzu.resize(nu);
      for (Eigen::Index k = 0; k < nu; ++k) {
        const double gap = p.box.hi[hi_idx[k]] - st.z[hi_idx[k]];
        d.dzu[k] = (rc_u[k] + st.zu[k] * d.dz[hi_idx[k]]) / gap;
      }
      return d;
    };
    const auto solve_direction = [&](double sigma_mu, const Vec& corr_s,
                                     const Vec& corr_l, const Vec& corr_u) {
      const Vec rc_s = ((-res.cs).array() + sigma_mu).matrix() - corr_s;
      const Vec rc_l = ((-res.cl).array() + sigma_mu).matrix() - corr_l;
      const Vec rc_u = ((-res.cu).array() + sigma_mu).matrix() - corr_u;
      return solve_raw(res.rd, res.rp, rc_s, rc_l, rc_u);
    };

    const auto primal_step = [&](const Direction& d) {
      double a = 1.0;
      a = std::min(a, min_ratio(st.s, d.ds));
      for (Eigen::Index k = 0; k < nl; ++k) {
        const double gap = st.z[lo_idx[k]] - p.box.lo[lo_idx[k]];
        if (d.dz[lo_idx[k]] < 0.0) a = std::min(a, -gap / d.dz[lo_idx[k]]);
      }
      for (Eigen::Index k = 0; k < nu; ++k) {
        const double gap = p.box.hi[hi_idx[k]] - st.z[hi_idx[k]];
        if (d.dz[hi_idx[k]] > 0.0) a = std::min(a, gap / d.dz[hi_idx[k]]);
      }
      return a;
    };
    const auto dual_step = [&](const Direction& d) {
      double a = 1.0;
      a = std::min(a, min_ratio(st.lam, d.dlam));
      a = std::min(a, min_ratio(st.zl, d.dzl));
      a = std::min(a, min_ratio(st.zu, d.dzu));
      return a;
    };

    // Predictor.
    const Vec zero_s = Vec::Zero(m), zero_l = Vec::Zero(nl), zero_u = Vec::Zero(nu);
    Direction aff = solve_direction(0.0, zero_s, zero_l, zero_u);
    double sigma = 0.0;
    if (pair_count > 0.0 && mu > 0.0) {
      const double ap = primal_step(aff);
      const double ad = dual_step(aff);
      double mu_aff = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        mu_aff += (st.s[i] + ap * aff.ds[i]) * (st.lam[i] + ad * aff.dlam[i]);
      }
      for (Eigen::Index k = 0; k < nl; ++k) {
        mu_aff += (st.z[lo_idx[k]] + ap * aff.dz[lo_idx[k]] - p.box.lo[lo_idx[k]]) *
                  (st.zl[k] + ad * aff.dzl[k]);
      }
      for (Eigen::Index k = 0; k < nu; ++k) {
        mu_aff += (p.box.hi[hi_idx[k]] - st.z[hi_idx[k]] - ap * aff.dz[hi_idx[k]]) *
                  (st.zu[k] + ad * aff.dzu[k]);
      }
      mu_aff /= pair_count;
      sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);
    }

    // Corrector.
    Vec corr_s = aff.ds.cwiseProduct(aff.dlam);
    Vec corr_l(nl), corr_u(nu);
    for (Eigen::Index k = 0; k < nl; ++k) corr_l[k] = aff.dz[lo_idx[k]] * aff.dzl[k];
    for (Eigen::Index k = 0; k < nu; ++k) corr_u[k] = -aff.dz[hi_idx[k]] * aff.dzu[k];
    Direction dir = solve_direction(sigma * mu, corr_s, corr_l, corr_u);

    const double tau = opts.fraction_to_boundary;
    const auto step_of = [&](const Direction& d) {
      return std::min(1.0, tau * std::min(primal_step(d), dual_step(d)));
    };
    double alpha = step_of(dir);

    // Multiple centrality correctors: push the complementarity products the
    // tentative step would leave outside [0.1, 10] x (sigma mu) back toward
    // that band. Degenerate corners otherwise pin the step length near zero.
    const double sigma_mu = std::max(sigma * mu, 1e-4 * mu);
    for (int extra = 0; extra < 3 && alpha < 0.9 && pair_count > 0.0; ++extra) {
      const double ahat = std::min(1.0, alpha + 0.3);
      Vec ts = Vec::Zero(m), tl = Vec::Zero(nl), tu = Vec::Zero(nu);
      const auto target = [&](double v) {
        if (v < 0.1 * sigma_mu) return std::min(0.1 * sigma_mu - v, 10.0 * sigma_mu);
        if (v > 10.0 * sigma_mu) return std::max(10.0 * sigma_mu - v, -10.0 * sigma_mu);
        return 0.0;
      };
      for (Eigen::Index i = 0; i < m; ++i) {
        ts[i] = target((st.s[i] + ahat * dir.ds[i]) * (st.lam[i] + ahat * dir.dlam[i]));
      }
      for (Eigen::Index k = 0; k < nl; ++k) {
        tl[k] = target((st.z[lo_idx[k]] + ahat * dir.dz[lo_idx[k]] -
                        p.box.lo[lo_idx[k]]) *
                       (st.zl[k] + ahat * dir.dzl[k]));
      }
      for (Eigen::Index k = 0; k < nu; ++k) {
        tu[k] = target((p.box.hi[hi_idx[k]] - st.z[hi_idx[k]] -
                        ahat * dir.dz[hi_idx[k]]) *
                       (st.zu[k] + ahat * dir.dzu[k]));
      }
      if (ts.cwiseAbs().sum() + tl.cwiseAbs().sum() + tu.cwiseAbs().sum() == 0.0) {
        break;
      }
      const Direction fix = solve_raw(Vec::Zero(n), Vec::Zero(m), ts, tl, tu);
      Direction merged = dir;
      merged.dz += fix.dz;
      merged.ds += fix.ds;
      merged.dlam += fix.dlam;
      merged.dzl += fix.dzl;
      merged.dzu += fix.dzu;
      const double am = step_of(merged);
      if (am < alpha + 0.05) break;
      dir = std::move(merged);
      alpha = am;
    }

    if (alpha < 0.2 && pair_count > 0.0) {
      // still blocked: a pure centering direction restores room along the
      // central path
      const Vec zs = Vec::Zero(m), zsl = Vec::Zero(nl), zsu = Vec::Zero(nu);
      Direction center = solve_direction(std::max(sigma, 0.5) * mu, zs, zsl, zsu);
      const double ac = step_of(center);
      if (ac > alpha) {
        dir = std::move(center);
        alpha = ac;
      }
    }

    // Convex rows may grow the slack-consistency residual transiently along
    // an accepted step (the slack lags the curved row); only a catastrophic
    // overshoot is cut back.
    const double newton_old =
        (res.rd.size() ? res.rd.cwiseAbs().maxCoeff() : 0.0) +
        (res.rp.size() ? res.rp.cwiseAbs().maxCoeff() : 0.0);
    State best;
    Residuals best_res;
    bool accepted = false;
    for (int bt = 0; bt < 8; ++bt) {
      State trial = st;
      trial.z += alpha * dir.dz;
      trial.s += alpha * dir.ds;
      trial.lam += alpha * dir.dlam;
      trial.zl += alpha * dir.dzl;
      trial.zu += alpha * dir.dzu;
      Vec g_t = p.objective.grad(trial.z);
      Vec r_t = eval_rows(trial.z);
      RowSpMat J_t = eval_jacobian(trial.z);
      Residuals res_t = compute_residuals(trial, g_t, r_t, J_t);
      const double newton_t =
          (res_t.rd.size() ? res_t.rd.cwiseAbs().maxCoeff() : 0.0) +
          (res_t.rp.size() ? res_t.rp.cwiseAbs().maxCoeff() : 0.0);
      if (newton_t <= 10.0 * (newton_old + 1.0) || bt == 7) {
        best = std::move(trial);
        best_res = std::move(res_t);
        grad = std::move(g_t);
        rows = std::move(r_t);
        J = std::move(J_t);
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      throw NumericalBreakdownError("ip_solve: no acceptable step");
    }
    if (log_level() == LogLevel::debug) {
      std::ostringstream oss;
      oss << "ip step alpha " << alpha;
      // identify the blocking ratio for diagnosis
      double worst = kInf;
      std::string who = "none";
      const auto upd = [&](double ratio, const std::string& tag) {
        if (ratio < worst) {
          worst = ratio;
          who = tag;
        }
      };
      for (Eigen::Index i = 0; i < m; ++i) {
        if (dir.ds[i] < 0.0) upd(-st.s[i] / dir.ds[i], "s" + std::to_string(i));
        if (dir.dlam[i] < 0.0) upd(-st.lam[i] / dir.dlam[i], "lam" + std::to_string(i));
      }
      for (Eigen::Index k = 0; k < nl; ++k) {
        const double gap = st.z[lo_idx[k]] - p.box.lo[lo_idx[k]];
        if (dir.dz[lo_idx[k]] < 0.0) upd(-gap / dir.dz[lo_idx[k]], "zlo" + std::to_string(lo_idx[k]));
        if (dir.dzl[k] < 0.0) upd(-st.zl[k] / dir.dzl[k], "dzl" + std::to_string(lo_idx[k]));
      }
      for (Eigen::Index k = 0; k < nu; ++k) {
        const double gap = p.box.hi[hi_idx[k]] - st.z[hi_idx[k]];
        if (dir.dz[hi_idx[k]] > 0.0) upd(gap / dir.dz[hi_idx[k]], "zhi" + std::to_string(hi_idx[k]));
        if (dir.dzu[k] < 0.0) upd(-st.zu[k] / dir.dzu[k], "dzu" + std::to_string(hi_idx[k]));
      }
      oss << " blocker " << who << " ratio " << worst;
      log_line(LogLevel::debug, oss.str());
    }
    st = std::move(best);
    res = std::move(best_res);
    cert.merit_history.push_back(res.merit());
  }

  if (iter >= opts.max_iter) {
    std::ostringstream oss;
    oss << "ip_solve: no solution to tolerance " << opts.tol << " within "
        << opts.max_iter << " iterations";
    throw MaxIterationsError(oss.str());
  }

  cert.primal = st.z;
  cert.row_duals = st.lam.head(mA);
  cert.convex_row_duals = st.lam.tail(mC);
  cert.box_lower_duals = Vec::Zero(n);
  for (Eigen::Index k = 0; k < nl; ++k) cert.box_lower_duals[lo_idx[k]] = st.zl[k];
  cert.box_upper_duals = Vec::Zero(n);
  for (Eigen::Index k = 0; k < nu; ++k) cert.box_upper_duals[hi_idx[k]] = st.zu[k];
  cert.stationarity_residual = res.rd.cwiseAbs().maxCoeff();
  cert.complementarity_residual = res.comp_inf();
  cert.feasibility_residual = res.violation;
  cert.objective = p.objective.value(st.z);
  cert.iterations = iter;
  return cert;
}

}  // namespace bidca
