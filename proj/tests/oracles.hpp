// Test-side reference oracles: brute force, finite differences and a
// projected-gradient solver. Kept independent of the library solve paths
// they are used to check.
#pragma once

#include "bidca/core.hpp"
#include "bidca/data_io.hpp"

#include <cmath>
#include <functional>

namespace testing_oracles {

using bidca::Box;
using bidca::Vec;

/// Central finite-difference gradient.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& z,
                       double h = 1e-6) {
  Vec g(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    Vec zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    g[i] = (f(zp) - f(zm)) / (2.0 * h);
  }
  return g;
}

/// Projected gradient descent for smooth convex objectives over a box.
inline Vec projected_gradient(const std::function<double(const Vec&)>& f,
                              const std::function<Vec(const Vec&)>& grad,
                              const Box& box, Vec z, double step,
                              int max_iter = 200000, double tol = 1e-12) {
  z = bidca::project_box(z, box);
  for (int k = 0; k < max_iter; ++k) {
    const Vec next = bidca::project_box(z - step * grad(z), box);
    if ((next - z).norm() < tol) return next;
    z = next;
  }
  return z;
}

/// Exhaustive minimization over an axis-aligned grid; returns the best point.
inline Vec grid_minimize(const std::function<double(const Vec&)>& f, const Vec& lo,
                         const Vec& hi, Eigen::Index points_per_dim) {
  const Eigen::Index d = lo.size();
  std::vector<Eigen::Index> idx(static_cast<size_t>(d), 0);
  Vec best;
  double best_val = bidca::kInf;
  Vec z(d);
  while (true) {
    for (Eigen::Index i = 0; i < d; ++i) {
      const double frac = points_per_dim == 1
                              ? 0.0
                              : static_cast<double>(idx[static_cast<size_t>(i)]) /
                                    static_cast<double>(points_per_dim - 1);
      z[i] = lo[i] + frac * (hi[i] - lo[i]);
    }
    const double v = f(z);
    if (v < best_val) {
      best_val = v;
      best = z;
    }
    Eigen::Index carry = 0;
    while (carry < d) {
      if (++idx[static_cast<size_t>(carry)] < points_per_dim) break;
      idx[static_cast<size_t>(carry)] = 0;
      ++carry;
    }
    if (carry == d) break;
  }
  return best;
}

/// Six fixed 2-D points with labels, the shared small SVM fixture.
inline bidca::Dataset six_point_fixture() {
  bidca::Dataset d;
  d.n = 2;
  const double pts[6][3] = {
      {+1.0, 0.9, 0.7},  {+1.0, 0.6, 1.0},  {+1.0, 1.0, 0.2},
      {-1.0, -0.8, -0.6}, {-1.0, -0.5, -1.0}, {-1.0, -1.0, -0.3},
  };
  for (const auto& p : pts) {
    bidca::Sample s;
    s.label = p[0];
    s.features.emplace_back(1, p[1]);
    s.features.emplace_back(2, p[2]);
    d.rows.push_back(std::move(s));
  }
  return d;
}

/// Lower-level objective of the single-fold SVM at fixed mu: the hinge
/// training loss plus the scaled ridge term, minimized exactly over the
/// offset c for given w (the objective is piecewise linear in c, so the
/// optimum sits at a breakpoint).
inline double svm_primal_best_c(const bidca::Dataset& data, const Vec& w, double mu,
                                double* c_out = nullptr) {
  std::vector<double> breaks;
  for (const auto& row : data.rows) {
    double dot = 0.0;
    for (const auto& [idx, val] : row.features) dot += val * w[idx - 1];
    breaks.push_back(dot - row.label);  // margin hits 1 at c = a'w - b
  }
  breaks.push_back(0.0);
  const double ridge = w.squaredNorm() / (2.0 * mu);
  double best = bidca::kInf, best_c = 0.0;
  for (double c : breaks) {
    double loss = 0.0;
    for (const auto& row : data.rows) {
      double dot = 0.0;
      for (const auto& [idx, val] : row.features) dot += val * w[idx - 1];
      loss += std::max(1.0 - row.label * (dot - c), 0.0);
    }
    if (ridge + loss < best) {
      best = ridge + loss;
      best_c = c;
    }
  }
  if (c_out != nullptr) *c_out = best_c;
  return best;
}

}  // namespace testing_oracles
