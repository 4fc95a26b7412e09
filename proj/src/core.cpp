#include "bidca/core.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

namespace bidca {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw InvalidInput(std::string("non-finite value in ") + what);
  }
}

void require_finite(const Vec& v, const char* what) {
  if (!v.allFinite()) {
    throw InvalidInput(std::string("non-finite entry in ") + what);
  }
}

Box Box::bounds(Vec lo, Vec hi) {
  if (lo.size() != hi.size()) {
    throw DimensionError("box bounds dimension mismatch");
  }
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (std::isnan(lo[i]) || std::isnan(hi[i]) || lo[i] > hi[i]) {
      throw InvalidInput("box requires lo <= hi componentwise");
    }
  }
  return Box{std::move(lo), std::move(hi)};
}

Box Box::unbounded(Eigen::Index dim) {
  return Box{Vec::Constant(dim, -kInf), Vec::Constant(dim, kInf)};
}

Box Box::nonnegative(Eigen::Index dim) {
  return Box{Vec::Zero(dim), Vec::Constant(dim, kInf)};
}

Box Box::uniform(Eigen::Index dim, double lo, double hi) {
  return bounds(Vec::Constant(dim, lo), Vec::Constant(dim, hi));
}

bool Box::contains(const Vec& z, double tol) const {
  if (z.size() != dim()) throw DimensionError("box containment dimension mismatch");
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (z[i] < lo[i] - tol || z[i] > hi[i] + tol) return false;
  }
  return true;
}

Box Box::stacked(const Box& other) const {
  Box out;
  out.lo.resize(dim() + other.dim());
  out.hi.resize(dim() + other.dim());
  out.lo << lo, other.lo;
  out.hi << hi, other.hi;
  return out;
}

Vec project_box(const Vec& z, const Box& b) {
  if (z.size() != b.dim()) throw DimensionError("project_box dimension mismatch");
  require_finite(z, "project_box input");
  return z.cwiseMax(b.lo).cwiseMin(b.hi);
}

double hinge(double u) {
  require_finite(u, "hinge argument");
  return std::max(1.0 - u, 0.0);
}

double hinge_subgrad(double u) {
  require_finite(u, "hinge argument");
  return u < 1.0 ? -1.0 : 0.0;
}

double ConvexOracle::eval(const Vec& z) const {
  require_finite(z, "oracle input");
  double v = value(z);
  require_finite(v, "oracle value");
  return v;
}

Vec ConvexOracle::subgrad_at(const Vec& z) const {
  require_finite(z, "oracle input");
  Vec g = subgrad(z);
  require_finite(g, "oracle subgradient");
  return g;
}

ConvexOracle zero_oracle(Eigen::Index dim) { return constant_oracle(dim, 0.0); }

ConvexOracle constant_oracle(Eigen::Index dim, double c) {
  ConvexOracle o;
  o.value = [c](const Vec&) { return c; };
  o.subgrad = [dim](const Vec&) { return Vec::Zero(dim); };
  o.smooth_modulus = 0.0;
  return o;
}

bool subgrad_check(const ConvexOracle& f, const Vec& z, const Vec& xi,
                   const std::vector<Vec>& probes, double tol) {
  const double fz = f.eval(z);
  for (const Vec& p : probes) {
    if (p.size() != z.size()) throw DimensionError("subgrad_check probe dimension mismatch");
    if (f.eval(p) < fz + xi.dot(p - z) - tol) return false;
  }
  return true;
}

AffineFn AffineFn::zero(Eigen::Index dim) {
  AffineFn f;
  f.a.resize(dim);
  return f;
}

AffineFn AffineFn::dense(const Vec& coeffs, double offset) {
  AffineFn f;
  f.a.resize(coeffs.size());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    if (coeffs[i] != 0.0) f.a.insert(i) = coeffs[i];
  }
  f.b = offset;
  return f;
}

double AffineFn::eval(const Vec& z) const {
  if (z.size() != a.size()) throw DimensionError("affine eval dimension mismatch");
  return a.dot(z) + b;
}

double ConvexStructure::eval(const Vec& z) const {
  require_finite(z, "structure input");
  double v = linear.eval(z);
  if (smooth) v += smooth->value(z);
  for (const HingeTerm& h : hinges) v += h.weight * std::max(h.arg.eval(z), 0.0);
  require_finite(v, "structure value");
  return v;
}

Vec ConvexStructure::subgrad_at(const Vec& z) const {
  require_finite(z, "structure input");
  Vec g = Vec::Zero(dim);
  g += Vec(linear.a);
  if (smooth) g += smooth->grad(z);
  for (const HingeTerm& h : hinges) {
    // max(arg, 0): gradient weight 1 when active, 0 at and below the kink.
    if (h.arg.eval(z) > 0.0) g += h.weight * Vec(h.arg.a);
  }
  require_finite(g, "structure subgradient");
  return g;
}

ConvexOracle ConvexStructure::oracle(double smooth_modulus) const {
  ConvexOracle o;
  ConvexStructure self = *this;
  o.value = [self](const Vec& z) { return self.eval(z); };
  o.subgrad = [self](const Vec& z) { return self.subgrad_at(z); };
  o.smooth_modulus = smooth_modulus;
  return o;
}

LogLevel log_level() {
  static LogLevel level = [] {
    const char* env = std::getenv("BIDCA_LOG");
    if (env == nullptr) return LogLevel::off;
    std::string s(env);
    if (s == "debug") return LogLevel::debug;
    if (s == "info") return LogLevel::info;
    return LogLevel::off;
  }();
  return level;
}

void log_line(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(log_level())) {
    std::cerr << "[bidca] " << msg << "\n";
  }
}

}  // namespace bidca
