#pragma once

#include "bidca/models.hpp"

#include <iosfwd>

namespace bidca::verify {

struct Item {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct Report {
  std::vector<Item> items;
  bool all_pass() const;
};

/// Runs the library's invariant suites: oracle subgradient checks (with a
/// planted fault that must be caught), projection and hinge properties,
/// dual sensitivity of the interior-point engine, value-function convexity
/// sampling, parser round-trips and split determinism. Scope "full" adds a
/// small synthetic cross-validation run with the sufficient-decrease
/// assertions enabled and finite-difference checks of the value-function
/// subgradient.
Report run(const std::string& scope);

void print(const Report& report, std::ostream& out);

}  // namespace bidca::verify
