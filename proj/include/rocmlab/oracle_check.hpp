#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rocmlab {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct OracleReport {
  std::vector<CheckResult> checks;

  bool passed() const;
  std::vector<std::string> failures() const;
  nlohmann::json to_json() const;
};

struct OracleCheckOptions {
  /// Test hook: evaluate the Hellinger closed form with the wrong exponent
  /// sign so the quadrature comparison must fail.
  bool corrupt_hellinger_sign = false;
  std::uint64_t seed = 0;
};

/// Closed forms against quadrature, Monte-Carlo JS, the linear-Gaussian
/// optimum against grid search and finite differences, and both trainers
/// against the analytic optimum.
OracleReport run_oracle_checks(const OracleCheckOptions& opts = {});

}  // namespace rocmlab
