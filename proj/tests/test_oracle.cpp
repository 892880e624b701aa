#include <cmath>
#include <vector>

#include "doctest.h"
#include "rocmlab/errors.hpp"
#include "rocmlab/oracle.hpp"
#include "rocmlab/oracle_check.hpp"

using namespace rocmlab;

namespace {

const std::vector<double> kRef{0.2, -0.1};
const std::vector<double> kTarget{1.0, -0.5};

double dist(const std::vector<double>& a, const std::vector<double>& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

TEST_CASE("trajectory constants of the eight-step cosine grid") {
  // Values from high-precision sums of alpha^2/(2 sigma^2) and alpha^2/sigma^4
  // over t = 1/8 .. 7/8.
  CHECK(kl_trajectory_constant(NoiseSchedule(8)) == doctest::Approx(17.5).epsilon(1e-14));
  CHECK(fisher_trajectory_constant(NoiseSchedule(8)) == doctest::Approx(714.0).epsilon(1e-13));
  CHECK(kl_trajectory_constant(NoiseSchedule(1)) == 0.0);
}

TEST_CASE("objective maximum without regularization is at the target") {
  const NoiseSchedule sched(8);
  CHECK(oracle_objective(kTarget, kRef, kTarget, 0.0, sched) == 0.0);
  CHECK(oracle_objective(kRef, kRef, kTarget, 0.0, sched) < 0.0);
  CHECK(oracle_optimum(kRef, kTarget, 0.0, sched) == kTarget);
}

TEST_CASE("large beta pulls the optimum to the reference") {
  const NoiseSchedule sched(8);
  double previous = INFINITY;
  for (double beta : {1.0, 10.0, 1e3, 1e6}) {
    const double d = dist(oracle_optimum(kRef, kTarget, beta, sched), kRef);
    CHECK(d < previous);
    previous = d;
  }
  CHECK(previous < 1e-6);
}

TEST_CASE("closed-form optimum against grid search, first-order condition and finite differences") {
  const NoiseSchedule sched(8);
  for (double beta : {0.0, 0.01, 0.1, 1.0}) {
    const OracleTask task{kRef, kTarget, beta, DivergenceKind::KL, sched};
    const auto star = task.optimum();
    const double c = 17.5;
    CHECK(star[0] == doctest::Approx((kTarget[0] + beta * c * kRef[0]) / (1 + beta * c)));
    CHECK(dist(grid_search_2d(task, star, 1e-3, 0.2).argmax, star) <= 1e-3);
    for (double g : task.gradient(star)) CHECK(std::abs(g) < 1e-12);
    const std::vector<double> theta{-0.3, 0.8};
    const auto g = oracle_grad(theta, kRef, kTarget, beta, sched);
    for (std::size_t j = 0; j < 2; ++j) {
      const double h = 1e-5;
      auto up = theta, down = theta;
      up[j] += h;
      down[j] -= h;
      const double fd = (oracle_objective(up, kRef, kTarget, beta, sched) -
                         oracle_objective(down, kRef, kTarget, beta, sched)) / (2 * h);
      CHECK(std::abs(g[j] - fd) / std::max(1.0, std::abs(fd)) < 1e-8);
    }
  }
}

TEST_CASE("Hellinger and Fisher optima") {
  const NoiseSchedule sched(8);
  for (auto [kind, beta] : {std::pair{DivergenceKind::Hellinger, 1.0}, std::pair{DivergenceKind::Fisher, 1e-3}}) {
    const OracleTask task{kRef, kTarget, beta, kind, sched};
    const auto star = task.optimum();
    CHECK(dist(grid_search_2d(task, star, 1e-3, 0.2).argmax, star) <= 1e-3);
    for (double g : task.gradient(star)) CHECK(std::abs(g) < 1e-9);
  }
  const OracleTask js{kRef, kTarget, 0.1, DivergenceKind::JS, sched};
  CHECK_THROWS_AS(js.optimum(), ConfigError);
}

TEST_CASE("oracle suite passes and detects an injected fault") {
  const OracleReport clean = run_oracle_checks();
  for (const auto& c : clean.checks) CHECK_MESSAGE(c.passed, c.name << " " << c.detail);
  CHECK(clean.passed());
  const auto doc = clean.to_json();
  CHECK(doc["checks"].size() == clean.checks.size());
  CHECK(doc["checks"][0].contains("measured"));
  CHECK(doc["checks"][0].contains("expected"));

  OracleCheckOptions opts;
  opts.corrupt_hellinger_sign = true;
  const OracleReport broken = run_oracle_checks(opts);
  CHECK_FALSE(broken.passed());
  bool hellinger_failed = false;
  for (const auto& c : broken.checks) {
    if (c.name == "quadrature.hellinger") hellinger_failed = !c.passed;
  }
  CHECK(hellinger_failed);
}
