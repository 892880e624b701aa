#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "rocmlab/consistency.hpp"
#include "rocmlab/divergences.hpp"
#include "rocmlab/errors.hpp"
#include "rocmlab/random.hpp"

using namespace rocmlab;

namespace {

struct MeanSe {
  double mean;
  double se;
};

template <class F>
MeanSe monte_carlo(std::size_t n, std::uint64_t seed, F&& per_sample) {
  Rng rng(seed);
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = per_sample(rng);
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, std::sqrt((s2 / n - m * m) / (n - 1))};
}

double log_normal_2d(double x0, double x1, double m0, double m1, double sigma) {
  const double q = ((x0 - m0) * (x0 - m0) + (x1 - m1) * (x1 - m1)) / (sigma * sigma);
  return -0.5 * q - std::log(2.0 * std::numbers::pi * sigma * sigma);
}

NetworkConfig small_net() {
  NetworkConfig c;
  c.hidden = 16;
  c.layers = 2;
  c.frequencies = 3;
  c.cond_dim = 4;
  c.zero_output = false;
  return c;
}

}  // namespace

TEST_CASE("closed forms vanish for identical distributions") {
  const GaussianPair same{{0.4, -0.2}, {0.4, -0.2}, 0.7};
  CHECK(kl_closed(same) == 0.0);
  CHECK(reverse_kl_closed(same) == 0.0);
  CHECK(hellinger_closed(same) == 0.0);
  CHECK(fisher_closed(same) == 0.0);
}

TEST_CASE("closed forms reject non-positive sigma") {
  for (double s : {0.0, -1.0}) {
    const GaussianPair bad{{0.0}, {1.0}, s};
    CHECK_THROWS(kl_closed(bad));
    CHECK_THROWS(hellinger_closed(bad));
    CHECK_THROWS(fisher_closed(bad));
  }
}

TEST_CASE("KL closed form against Monte Carlo of E_p1[log p1/p2]") {
  const GaussianPair pair{{1.0, 0.0}, {0.0, 0.0}, 1.0};
  CHECK(kl_closed(pair) == doctest::Approx(0.5).epsilon(1e-15));
  const MeanSe mc = monte_carlo(100000, 31, [&](Rng& rng) {
    const double x0 = 1.0 + rng.normal(), x1 = rng.normal();
    return log_normal_2d(x0, x1, 1.0, 0.0, 1.0) - log_normal_2d(x0, x1, 0.0, 0.0, 1.0);
  });
  CHECK(std::abs(mc.mean - 0.5) < 3 * mc.se);
  // Doubling sigma divides the value by four.
  CHECK(kl_closed({{1.0, 0.0}, {0.0, 0.0}, 2.0}) == doctest::Approx(0.5 / 4));
}

TEST_CASE("Hellinger closed form against Monte Carlo of the half squared-root-ratio gap") {
  const GaussianPair pair{{2.0, 0.0}, {0.0, 0.0}, 1.0};
  CHECK(hellinger_closed(pair) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-15));
  CHECK(hellinger_closed(pair) == doctest::Approx(0.39347).epsilon(1e-5));
  const MeanSe mc = monte_carlo(100000, 32, [&](Rng& rng) {
    const double x0 = rng.normal(), x1 = rng.normal();  // x ~ p2
    const double log_ratio = log_normal_2d(x0, x1, 2.0, 0.0, 1.0) - log_normal_2d(x0, x1, 0.0, 0.0, 1.0);
    const double g = std::exp(0.5 * log_ratio) - 1.0;
    return 0.5 * g * g;
  });
  CHECK(std::abs(mc.mean - hellinger_closed(pair)) < 3 * mc.se);
  // Bounded and monotone in the mean gap.
  double previous = 0.0;
  for (double gap : {0.5, 1.0, 2.0, 4.0, 8.0, 40.0}) {
    const double h = hellinger_closed({{gap}, {0.0}, 1.0});
    CHECK(h > previous);
    CHECK(h <= 1.0);
    previous = h;
  }
  CHECK(previous == doctest::Approx(1.0));
}

TEST_CASE("Fisher closed form against Monte Carlo of the score gap") {
  const GaussianPair pair{{1.0, 0.0}, {0.0, 0.0}, 1.0};
  CHECK(fisher_closed(pair) == 1.0);
  const MeanSe mc = monte_carlo(100000, 33, [&](Rng& rng) {
    const double x0 = rng.normal(), x1 = rng.normal();  // x ~ p2
    const double g0 = (1.0 - x0) - (0.0 - x0), g1 = (0.0 - x1) - (0.0 - x1);
    return g0 * g0 + g1 * g1;
  });
  CHECK(std::abs(mc.mean - 1.0) <= 3 * mc.se + 1e-12);
  for (double s : {0.5, 1.3}) {
    const GaussianPair p{{0.3, 1.0}, {-0.4, 0.2}, s};
    CHECK(fisher_closed(p) == doctest::Approx(2.0 * kl_closed(p) / (s * s)).epsilon(1e-14));
  }
}

TEST_CASE("JS Monte Carlo") {
  Rng rng(4);
  Samples z(1000, 1);
  for (double& v : z.values) v = rng.normal();
  CHECK(js_mc({{0.7}, {0.7}, 1.3}, z) == 0.0);

  Samples big(100000, 1);
  for (double& v : big.values) v = rng.normal();
  const GaussianPair pair{{0.0}, {3.0}, 1.0};
  const double exact = divergence_oracle_quadrature(pair, js_generator());
  CHECK(exact > 0.0);
  CHECK(exact < std::log(2.0));
  CHECK(js_mc(pair, big) == doctest::Approx(exact).epsilon(0.15));
  // Far-apart distributions saturate at log 2 without overflow.
  CHECK(js_mc({{0.0}, {200.0}, 1.0}, big) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(js_generator_from_log(0.0) == 0.0);
}

TEST_CASE("quadrature oracle against closed forms") {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const GaussianPair pair{{rng.uniform(-2, 2)}, {rng.uniform(-2, 2)}, rng.uniform(0.5, 2.0)};
    CHECK(std::abs(divergence_oracle_quadrature(pair, kl_generator()) - kl_closed(pair)) < 1e-6);
    CHECK(std::abs(divergence_oracle_quadrature(pair, hellinger_generator()) - hellinger_closed(pair)) < 1e-6);
    CHECK(std::abs(divergence_oracle_quadrature(pair, fisher_integrand()) - fisher_closed(pair)) < 1e-6);
    CHECK(divergence_oracle_quadrature(pair, zero_generator()) == 0.0);
  }
  const GaussianPair pair{{0.0}, {1.0}, 1.0};
  auto blowup = [](const DensityPoint& p) { return 1.0 / (p.x * p.x * p.x); };
  CHECK_THROWS_AS(divergence_oracle_quadrature(pair, blowup), NumericError);
}

TEST_CASE("batched forms agree with the closed forms row by row") {
  const Tensor mu1 = Tensor::from({2, 2}, {0.1, 0.2, -1.0, 0.5});
  const Tensor mu2 = Tensor::from({2, 2}, {0.4, -0.3, 0.0, 0.0});
  const double s = 0.8;
  const Tensor kl = kl_divergence(mu1, mu2, s);
  const Tensor he = hellinger_divergence(mu1, mu2, s);
  const Tensor fi = fisher_divergence(mu1, mu2, s);
  for (std::size_t i = 0; i < 2; ++i) {
    const GaussianPair p{{mu1[2 * i], mu1[2 * i + 1]}, {mu2[2 * i], mu2[2 * i + 1]}, s};
    CHECK(kl[i] == doctest::Approx(kl_closed(p)));
    CHECK(he[i] == doctest::Approx(hellinger_closed(p)));
    CHECK(fi[i] == doctest::Approx(fisher_closed(p)));
  }
  const Tensor none = divergence(DivergenceKind::None, mu1, mu2, s);
  CHECK(none[0] == 0.0);
  CHECK(none[1] == 0.0);
}

TEST_CASE("divergence kinds parse and reject unknown names") {
  CHECK(parse_divergence_kind("kl") == DivergenceKind::KL);
  CHECK(parse_divergence_kind("hellinger") == DivergenceKind::Hellinger);
  CHECK(parse_divergence_kind("fisher") == DivergenceKind::Fisher);
  CHECK(parse_divergence_kind("js") == DivergenceKind::JS);
  CHECK(parse_divergence_kind("none") == DivergenceKind::None);
  CHECK_THROWS_AS(parse_divergence_kind("tv"), ConfigError);
  DivergenceSpec spec;
  spec.kind = DivergenceKind::None;
  spec.beta = 3.0;
  CHECK(spec.effective_beta() == 0.0);
  spec.beta = -1.0;
  spec.kind = DivergenceKind::KL;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("trajectory divergence of identical models is zero") {
  const NoiseSchedule sched(6);
  const ConsistencyModel model(small_net(), sched, 3);
  const auto ref = frozen_copy(model);
  const std::vector<int> conds{0, 1, kNullCondition};
  const TrajectoryRecord traj = generate(model, sched, conds, 1.0, 5);
  for (auto kind : {DivergenceKind::KL, DivergenceKind::ReverseKL, DivergenceKind::Hellinger, DivergenceKind::Fisher,
                    DivergenceKind::JS, DivergenceKind::None}) {
    DivergenceSpec spec;
    spec.kind = kind;
    Rng rng(1);
    const Tensor d = trajectory_divergence(spec, traj, model, *ref, sched, {}, &rng);
    REQUIRE(d.numel() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(d[i] == 0.0);
  }
}

TEST_CASE("single-step trajectories carry no divergence") {
  const NoiseSchedule sched(1);
  const ConsistencyModel model(small_net(), sched, 3);
  const ConsistencyModel other(small_net(), sched, 4);
  const std::vector<int> conds{0, 1};
  const TrajectoryRecord traj = generate(model, sched, conds, 0.0, 5);
  for (auto kind : {DivergenceKind::KL, DivergenceKind::Hellinger, DivergenceKind::Fisher, DivergenceKind::JS}) {
    DivergenceSpec spec;
    spec.kind = kind;
    const Tensor d = trajectory_divergence(spec, traj, model, other, sched);
    CHECK(d[0] == 0.0);
    CHECK(d[1] == 0.0);
  }
}

TEST_CASE("KL trajectory divergence is quadratic near the reference") {
  const NoiseSchedule sched(8);
  const ConsistencyModel base(small_net(), sched, 12);
  const auto ref = frozen_copy(base);
  const std::vector<int> conds{0, 1, 0, 1};
  DivergenceSpec spec;
  spec.kind = DivergenceKind::KL;
  std::vector<double> values;
  const std::vector<double> deltas{1e-3, 2e-3, 4e-3};
  for (double delta : deltas) {
    ConsistencyModel model = base;
    // Perturb one weight of the output layer.
    auto& out_w = model.parameters()[model.parameters().size() - 2];
    out_w.mutable_data()[0] += delta;
    const TrajectoryRecord traj = generate(model, sched, conds, 0.0, 9);
    values.push_back(mean(trajectory_divergence(spec, traj, model, *ref, sched)).item());
  }
  // Least-squares slope of log D against log delta.
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    mx += std::log(deltas[i]) / 3;
    my += std::log(values[i]) / 3;
  }
  double num = 0, den = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    num += (std::log(deltas[i]) - mx) * (std::log(values[i]) - my);
    den += (std::log(deltas[i]) - mx) * (std::log(deltas[i]) - mx);
  }
  CHECK(num / den == doctest::Approx(2.0).epsilon(0.1));
}
