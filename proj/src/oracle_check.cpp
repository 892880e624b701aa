#include "rocmlab/oracle_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rocmlab/divergences.hpp"
#include "rocmlab/oracle.hpp"
#include "rocmlab/random.hpp"
#include "rocmlab/trainers.hpp"

namespace rocmlab {

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - m) * (x - m);
  var /= static_cast<double>(v.size() - 1);
  return {m, std::sqrt(var / static_cast<double>(v.size()))};
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
  return std::sqrt(acc);
}

CheckResult upper_bound_check(std::string name, double measured, double bound, std::string detail = {}) {
  return {std::move(name), measured, 0.0, bound, measured <= bound, std::move(detail)};
}

const std::vector<double> kThetaRef{0.2, -0.1};
const std::vector<double> kTarget{1.0, -0.5};

/// Trains a LinearPolicy from theta_ref and returns the final theta.
std::vector<double> train_linear(TrainerKind trainer, DivergenceKind kind, double beta, double lr, std::size_t batch,
                                 std::size_t iterations, std::uint64_t seed,
                                 const std::function<void(const std::vector<double>&, std::size_t)>& on_iter = {}) {
  LinearPolicy policy(kThetaRef);
  const auto reference = frozen_copy(policy);
  TrainConfig cfg;
  cfg.trainer = trainer;
  cfg.iterations = iterations;
  cfg.batch = batch;
  cfg.lr = lr;
  cfg.seed = seed;
  cfg.divergence.kind = kind;
  cfg.divergence.beta = beta;
  RunMetrics metrics;
  TrainHooks hooks;
  if (on_iter) hooks.on_record = [&](const IterationRecord& rec) { on_iter(policy.theta(), rec.iter); };
  train(policy, *reference, NoiseSchedule(8), RewardModel::radial(kTarget), cfg, metrics, hooks);
  return policy.theta();
}

void quadrature_checks(OracleReport& report, const OracleCheckOptions& opts) {
  Rng rng(derive_seed(opts.seed, 1));
  double kl_err = 0.0, hel_err = 0.0, fisher_err = 0.0, min_value = 0.0;
  for (int i = 0; i < 50; ++i) {
    const GaussianPair pair{{rng.uniform(-2.0, 2.0)}, {rng.uniform(-2.0, 2.0)}, rng.uniform(0.5, 2.0)};
    const double kl = kl_closed(pair);
    double hel = hellinger_closed(pair);
    if (opts.corrupt_hellinger_sign) {
      hel = 1.0 - std::exp(pair.squared_distance() / (8.0 * pair.sigma * pair.sigma));
    }
    const double fisher = fisher_closed(pair);
    kl_err = std::max(kl_err, std::abs(kl - divergence_oracle_quadrature(pair, kl_generator())));
    hel_err = std::max(hel_err, std::abs(hel - divergence_oracle_quadrature(pair, hellinger_generator())));
    fisher_err = std::max(fisher_err, std::abs(fisher - divergence_oracle_quadrature(pair, fisher_integrand())));
    min_value = std::min({min_value, kl, hel, fisher});
  }
  report.checks.push_back(upper_bound_check("quadrature.kl", kl_err, 1e-6, "max |closed - quadrature| over 50 pairs"));
  report.checks.push_back(
      upper_bound_check("quadrature.hellinger", hel_err, 1e-6, "max |closed - quadrature| over 50 pairs"));
  report.checks.push_back(
      upper_bound_check("quadrature.fisher", fisher_err, 1e-6, "max |closed - quadrature| over 50 pairs"));
  report.checks.push_back({"closed_forms.non_negative", min_value, 0.0, 1e-12, min_value >= -1e-12,
                           "smallest closed-form value over 50 pairs"});
  const GaussianPair any{{0.3}, {-1.1}, 0.7};
  const double zero = divergence_oracle_quadrature(any, zero_generator());
  report.checks.push_back(upper_bound_check("quadrature.zero_generator", std::abs(zero), 0.0));
}

void js_checks(OracleReport& report, const OracleCheckOptions& opts) {
  constexpr std::size_t kSamples = 100000;
  const GaussianPair pair{{0.0}, {3.0}, 1.0};
  const double exact = divergence_oracle_quadrature(pair, js_generator());
  auto per_sample = [&](const GaussianPair& p, std::uint64_t seed) {
    Rng rng(seed);
    const auto z = rng.normals(kSamples);
    const Tensor noise = Tensor::from({kSamples, 1}, std::span<const double>(z));
    const Tensor mu1 = Tensor::full({kSamples, 1}, p.mu1[0]);
    const Tensor mu2 = Tensor::full({kSamples, 1}, p.mu2[0]);
    const Tensor f = js_divergence(mu1, mu2, p.sigma, std::span<const Tensor>(&noise, 1));
    return mean_se(std::vector<double>(f.data().begin(), f.data().end()));
  };
  const MeanSe fwd = per_sample(pair, derive_seed(opts.seed, 2));
  const MeanSe bwd = per_sample(GaussianPair{pair.mu2, pair.mu1, pair.sigma}, derive_seed(opts.seed, 3));
  report.checks.push_back({"js.monte_carlo_vs_quadrature", fwd.mean, exact, 3.0 * fwd.se,
                           std::abs(fwd.mean - exact) <= 3.0 * fwd.se, "1e5 samples, mu1=0, mu2=3, sigma=1"});
  const double sym_tol = 3.0 * std::hypot(fwd.se, bwd.se);
  report.checks.push_back({"js.symmetry", bwd.mean, fwd.mean, sym_tol, std::abs(fwd.mean - bwd.mean) <= sym_tol,
                           "JS(p2||p1) vs JS(p1||p2)"});
  report.checks.push_back(upper_bound_check("js.upper_bound", fwd.mean, std::log(2.0), "<= log 2"));
}

void linear_gaussian_checks(OracleReport& report) {
  const NoiseSchedule sched(8);
  for (double beta : {0.0, 0.01, 0.1}) {
    const OracleTask task{kThetaRef, kTarget, beta, DivergenceKind::KL, sched};
    const auto star = task.optimum();
    const std::string tag = "beta=" + std::to_string(beta);
    const auto grid = grid_search_2d(task, star, 1e-3, 0.5);
    report.checks.push_back(upper_bound_check("oracle.grid_search", distance(grid.argmax, star), 1e-3, tag));
    const auto g = task.gradient(star);
    report.checks.push_back(
        upper_bound_check("oracle.first_order_condition", std::max(std::abs(g[0]), std::abs(g[1])), 1e-12, tag));
    const std::vector<double> theta{0.7, 0.4};
    const auto ga = task.gradient(theta);
    double fd_err = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      constexpr double h = 1e-5;
      auto tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      const double fd = (task.objective(tp) - task.objective(tm)) / (2.0 * h);
      fd_err = std::max(fd_err, std::abs(ga[j] - fd) / std::max(1.0, std::abs(fd)));
    }
    report.checks.push_back(upper_bound_check("oracle.grad_vs_finite_difference", fd_err, 1e-8, tag));
  }
}

void estimator_checks(OracleReport& report, const OracleCheckOptions& opts) {
  const NoiseSchedule sched(8);
  const double beta = 0.1;
  const std::vector<double> theta{0.7, 0.4};
  LinearPolicy policy(theta);
  const LinearPolicy reference(kThetaRef);
  const auto expected = OracleTask{kThetaRef, kTarget, beta, DivergenceKind::KL, sched}.gradient(theta);
  TrainConfig cfg;
  cfg.divergence.kind = DivergenceKind::KL;
  cfg.divergence.beta = beta;
  const auto rm = RewardModel::radial(kTarget);

  // 1000 batches of 100 per-sample gradients: 1e5 samples in total.
  cfg.batch = 100;
  std::vector<std::vector<double>> rep(2), pg(2);
  for (int s = 0; s < 1000; ++s) {
    const std::uint64_t seed = derive_seed(opts.seed, 1000 + static_cast<std::uint64_t>(s));
    const auto gr = rocm_gradient(policy, reference, sched, rm, cfg, seed, cfg.pg_final_sigma);
    const auto gp = pg_gradient(policy, reference, sched, rm, cfg, seed, -0.5);
    for (std::size_t j = 0; j < 2; ++j) {
      rep[j].push_back(gr[j]);
      pg[j].push_back(gp[j]);
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    const MeanSe r = mean_se(rep[j]);
    const MeanSe p = mean_se(pg[j]);
    const std::string coord = "coordinate " + std::to_string(j);
    report.checks.push_back({"estimator.reparameterized_mean", r.mean, expected[j], 3.0 * r.se + 1e-12,
                             std::abs(r.mean - expected[j]) <= 3.0 * r.se + 1e-12, coord});
    report.checks.push_back({"estimator.reinforce_mean", p.mean, expected[j], 3.0 * p.se,
                             std::abs(p.mean - expected[j]) <= 3.0 * p.se, coord});
  }

  // Per-sample variance with 1e4 single-trajectory estimates.
  cfg.batch = 1;
  std::vector<std::vector<double>> rv(2), pv(2);
  for (int s = 0; s < 10000; ++s) {
    const std::uint64_t seed = derive_seed(opts.seed, 5000000 + static_cast<std::uint64_t>(s));
    const auto gr = rocm_gradient(policy, reference, sched, rm, cfg, seed, cfg.pg_final_sigma);
    const auto gp = pg_gradient(policy, reference, sched, rm, cfg, seed, -0.5);
    for (std::size_t j = 0; j < 2; ++j) {
      rv[j].push_back(gr[j]);
      pv[j].push_back(gp[j]);
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    const double var_r = std::pow(mean_se(rv[j]).se, 2) * 10000.0;
    const double var_p = std::pow(mean_se(pv[j]).se, 2) * 10000.0;
    report.checks.push_back({"estimator.variance_reinforce_exceeds_reparameterized", var_p, var_r, 0.0, var_p > var_r,
                             "coordinate " + std::to_string(j)});
  }
}

void trainer_checks(OracleReport& report, const OracleCheckOptions& opts) {
  const NoiseSchedule sched(8);
  struct Case {
    DivergenceKind kind;
    double beta;
    double tolerance;
  };
  const Case rocm_cases[] = {{DivergenceKind::KL, 0.0, 1e-2},      {DivergenceKind::KL, 0.01, 1e-2},
                             {DivergenceKind::KL, 0.1, 1e-2},      {DivergenceKind::Hellinger, 1.0, 2e-2},
                             {DivergenceKind::Fisher, 1e-3, 2e-2}};
  for (const Case& c : rocm_cases) {
    const auto star = OracleTask{kThetaRef, kTarget, c.beta, c.kind, sched}.optimum();
    const auto theta = train_linear(TrainerKind::Rocm, c.kind, c.beta, 0.05, 32, 2000, opts.seed);
    report.checks.push_back(upper_bound_check("trainer.rocm_converges", distance(theta, star), c.tolerance,
                                              to_string(c.kind) + " beta=" + std::to_string(c.beta)));
  }
  for (double beta : {0.0, 0.01, 0.1}) {
    const auto star = OracleTask{kThetaRef, kTarget, beta, DivergenceKind::KL, sched}.optimum();
    const auto theta = train_linear(TrainerKind::PolicyGradient, DivergenceKind::KL, beta, 0.01, 32, 2000, opts.seed);
    report.checks.push_back(upper_bound_check("trainer.pg_converges", distance(theta, star), 5e-2,
                                              "kl beta=" + std::to_string(beta)));
  }
}

}  // namespace

bool OracleReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::vector<std::string> OracleReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.passed) out.push_back(c.name + (c.detail.empty() ? "" : " (" + c.detail + ")"));
  }
  return out;
}

nlohmann::json OracleReport::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : checks) {
    list.push_back({{"name", c.name},
                    {"measured", c.measured},
                    {"expected", c.expected},
                    {"tolerance", c.tolerance},
                    {"passed", c.passed},
                    {"detail", c.detail}});
  }
  return {{"passed", passed()}, {"failures", failures()}, {"checks", list}};
}

OracleReport run_oracle_checks(const OracleCheckOptions& opts) {
  OracleReport report;
  quadrature_checks(report, opts);
  js_checks(report, opts);
  linear_gaussian_checks(report);
  estimator_checks(report, opts);
  trainer_checks(report, opts);
  return report;
}

}  // namespace rocmlab
