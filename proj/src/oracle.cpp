#include "rocmlab/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "rocmlab/errors.hpp"

namespace rocmlab {

namespace {

struct StepCoefficients {
  double alpha;
  double sigma;
};

std::vector<StepCoefficients> step_coefficients(const NoiseSchedule& sched) {
  std::vector<StepCoefficients> out;
  for (int k = 2; k <= sched.steps(); ++k) {
    const double s = sched.sigma_at(k - 1);
    if (!(s > 0.0)) throw std::domain_error("zero sigma inside the k >= 2 divergence sum");
    out.push_back({sched.alpha_at(k - 1), s});
  }
  return out;
}

double squared_norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) acc += (a[j] - b[j]) * (a[j] - b[j]);
  return acc;
}

}  // namespace

double kl_trajectory_constant(const NoiseSchedule& sched) {
  double c = 0.0;
  for (const auto& s : step_coefficients(sched)) c += s.alpha * s.alpha / (2.0 * s.sigma * s.sigma);
  return c;
}

double fisher_trajectory_constant(const NoiseSchedule& sched) {
  double c = 0.0;
  for (const auto& s : step_coefficients(sched)) c += s.alpha * s.alpha / (s.sigma * s.sigma * s.sigma * s.sigma);
  return c;
}

void OracleTask::validate() const {
  if (theta_ref.empty() || theta_ref.size() != target.size()) throw ShapeError("oracle vectors differ in dimension");
  if (!(beta >= 0.0)) throw ConfigError("oracle beta must be non-negative");
  if (kind == DivergenceKind::JS) throw ConfigError("the linear-Gaussian oracle has no JS closed form");
}

double OracleTask::objective(const std::vector<double>& theta) const {
  validate();
  if (theta.size() != target.size()) throw ShapeError("theta has the wrong dimension");
  const double reward = -squared_norm_diff(theta, target);
  const double dist2 = squared_norm_diff(theta, theta_ref);
  switch (kind) {
    case DivergenceKind::None: return reward;
    case DivergenceKind::KL:
    case DivergenceKind::ReverseKL: return reward - beta * kl_trajectory_constant(schedule) * dist2;
    case DivergenceKind::Fisher: return reward - beta * fisher_trajectory_constant(schedule) * dist2;
    case DivergenceKind::Hellinger: {
      double d = 0.0;
      for (const auto& s : step_coefficients(schedule)) {
        d += 1.0 - std::exp(-s.alpha * s.alpha * dist2 / (8.0 * s.sigma * s.sigma));
      }
      return reward - beta * d;
    }
    case DivergenceKind::JS: break;
  }
  throw ConfigError("unsupported oracle divergence");
}

std::vector<double> OracleTask::gradient(const std::vector<double>& theta) const {
  validate();
  if (theta.size() != target.size()) throw ShapeError("theta has the wrong dimension");
  // grad J = -2 (theta - r) - w (theta - theta_ref), with w depending on the kind.
  double w = 0.0;
  const double dist2 = squared_norm_diff(theta, theta_ref);
  switch (kind) {
    case DivergenceKind::None: break;
    case DivergenceKind::KL:
    case DivergenceKind::ReverseKL: w = 2.0 * beta * kl_trajectory_constant(schedule); break;
    case DivergenceKind::Fisher: w = 2.0 * beta * fisher_trajectory_constant(schedule); break;
    case DivergenceKind::Hellinger:
      for (const auto& s : step_coefficients(schedule)) {
        const double a = s.alpha * s.alpha / (8.0 * s.sigma * s.sigma);
        w += 2.0 * beta * a * std::exp(-a * dist2);
      }
      break;
    case DivergenceKind::JS: throw ConfigError("unsupported oracle divergence");
  }
  std::vector<double> g(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) g[j] = -2.0 * (theta[j] - target[j]) - w * (theta[j] - theta_ref[j]);
  return g;
}

std::vector<double> OracleTask::optimum() const {
  validate();
  double c = 0.0;
  switch (kind) {
    case DivergenceKind::None: return target;
    case DivergenceKind::KL:
    case DivergenceKind::ReverseKL: c = kl_trajectory_constant(schedule); break;
    case DivergenceKind::Fisher: c = fisher_trajectory_constant(schedule); break;
    case DivergenceKind::Hellinger: {
      // The maximizer lies on the segment theta_ref + s (r - theta_ref), s in [0, 1].
      auto along = [&](double s) {
        std::vector<double> th(target.size());
        for (std::size_t j = 0; j < th.size(); ++j) th[j] = theta_ref[j] + s * (target[j] - theta_ref[j]);
        return th;
      };
      // dJ/ds via the gradient projected on the segment direction.
      auto slope = [&](double s) {
        const auto g = gradient(along(s));
        double acc = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) acc += g[j] * (target[j] - theta_ref[j]);
        return acc;
      };
      // J may be non-concave along the segment: bracket the best grid cell first.
      constexpr int kScan = 4096;
      int best = 0;
      double best_value = objective(along(0.0));
      for (int i = 1; i <= kScan; ++i) {
        const double v = objective(along(static_cast<double>(i) / kScan));
        if (v > best_value) {
          best_value = v;
          best = i;
        }
      }
      double lo = std::max(0, best - 1) / static_cast<double>(kScan);
      double hi = std::min(kScan, best + 1) / static_cast<double>(kScan);
      if (slope(lo) <= 0.0) return along(lo);
      if (slope(hi) >= 0.0) return along(hi);
      for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (slope(mid) > 0.0 ? lo : hi) = mid;
      }
      return along(0.5 * (lo + hi));
    }
    case DivergenceKind::JS: break;
  }
  const double bc = beta * c;
  std::vector<double> th(target.size());
  for (std::size_t j = 0; j < th.size(); ++j) th[j] = (target[j] + bc * theta_ref[j]) / (1.0 + bc);
  return th;
}

double oracle_objective(const std::vector<double>& theta, const std::vector<double>& theta_ref,
                        const std::vector<double>& r, double beta, const NoiseSchedule& sched) {
  return OracleTask{theta_ref, r, beta, DivergenceKind::KL, sched}.objective(theta);
}

std::vector<double> oracle_grad(const std::vector<double>& theta, const std::vector<double>& theta_ref,
                                const std::vector<double>& r, double beta, const NoiseSchedule& sched) {
  return OracleTask{theta_ref, r, beta, DivergenceKind::KL, sched}.gradient(theta);
}

std::vector<double> oracle_optimum(const std::vector<double>& theta_ref, const std::vector<double>& r, double beta,
                                   const NoiseSchedule& sched) {
  return OracleTask{theta_ref, r, beta, DivergenceKind::KL, sched}.optimum();
}

GridSearchResult grid_search_2d(const OracleTask& task, const std::vector<double>& center, double spacing,
                                double half_width) {
  if (center.size() != 2) throw ShapeError("grid search is two-dimensional");
  const int n = static_cast<int>(std::lround(half_width / spacing));
  GridSearchResult best{center, -std::numeric_limits<double>::infinity()};
  std::vector<double> th(2);
  for (int i = -n; i <= n; ++i) {
    th[0] = center[0] + i * spacing;
    for (int j = -n; j <= n; ++j) {
      th[1] = center[1] + j * spacing;
      const double v = task.objective(th);
      if (v > best.value) best = {th, v};
    }
  }
  return best;
}

}  // namespace rocmlab
