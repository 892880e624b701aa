#include "rocmlab/pf_ode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "rocmlab/errors.hpp"

namespace rocmlab {

Tensor guided_noise(const Tensor& eps_cond, const Tensor& eps_uncond, double omega) {
  if (eps_cond.shape() != eps_uncond.shape()) {
    throw ShapeError("guided_noise shape mismatch: " + shape_str(eps_cond.shape()) + " vs " +
                     shape_str(eps_uncond.shape()));
  }
  return eps_cond * (1.0 + omega) - eps_uncond * omega;
}

std::vector<double> guided_noise(std::span<const double> eps_cond, std::span<const double> eps_uncond,
                                 double omega) {
  if (eps_cond.size() != eps_uncond.size()) throw ShapeError("guided_noise length mismatch");
  std::vector<double> out(eps_cond.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (1.0 + omega) * eps_cond[j] - omega * eps_uncond[j];
  return out;
}

Teacher::Teacher(GaussianMixture data, NoiseSchedule schedule)
    : data_(std::move(data)), schedule_(schedule) {
  data_.validate();
  for (std::size_t m = 0; m < data_.components(); ++m) components_.push_back(data_.component(m));
}

TeacherPrediction Teacher::predict_mixture(const GaussianMixture& gm, std::span<const double> x, double t) const {
  const double a = schedule_.alpha(t);
  const double s = schedule_.sigma(t);
  const std::size_t d = x.size();
  const std::size_t mcount = gm.components();
  // Responsibilities under the noised marginal, in the log domain.
  std::vector<double> logw(mcount);
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < mcount; ++m) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double vt = a * a * gm.covariances[m][j] + s * s;
      const double resid = x[j] - a * gm.means[m][j];
      acc += resid * resid / vt + std::log(vt);
    }
    logw[m] = gm.weights[m] > 0.0 ? std::log(gm.weights[m]) - 0.5 * acc : -std::numeric_limits<double>::infinity();
    hi = std::max(hi, logw[m]);
  }
  double total = 0.0;
  for (double& w : logw) {
    w = std::exp(w - hi);
    total += w;
  }
  TeacherPrediction out{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t m = 0; m < mcount; ++m) {
    const double r = logw[m] / total;
    if (r == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = gm.covariances[m][j];
      const double vt = a * a * v + s * s;
      const double resid = x[j] - a * gm.means[m][j];
      out.denoised[j] += r * (gm.means[m][j] + a * v / vt * resid);
      out.eps[j] += r * s * resid / vt;
    }
  }
  return out;
}

TeacherPrediction Teacher::predict(std::span<const double> x, double t, int condition, double omega) const {
  if (x.size() != data_.dim()) throw ShapeError("teacher input has the wrong dimension");
  const TeacherPrediction uncond = predict_mixture(data_, x, t);
  if (condition == kNullCondition) return uncond;
  if (condition < 0 || static_cast<std::size_t>(condition) >= data_.components()) {
    throw std::out_of_range("condition " + std::to_string(condition) + " is not a component label");
  }
  const TeacherPrediction cond = predict_mixture(components_[static_cast<std::size_t>(condition)], x, t);
  if (omega == 0.0) return cond;
  return {guided_noise(cond.eps, uncond.eps, omega), guided_noise(cond.denoised, uncond.denoised, omega)};
}

std::vector<double> Teacher::velocity(std::span<const double> x, double t, int condition, double omega) const {
  const TeacherPrediction p = predict(x, t, condition, omega);
  const double ad = schedule_.alpha_dot(t);
  const double sd = schedule_.sigma_dot(t);
  std::vector<double> v(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) v[j] = ad * p.denoised[j] + sd * p.eps[j];
  return v;
}

std::vector<double> Teacher::solve(std::span<const double> x_start, double t_start, double t_end, int n_substeps,
                                   int condition, double omega) const {
  if (n_substeps < 1) throw std::invalid_argument("pf_ode_solve needs at least one substep");
  if (!(t_end >= 0.0 && t_end <= t_start && t_start <= 1.0)) {
    throw std::out_of_range("pf_ode_solve needs 0 <= t_end <= t_start <= 1");
  }
  std::vector<double> x(x_start.begin(), x_start.end());
  if (t_start == t_end) return x;
  const double h = (t_end - t_start) / n_substeps;
  std::vector<double> trial(x.size());
  for (int i = 0; i < n_substeps; ++i) {
    const double t0 = t_start + i * h;
    const double t1 = i + 1 == n_substeps ? t_end : t_start + (i + 1) * h;
    const double step = t1 - t0;
    const auto v0 = velocity(x, t0, condition, omega);
    for (std::size_t j = 0; j < x.size(); ++j) trial[j] = x[j] + step * v0[j];
    const auto v1 = velocity(trial, t1, condition, omega);
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] += 0.5 * step * (v0[j] + v1[j]);
      if (!std::isfinite(x[j])) throw NumericError("PF-ODE state overflowed at t = " + std::to_string(t1));
    }
  }
  return x;
}

Samples Teacher::solve(const Samples& x_start, double t_start, double t_end, int n_substeps,
                       std::span<const int> conditions, std::span<const double> omegas) const {
  auto pick_cond = [&](std::size_t i) {
    if (conditions.empty()) return kNullCondition;
    return conditions.size() == 1 ? conditions[0] : conditions[i];
  };
  auto pick_omega = [&](std::size_t i) {
    if (omegas.empty()) return 0.0;
    return omegas.size() == 1 ? omegas[0] : omegas[i];
  };
  Samples out(x_start.n, x_start.d);
  for (std::size_t i = 0; i < x_start.n; ++i) {
    const auto y = solve(x_start.row(i), t_start, t_end, n_substeps, pick_cond(i), pick_omega(i));
    std::copy(y.begin(), y.end(), out.row(i).begin());
  }
  return out;
}

Samples Teacher::sample(Rng& rng, std::size_t n, int n_substeps, std::span<const int> conditions,
                        double omega) const {
  Samples start(n, data_.dim());
  for (double& v : start.values) v = rng.normal();
  const double om[] = {omega};
  return solve(start, 1.0, 0.0, n_substeps, conditions, om);
}

std::vector<double> pf_ode_solve(const GaussianMixture& gm, const NoiseSchedule& sched,
                                 std::span<const double> x_start, double t_start, double t_end, int n_substeps) {
  return Teacher(gm, sched).solve(x_start, t_start, t_end, n_substeps);
}

}  // namespace rocmlab
