#pragma once

#include <span>
#include <vector>

#include "rocmlab/gmm.hpp"
#include "rocmlab/schedule.hpp"
#include "rocmlab/tensor.hpp"

namespace rocmlab {

/// Condition label meaning "no condition" (the unconditional branch).
inline constexpr int kNullCondition = -1;

/// (1 + omega) eps_cond - omega eps_uncond.
Tensor guided_noise(const Tensor& eps_cond, const Tensor& eps_uncond, double omega);
std::vector<double> guided_noise(std::span<const double> eps_cond, std::span<const double> eps_uncond,
                                 double omega);

/// Analytic noise prediction and posterior mean of the data given x_t.
struct TeacherPrediction {
  std::vector<double> eps;       // -sigma_t * score(x, t)
  std::vector<double> denoised;  // E[x_0 | x_t = x]
};

/// Exact teacher for mixture data. A condition restricts the data to one
/// component; omega blends conditional and unconditional predictions.
class Teacher {
 public:
  Teacher(GaussianMixture data, NoiseSchedule schedule);

  const GaussianMixture& data() const { return data_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  TeacherPrediction predict(std::span<const double> x, double t, int condition = kNullCondition,
                            double omega = 0.0) const;

  /// PF-ODE velocity dx/dt = f(t) x - g^2(t)/2 * score, evaluated in the
  /// equivalent form alpha'(t) E[x_0|x] + sigma'(t) eps, which stays finite at
  /// t = 1 where f and g^2 diverge.
  std::vector<double> velocity(std::span<const double> x, double t, int condition = kNullCondition,
                               double omega = 0.0) const;

  /// Heun integration from t_start down to t_end.
  std::vector<double> solve(std::span<const double> x_start, double t_start, double t_end, int n_substeps,
                            int condition = kNullCondition, double omega = 0.0) const;

  /// Row-wise solve with per-row condition and guidance (spans of size n or 1).
  Samples solve(const Samples& x_start, double t_start, double t_end, int n_substeps,
                std::span<const int> conditions, std::span<const double> omegas) const;

  /// Draws x_1 ~ N(0, I) and integrates to t = 0.
  Samples sample(Rng& rng, std::size_t n, int n_substeps, std::span<const int> conditions = {},
                 double omega = 0.0) const;

 private:
  TeacherPrediction predict_mixture(const GaussianMixture& gm, std::span<const double> x, double t) const;

  GaussianMixture data_;
  std::vector<GaussianMixture> components_;
  NoiseSchedule schedule_;
};

std::vector<double> pf_ode_solve(const GaussianMixture& gm, const NoiseSchedule& sched,
                                 std::span<const double> x_start, double t_start, double t_end, int n_substeps);

}  // namespace rocmlab
