#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "rocmlab/consistency.hpp"
#include "rocmlab/gmm.hpp"

namespace rocmlab {

struct DistillConfig {
  std::size_t iterations = 4000;
  std::size_t batch = 256;
  double lr = 3e-4;
  double ema = 0.999;
  double omega_max = 4.0;
  double cond_dropout = 0.1;
  int teacher_substeps = 64;
  std::size_t log_every = 50;
  std::uint64_t seed = 0;
};

struct LossPoint {
  std::size_t iteration;
  double loss;
};

struct DistillResult {
  std::vector<LossPoint> loss_curve;
};

struct DistillQuality {
  double model_sw2 = 0.0;    // distilled K-step sampler vs data
  double teacher_sw2 = 0.0;  // ODE teacher sampler vs the same data
};

/// Sliced W2 of the conditional K-step sampler (omega = 0) and of the teacher
/// against n data points. Conditions are stratified over the components in
/// proportion to the mixture weights, and data points are drawn per component
/// with the same counts, so mode-count noise does not enter the metric.
DistillQuality evaluate_distillation(const ConsistencyFunction& model, const GaussianMixture& gm,
                                     const NoiseSchedule& sched, std::size_t n, std::uint64_t seed,
                                     int teacher_substeps = 64);

/// Stratified condition labels: component m gets round(n w_m) rows (the
/// remainder goes to the last component).
std::vector<int> stratified_conditions(const GaussianMixture& gm, std::size_t n);

/// Consistency distillation against the analytic PF-ODE teacher. For random
/// data points and adjacent grid times t_n > t_{n-1}, x_{t_n} is drawn by
/// forward noising and x_{t_{n-1}} by one teacher solve; the online model at
/// (x_{t_n}, t_n) is regressed in L2 onto an EMA copy at (x_{t_{n-1}}, t_{n-1}).
/// Conditions are component labels, dropped to null with `cond_dropout`;
/// guidance omega ~ U[0, omega_max] feeds both the teacher and the model.
///
/// Throws NumericError on a non-finite loss.
DistillResult distill(ConsistencyModel& model, const GaussianMixture& gm, const DistillConfig& cfg,
                      const std::function<void(const LossPoint&)>& on_log = {});

}  // namespace rocmlab
