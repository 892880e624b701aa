#pragma once

#include <vector>

#include "rocmlab/divergences.hpp"
#include "rocmlab/schedule.hpp"

namespace rocmlab {

/// Linear-Gaussian instance: policy f(x) = theta, reward -|x0 - r|^2, and a
/// trajectory divergence to the constant reference theta_ref. Because x_0 =
/// f(x_1) = theta, the objective is deterministic:
///
///   KL        J = -|theta - r|^2 - beta C   |theta - theta_ref|^2,  C   = sum a_k^2 / (2 s_k^2)
///   Fisher    J = -|theta - r|^2 - beta C_F |theta - theta_ref|^2,  C_F = sum a_k^2 / s_k^4
///   Hellinger J = -|theta - r|^2 - beta sum (1 - exp(-a_k^2 |theta - theta_ref|^2 / (8 s_k^2)))
///
/// with a_k = alpha_{t_{k-1}}, s_k = sigma_{t_{k-1}} over k = 2..K.
struct OracleTask {
  std::vector<double> theta_ref;
  std::vector<double> target;
  double beta = 0.0;
  DivergenceKind kind = DivergenceKind::KL;
  NoiseSchedule schedule{8};

  void validate() const;

  double objective(const std::vector<double>& theta) const;
  std::vector<double> gradient(const std::vector<double>& theta) const;
  /// Maximizer: closed form for KL/Fisher, bisection on the theta_ref-r segment for Hellinger.
  std::vector<double> optimum() const;
};

/// C for KL; throws std::domain_error if a sigma in the sum vanishes.
double kl_trajectory_constant(const NoiseSchedule& sched);
double fisher_trajectory_constant(const NoiseSchedule& sched);

double oracle_objective(const std::vector<double>& theta, const std::vector<double>& theta_ref,
                        const std::vector<double>& r, double beta, const NoiseSchedule& sched);
std::vector<double> oracle_grad(const std::vector<double>& theta, const std::vector<double>& theta_ref,
                                const std::vector<double>& r, double beta, const NoiseSchedule& sched);
/// (r + beta C theta_ref) / (1 + beta C).
std::vector<double> oracle_optimum(const std::vector<double>& theta_ref, const std::vector<double>& r, double beta,
                                   const NoiseSchedule& sched);

struct GridSearchResult {
  std::vector<double> argmax;
  double value = 0.0;
};

/// Brute-force maximum of a 2-D task over a lattice of the given spacing in a
/// box of half-width `half_width` around `center`.
GridSearchResult grid_search_2d(const OracleTask& task, const std::vector<double>& center, double spacing = 1e-3,
                                double half_width = 0.5);

}  // namespace rocmlab
