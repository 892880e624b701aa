#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rocmlab/consistency.hpp"
#include "rocmlab/random.hpp"
#include "rocmlab/samples.hpp"
#include "rocmlab/schedule.hpp"
#include "rocmlab/tensor.hpp"

namespace rocmlab {

// f-divergences between equal-covariance Gaussians N(mu1, s^2 I) and
// N(mu2, s^2 I), with D_f(p1 || p2) = E_{p2}[ f(p1 / p2) ].
//
//   KL          f(x) = x log x                 |dmu|^2 / (2 s^2)
//   Hellinger   f(x) = (sqrt(x) - 1)^2 / 2     1 - exp(-|dmu|^2 / (8 s^2))
//   Fisher      E_{p2} |grad log p1 - grad log p2|^2 = |dmu|^2 / s^4
//   JS          f(x) = (x log(2x/(x+1)) + log(2/(x+1))) / 2, Monte Carlo only

enum class DivergenceKind { None, KL, ReverseKL, Hellinger, Fisher, JS };

DivergenceKind parse_divergence_kind(const std::string& name);
std::string to_string(DivergenceKind kind);

struct DivergenceSpec {
  DivergenceKind kind = DivergenceKind::KL;
  double beta = 0.0;
  int mc_samples = 1;  // JS only; 1 reuses the trajectory's own noise

  /// Weight actually applied to the divergence term (0 for kind None).
  double effective_beta() const { return kind == DivergenceKind::None ? 0.0 : beta; }

  void validate() const;
  nlohmann::json to_json() const;
  /// {"kind": "kl|reverse-kl|hellinger|fisher|js|none", "beta": float, "mc_samples": int}
  static DivergenceSpec from_json(const nlohmann::json& doc);
};

struct GaussianPair {
  std::vector<double> mu1;
  std::vector<double> mu2;
  double sigma = 1.0;

  void validate() const;
  double squared_distance() const;
};

double kl_closed(const GaussianPair& pair);
/// KL(p2 || p1); equal to kl_closed under a shared covariance.
double reverse_kl_closed(const GaussianPair& pair);
double hellinger_closed(const GaussianPair& pair);
double fisher_closed(const GaussianPair& pair);
/// Monte-Carlo JS from standard-normal draws z (rows); see js_divergence.
double js_mc(const GaussianPair& pair, const Samples& z);

// Batched, differentiable forms over rows of mu1, mu2 ([B, d]); results are [B].
Tensor kl_divergence(const Tensor& mu1, const Tensor& mu2, double sigma);
Tensor hellinger_divergence(const Tensor& mu1, const Tensor& mu2, double sigma);
Tensor fisher_divergence(const Tensor& mu1, const Tensor& mu2, double sigma);
/// Jensen-Shannon estimate from shared standard-normal draws z (each [B, d]):
/// averages 1/2 log(2 p1/(p1+p2)) at mu1 + sigma z plus 1/2 log(2 p2/(p1+p2))
/// at mu2 + sigma z. Every sample is at most log 2 and exactly 0 when mu1 = mu2.
Tensor js_divergence(const Tensor& mu1, const Tensor& mu2, double sigma, std::span<const Tensor> noise);
/// Dispatch on kind. `noise` is used by JS only. Kind None yields zeros.
Tensor divergence(DivergenceKind kind, const Tensor& mu1, const Tensor& mu2, double sigma,
                  std::span<const Tensor> noise = {});

/// JS generator in terms of log x.
double js_generator_from_log(double log_x);

struct DivergenceOptions {
  /// Treat the recorded states x_k as constants and re-evaluate the policy on
  /// them; otherwise gradients also flow through x_k along the trajectory.
  bool detach_states = false;
};

/// Sum over k = 2..K of D_f between the per-step conditionals
/// N(alpha_{t_{k-1}} f(x_k), sigma_{t_{k-1}}^2) of `policy` and `reference`.
/// Returns one value per trajectory in the batch ([B]).
Tensor trajectory_divergence(const DivergenceSpec& spec, const TrajectoryRecord& traj,
                             const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                             const NoiseSchedule& sched, const DivergenceOptions& opts = {}, Rng* rng = nullptr);

// ---------------------------------------------------------------- quadrature oracle

/// Values of both 1-D densities at a point.
struct DensityPoint {
  double x;
  double log_p1;
  double log_p2;
  double score1;
  double score2;
};

using Integrand = std::function<double(const DensityPoint&)>;

/// p2(x) f(p1(x)/p2(x)) for a generator given in terms of log x.
Integrand f_generator(std::function<double(double)> f_of_log_ratio);
Integrand kl_generator();
Integrand hellinger_generator();
Integrand js_generator();
Integrand zero_generator();
/// p2(x) (d/dx log p1 - d/dx log p2)^2.
Integrand fisher_integrand();

/// Adaptive trapezoid integration of the integrand over +-12 sigma around
/// both means. Throws NumericError if the recursion fails to converge.
double divergence_oracle_quadrature(const GaussianPair& pair, const Integrand& integrand, double abs_tol = 1e-8);

}  // namespace rocmlab
