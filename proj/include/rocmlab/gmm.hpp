#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rocmlab/random.hpp"
#include "rocmlab/samples.hpp"
#include "rocmlab/schedule.hpp"

namespace rocmlab {

/// Mixture of axis-aligned Gaussians in R^d.
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> covariances;  // per-component diagonal

  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  std::size_t components() const { return weights.size(); }

  /// Throws std::invalid_argument on malformed weights, shapes, or covariances.
  void validate() const;

  /// Single-component mixture holding component `m`.
  GaussianMixture component(std::size_t m) const;

  double log_density(std::span<const double> x) const;
  /// Gradient of the log density; responsibilities use log-sum-exp.
  std::vector<double> score(std::span<const double> x) const;
  /// Posterior component probabilities at x.
  std::vector<double> responsibilities(std::span<const double> x) const;

  /// Draws n points. `labels`, when given, receives each point's component.
  Samples sample(Rng& rng, std::size_t n, std::vector<int>* labels = nullptr) const;
  Samples sample_component(Rng& rng, std::size_t n, std::size_t m) const;

  nlohmann::json to_json() const;
  static GaussianMixture from_json(const nlohmann::json& doc);
  static GaussianMixture load(const std::string& path);
  void save(const std::string& path) const;

  /// Named toy datasets: "gmm2", "gmm8-ring", "two-moons-gmm".
  static GaussianMixture preset(std::string_view name);
  static std::vector<std::string> preset_names();
};

/// Exact noised marginal q_t: means scaled by alpha_t, covariances
/// alpha_t^2 Sigma + sigma_t^2 I.
GaussianMixture forward_marginal(const GaussianMixture& gm, const NoiseSchedule& sched, double t);

/// Score of a (noised) mixture at x.
std::vector<double> score(const GaussianMixture& gm_t, std::span<const double> x);

}  // namespace rocmlab
