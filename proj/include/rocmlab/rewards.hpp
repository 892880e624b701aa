#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rocmlab/tensor.hpp"

namespace rocmlab {

enum class RewardKind { Radial, Halfplane, MixtureMode, Hackable };

RewardKind parse_reward_kind(const std::string& name);
std::string to_string(RewardKind kind);

/// Differentiable toy reward on final samples x0 ([B, d]).
///
///   radial        -|x0 - r|^2
///   halfplane     tanh(<u_c, x0> / temperature)
///   mixture-mode  log N(x0; r, diag(variance))
///   hackable      halfplane + bonus_weight * h * softplus((|x0| - bonus_radius) / h)
///
/// with h = bonus_scale. The bonus is negligible inside the radius and grows
/// with slope bonus_weight outside it, so pushing samples off the data pays.
///
/// For halfplane rewards, u_c is `directions[c]` when a per-condition direction
/// exists and `direction` otherwise, so a condition can pick its own side.
struct RewardModel {
  RewardKind kind = RewardKind::Radial;
  std::vector<double> target{0.0, 0.0};
  std::vector<double> direction{1.0, 0.0};
  std::vector<std::vector<double>> directions;
  double temperature = 1.0;
  std::vector<double> variance{1.0, 1.0};
  double bonus_weight = 0.1;
  double bonus_radius = 2.0;
  double bonus_scale = 0.1;

  bool differentiable() const { return true; }
  std::size_t dim() const;
  void validate() const;

  /// Per-sample reward, [B]. `conditions` has one entry per row or is empty.
  Tensor evaluate(const Tensor& x0, std::span<const int> conditions = {}) const;

  nlohmann::json to_json() const;
  static RewardModel from_json(const nlohmann::json& doc);

  static RewardModel radial(std::vector<double> r);
  static RewardModel halfplane(std::vector<double> u, double temperature);
};

/// Scalar mean reward over the batch (differentiable).
Tensor reward_eval(const RewardModel& rm, const Tensor& x0, std::span<const int> conditions = {});

}  // namespace rocmlab
