#include "rocmlab/rewards.hpp"

#include <cmath>
#include <numbers>

#include "rocmlab/errors.hpp"

namespace rocmlab {

namespace {

constexpr double kNormSmoothing = 1e-12;

Tensor row_constant(const std::vector<double>& v) { return Tensor::from({1, v.size()}, std::span<const double>(v)); }

}  // namespace

RewardKind parse_reward_kind(const std::string& name) {
  if (name == "radial") return RewardKind::Radial;
  if (name == "halfplane") return RewardKind::Halfplane;
  if (name == "mixture-mode") return RewardKind::MixtureMode;
  if (name == "hackable") return RewardKind::Hackable;
  throw ConfigError("unknown reward '" + name + "' (expected radial, halfplane, mixture-mode or hackable)");
}

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::Radial: return "radial";
    case RewardKind::Halfplane: return "halfplane";
    case RewardKind::MixtureMode: return "mixture-mode";
    case RewardKind::Hackable: return "hackable";
  }
  return "radial";
}

std::size_t RewardModel::dim() const {
  switch (kind) {
    case RewardKind::Radial:
    case RewardKind::MixtureMode: return target.size();
    case RewardKind::Halfplane:
    case RewardKind::Hackable: return direction.size();
  }
  return 0;
}

void RewardModel::validate() const {
  if (dim() == 0) throw ConfigError("reward has zero dimension");
  if (kind == RewardKind::MixtureMode) {
    if (variance.size() != target.size()) throw ConfigError("mixture-mode variance and target differ in size");
    for (double v : variance) {
      if (!(v > 0.0)) throw ConfigError("mixture-mode variance must be positive");
    }
  }
  if (kind == RewardKind::Halfplane || kind == RewardKind::Hackable) {
    if (!(temperature > 0.0)) throw ConfigError("halfplane temperature must be positive");
    for (const auto& u : directions) {
      if (u.size() != direction.size()) throw ConfigError("per-condition direction has the wrong size");
    }
  }
  if (kind == RewardKind::Hackable && !(bonus_weight >= 0.0)) throw ConfigError("bonus_weight must be >= 0");
  if (kind == RewardKind::Hackable && !(bonus_scale > 0.0)) throw ConfigError("bonus_scale must be positive");
}

Tensor RewardModel::evaluate(const Tensor& x0, std::span<const int> conditions) const {
  if (x0.dim() != 2 || x0.shape()[1] != dim()) {
    throw ShapeError("reward expects [B, " + std::to_string(dim()) + "], got " + shape_str(x0.shape()));
  }
  const std::size_t B = x0.shape()[0];
  const std::size_t d = dim();
  switch (kind) {
    case RewardKind::Radial: return -sum(square(x0 - row_constant(target)), {1});
    case RewardKind::MixtureMode: {
      double log_norm = 0.0;
      std::vector<double> inv(d);
      for (std::size_t j = 0; j < d; ++j) {
        log_norm += -0.5 * std::log(2.0 * std::numbers::pi * variance[j]);
        inv[j] = -0.5 / variance[j];
      }
      return sum(square(x0 - row_constant(target)) * row_constant(inv), {1}) + log_norm;
    }
    case RewardKind::Halfplane:
    case RewardKind::Hackable: {
      if (!conditions.empty() && conditions.size() != B) throw ShapeError("reward conditions must match the batch");
      std::vector<double> u(B * d);
      for (std::size_t i = 0; i < B; ++i) {
        const int c = conditions.empty() ? -1 : conditions[i];
        const auto& dir = c >= 0 && static_cast<std::size_t>(c) < directions.size() ? directions[c] : direction;
        for (std::size_t j = 0; j < d; ++j) u[i * d + j] = dir[j] / temperature;
      }
      const Tensor plane = tanh(sum(x0 * Tensor::from({B, d}, std::span<const double>(u)), {1}));
      if (kind == RewardKind::Halfplane) return plane;
      // Smoothed |x0| keeps the bonus differentiable at the origin.
      const Tensor norm = sqrt(sum(square(x0), {1}) + kNormSmoothing);
      return plane + softplus((norm - bonus_radius) / bonus_scale) * (bonus_weight * bonus_scale);
    }
  }
  throw ConfigError("unknown reward kind");
}

nlohmann::json RewardModel::to_json() const {
  return {{"kind", to_string(kind)},   {"target", target},
          {"direction", direction},    {"directions", directions},
          {"temperature", temperature}, {"variance", variance},
          {"bonus_weight", bonus_weight}, {"bonus_radius", bonus_radius},
          {"bonus_scale", bonus_scale}};
}

RewardModel RewardModel::from_json(const nlohmann::json& doc) {
  RewardModel rm;
  rm.kind = parse_reward_kind(doc.value("kind", std::string("radial")));
  rm.target = doc.value("target", rm.target);
  rm.direction = doc.value("direction", rm.direction);
  rm.directions = doc.value("directions", rm.directions);
  rm.temperature = doc.value("temperature", rm.temperature);
  rm.variance = doc.value("variance", rm.variance);
  rm.bonus_weight = doc.value("bonus_weight", rm.bonus_weight);
  rm.bonus_radius = doc.value("bonus_radius", rm.bonus_radius);
  rm.bonus_scale = doc.value("bonus_scale", rm.bonus_scale);
  rm.validate();
  return rm;
}

RewardModel RewardModel::radial(std::vector<double> r) {
  RewardModel rm;
  rm.kind = RewardKind::Radial;
  rm.target = std::move(r);
  return rm;
}

RewardModel RewardModel::halfplane(std::vector<double> u, double temperature) {
  RewardModel rm;
  rm.kind = RewardKind::Halfplane;
  rm.direction = std::move(u);
  rm.temperature = temperature;
  return rm;
}

Tensor reward_eval(const RewardModel& rm, const Tensor& x0, std::span<const int> conditions) {
  return mean(rm.evaluate(x0, conditions));
}

}  // namespace rocmlab
