#include "rocmlab/optim.hpp"

#include <cmath>

#include "rocmlab/errors.hpp"

namespace rocmlab {

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }

Optimizer::Optimizer(OptimizerKind kind, double lr, double clip_norm, double beta1, double beta2, double eps)
    : kind_(kind), lr_(lr), clip_norm_(clip_norm), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
}

double global_grad_norm(const std::vector<Tensor>& params) {
  double acc = 0.0;
  for (const Tensor& p : params) {
    for (Real g : p.grad()) acc += double(g) * double(g);
  }
  return std::sqrt(acc);
}

void zero_grads(std::vector<Tensor>& params) {
  for (Tensor& p : params) p.zero_grad();
}

double Optimizer::step(std::vector<Tensor>& params, Direction dir) {
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  const double scale = clip_norm_ > 0.0 && norm > clip_norm_ ? clip_norm_ / norm : 1.0;
  const double sign = dir == Direction::Ascend ? 1.0 : -1.0;
  if (kind_ == OptimizerKind::Adam && m_.empty()) {
    for (const Tensor& p : params) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (!p.requires_grad()) continue;
    const std::vector<Real> g = p.grad();
    auto values = p.mutable_data();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double gj = scale * double(g[j]);
      double delta = gj;
      if (kind_ == OptimizerKind::Adam) {
        m_[i][j] = beta1_ * m_[i][j] + (1 - beta1_) * gj;
        v_[i][j] = beta2_ * v_[i][j] + (1 - beta2_) * gj * gj;
        delta = (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + eps_);
      }
      values[j] = static_cast<Real>(double(values[j]) + sign * lr_ * delta);
    }
  }
  return norm;
}

}  // namespace rocmlab
