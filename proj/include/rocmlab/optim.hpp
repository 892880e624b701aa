#pragma once

#include <string>
#include <vector>

#include "rocmlab/tensor.hpp"

namespace rocmlab {

enum class OptimizerKind { Sgd, Adam };

OptimizerKind parse_optimizer(const std::string& name);
std::string to_string(OptimizerKind kind);

enum class Direction { Descend, Ascend };

/// First-order update over a fixed parameter list: plain gradient steps or
/// Adam moments, with optional global-norm clipping of the raw gradient.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double clip_norm = 0.0, double beta1 = 0.9, double beta2 = 0.999,
            double eps = 1e-8);

  /// Applies one update from the accumulated gradients and returns the
  /// pre-clipping global gradient norm. Gradients are left in place.
  double step(std::vector<Tensor>& params, Direction dir);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  OptimizerKind kind_;
  double lr_;
  double clip_norm_;
  double beta1_;
  double beta2_;
  double eps_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

double global_grad_norm(const std::vector<Tensor>& params);
void zero_grads(std::vector<Tensor>& params);

}  // namespace rocmlab
