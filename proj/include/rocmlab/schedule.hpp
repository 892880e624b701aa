#pragma once

#include <vector>

namespace rocmlab {

/// Variance-preserving cosine schedule, alpha(t) = cos(pi t / 2) and
/// sigma(t) = sin(pi t / 2), discretized into K uniform generation steps
/// t_k = k / K for k = 0..K (t_K = 1, t_0 = 0).
class NoiseSchedule {
 public:
  explicit NoiseSchedule(int steps = 8);

  int steps() const { return steps_; }

  double alpha(double t) const;
  double sigma(double t) const;
  double alpha_dot(double t) const;
  double sigma_dot(double t) const;

  /// Drift of the forward SDE, f(t) = d log alpha / dt.
  double drift(double t) const;
  /// Squared diffusion of the forward SDE, g^2(t) = d sigma^2/dt - 2 f(t) sigma^2.
  double diffusion_sq(double t) const;

  /// Grid time t_k, k in [0, K].
  double time(int k) const;
  double alpha_at(int k) const { return alpha(time(k)); }
  double sigma_at(int k) const { return sigma(time(k)); }

 private:
  int steps_;
};

}  // namespace rocmlab
