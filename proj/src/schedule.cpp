#include "rocmlab/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rocmlab {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2;

void check_time(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("time " + std::to_string(t) + " outside [0, 1]");
}

}  // namespace

NoiseSchedule::NoiseSchedule(int steps) : steps_(steps) {
  if (steps < 1) throw std::invalid_argument("schedule needs at least one step");
}

// The endpoints are pinned so the boundary identities hold exactly.
double NoiseSchedule::alpha(double t) const {
  check_time(t);
  if (t == 0.0) return 1.0;
  if (t == 1.0) return 0.0;
  return std::cos(kHalfPi * t);
}

double NoiseSchedule::sigma(double t) const {
  check_time(t);
  if (t == 0.0) return 0.0;
  if (t == 1.0) return 1.0;
  return std::sin(kHalfPi * t);
}

double NoiseSchedule::alpha_dot(double t) const {
  check_time(t);
  return -kHalfPi * std::sin(kHalfPi * t);
}

double NoiseSchedule::sigma_dot(double t) const {
  check_time(t);
  return kHalfPi * std::cos(kHalfPi * t);
}

double NoiseSchedule::drift(double t) const { return alpha_dot(t) / alpha(t); }

double NoiseSchedule::diffusion_sq(double t) const {
  const double s = sigma(t);
  return 2.0 * s * sigma_dot(t) - 2.0 * drift(t) * s * s;
}

double NoiseSchedule::time(int k) const {
  if (k < 0 || k > steps_) throw std::out_of_range("step index " + std::to_string(k) + " outside [0, K]");
  if (k == steps_) return 1.0;
  return static_cast<double>(k) / static_cast<double>(steps_);
}

}  // namespace rocmlab
