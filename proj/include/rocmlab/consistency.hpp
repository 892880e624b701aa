#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rocmlab/pf_ode.hpp"
#include "rocmlab/random.hpp"
#include "rocmlab/schedule.hpp"
#include "rocmlab/tensor.hpp"

namespace rocmlab {

/// Per-row step inputs. Each span holds either one value (shared by every
/// row) or one value per row.
struct StepInputs {
  std::span<const double> t;
  std::span<const double> omega;
  std::span<const int> conditions;  // kNullCondition for the unconditional branch
};

/// A consistency function f(x, omega, c, t) with trainable parameters.
class ConsistencyFunction {
 public:
  virtual ~ConsistencyFunction() = default;

  virtual std::size_t dim() const = 0;
  virtual Tensor apply(const Tensor& x, const StepInputs& in) const = 0;
  virtual std::vector<Tensor>& parameters() = 0;
  virtual const std::vector<Tensor>& parameters() const = 0;
  /// Deep copy of the parameters.
  virtual std::unique_ptr<ConsistencyFunction> clone() const = 0;
};

/// Copy with gradients switched off, for use as a fixed reference.
std::unique_ptr<ConsistencyFunction> frozen_copy(const ConsistencyFunction& f);

std::vector<double> flatten_parameters(const std::vector<Tensor>& params);
void assign_parameters(std::vector<Tensor>& params, std::span<const double> flat);
std::size_t parameter_count(const std::vector<Tensor>& params);
/// Euclidean distance between two parameter sets of the same layout.
double parameter_distance(const ConsistencyFunction& a, const ConsistencyFunction& b);

struct NetworkConfig {
  std::size_t dim = 2;
  std::size_t hidden = 128;
  std::size_t layers = 3;
  std::size_t frequencies = 8;
  std::size_t num_conditions = 2;  // a null-condition row is added on top
  std::size_t cond_dim = 16;
  double omega_max = 4.0;
  double sigma_data = 0.5;
  bool zero_output = true;

  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& doc);
};

/// c_skip(t) x + c_out(t) F(x, omega, c, t) with an MLP F over x, sinusoidal
/// time and guidance features, and a learned condition table.
class ConsistencyModel final : public ConsistencyFunction {
 public:
  ConsistencyModel(NetworkConfig config, NoiseSchedule schedule, std::uint64_t init_seed);
  // Copies own their parameters.
  ConsistencyModel(const ConsistencyModel& other);
  ConsistencyModel& operator=(const ConsistencyModel& other);
  ConsistencyModel(ConsistencyModel&&) noexcept = default;
  ConsistencyModel& operator=(ConsistencyModel&&) noexcept = default;

  std::size_t dim() const override { return config_.dim; }
  Tensor apply(const Tensor& x, const StepInputs& in) const override;
  std::vector<Tensor>& parameters() override { return params_; }
  const std::vector<Tensor>& parameters() const override { return params_; }
  std::unique_ptr<ConsistencyFunction> clone() const override;

  /// Raw network output F(x, omega, c, t).
  Tensor network(const Tensor& x, const StepInputs& in) const;

  double c_skip(double t) const;
  double c_out(double t) const;

  const NetworkConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  /// Binary checkpoint: 8-byte magic, u64 header length, JSON header, then
  /// little-endian float64 parameters.
  void save(const std::string& path) const;
  static ConsistencyModel load(const std::string& path);

 private:
  Tensor features(std::size_t rows, const StepInputs& in) const;

  NetworkConfig config_;
  NoiseSchedule schedule_;
  // Layout: cond_table, then (weight, bias) per hidden layer, then output (weight, bias).
  std::vector<Tensor> params_;
};

/// f(x) = theta for every input: the analytically solvable stand-in.
class LinearPolicy final : public ConsistencyFunction {
 public:
  explicit LinearPolicy(std::vector<double> theta);

  std::size_t dim() const override { return params_[0].numel(); }
  Tensor apply(const Tensor& x, const StepInputs& in) const override;
  std::vector<Tensor>& parameters() override { return params_; }
  const std::vector<Tensor>& parameters() const override { return params_; }
  std::unique_ptr<ConsistencyFunction> clone() const override;

  std::vector<double> theta() const;

 private:
  std::vector<Tensor> params_;
};

/// One K-step generation run over a batch. Index k runs over 0..K for states
/// and noises; denoised[k] is defined for k = 1..K.
struct TrajectoryRecord {
  int steps = 0;
  std::uint64_t seed = 0;
  double omega = 0.0;
  double final_sigma = 0.0;
  std::vector<int> conditions;
  std::vector<Tensor> states;    // x_k
  std::vector<Tensor> denoised;  // x~_k = f(x_k, omega, c, t_k)
  std::vector<Tensor> noises;    // eps_k; eps_K is the initial state

  const Tensor& final_state() const { return states[0]; }
  std::size_t batch() const { return conditions.size(); }
};

struct GenerateOptions {
  /// Backpropagate only through the last `grad_steps` steps; <= 0 or >= K
  /// means the full trajectory.
  int grad_steps = 0;
  /// Extra Gaussian noise on x_0 (zero reproduces the deterministic last step).
  double final_sigma = 0.0;
};

/// Draws all noises from `seed` and runs the K-step loop.
TrajectoryRecord generate(const ConsistencyFunction& f, const NoiseSchedule& sched, std::span<const int> conditions,
                          double omega, std::uint64_t seed, const GenerateOptions& opts = {});

/// Runs the K-step loop with fixed noises (noises[K] is x_K).
TrajectoryRecord replay(const ConsistencyFunction& f, const NoiseSchedule& sched, std::span<const int> conditions,
                        double omega, const std::vector<Tensor>& noises, const GenerateOptions& opts = {});

/// Standard-normal noises for a batch, indexed k = 0..K.
std::vector<Tensor> draw_noises(std::size_t batch, std::size_t dim, int steps, std::uint64_t seed);

}  // namespace rocmlab
