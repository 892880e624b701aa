#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rocmlab/consistency.hpp"
#include "rocmlab/divergences.hpp"
#include "rocmlab/gmm.hpp"
#include "rocmlab/optim.hpp"
#include "rocmlab/rewards.hpp"
#include "rocmlab/schedule.hpp"

namespace rocmlab {

enum class TrainerKind { Rocm, PolicyGradient };

TrainerKind parse_trainer(const std::string& name);
std::string to_string(TrainerKind kind);

struct TrainConfig {
  TrainerKind trainer = TrainerKind::Rocm;
  std::size_t iterations = 600;
  std::size_t batch = 32;
  double lr = 0.005;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double clip_norm = 10.0;  // global gradient norm; 0 disables
  DivergenceSpec divergence;
  /// Resolve beta by the order-of-magnitude rule before training.
  bool beta_auto = false;
  int auto_probe_steps = 5;
  double omega = 1.0;
  std::size_t num_conditions = 1;  // conditions are drawn uniformly from 0..n-1
  int truncate = 0;                // backprop through the last m steps; 0 = all K
  bool detach_states = false;      // divergence ablation: no gradient through x_k
  std::uint64_t seed = 0;

  // Policy-gradient baseline.
  double pg_final_sigma = 0.1;  // exploration noise on x_0 so the last step has a density
  double pg_clip = 0.0;         // > 0 selects the clipped-ratio (PPO-style) variant
  int ppo_epochs = 4;
  double baseline_decay = 0.9;

  // Bookkeeping.
  std::size_t checkpoint_every = 0;  // 0 disables
  std::size_t eval_every = 0;        // 0 = evaluate only after the last iteration
  std::size_t eval_samples = 2048;
  std::uint64_t eval_seed = 0xe7a1;

  void validate(int steps) const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);
};

/// One row of the metrics stream. `fidelity` is NaN on iterations without an
/// evaluation.
struct IterationRecord {
  std::size_t iter = 0;
  double reward_mean = 0.0;
  double div_mean = 0.0;
  double grad_norm = 0.0;
  double fidelity = 0.0;
  double param_dist = 0.0;
  double wall_ms = 0.0;
  double objective = 0.0;  // mean of R - beta D (or its surrogate for pg)
};

/// Append-only per-iteration metrics.
class RunMetrics {
 public:
  void append(const IterationRecord& rec);
  const std::vector<IterationRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }
  const IterationRecord& back() const { return records_.back(); }
  /// Last record with a finite fidelity, if any.
  std::optional<IterationRecord> last_evaluated() const;

  static const char* csv_header();
  static std::string csv_row(const IterationRecord& rec);
  void write_csv(std::ostream& os) const;
  void write_csv(const std::string& path) const;

 private:
  std::vector<IterationRecord> records_;
};

struct StepStats {
  double reward_mean = 0.0;
  double div_mean = 0.0;
  double grad_norm = 0.0;
  double objective = 0.0;
};

/// Reference samples for the fidelity metric: the teacher sampler under the
/// same conditions and guidance as the evaluated policy.
struct FidelityProbe {
  Samples reference;
  std::vector<int> conditions;
  double omega = 0.0;
  std::uint64_t seed = 0;

  static FidelityProbe from_teacher(const GaussianMixture& gm, const NoiseSchedule& sched, std::size_t n,
                                    std::size_t num_conditions, double omega, std::uint64_t seed,
                                    int substeps = 64);
  /// Sliced W2 between policy samples (fixed noises from `seed`) and the reference.
  double evaluate(const ConsistencyFunction& policy, const NoiseSchedule& sched) const;
};

/// Per-state trainer memory that outlives single steps.
struct TrainerState {
  Optimizer optimizer;
  std::optional<double> baseline;  // EMA reward baseline (pg)

  explicit TrainerState(const TrainConfig& cfg);
};

/// Draws conditions uniformly from the condition set.
std::vector<int> sample_conditions(Rng& rng, std::size_t batch, std::size_t num_conditions);

/// Per-trajectory log-density of the recorded transitions under `policy`:
/// sum over k = 2..K of log N(x_{k-1}; alpha_{t_{k-1}} f(x_k), sigma_{t_{k-1}}^2),
/// plus log N(x_0; f(x_1), s^2) when the record carries final noise s > 0.
/// States are treated as constants. Returns [B] (per step: [K, B] summed).
Tensor trajectory_log_prob(const TrajectoryRecord& traj, const ConsistencyFunction& policy,
                           const NoiseSchedule& sched);
/// The individual per-step log-densities (k = 1..K order, omitting absent terms).
std::vector<Tensor> trajectory_step_log_probs(const TrajectoryRecord& traj, const ConsistencyFunction& policy,
                                              const NoiseSchedule& sched);

/// Direct reward optimization: one ascent step on mean(R - beta D) through the
/// reparameterized trajectory.
StepStats rocm_step(ConsistencyFunction& policy, const ConsistencyFunction& reference, const NoiseSchedule& sched,
                    const RewardModel& rm, const TrainConfig& cfg, TrainerState& state, Rng& rng);

/// Score-function baseline: REINFORCE with an EMA reward baseline, or the
/// clipped-ratio variant when cfg.pg_clip > 0.
StepStats pg_step(ConsistencyFunction& policy, const ConsistencyFunction& reference, const NoiseSchedule& sched,
                  const RewardModel& rm, const TrainConfig& cfg, TrainerState& state, Rng& rng);

/// Gradient estimates of mean(R - beta D) for one batch without updating the
/// policy, flattened in parameter order. Used for estimator comparisons.
std::vector<double> rocm_gradient(const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                                  const NoiseSchedule& sched, const RewardModel& rm, const TrainConfig& cfg,
                                  std::uint64_t seed, double final_sigma = 0.0);
std::vector<double> pg_gradient(const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                                const NoiseSchedule& sched, const RewardModel& rm, const TrainConfig& cfg,
                                std::uint64_t seed, double baseline);

struct BetaResolution {
  double beta = 0.0;
  double reward_abs_mean = 0.0;
  double probe_divergence = 0.0;
  /// beta * D_probe / mean|R| (0.1 by construction when resolvable).
  double ratio = 0.0;
};

/// Order-of-magnitude rule: beta * D is one tenth of mean |R| at the start.
/// D vanishes at theta = theta_ref, so D is measured after a few unregularized
/// probe steps on a throwaway copy of the policy.
BetaResolution resolve_auto_beta(const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                                 const NoiseSchedule& sched, const RewardModel& rm, const TrainConfig& cfg);

struct PolicyEvaluation {
  double reward = 0.0;
  double divergence = 0.0;  // monitored kind (KL when the spec has none)
  double fidelity = 0.0;    // NaN without a probe
  double param_dist = 0.0;
};

/// Held-out evaluation with fixed seeds: mean reward and trajectory divergence
/// over the probe's conditions (or cfg.eval_samples stratified conditions),
/// fidelity from the probe, and the parameter distance to the reference.
PolicyEvaluation evaluate_policy(const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                                 const NoiseSchedule& sched, const RewardModel& rm, const TrainConfig& cfg,
                                 const FidelityProbe* probe = nullptr);

struct TrainHooks {
  std::function<void(std::size_t iter, const ConsistencyFunction& policy)> checkpoint;
  std::function<void(const IterationRecord&)> on_record;
  const FidelityProbe* fidelity = nullptr;
};

/// Runs cfg.iterations steps of the chosen trainer, appending to `metrics`
/// (which keeps every completed record if a step or hook throws). The
/// reference is never modified. Step failures throw NumericError naming the
/// iteration and seed.
void train(ConsistencyFunction& policy, const ConsistencyFunction& reference, const NoiseSchedule& sched,
           const RewardModel& rm, const TrainConfig& cfg, RunMetrics& metrics, const TrainHooks& hooks = {});

}  // namespace rocmlab
