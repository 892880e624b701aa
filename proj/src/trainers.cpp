#include "rocmlab/trainers.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "rocmlab/errors.hpp"
#include "rocmlab/metrics.hpp"
#include "rocmlab/pf_ode.hpp"

namespace rocmlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// KL stands in as the monitored divergence when the objective has none.
DivergenceSpec monitor_spec(const DivergenceSpec& spec) {
  if (spec.kind != DivergenceKind::None) return spec;
  DivergenceSpec kl = spec;
  kl.kind = DivergenceKind::KL;
  return kl;
}

std::vector<double> flatten_grads(const std::vector<Tensor>& params) {
  std::vector<double> out;
  for (const Tensor& p : params) {
    const auto g = p.grad();
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

void check_finite(double value, const char* what) {
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << what << " is " << value;
    throw NumericError(os.str());
  }
}

Tensor log_normal(const Tensor& x, const Tensor& mu, double sigma) {
  const double d = static_cast<double>(x.shape()[1]);
  const double log_norm = -d * (std::log(sigma) + 0.5 * std::log(2.0 * std::numbers::pi));
  return sum(square(x - mu), {1}) * (-0.5 / (sigma * sigma)) + log_norm;
}

/// Reparameterized objective mean(R - beta D) on the active tape.
struct RocmForward {
  Tensor objective;
  double reward_mean = 0.0;
  double div_mean = 0.0;
};

RocmForward rocm_forward(const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                         const NoiseSchedule& sched, const RewardModel& rm, const TrainConfig& cfg, Rng& rng,
                         double final_sigma) {
  const auto conds = sample_conditions(rng, cfg.batch, cfg.num_conditions);
  const std::uint64_t noise_seed = rng.next_seed();
  const TrajectoryRecord traj =
      generate(policy, sched, conds, cfg.omega, noise_seed, GenerateOptions{cfg.truncate, final_sigma});
  const Tensor rewards = rm.evaluate(traj.final_state(), conds);
  const double beta = cfg.divergence.effective_beta();
  const DivergenceOptions dopts{cfg.detach_states};
  RocmForward out;
  if (beta > 0.0) {
    const Tensor div = trajectory_divergence(cfg.divergence, traj, policy, reference, sched, dopts, &rng);
    out.objective = mean(rewards - div * beta);
    out.div_mean = mean(div).item();
  } else {
    out.objective = mean(rewards);
    NoGradScope no_grad;
    out.div_mean = mean(trajectory_divergence(monitor_spec(cfg.divergence), traj, policy, reference, sched, dopts,
                                              &rng))
                       .item();
  }
  out.reward_mean = mean(rewards).item();
  return out;
}

/// Rollout without a tape for the score-function estimators.
struct PgRollout {
  std::vector<int> conditions;
  TrajectoryRecord traj;
  std::vector<double> rewards;
  double reward_mean = 0.0;
};

PgRollout pg_rollout(const ConsistencyFunction& policy, const NoiseSchedule& sched, const RewardModel& rm,
                     const TrainConfig& cfg, Rng& rng) {
  PgRollout out;
  out.conditions = sample_conditions(rng, cfg.batch, cfg.num_conditions);
  const std::uint64_t noise_seed = rng.next_seed();
  NoGradScope no_grad;
  out.traj = generate(policy, sched, out.conditions, cfg.omega, noise_seed, GenerateOptions{0, cfg.pg_final_sigma});
  const Tensor r = rm.evaluate(out.traj.final_state(), out.conditions);
  out.rewards.assign(r.data().begin(), r.data().end());
  double acc = 0.0;
  for (double v : out.rewards) acc += v;
  out.reward_mean = acc / static_cast<double>(out.rewards.size());
  return out;
}

/// mean(A logp) - beta mean(D) with the states held fixed.
Tensor pg_surrogate(const PgRollout& roll, const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                    const NoiseSchedule& sched, const TrainConfig& cfg, const std::vector<double>& advantages,
                    Rng& rng, double* div_mean) {
  const std::size_t B = advantages.size();
  const Tensor adv = Tensor::from({B}, std::span<const double>(advantages));
  Tensor surrogate = mean(trajectory_log_prob(roll.traj, policy, sched) * adv);
  const double beta = cfg.divergence.effective_beta();
  const DivergenceOptions dopts{true};
  if (beta > 0.0) {
    const Tensor div = mean(trajectory_divergence(cfg.divergence, roll.traj, policy, reference, sched, dopts, &rng));
    if (div_mean) *div_mean = div.item();
    surrogate = surrogate - div * beta;
  } else if (div_mean) {
    NoGradScope no_grad;
    *div_mean =
        mean(trajectory_divergence(monitor_spec(cfg.divergence), roll.traj, policy, reference, sched, dopts, &rng))
            .item();
  }
  return surrogate;
}

}  // namespace

TrainerKind parse_trainer(const std::string& name) {
  if (name == "rocm") return TrainerKind::Rocm;
  if (name == "pg") return TrainerKind::PolicyGradient;
  throw ConfigError("unknown trainer '" + name + "' (expected rocm or pg)");
}

std::string to_string(TrainerKind kind) { return kind == TrainerKind::Rocm ? "rocm" : "pg"; }

void TrainConfig::validate(int steps) const {
  if (batch < 1) throw ConfigError("batch size must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and non-negative");
  if (truncate < 0 || truncate > steps) {
    throw ConfigError("truncation depth must lie in [1, K] (0 selects K), got " + std::to_string(truncate));
  }
  if (num_conditions < 1) throw ConfigError("num_conditions must be at least 1");
  if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be non-negative");
  if (!(pg_final_sigma >= 0.0)) throw ConfigError("pg_final_sigma must be non-negative");
  if (!(pg_clip >= 0.0 && pg_clip < 1.0)) throw ConfigError("pg clip must lie in [0, 1)");
  if (ppo_epochs < 1) throw ConfigError("ppo_epochs must be at least 1");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw ConfigError("baseline_decay must lie in [0, 1)");
  if (auto_probe_steps < 1) throw ConfigError("auto_probe_steps must be at least 1");
  divergence.validate();
}

nlohmann::json TrainConfig::to_json() const {
  return {{"trainer", to_string(trainer)},
          {"iterations", iterations},
          {"batch", batch},
          {"lr", lr},
          {"optimizer", to_string(optimizer)},
          {"clip_norm", clip_norm},
          {"divergence", divergence.to_json()},
          {"beta_auto", beta_auto},
          {"auto_probe_steps", auto_probe_steps},
          {"omega", omega},
          {"num_conditions", num_conditions},
          {"truncate", truncate},
          {"detach_states", detach_states},
          {"seed", seed},
          {"pg_final_sigma", pg_final_sigma},
          {"pg_clip", pg_clip},
          {"ppo_epochs", ppo_epochs},
          {"baseline_decay", baseline_decay},
          {"checkpoint_every", checkpoint_every},
          {"eval_every", eval_every},
          {"eval_samples", eval_samples},
          {"eval_seed", eval_seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& doc) {
  TrainConfig c;
  c.trainer = parse_trainer(doc.value("trainer", to_string(c.trainer)));
  c.iterations = doc.value("iterations", c.iterations);
  c.batch = doc.value("batch", c.batch);
  c.lr = doc.value("lr", c.lr);
  c.optimizer = parse_optimizer(doc.value("optimizer", to_string(c.optimizer)));
  c.clip_norm = doc.value("clip_norm", c.clip_norm);
  if (doc.contains("divergence")) c.divergence = DivergenceSpec::from_json(doc.at("divergence"));
  c.beta_auto = doc.value("beta_auto", c.beta_auto);
  c.auto_probe_steps = doc.value("auto_probe_steps", c.auto_probe_steps);
  c.omega = doc.value("omega", c.omega);
  c.num_conditions = doc.value("num_conditions", c.num_conditions);
  c.truncate = doc.value("truncate", c.truncate);
  c.detach_states = doc.value("detach_states", c.detach_states);
  c.seed = doc.value("seed", c.seed);
  c.pg_final_sigma = doc.value("pg_final_sigma", c.pg_final_sigma);
  c.pg_clip = doc.value("pg_clip", c.pg_clip);
  c.ppo_epochs = doc.value("ppo_epochs", c.ppo_epochs);
  c.baseline_decay = doc.value("baseline_decay", c.baseline_decay);
  c.checkpoint_every = doc.value("checkpoint_every", c.checkpoint_every);
  c.eval_every = doc.value("eval_every", c.eval_every);
  c.eval_samples = doc.value("eval_samples", c.eval_samples);
  c.eval_seed = doc.value("eval_seed", c.eval_seed);
  return c;
}

// ---------------------------------------------------------------- metrics

void RunMetrics::append(const IterationRecord& rec) {
  if (!records_.empty() && rec.iter <= records_.back().iter) {
    throw std::logic_error("metrics iterations must increase");
  }
  records_.push_back(rec);
}

std::optional<IterationRecord> RunMetrics::last_evaluated() const {
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    if (std::isfinite(it->fidelity)) return *it;
  }
  return std::nullopt;
}

const char* RunMetrics::csv_header() { return "iter,reward_mean,div_mean,grad_norm,fidelity,param_dist,wall_ms"; }

std::string RunMetrics::csv_row(const IterationRecord& rec) {
  std::ostringstream os;
  os.precision(17);
  os << rec.iter << ',' << rec.reward_mean << ',' << rec.div_mean << ',' << rec.grad_norm << ',' << rec.fidelity
     << ',' << rec.param_dist << ',';
  os.precision(6);
  os << rec.wall_ms;
  return os.str();
}

void RunMetrics::write_csv(std::ostream& os) const {
  os << csv_header() << '\n';
  for (const auto& rec : records_) os << csv_row(rec) << '\n';
}

void RunMetrics::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics to " + path);
  write_csv(out);
}

// ---------------------------------------------------------------- evaluation

FidelityProbe FidelityProbe::from_teacher(const GaussianMixture& gm, const NoiseSchedule& sched, std::size_t n,
                                          std::size_t num_conditions, double omega, std::uint64_t seed,
                                          int substeps) {
  FidelityProbe probe;
  probe.omega = omega;
  probe.seed = seed;
  probe.conditions.resize(n);
  for (std::size_t i = 0; i < n; ++i) probe.conditions[i] = static_cast<int>(i % num_conditions);
  const Teacher teacher(gm, sched);
  Rng rng(derive_seed(seed, 1));
  probe.reference = teacher.sample(rng, n, substeps, probe.conditions, omega);
  return probe;
}

double FidelityProbe::evaluate(const ConsistencyFunction& policy, const NoiseSchedule& sched) const {
  NoGradScope no_grad;
  const TrajectoryRecord traj = generate(policy, sched, conditions, omega, derive_seed(seed, 2));
  return sliced_w2(Samples::from_tensor(traj.final_state()), reference);
}

// ---------------------------------------------------------------- steps

TrainerState::TrainerState(const TrainConfig& cfg) : optimizer(cfg.optimizer, cfg.lr, cfg.clip_norm) {}

std::vector<int> sample_conditions(Rng& rng, std::size_t batch, std::size_t num_conditions) {
  std::vector<int> conds(batch);
  for (int& c : conds) c = static_cast<int>(rng.index(num_conditions));
  return conds;
}

std::vector<Tensor> trajectory_step_log_probs(const TrajectoryRecord& traj, const ConsistencyFunction& policy,
                                              const NoiseSchedule& sched) {
  const double om[] = {traj.omega};
  std::vector<Tensor> out;
  for (int k = 1; k <= traj.steps; ++k) {
    const double sigma = k == 1 ? traj.final_sigma : sched.sigma_at(k - 1);
    if (!(sigma > 0.0)) continue;
    const double tk[] = {sched.time(k)};
    const StepInputs in{tk, om, traj.conditions};
    const auto ku = static_cast<std::size_t>(k);
    const Tensor mu = policy.apply(traj.states[ku].detach(), in) * sched.alpha_at(k - 1);
    out.push_back(log_normal(traj.states[ku - 1].detach(), mu, sigma));
  }
  return out;
}

Tensor trajectory_log_prob(const TrajectoryRecord& traj, const ConsistencyFunction& policy,
                           const NoiseSchedule& sched) {
  const auto steps = trajectory_step_log_probs(traj, policy, sched);
  if (steps.empty()) return Tensor::zeros({traj.batch()});
  Tensor total = steps.front();
  for (std::size_t i = 1; i < steps.size(); ++i) total = total + steps[i];
  return total;
}

StepStats rocm_step(ConsistencyFunction& policy, const ConsistencyFunction& reference, const NoiseSchedule& sched,
                    const RewardModel& rm, const TrainConfig& cfg, TrainerState& state, Rng& rng) {
  Tape tape;
  TapeScope scope(tape);
  const RocmForward fwd = rocm_forward(policy, reference, sched, rm, cfg, rng, 0.0);
  StepStats stats{fwd.reward_mean, fwd.div_mean, 0.0, fwd.objective.item()};
  check_finite(stats.objective, "objective");
  zero_grads(policy.parameters());
  backward(fwd.objective);
  stats.grad_norm = state.optimizer.step(policy.parameters(), Direction::Ascend);
  tape.clear();
  return stats;
}

StepStats pg_step(ConsistencyFunction& policy, const ConsistencyFunction& reference, const NoiseSchedule& sched,
                  const RewardModel& rm, const TrainConfig& cfg, TrainerState& state, Rng& rng) {
  const PgRollout roll = pg_rollout(policy, sched, rm, cfg, rng);
  check_finite(roll.reward_mean, "mean reward");
  const double b = state.baseline.value_or(roll.reward_mean);
  std::vector<double> adv(roll.rewards.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = roll.rewards[i] - b;
  state.baseline = cfg.baseline_decay * b + (1.0 - cfg.baseline_decay) * roll.reward_mean;

  StepStats stats;
  stats.reward_mean = roll.reward_mean;
  const double beta = cfg.divergence.effective_beta();

  if (cfg.pg_clip <= 0.0) {
    Tape tape;
    TapeScope scope(tape);
    const Tensor surrogate = pg_surrogate(roll, policy, reference, sched, cfg, adv, rng, &stats.div_mean);
    check_finite(surrogate.item(), "policy-gradient surrogate");
    zero_grads(policy.parameters());
    backward(surrogate);
    stats.grad_norm = state.optimizer.step(policy.parameters(), Direction::Ascend);
    tape.clear();
  } else {
    // Clipped importance ratios per transition against the rollout policy.
    std::vector<Tensor> old_lp;
    {
      NoGradScope no_grad;
      old_lp = trajectory_step_log_probs(roll.traj, policy, sched);
    }
    const std::size_t B = adv.size();
    const Tensor a = Tensor::from({B}, std::span<const double>(adv));
    const DivergenceOptions dopts{true};
    for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
      Tape tape;
      TapeScope scope(tape);
      const auto lp = trajectory_step_log_probs(roll.traj, policy, sched);
      Tensor surrogate = Tensor::scalar(0.0);
      for (std::size_t s = 0; s < lp.size(); ++s) {
        const Tensor ratio = exp(lp[s] - old_lp[s]);
        const Tensor clipped = clamp(ratio, 1.0 - cfg.pg_clip, 1.0 + cfg.pg_clip);
        surrogate = surrogate + mean(minimum(ratio * a, clipped * a));
      }
      const DivergenceSpec spec = beta > 0.0 ? cfg.divergence : monitor_spec(cfg.divergence);
      if (beta > 0.0) {
        const Tensor div = mean(trajectory_divergence(spec, roll.traj, policy, reference, sched, dopts, &rng));
        if (epoch == 0) stats.div_mean = div.item();
        surrogate = surrogate - div * beta;
      } else if (epoch == 0) {
        NoGradScope no_grad;
        stats.div_mean = mean(trajectory_divergence(spec, roll.traj, policy, reference, sched, dopts, &rng)).item();
      }
      check_finite(surrogate.item(), "clipped surrogate");
      zero_grads(policy.parameters());
      backward(surrogate);
      const double norm = state.optimizer.step(policy.parameters(), Direction::Ascend);
      if (epoch == 0) stats.grad_norm = norm;
      tape.clear();
    }
  }
  stats.objective = stats.reward_mean - beta * stats.div_mean;
  return stats;
}

std::vector<double> rocm_gradient(const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                                  const NoiseSchedule& sched, const RewardModel& rm, const TrainConfig& cfg,
                                  std::uint64_t seed, double final_sigma) {
  auto work = policy.clone();
  Rng rng(seed);
  Tape tape;
  TapeScope scope(tape);
  const RocmForward fwd = rocm_forward(*work, reference, sched, rm, cfg, rng, final_sigma);
  zero_grads(work->parameters());
  backward(fwd.objective);
  auto g = flatten_grads(work->parameters());
  tape.clear();
  return g;
}

std::vector<double> pg_gradient(const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                                const NoiseSchedule& sched, const RewardModel& rm, const TrainConfig& cfg,
                                std::uint64_t seed, double baseline) {
  auto work = policy.clone();
  Rng rng(seed);
  const PgRollout roll = pg_rollout(*work, sched, rm, cfg, rng);
  std::vector<double> adv(roll.rewards.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = roll.rewards[i] - baseline;
  Tape tape;
  TapeScope scope(tape);
  const Tensor surrogate = pg_surrogate(roll, *work, reference, sched, cfg, adv, rng, nullptr);
  zero_grads(work->parameters());
  backward(surrogate);
  auto g = flatten_grads(work->parameters());
  tape.clear();
  return g;
}

BetaResolution resolve_auto_beta(const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                                 const NoiseSchedule& sched, const RewardModel& rm, const TrainConfig& cfg) {
  BetaResolution res;
  if (cfg.divergence.kind == DivergenceKind::None) return res;

  TrainConfig probe_cfg = cfg;
  probe_cfg.divergence.beta = 0.0;
  const std::uint64_t probe_seed = derive_seed(cfg.seed, 0xbe7a);

  {
    NoGradScope no_grad;
    Rng rng(probe_seed);
    const auto conds = sample_conditions(rng, cfg.batch, cfg.num_conditions);
    const TrajectoryRecord traj = generate(policy, sched, conds, cfg.omega, rng.next_seed());
    const Tensor r = rm.evaluate(traj.final_state(), conds);
    double acc = 0.0;
    for (double v : r.data()) acc += std::abs(v);
    res.reward_abs_mean = acc / static_cast<double>(r.numel());
  }

  auto probe = policy.clone();
  TrainerState state(probe_cfg);
  for (int s = 0; s < cfg.auto_probe_steps; ++s) {
    Rng rng(derive_seed(probe_seed, static_cast<std::uint64_t>(s) + 1));
    rocm_step(*probe, reference, sched, rm, probe_cfg, state, rng);
  }
  {
    NoGradScope no_grad;
    Rng rng(derive_seed(probe_seed, 0));
    const auto conds = sample_conditions(rng, cfg.batch, cfg.num_conditions);
    const TrajectoryRecord traj = generate(*probe, sched, conds, cfg.omega, rng.next_seed());
    res.probe_divergence = mean(trajectory_divergence(cfg.divergence, traj, *probe, reference, sched, {}, &rng)).item();
  }
  if (!(res.probe_divergence > 0.0) || !std::isfinite(res.probe_divergence) || !(res.reward_abs_mean > 0.0)) {
    std::ostringstream os;
    os << "cannot resolve beta automatically: probe divergence " << res.probe_divergence << ", mean |R| "
       << res.reward_abs_mean;
    throw NumericError(os.str());
  }
  res.beta = 0.1 * res.reward_abs_mean / res.probe_divergence;
  res.ratio = res.beta * res.probe_divergence / res.reward_abs_mean;
  return res;
}

PolicyEvaluation evaluate_policy(const ConsistencyFunction& policy, const ConsistencyFunction& reference,
                                 const NoiseSchedule& sched, const RewardModel& rm, const TrainConfig& cfg,
                                 const FidelityProbe* probe) {
  NoGradScope no_grad;
  std::vector<int> conds;
  if (probe) {
    conds = probe->conditions;
  } else {
    conds.resize(cfg.eval_samples);
    for (std::size_t i = 0; i < conds.size(); ++i) conds[i] = static_cast<int>(i % cfg.num_conditions);
  }
  const std::uint64_t seed = derive_seed(cfg.eval_seed, 3);
  const TrajectoryRecord traj = generate(policy, sched, conds, cfg.omega, seed);
  Rng rng(derive_seed(seed, 1));
  PolicyEvaluation ev;
  ev.reward = mean(rm.evaluate(traj.final_state(), conds)).item();
  ev.divergence =
      mean(trajectory_divergence(monitor_spec(cfg.divergence), traj, policy, reference, sched, {}, &rng)).item();
  ev.fidelity = probe ? probe->evaluate(policy, sched) : kNaN;
  ev.param_dist = parameter_distance(policy, reference);
  return ev;
}

void train(ConsistencyFunction& policy, const ConsistencyFunction& reference, const NoiseSchedule& sched,
           const RewardModel& rm, const TrainConfig& config, RunMetrics& metrics, const TrainHooks& hooks) {
  config.validate(sched.steps());
  rm.validate();
  if (rm.dim() != policy.dim()) throw ConfigError("reward and policy dimensions differ");
  if (config.iterations == 0) return;

  TrainConfig cfg = config;
  if (cfg.beta_auto) {
    cfg.divergence.beta = resolve_auto_beta(policy, reference, sched, rm, cfg).beta;
    cfg.beta_auto = false;
  }
  TrainerState state(cfg);
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    Rng rng(derive_seed(cfg.seed, it));
    StepStats stats;
    try {
      stats = cfg.trainer == TrainerKind::Rocm ? rocm_step(policy, reference, sched, rm, cfg, state, rng)
                                               : pg_step(policy, reference, sched, rm, cfg, state, rng);
    } catch (const NumericError& e) {
      std::ostringstream os;
      os << e.what() << " at iteration " << it << " (seed " << cfg.seed << ")";
      throw NumericError(os.str());
    }
    const bool last = it + 1 == cfg.iterations;
    const bool eval_now = hooks.fidelity && (last || (cfg.eval_every > 0 && (it + 1) % cfg.eval_every == 0));
    IterationRecord rec;
    rec.iter = it;
    rec.reward_mean = stats.reward_mean;
    rec.div_mean = stats.div_mean;
    rec.grad_norm = stats.grad_norm;
    rec.objective = stats.objective;
    rec.fidelity = eval_now ? hooks.fidelity->evaluate(policy, sched) : kNaN;
    rec.param_dist = parameter_distance(policy, reference);
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    metrics.append(rec);
    if (hooks.on_record) hooks.on_record(rec);
    if (hooks.checkpoint && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0) {
      hooks.checkpoint(it + 1, policy);
    }
  }
}

}  // namespace rocmlab
