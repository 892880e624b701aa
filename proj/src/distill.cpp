#include "rocmlab/distill.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "rocmlab/errors.hpp"
#include "rocmlab/metrics.hpp"
#include "rocmlab/optim.hpp"
#include "rocmlab/pf_ode.hpp"

namespace rocmlab {

DistillResult distill(ConsistencyModel& model, const GaussianMixture& gm, const DistillConfig& cfg,
                      const std::function<void(const LossPoint&)>& on_log) {
  gm.validate();
  if (gm.dim() != model.dim()) throw ConfigError("data and model dimensions differ");
  if (gm.components() > model.config().num_conditions) {
    throw ConfigError("model has fewer condition slots than mixture components");
  }
  DistillResult result;
  if (cfg.iterations == 0) return result;

  const NoiseSchedule& sched = model.schedule();
  const int K = sched.steps();
  const Teacher teacher(gm, sched);
  ConsistencyModel target(model);
  for (Tensor& p : target.parameters()) p.set_requires_grad(false);
  Optimizer opt(OptimizerKind::Adam, cfg.lr);
  Rng rng(cfg.seed);

  const std::size_t B = cfg.batch;
  const std::size_t d = gm.dim();
  std::vector<int> conds(B);
  std::vector<double> omegas(B), t_hi(B), t_lo(B);
  Samples x_hi(B, d);

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<int> labels;
    const Samples x0 = gm.sample(rng, B, &labels);
    for (std::size_t i = 0; i < B; ++i) {
      conds[i] = rng.uniform() < cfg.cond_dropout ? kNullCondition : labels[i];
      omegas[i] = rng.uniform(0.0, cfg.omega_max);
      const int n = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(K)));
      t_hi[i] = sched.time(n);
      t_lo[i] = sched.time(n - 1);
      const double a = sched.alpha(t_hi[i]);
      const double s = sched.sigma(t_hi[i]);
      for (std::size_t j = 0; j < d; ++j) x_hi.row(i)[j] = a * x0.row(i)[j] + s * rng.normal();
    }
    Samples x_lo(B, d);
    for (std::size_t i = 0; i < B; ++i) {
      const auto y = teacher.solve(x_hi.row(i), t_hi[i], t_lo[i], cfg.teacher_substeps, conds[i], omegas[i]);
      std::copy(y.begin(), y.end(), x_lo.row(i).begin());
    }

    Tensor target_out;
    {
      NoGradScope no_grad;
      target_out = target.apply(x_lo.to_tensor(), StepInputs{t_lo, omegas, conds});
    }
    Tape tape;
    TapeScope scope(tape);
    const Tensor online = model.apply(x_hi.to_tensor(), StepInputs{t_hi, omegas, conds});
    const Tensor loss = mean(sum(square(online - target_out), {1}));
    const double value = loss.item();
    if (!std::isfinite(value)) {
      std::ostringstream os;
      os << "distillation loss is " << value << " at iteration " << it << " (seed " << cfg.seed << ")";
      throw NumericError(os.str());
    }
    zero_grads(model.parameters());
    backward(loss);
    opt.step(model.parameters(), Direction::Descend);
    tape.clear();

    auto& tp = target.parameters();
    const auto& mp = model.parameters();
    for (std::size_t i = 0; i < tp.size(); ++i) {
      auto dst = tp[i].mutable_data();
      const auto src = mp[i].data();
      for (std::size_t j = 0; j < dst.size(); ++j) {
        dst[j] = static_cast<Real>(cfg.ema * double(dst[j]) + (1.0 - cfg.ema) * double(src[j]));
      }
    }

    if (cfg.log_every > 0 && (it % cfg.log_every == 0 || it + 1 == cfg.iterations)) {
      const LossPoint point{it, value};
      result.loss_curve.push_back(point);
      if (on_log) on_log(point);
    }
  }
  return result;
}

std::vector<int> stratified_conditions(const GaussianMixture& gm, std::size_t n) {
  std::vector<int> conds;
  conds.reserve(n);
  for (std::size_t m = 0; m < gm.components(); ++m) {
    const bool last = m + 1 == gm.components();
    const auto count =
        last ? n - conds.size() : std::min(n - conds.size(), static_cast<std::size_t>(std::llround(gm.weights[m] * n)));
    conds.insert(conds.end(), count, static_cast<int>(m));
  }
  return conds;
}

DistillQuality evaluate_distillation(const ConsistencyFunction& model, const GaussianMixture& gm,
                                     const NoiseSchedule& sched, std::size_t n, std::uint64_t seed,
                                     int teacher_substeps) {
  const auto conds = stratified_conditions(gm, n);
  Rng rng(derive_seed(seed, 0));
  Samples data(n, gm.dim());
  std::size_t row = 0;
  for (std::size_t m = 0; m < gm.components(); ++m) {
    const auto count = static_cast<std::size_t>(std::count(conds.begin(), conds.end(), static_cast<int>(m)));
    const Samples part = gm.sample_component(rng, count, m);
    std::copy(part.values.begin(), part.values.end(), data.values.begin() + static_cast<std::ptrdiff_t>(row * gm.dim()));
    row += count;
  }
  DistillQuality q;
  {
    NoGradScope no_grad;
    const TrajectoryRecord traj = generate(model, sched, conds, 0.0, derive_seed(seed, 1));
    q.model_sw2 = sliced_w2(Samples::from_tensor(traj.final_state()), data);
  }
  const Teacher teacher(gm, sched);
  Rng teacher_rng(derive_seed(seed, 2));
  q.teacher_sw2 = sliced_w2(teacher.sample(teacher_rng, n, teacher_substeps, conds, 0.0), data);
  return q;
}

}  // namespace rocmlab
