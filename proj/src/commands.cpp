#include "rocmlab/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "rocmlab/distill.hpp"
#include "rocmlab/errors.hpp"
#include "rocmlab/metrics.hpp"
#include "rocmlab/pf_ode.hpp"

namespace rocmlab {

namespace fs = std::filesystem;

namespace {

void prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir);
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

/// JSON has no NaN; unmeasured values are emitted as null.
nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

ConsistencyModel load_reference(const RunConfig& cfg) {
  if (cfg.reference.empty()) throw ConfigError("no reference checkpoint given (set \"reference\" or --reference)");
  if (!fs::exists(cfg.reference)) throw ConfigError("reference checkpoint not found: " + cfg.reference);
  return ConsistencyModel::load(cfg.reference);
}

std::string format_beta(double beta) {
  std::ostringstream os;
  os << beta;
  return os.str();
}

}  // namespace

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumericFailure;
  } catch (const DomainError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumericFailure;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailure;
  }
}

unsigned worker_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ROCMLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) n = static_cast<unsigned>(v);
  }
  return n;
}

// ---------------------------------------------------------------- pretrain

int cmd_pretrain(RunConfig cfg, std::ostream& out, std::ostream& err) {
  cfg.command = "pretrain";
  cfg.resolve();
  const GaussianMixture gm = cfg.data.load();
  prepare_out(cfg.out);
  write_json(fs::path(cfg.out) / "config.json", cfg.to_json());

  const NoiseSchedule sched(cfg.steps);
  ConsistencyModel model(cfg.model, sched, derive_seed(cfg.seed, 0x1417));
  std::ofstream loss(fs::path(cfg.out) / "loss.csv");
  if (!loss) throw std::runtime_error("cannot write loss.csv in " + cfg.out);
  loss << "iteration,loss\n";
  loss.precision(17);
  distill(model, gm, cfg.distill, [&](const LossPoint& p) {
    loss << p.iteration << ',' << p.loss << '\n';
    if (p.iteration % 500 == 0 || p.iteration + 1 == cfg.distill.iterations)
      err << "distill " << p.iteration << " loss " << p.loss << '\n';
  });
  loss.flush();
  const auto ckpt = (fs::path(cfg.out) / "model.ckpt").string();
  model.save(ckpt);

  const DistillQuality q = evaluate_distillation(model, gm, sched, cfg.eval_samples, derive_seed(cfg.seed, 0x9a7e));
  const double gate = 0.15;
  const nlohmann::json report = {{"checkpoint", ckpt},
                                 {"iterations", cfg.distill.iterations},
                                 {"sliced_w2", q.model_sw2},
                                 {"teacher_sliced_w2", q.teacher_sw2},
                                 {"gate", gate},
                                 {"passed", q.model_sw2 < gate && q.teacher_sw2 < gate},
                                 {"seed", cfg.seed}};
  write_json(fs::path(cfg.out) / "pretrain_report.json", report);
  out << report.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- finetune

nlohmann::json FinetuneResult::to_json(const RunConfig& cfg) const {
  nlohmann::json doc = {{"trainer", to_string(cfg.train.trainer)},
                        {"divergence", to_string(cfg.train.divergence.kind)},
                        {"beta", beta},
                        {"iterations", iterations},
                        {"seed", cfg.seed},
                        {"reward", number_or_null(final.reward)},
                        {"div_mean", number_or_null(final.divergence)},
                        {"fidelity", number_or_null(final.fidelity)},
                        {"param_dist", number_or_null(final.param_dist)}};
  if (cfg.train.beta_auto) {
    doc["beta_auto"] = {{"reward_abs_mean", auto_beta.reward_abs_mean},
                        {"probe_divergence", auto_beta.probe_divergence},
                        {"ratio", auto_beta.ratio}};
  }
  return doc;
}

FinetuneResult run_finetune(RunConfig cfg, std::ostream& err) {
  cfg.command = cfg.command.empty() ? "finetune" : cfg.command;
  cfg.resolve();
  const GaussianMixture gm = cfg.data.load();
  ConsistencyModel reference = load_reference(cfg);
  for (Tensor& p : reference.parameters()) p.set_requires_grad(false);
  if (reference.dim() != gm.dim()) throw ConfigError("reference checkpoint and data dimensions differ");
  cfg.train.num_conditions = std::min(cfg.train.num_conditions, reference.config().num_conditions);
  prepare_out(cfg.out);

  const NoiseSchedule sched(cfg.steps);
  ConsistencyModel policy(reference);
  for (Tensor& p : policy.parameters()) p.set_requires_grad(true);
  RewardModel rm = cfg.reward;

  FinetuneResult result;
  if (cfg.train.beta_auto) {
    result.auto_beta = resolve_auto_beta(policy, reference, sched, rm, cfg.train);
    cfg.train.divergence.beta = result.auto_beta.beta;
    err << "beta auto: " << result.auto_beta.beta << " (beta*D/mean|R| = " << result.auto_beta.ratio
        << ", mean|R| = " << result.auto_beta.reward_abs_mean << ", probe D = " << result.auto_beta.probe_divergence
        << ")\n";
  }
  result.beta = cfg.train.divergence.beta;
  // The frozen config records the resolved beta; beta_auto stays as requested.
  write_json(fs::path(cfg.out) / "config.json", cfg.to_json());

  TrainConfig tcfg = cfg.train;
  tcfg.beta_auto = false;
  const FidelityProbe probe = FidelityProbe::from_teacher(gm, sched, tcfg.eval_samples, tcfg.num_conditions,
                                                          tcfg.omega, tcfg.eval_seed);
  std::ofstream csv(fs::path(cfg.out) / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot write metrics.csv in " + cfg.out);
  csv << RunMetrics::csv_header() << '\n';

  TrainHooks hooks;
  hooks.fidelity = &probe;
  hooks.on_record = [&](const IterationRecord& rec) {
    csv << RunMetrics::csv_row(rec) << '\n';
    if (rec.iter == 0) {
      err << "iter 0: reward " << rec.reward_mean << ", beta*D/|R| = "
          << (rec.reward_mean != 0.0 ? result.beta * rec.div_mean / std::abs(rec.reward_mean) : 0.0) << '\n';
    }
  };
  const fs::path ckpt_dir = fs::path(cfg.out) / "checkpoints";
  hooks.checkpoint = [&](std::size_t iter, const ConsistencyFunction& f) {
    fs::create_directories(ckpt_dir);
    dynamic_cast<const ConsistencyModel&>(f).save((ckpt_dir / ("iter_" + std::to_string(iter) + ".ckpt")).string());
  };

  RunMetrics metrics;
  try {
    train(policy, reference, sched, rm, tcfg, metrics, hooks);
  } catch (...) {
    csv.flush();
    throw;
  }
  csv.flush();
  policy.save((fs::path(cfg.out) / "final.ckpt").string());
  result.iterations = metrics.records().size();
  result.final = evaluate_policy(policy, reference, sched, rm, tcfg, &probe);
  write_json(fs::path(cfg.out) / "final.json", result.to_json(cfg));
  return result;
}

int cmd_finetune(RunConfig cfg, std::ostream& out, std::ostream& err) {
  cfg.command = "finetune";
  const FinetuneResult result = run_finetune(cfg, err);
  cfg.resolve();
  out << result.to_json(cfg).dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(RunConfig cfg, std::ostream& out, std::ostream& err) {
  cfg.command = "sweep";
  cfg.resolve();
  if (cfg.betas.empty()) throw ConfigError("sweep needs a nonempty beta grid (\"betas\" or --betas)");
  std::vector<double> grid;
  for (double b : cfg.betas) {
    if (std::find(grid.begin(), grid.end(), b) != grid.end()) {
      err << "warning: duplicate beta " << b << " dropped from the sweep\n";
      continue;
    }
    grid.push_back(b);
  }
  prepare_out(cfg.out);
  RunConfig frozen = cfg;
  frozen.betas = grid;
  write_json(fs::path(cfg.out) / "config.json", frozen.to_json());

  struct Outcome {
    bool ok = false;
    std::string error;
    int code = kExitOk;
    FinetuneResult result;
    std::string log;
  };
  std::vector<Outcome> outcomes(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < grid.size(); i = next++) {
      RunConfig run = cfg;
      run.command = "sweep";
      run.betas.clear();
      run.train.beta_auto = false;
      run.train.divergence.beta = grid[i];
      run.out = (fs::path(cfg.out) / ("beta_" + std::to_string(i) + "_" + format_beta(grid[i]))).string();
      std::ostringstream log;
      Outcome& o = outcomes[i];
      o.code = guarded(
          [&] {
            o.result = run_finetune(run, log);
            o.ok = true;
            return kExitOk;
          },
          log);
      if (!o.ok) o.error = log.str();
      std::lock_guard<std::mutex> lock(log_mutex);
      err << "[beta " << grid[i] << "] " << (o.ok ? "done" : "failed") << '\n' << log.str();
    }
  };
  const unsigned n_workers = std::min<unsigned>(worker_threads(), static_cast<unsigned>(grid.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ofstream summary(fs::path(cfg.out) / "summary.csv");
  std::ofstream plot(fs::path(cfg.out) / "plot_data.csv");
  if (!summary || !plot) throw std::runtime_error("cannot write sweep summaries in " + cfg.out);
  summary.precision(17);
  plot.precision(17);
  summary << "beta,final_reward,final_fidelity,final_divergence\n";
  plot << "beta,log10_beta,reward,fidelity\n";
  nlohmann::json runs = nlohmann::json::array();
  int first_failure = kExitOk;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Outcome& o = outcomes[i];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double r = o.ok ? o.result.final.reward : nan;
    const double f = o.ok ? o.result.final.fidelity : nan;
    const double d = o.ok ? o.result.final.divergence : nan;
    summary << grid[i] << ',' << r << ',' << f << ',' << d << '\n';
    plot << grid[i] << ',' << std::log10(grid[i]) << ',' << r << ',' << f << '\n';
    runs.push_back({{"beta", grid[i]},
                    {"status", o.ok ? "ok" : "failed"},
                    {"error", o.error},
                    {"final_reward", number_or_null(r)},
                    {"final_fidelity", number_or_null(f)},
                    {"final_divergence", number_or_null(d)}});
    if (!o.ok) {
      ++failures;
      if (first_failure == kExitOk) first_failure = o.code;
    }
  }
  const nlohmann::json doc = {{"runs", runs}, {"failures", failures}};
  write_json(fs::path(cfg.out) / "summary.json", doc);
  out << doc.dump(2) << '\n';
  return failures == grid.size() ? first_failure : kExitOk;
}

// ---------------------------------------------------------------- eval

int cmd_eval(RunConfig cfg, std::ostream& out, std::ostream& /*err*/) {
  cfg.command = "eval";
  cfg.resolve();
  if (cfg.checkpoint.empty()) throw ConfigError("no checkpoint to evaluate (set \"checkpoint\" or --checkpoint)");
  if (!fs::exists(cfg.checkpoint)) throw ConfigError("checkpoint not found: " + cfg.checkpoint);
  const GaussianMixture gm = cfg.data.load();
  const ConsistencyModel model = ConsistencyModel::load(cfg.checkpoint);
  if (model.dim() != gm.dim()) throw ConfigError("checkpoint and data dimensions differ");
  prepare_out(cfg.out);
  write_json(fs::path(cfg.out) / "config.json", cfg.to_json());

  const NoiseSchedule sched(cfg.steps);
  const DistillQuality q = evaluate_distillation(model, gm, sched, cfg.eval_samples, derive_seed(cfg.seed, 0x9a7e));
  TrainConfig tcfg = cfg.train;
  tcfg.num_conditions = std::min(tcfg.num_conditions, model.config().num_conditions);
  const FidelityProbe probe =
      FidelityProbe::from_teacher(gm, sched, tcfg.eval_samples, tcfg.num_conditions, tcfg.omega, tcfg.eval_seed);
  nlohmann::json report = {{"checkpoint", cfg.checkpoint},
                           {"sliced_w2_data", q.model_sw2},
                           {"teacher_sliced_w2_data", q.teacher_sw2},
                           {"omega", tcfg.omega},
                           {"seed", cfg.seed}};
  if (!cfg.reference.empty()) {
    const ConsistencyModel reference = load_reference(cfg);
    const PolicyEvaluation ev = evaluate_policy(model, reference, sched, cfg.reward, tcfg, &probe);
    report["reward"] = ev.reward;
    report["div_mean"] = ev.divergence;
    report["fidelity"] = ev.fidelity;
    report["param_dist"] = ev.param_dist;
  } else {
    report["fidelity"] = probe.evaluate(model, sched);
    NoGradScope no_grad;
    const TrajectoryRecord traj = generate(model, sched, probe.conditions, tcfg.omega, derive_seed(tcfg.eval_seed, 3));
    report["reward"] = mean(cfg.reward.evaluate(traj.final_state(), probe.conditions)).item();
  }

  {
    NoGradScope no_grad;
    const TrajectoryRecord traj = generate(model, sched, probe.conditions, tcfg.omega, derive_seed(tcfg.eval_seed, 4));
    const Samples s = Samples::from_tensor(traj.final_state());
    std::ofstream csv(fs::path(cfg.out) / "samples.csv");
    csv.precision(17);
    for (std::size_t j = 0; j < s.d; ++j) csv << 'x' << j << ',';
    csv << "condition\n";
    for (std::size_t i = 0; i < s.n; ++i) {
      for (double v : s.row(i)) csv << v << ',';
      csv << probe.conditions[i] << '\n';
    }
  }
  write_json(fs::path(cfg.out) / "eval.json", report);
  out << report.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- oracle-check

int cmd_oracle_check(const OracleCheckOptions& opts, const std::string& report_path, std::ostream& out,
                     std::ostream& err) {
  const OracleReport report = run_oracle_checks(opts);
  const nlohmann::json doc = report.to_json();
  if (!report_path.empty()) {
    const fs::path p(report_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    write_json(p, doc);
  }
  out << doc.dump(2) << '\n';
  if (report.passed()) return kExitOk;
  for (const auto& name : report.failures()) err << "FAILED: " << name << '\n';
  return kExitCheckFailure;
}

}  // namespace rocmlab
