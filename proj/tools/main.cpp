// rocmlab: pretrain, fine-tune, sweep, evaluate and self-check consistency
// models on toy Gaussian-mixture tasks.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rocmlab/commands.hpp"
#include "rocmlab/errors.hpp"

namespace {

using namespace rocmlab;

/// Flags that override fields of the JSON config.
struct Overrides {
  std::string config;
  std::optional<std::string> data;
  std::optional<std::string> trainer;
  std::optional<std::string> div;
  std::optional<std::string> beta;
  std::optional<int> k;
  std::optional<double> omega;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> truncate;
  std::optional<double> clip;
  std::optional<std::string> reference;
  std::optional<std::string> checkpoint;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::optional<std::string> optimizer;
  std::vector<double> betas;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON run config; flags below override its fields");
  cmd->add_option("--data", o.data, "data preset name (gmm2, gmm8-ring, two-moons-gmm) or mixture JSON file");
  cmd->add_option("--k", o.k, "number of generation steps K");
  cmd->add_option("--omega", o.omega, "guidance scale");
  cmd->add_option("--seed", o.seed, "run seed");
  cmd->add_option("--out", o.out, "output directory");
}

void add_training(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--reference", o.reference, "base checkpoint (theta_ref)");
  cmd->add_option("--trainer", o.trainer, "rocm or pg")->check(CLI::IsMember({"rocm", "pg"}));
  cmd->add_option("--div", o.div, "divergence regularizer")
      ->check(CLI::IsMember({"kl", "reverse-kl", "hellinger", "fisher", "js", "none"}));
  cmd->add_option("--beta", o.beta, "regularization weight: a number or 'auto'");
  cmd->add_option("--truncate", o.truncate, "backpropagate through the last m steps (0 = all)");
  cmd->add_option("--clip", o.clip, "pg only: clipped importance-ratio variant with this clip range");
  cmd->add_option("--iterations", o.iterations, "fine-tuning iterations");
  cmd->add_option("--batch", o.batch, "trajectories per step");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--optimizer", o.optimizer, "sgd or adam")->check(CLI::IsMember({"sgd", "adam"}));
}

RunConfig build_config(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (o.data) {
    const bool is_file = std::filesystem::path(*o.data).extension() == ".json" || std::filesystem::exists(*o.data);
    cfg.data.file = is_file ? *o.data : std::string();
    if (!is_file) cfg.data.preset = *o.data;
  }
  if (o.k) cfg.steps = *o.k;
  if (o.omega) cfg.train.omega = *o.omega;
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.trainer) cfg.train.trainer = parse_trainer(*o.trainer);
  if (o.div) cfg.train.divergence.kind = parse_divergence_kind(*o.div);
  if (o.beta) {
    const BetaArg b = parse_beta(*o.beta);
    cfg.train.beta_auto = b.is_auto;
    if (!b.is_auto) cfg.train.divergence.beta = b.value;
  }
  if (o.truncate) cfg.train.truncate = *o.truncate;
  if (o.clip) cfg.train.pg_clip = *o.clip;
  if (o.reference) cfg.reference = *o.reference;
  if (o.checkpoint) cfg.checkpoint = *o.checkpoint;
  if (o.iterations) {
    cfg.train.iterations = *o.iterations;
    cfg.distill.iterations = *o.iterations;
  }
  if (o.batch) {
    cfg.train.batch = *o.batch;
    cfg.distill.batch = *o.batch;
  }
  if (o.lr) {
    cfg.train.lr = *o.lr;
    cfg.distill.lr = *o.lr;
  }
  if (o.optimizer) cfg.train.optimizer = parse_optimizer(*o.optimizer);
  if (!o.betas.empty()) cfg.betas = o.betas;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direct reward optimization of consistency models on toy Gaussian mixtures"};
  app.require_subcommand(1);

  Overrides pre, fine, sweep, eval;
  auto* c_pre = app.add_subcommand("pretrain", "distill a consistency model from the analytic teacher");
  add_common(c_pre, pre);
  c_pre->add_option("--iterations", pre.iterations, "distillation iterations");
  c_pre->add_option("--batch", pre.batch, "distillation batch size");
  c_pre->add_option("--lr", pre.lr, "distillation learning rate");

  auto* c_fine = app.add_subcommand("finetune", "fine-tune a checkpoint against a reward");
  add_common(c_fine, fine);
  add_training(c_fine, fine);

  auto* c_sweep = app.add_subcommand("sweep", "fine-tune once per beta and summarize");
  add_common(c_sweep, sweep);
  add_training(c_sweep, sweep);
  c_sweep->add_option("--betas", sweep.betas, "beta grid")->delimiter(',');

  auto* c_eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(c_eval, eval);
  c_eval->add_option("--checkpoint", eval.checkpoint, "checkpoint to evaluate");
  c_eval->add_option("--reference", eval.reference, "reference checkpoint for divergence and distance");

  std::string report_path;
  std::string fault;
  std::uint64_t oracle_seed = 0;
  auto* c_oracle = app.add_subcommand("oracle-check", "run the analytic oracle suite");
  c_oracle->add_option("--report", report_path, "also write the report JSON here");
  c_oracle->add_option("--seed", oracle_seed, "seed for the Monte-Carlo checks");
  c_oracle->add_option("--inject-fault", fault, "test hook: deliberately break a check")
      ->check(CLI::IsMember({"hellinger-sign"}))
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  return guarded(
      [&]() -> int {
        if (c_pre->parsed()) return cmd_pretrain(build_config(pre), std::cout, std::cerr);
        if (c_fine->parsed()) return cmd_finetune(build_config(fine), std::cout, std::cerr);
        if (c_sweep->parsed()) return cmd_sweep(build_config(sweep), std::cout, std::cerr);
        if (c_eval->parsed()) return cmd_eval(build_config(eval), std::cout, std::cerr);
        OracleCheckOptions opts;
        opts.corrupt_hellinger_sign = fault == "hellinger-sign";
        opts.seed = oracle_seed;
        return cmd_oracle_check(opts, report_path, std::cout, std::cerr);
      },
      std::cerr);
}
