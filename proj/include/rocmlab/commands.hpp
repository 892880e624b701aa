#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include <nlohmann/json.hpp>

#include "rocmlab/config.hpp"
#include "rocmlab/oracle_check.hpp"

namespace rocmlab {

/// Process exit codes shared by every command.
enum ExitCode : int { kExitOk = 0, kExitCheckFailure = 1, kExitConfigError = 2, kExitNumericFailure = 3 };

/// Runs `body` and maps exceptions to exit codes: configuration, shape and
/// file errors to 2, numeric failures to 3, anything else to 1. The message
/// goes to `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

/// Distills a consistency model from the analytic teacher. Writes
/// model.ckpt, loss.csv and config.json under cfg.out and prints a JSON
/// report with the sliced W2 of model and teacher against the data.
int cmd_pretrain(RunConfig cfg, std::ostream& out, std::ostream& err);

struct FinetuneResult {
  double beta = 0.0;
  BetaResolution auto_beta;  // filled when beta was resolved automatically
  PolicyEvaluation final;
  std::size_t iterations = 0;

  nlohmann::json to_json(const RunConfig& cfg) const;
};

/// Fine-tunes the reference checkpoint (θ_ref) and writes metrics.csv,
/// final.ckpt, optional periodic checkpoints and config.json under cfg.out.
FinetuneResult run_finetune(RunConfig cfg, std::ostream& err);
int cmd_finetune(RunConfig cfg, std::ostream& out, std::ostream& err);

/// One fine-tune per distinct beta in cfg.betas, in parallel up to
/// ROCMLAB_THREADS workers. Writes summary.csv, summary.json and
/// plot_data.csv; failed runs are recorded and the sweep continues.
int cmd_sweep(RunConfig cfg, std::ostream& out, std::ostream& err);

/// Evaluates cfg.checkpoint: sliced W2 to data and teacher, reward, and
/// divergence to cfg.reference when given. Writes samples.csv for plotting.
int cmd_eval(RunConfig cfg, std::ostream& out, std::ostream& err);

/// Runs the oracle suite, prints the report JSON (also written to
/// `report_path` when non-empty) and returns 1 on any failed check.
int cmd_oracle_check(const OracleCheckOptions& opts, const std::string& report_path, std::ostream& out,
                     std::ostream& err);

/// Worker count from ROCMLAB_THREADS (default: hardware concurrency), at least 1.
unsigned worker_threads();

}  // namespace rocmlab
