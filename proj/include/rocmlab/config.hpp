#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rocmlab/consistency.hpp"
#include "rocmlab/distill.hpp"
#include "rocmlab/gmm.hpp"
#include "rocmlab/rewards.hpp"
#include "rocmlab/trainers.hpp"

namespace rocmlab {

/// Where the data distribution comes from: a named preset or a JSON file.
struct DataSpec {
  std::string preset = "gmm2";
  std::string file;  // takes precedence when non-empty

  GaussianMixture load() const;
  nlohmann::json to_json() const;
  static DataSpec from_json(const nlohmann::json& doc);
};

/// Everything one command needs, with every default materialized so the
/// resolved document can be written next to the outputs.
struct RunConfig {
  std::string command;
  DataSpec data;
  int steps = 8;  // K, number of generation steps
  NetworkConfig model;
  DistillConfig distill;
  TrainConfig train;
  RewardModel reward;
  bool reward_set = false;     // false: derive the task default reward from the data
  std::string reference;       // base checkpoint for finetune/sweep, θ_ref
  std::string checkpoint;      // checkpoint to evaluate
  std::vector<double> betas;   // sweep grid
  std::size_t eval_samples = 4096;
  std::string out = "runs/out";
  std::uint64_t seed = 0;

  /// Applies the seed to every sub-config, fills data-dependent defaults and
  /// validates ranges. Throws ConfigError.
  void resolve();

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& doc);
  static RunConfig load(const std::string& path);
};

/// Default reward for a dataset: the hackable halfplane reward whose
/// per-condition directions point from the data mean to each component mean.
RewardModel default_reward(const GaussianMixture& gm);

/// Parses "auto" or a non-negative float.
struct BetaArg {
  bool is_auto = false;
  double value = 0.0;
};
BetaArg parse_beta(const std::string& text);

}  // namespace rocmlab
