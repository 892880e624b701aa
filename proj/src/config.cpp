#include "rocmlab/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "rocmlab/errors.hpp"

namespace rocmlab {

GaussianMixture DataSpec::load() const {
  try {
    return file.empty() ? GaussianMixture::preset(preset) : GaussianMixture::load(file);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed mixture " + (file.empty() ? preset : file) + ": " + e.what());
  }
}

nlohmann::json DataSpec::to_json() const { return {{"preset", preset}, {"file", file}}; }

DataSpec DataSpec::from_json(const nlohmann::json& doc) {
  DataSpec d;
  if (doc.is_string()) {
    d.preset = doc.get<std::string>();
    return d;
  }
  d.preset = doc.value("preset", d.preset);
  d.file = doc.value("file", d.file);
  return d;
}

RewardModel default_reward(const GaussianMixture& gm) {
  RewardModel rm;
  rm.kind = RewardKind::Hackable;
  const std::size_t d = gm.dim();
  std::vector<double> center(d, 0.0);
  for (std::size_t m = 0; m < gm.components(); ++m) {
    for (std::size_t j = 0; j < d; ++j) center[j] += gm.weights[m] * gm.means[m][j];
  }
  rm.direction.assign(d, 0.0);
  rm.direction[0] = 1.0;
  double radius = 0.0;
  for (std::size_t m = 0; m < gm.components(); ++m) {
    std::vector<double> u(d);
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      u[j] = gm.means[m][j] - center[j];
      norm += u[j] * u[j];
    }
    norm = std::sqrt(norm);
    radius = std::max(radius, norm);
    if (norm > 0.0) {
      for (double& v : u) v /= norm;
    } else {
      u = rm.direction;
    }
    rm.directions.push_back(u);
  }
  rm.temperature = 0.5;
  rm.bonus_weight = 0.5;
  rm.bonus_radius = 1.5 * radius;
  return rm;
}

BetaArg parse_beta(const std::string& text) {
  if (text == "auto") return {true, 0.0};
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    throw ConfigError("beta must be 'auto' or a number, got '" + text + "'");
  }
  if (pos != text.size() || !(v >= 0.0) || !std::isfinite(v)) {
    throw ConfigError("beta must be 'auto' or a finite non-negative number, got '" + text + "'");
  }
  return {false, v};
}

void RunConfig::resolve() {
  if (steps < 1) throw ConfigError("K must be at least 1");
  const GaussianMixture gm = data.load();
  model.dim = gm.dim();
  model.num_conditions = std::max<std::size_t>(model.num_conditions, gm.components());
  if (train.num_conditions <= 1) train.num_conditions = gm.components();
  distill.seed = seed;
  train.seed = seed;
  if (!reward_set) {
    reward = default_reward(gm);
    reward_set = true;
  }
  reward.validate();
  if (reward.dim() != gm.dim()) throw ConfigError("reward and data dimensions differ");
  train.validate(steps);
  for (double b : betas) {
    if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("sweep betas must be finite and non-negative");
  }
  if (out.empty()) throw ConfigError("output directory must be set");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json distill_doc = {{"iterations", distill.iterations}, {"batch", distill.batch},
                                {"lr", distill.lr},                 {"ema", distill.ema},
                                {"omega_max", distill.omega_max},   {"cond_dropout", distill.cond_dropout},
                                {"teacher_substeps", distill.teacher_substeps},
                                {"log_every", distill.log_every},   {"seed", distill.seed}};
  nlohmann::json doc = {{"command", command},
                        {"data", data.to_json()},
                        {"schedule", {{"kind", "cosine"}, {"steps", steps}}},
                        {"model", model.to_json()},
                        {"distill", distill_doc},
                        {"train", train.to_json()},
                        {"reference", reference},
                        {"checkpoint", checkpoint},
                        {"betas", betas},
                        {"eval_samples", eval_samples},
                        {"out", out},
                        {"seed", seed}};
  if (reward_set) doc["reward"] = reward.to_json();
  return doc;
}

RunConfig RunConfig::from_json(const nlohmann::json& doc) {
  RunConfig c;
  static const std::set<std::string> known{"command", "data",       "schedule",     "model", "distill",
                                           "train",   "reward",     "reference",    "checkpoint",
                                           "betas",   "eval_samples", "out",        "seed"};
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& item : doc.items()) {
    if (!known.count(item.key())) throw ConfigError("unknown config key '" + item.key() + "'");
  }
  try {
    c.command = doc.value("command", c.command);
    if (doc.contains("data")) c.data = DataSpec::from_json(doc.at("data"));
    if (doc.contains("schedule")) {
      const auto& s = doc.at("schedule");
      if (s.value("kind", std::string("cosine")) != "cosine") throw ConfigError("only the cosine schedule exists");
      c.steps = s.value("steps", c.steps);
    }
    if (doc.contains("model")) c.model = NetworkConfig::from_json(doc.at("model"));
    if (doc.contains("distill")) {
      const auto& d = doc.at("distill");
      c.distill.iterations = d.value("iterations", c.distill.iterations);
      c.distill.batch = d.value("batch", c.distill.batch);
      c.distill.lr = d.value("lr", c.distill.lr);
      c.distill.ema = d.value("ema", c.distill.ema);
      c.distill.omega_max = d.value("omega_max", c.distill.omega_max);
      c.distill.cond_dropout = d.value("cond_dropout", c.distill.cond_dropout);
      c.distill.teacher_substeps = d.value("teacher_substeps", c.distill.teacher_substeps);
      c.distill.log_every = d.value("log_every", c.distill.log_every);
      c.distill.seed = d.value("seed", c.distill.seed);
    }
    if (doc.contains("train")) c.train = TrainConfig::from_json(doc.at("train"));
    if (doc.contains("reward")) {
      c.reward = RewardModel::from_json(doc.at("reward"));
      c.reward_set = true;
    }
    c.reference = doc.value("reference", c.reference);
    c.checkpoint = doc.value("checkpoint", c.checkpoint);
    c.betas = doc.value("betas", c.betas);
    c.eval_samples = doc.value("eval_samples", c.eval_samples);
    c.out = doc.value("out", c.out);
    c.seed = doc.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

}  // namespace rocmlab
