#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "rocmlab/commands.hpp"
#include "rocmlab/config.hpp"
#include "rocmlab/errors.hpp"

using namespace rocmlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("rocmlab_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& leaf) const { return (path / leaf).string(); }
};

RunConfig tiny(const std::string& out) {
  RunConfig cfg;
  cfg.model.hidden = 16;
  cfg.model.layers = 2;
  cfg.model.frequencies = 3;
  cfg.model.cond_dim = 4;
  cfg.distill.iterations = 20;
  cfg.distill.batch = 16;
  cfg.distill.teacher_substeps = 8;
  cfg.train.iterations = 4;
  cfg.train.batch = 8;
  cfg.train.eval_samples = 64;
  cfg.eval_samples = 128;
  cfg.out = out;
  return cfg;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("beta argument parsing") {
  CHECK(parse_beta("auto").is_auto);
  CHECK(parse_beta("0.25").value == 0.25);
  CHECK(parse_beta("1e-4").value == 1e-4);
  CHECK_THROWS_AS(parse_beta("-1"), ConfigError);
  CHECK_THROWS_AS(parse_beta("nan"), ConfigError);
  CHECK_THROWS_AS(parse_beta("big"), ConfigError);
}

TEST_CASE("run config resolves data-dependent defaults and round-trips") {
  RunConfig cfg;
  cfg.data.preset = "gmm8-ring";
  cfg.seed = 9;
  cfg.resolve();
  CHECK(cfg.model.num_conditions == 8);
  CHECK(cfg.train.num_conditions == 8);
  CHECK(cfg.train.seed == 9);
  CHECK(cfg.distill.seed == 9);
  CHECK(cfg.reward.kind == RewardKind::Hackable);
  CHECK(cfg.reward.directions.size() == 8);
  const RunConfig back = RunConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());

  RunConfig bad;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.resolve(), ConfigError);
  bad = RunConfig{};
  bad.data.preset = "unknown";
  CHECK_THROWS_AS(bad.resolve(), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"steps", "eight"}}), ConfigError);
}

TEST_CASE("exit code mapping") {
  std::ostringstream err;
  CHECK(guarded([] { return 0; }, err) == kExitOk);
  CHECK(guarded([]() -> int { throw ConfigError("bad flag"); }, err) == kExitConfigError);
  CHECK(guarded([]() -> int { throw NumericError("nan"); }, err) == kExitNumericFailure);
  CHECK(guarded([]() -> int { throw std::runtime_error("disk"); }, err) == kExitCheckFailure);
  CHECK(err.str().find("bad flag") != std::string::npos);
}

TEST_CASE("pretrain with zero iterations writes the initial model") {
  TempDir dir("pretrain0");
  RunConfig cfg = tiny(dir.str("out"));
  cfg.distill.iterations = 0;
  std::ostringstream out, err;
  CHECK(cmd_pretrain(cfg, out, err) == kExitOk);
  const ConsistencyModel saved = ConsistencyModel::load(dir.str("out/model.ckpt"));
  cfg.resolve();
  const ConsistencyModel init(cfg.model, NoiseSchedule(cfg.steps), derive_seed(cfg.seed, 0x1417));
  CHECK(parameter_distance(saved, init) == 0.0);
  CHECK(fs::exists(dir.str("out/config.json")));
  CHECK(read_text(dir.str("out/loss.csv")).rfind("iteration,loss\n", 0) == 0);
  const auto report = nlohmann::json::parse(out.str());
  CHECK(report.contains("sliced_w2"));
  CHECK(report.contains("teacher_sliced_w2"));
}

TEST_CASE("missing data file is a config error naming the path") {
  TempDir dir("missing");
  RunConfig cfg = tiny(dir.str("out"));
  cfg.data.file = dir.str("nowhere.json");
  std::ostringstream out, err;
  CHECK(guarded([&] { return cmd_pretrain(cfg, out, err); }, err) == kExitConfigError);
  CHECK(err.str().find(dir.str("nowhere.json")) != std::string::npos);
}

TEST_CASE("finetune, sweep and eval outputs") {
  TempDir dir("pipeline");
  RunConfig pre = tiny(dir.str("pre"));
  std::ostringstream out, err;
  REQUIRE(cmd_pretrain(pre, out, err) == kExitOk);

  SUBCASE("auto beta is resolved and echoed") {
    RunConfig cfg = tiny(dir.str("ft"));
    cfg.reference = dir.str("pre/model.ckpt");
    cfg.train.beta_auto = true;
    std::ostringstream o, e;
    REQUIRE(cmd_finetune(cfg, o, e) == kExitOk);
    const auto result = nlohmann::json::parse(o.str());
    CHECK(result["beta"].get<double>() > 0.0);
    CHECK(result["beta_auto"]["ratio"].get<double>() == doctest::Approx(0.1));
    CHECK(e.str().find("beta auto") != std::string::npos);
    const auto frozen = read_json(dir.str("ft/config.json"));
    CHECK(frozen["train"]["divergence"]["beta"].get<double>() == result["beta"].get<double>());
    CHECK(read_text(dir.str("ft/metrics.csv")).rfind(RunMetrics::csv_header(), 0) == 0);
    CHECK(fs::exists(dir.str("ft/final.ckpt")));
  }

  SUBCASE("a one-point sweep equals a single finetune") {
    RunConfig ft = tiny(dir.str("single"));
    ft.reference = dir.str("pre/model.ckpt");
    ft.train.divergence.beta = 0.05;
    std::ostringstream o1, e1;
    REQUIRE(cmd_finetune(ft, o1, e1) == kExitOk);
    RunConfig sw = tiny(dir.str("sweep"));
    sw.reference = ft.reference;
    sw.betas = {0.05, 0.05};
    std::ostringstream o2, e2;
    REQUIRE(cmd_sweep(sw, o2, e2) == kExitOk);
    CHECK(e2.str().find("duplicate") != std::string::npos);
    const auto summary = read_json(dir.str("sweep/summary.json"));
    REQUIRE(summary["runs"].size() == 1);
    const auto single = nlohmann::json::parse(o1.str());
    CHECK(summary["runs"][0]["final_reward"].get<double>() == single["reward"].get<double>());
    CHECK(summary["runs"][0]["final_fidelity"].get<double>() == single["fidelity"].get<double>());
    CHECK(read_text(dir.str("sweep/summary.csv")).rfind("beta,final_reward,final_fidelity,final_divergence", 0) == 0);
    CHECK(fs::exists(dir.str("sweep/plot_data.csv")));
  }

  SUBCASE("eval reports distances") {
    RunConfig cfg = tiny(dir.str("eval"));
    cfg.checkpoint = dir.str("pre/model.ckpt");
    cfg.reference = dir.str("pre/model.ckpt");
    std::ostringstream o, e;
    REQUIRE(cmd_eval(cfg, o, e) == kExitOk);
    const auto doc = nlohmann::json::parse(o.str());
    CHECK(doc["param_dist"].get<double>() == 0.0);
    CHECK(doc["div_mean"].get<double>() == 0.0);
    CHECK(fs::exists(dir.str("eval/samples.csv")));
  }

  SUBCASE("missing reference is a config error") {
    RunConfig cfg = tiny(dir.str("nope"));
    cfg.reference = dir.str("absent.ckpt");
    std::ostringstream o, e;
    CHECK(guarded([&] { return cmd_finetune(cfg, o, e); }, e) == kExitConfigError);
  }
}
