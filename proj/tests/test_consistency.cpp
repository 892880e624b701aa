#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "rocmlab/consistency.hpp"
#include "rocmlab/distill.hpp"
#include "rocmlab/gmm.hpp"
#include "rocmlab/pf_ode.hpp"
#include "rocmlab/samples.hpp"

using namespace rocmlab;

namespace {

NetworkConfig small_net(bool zero_output) {
  NetworkConfig c;
  c.hidden = 16;
  c.layers = 2;
  c.frequencies = 3;
  c.cond_dim = 4;
  c.zero_output = zero_output;
  return c;
}

/// The exact consistency function of mixture data: integrate the teacher
/// PF-ODE from (x, t) to 0.
class TeacherConsistency final : public ConsistencyFunction {
 public:
  TeacherConsistency(GaussianMixture gm, NoiseSchedule sched) : teacher_(std::move(gm), sched) {}
  std::size_t dim() const override { return teacher_.data().dim(); }
  Tensor apply(const Tensor& x, const StepInputs& in) const override {
    const std::size_t rows = x.shape()[0], d = x.shape()[1];
    std::vector<Real> out(rows * d);
    for (std::size_t i = 0; i < rows; ++i) {
      const double t = in.t.size() == 1 ? in.t[0] : in.t[i];
      std::vector<double> xi(x.data().begin() + i * d, x.data().begin() + (i + 1) * d);
      const auto y = teacher_.solve(xi, t, 0.0, 64);
      std::copy(y.begin(), y.end(), out.begin() + i * d);
    }
    return Tensor::from({rows, d}, std::move(out));
  }
  std::vector<Tensor>& parameters() override { return params_; }
  const std::vector<Tensor>& parameters() const override { return params_; }
  std::unique_ptr<ConsistencyFunction> clone() const override { return std::make_unique<TeacherConsistency>(*this); }

 private:
  Teacher teacher_;
  std::vector<Tensor> params_;
};

Tensor random_points(Rng& rng, std::size_t rows, std::size_t d) {
  return Tensor::from({rows, d}, rng.normals(rows * d));
}

}  // namespace

TEST_CASE("boundary condition at t = 0 holds for any weights") {
  const NoiseSchedule sched(8);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ConsistencyModel model(small_net(false), sched, seed);
    Rng rng(seed + 100);
    const Tensor x = random_points(rng, 6, 2);
    const double t0[] = {0.0};
    const double w[] = {1.5};
    const int c[] = {1};
    const Tensor y = model.apply(x, {t0, w, c});
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);
  }
}

TEST_CASE("zero output layer gives the skip connection") {
  const NoiseSchedule sched(8);
  const ConsistencyModel model(small_net(true), sched, 3);
  Rng rng(1);
  const Tensor x = random_points(rng, 4, 2);
  for (double t : {0.125, 0.5, 1.0}) {
    const double ts[] = {t};
    const double w[] = {0.0};
    const int c[] = {kNullCondition};
    const Tensor y = model.apply(x, {ts, w, c});
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == doctest::Approx(model.c_skip(t) * x[i]).epsilon(1e-15));
  }
  CHECK(model.c_skip(0.0) == 1.0);
  CHECK(model.c_out(0.0) == 0.0);
}

TEST_CASE("network gradient matches central differences") {
  const NoiseSchedule sched(8);
  ConsistencyModel model(small_net(false), sched, 9);
  Rng rng(2);
  const Tensor x = random_points(rng, 3, 2);
  const double ts[] = {0.25, 0.5, 0.875};
  const double w[] = {0.0, 1.0, 2.5};
  const int c[] = {0, 1, kNullCondition};
  auto f = [&] { return sum(square(model.apply(x, {ts, w, c}))); };
  CHECK(grad_check_params(f, model.parameters()) < 1e-5);
}

TEST_CASE("condition labels are range-checked") {
  const NoiseSchedule sched(8);
  const ConsistencyModel model(small_net(false), sched, 1);
  const Tensor x = Tensor::zeros({1, 2});
  const double ts[] = {0.5};
  const double w[] = {0.0};
  const int bad[] = {2};
  CHECK_THROWS_AS(model.apply(x, {ts, w, bad}), std::out_of_range);
  CHECK_THROWS_AS(model.apply(Tensor::zeros({1, 3}), {ts, w, bad}), ShapeError);
}

TEST_CASE("generation is deterministic and replays bit-exactly") {
  const NoiseSchedule sched(8);
  const ConsistencyModel model(small_net(false), sched, 4);
  const std::vector<int> conds{0, 1, kNullCondition, 0};
  const TrajectoryRecord a = generate(model, sched, conds, 1.0, 77);
  const TrajectoryRecord b = generate(model, sched, conds, 1.0, 77);
  const TrajectoryRecord r = replay(model, sched, conds, 1.0, a.noises);
  REQUIRE(a.states.size() == 9);
  for (int k = 0; k <= 8; ++k) {
    for (std::size_t i = 0; i < a.states[k].numel(); ++i) {
      CHECK(a.states[k][i] == b.states[k][i]);
      CHECK(a.states[k][i] == r.states[k][i]);
    }
  }
  const TrajectoryRecord other = generate(model, sched, conds, 1.0, 78);
  CHECK(other.final_state()[0] != a.final_state()[0]);
}

TEST_CASE("multi-step rule") {
  const NoiseSchedule sched(4);
  const ConsistencyModel model(small_net(false), sched, 5);
  const std::vector<int> conds{0, 1};
  const TrajectoryRecord tr = generate(model, sched, conds, 0.5, 3);
  for (std::size_t i = 0; i < tr.states[4].numel(); ++i) CHECK(tr.states[4][i] == tr.noises[4][i]);
  for (int k = 4; k >= 2; --k) {
    const double a = sched.alpha_at(k - 1), s = sched.sigma_at(k - 1);
    for (std::size_t i = 0; i < tr.states[k - 1].numel(); ++i) {
      CHECK(tr.states[k - 1][i] == doctest::Approx(a * tr.denoised[k][i] + s * tr.noises[k - 1][i]).epsilon(1e-15));
    }
  }
  for (std::size_t i = 0; i < tr.states[0].numel(); ++i) CHECK(tr.states[0][i] == tr.denoised[1][i]);
}

TEST_CASE("single step is the consistency function of the initial noise") {
  const NoiseSchedule sched(1);
  const ConsistencyModel model(small_net(false), sched, 6);
  const std::vector<int> conds{1, 0, kNullCondition};
  const TrajectoryRecord tr = generate(model, sched, conds, 2.0, 12);
  const double t1[] = {1.0};
  const double w[] = {2.0};
  const Tensor direct = model.apply(tr.noises[1], {t1, w, conds});
  for (std::size_t i = 0; i < direct.numel(); ++i) CHECK(tr.final_state()[i] == direct[i]);
}

TEST_CASE("exact consistency function reproduces single-Gaussian data") {
  const NoiseSchedule sched(4);
  GaussianMixture gm;
  gm.weights = {1.0};
  gm.means = {{0.5, -1.0}};
  gm.covariances = {{0.3, 0.6}};
  const TeacherConsistency f(gm, sched);
  constexpr std::size_t n = 10000;
  const std::vector<int> conds(n, kNullCondition);
  const Samples x = Samples::from_tensor(generate(f, sched, conds, 0.0, 2024).final_state());
  const auto m = sample_mean(x);
  const auto c = sample_covariance(x);
  for (std::size_t j = 0; j < 2; ++j) {
    const double var = gm.covariances[0][j];
    CHECK(std::abs(m[j] - gm.means[0][j]) < 3.0 * std::sqrt(var / n));
    CHECK(std::abs(c[j * 3] - var) < 3.0 * var * std::sqrt(2.0 / n));
  }
}

TEST_CASE("checkpoint round trip") {
  const NoiseSchedule sched(8);
  const ConsistencyModel model(small_net(false), sched, 8);
  const auto path = (std::filesystem::temp_directory_path() / "rocmlab_roundtrip.ckpt").string();
  model.save(path);
  const ConsistencyModel back = ConsistencyModel::load(path);
  CHECK(flatten_parameters(back.parameters()) == flatten_parameters(model.parameters()));
  CHECK(back.schedule().steps() == 8);
  CHECK(parameter_distance(model, back) == 0.0);
  std::filesystem::remove(path);
  CHECK_THROWS(ConsistencyModel::load(path));
}

TEST_CASE("frozen copies and clones own their parameters") {
  const NoiseSchedule sched(8);
  ConsistencyModel model(small_net(false), sched, 2);
  const auto frozen = frozen_copy(model);
  model.parameters()[0].mutable_data()[0] += 1.0;
  CHECK(parameter_distance(model, *frozen) == doctest::Approx(1.0));
  for (const Tensor& p : frozen->parameters()) CHECK_FALSE(p.requires_grad());
}

TEST_CASE("distillation: zero iterations is a no-op and the loss stays finite") {
  const NoiseSchedule sched(8);
  const GaussianMixture gm = GaussianMixture::preset("gmm2");
  ConsistencyModel model(small_net(true), sched, 1);
  const auto before = flatten_parameters(model.parameters());
  DistillConfig cfg;
  cfg.iterations = 0;
  CHECK(distill(model, gm, cfg).loss_curve.empty());
  CHECK(flatten_parameters(model.parameters()) == before);

  cfg.iterations = 30;
  cfg.batch = 32;
  cfg.log_every = 5;
  const DistillResult r = distill(model, gm, cfg);
  CHECK(r.loss_curve.size() >= 6);
  for (const LossPoint& p : r.loss_curve) CHECK(std::isfinite(p.loss));
  CHECK(flatten_parameters(model.parameters()) != before);
}

TEST_CASE("stratified conditions follow the weights") {
  GaussianMixture gm;
  gm.weights = {0.25, 0.75};
  gm.means = {{0.0}, {1.0}};
  gm.covariances = {{1.0}, {1.0}};
  const auto c = stratified_conditions(gm, 8);
  CHECK(std::count(c.begin(), c.end(), 0) == 2);
  CHECK(std::count(c.begin(), c.end(), 1) == 6);
}
