#include <cmath>
#include <vector>

#include "doctest.h"
#include "rocmlab/random.hpp"
#include "rocmlab/tensor.hpp"

using namespace rocmlab;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  std::vector<Real> v(shape_numel(shape));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from(std::move(shape), std::move(v));
}

}  // namespace

TEST_CASE("elementwise arithmetic") {
  const Tensor a = Tensor::from({2}, {1.0, 2.0});
  const Tensor b = Tensor::from({2}, {3.0, 4.0});
  CHECK(values(a + b) == std::vector<double>{4.0, 6.0});
  CHECK(values(a * Tensor::full({2}, 1.0)) == values(a));
  CHECK(std::abs(exp(log(Tensor::from({1}, {2.5}))).item() - 2.5) < 1e-12);
}

TEST_CASE("elementwise errors name the shapes") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({4});
  try {
    (void)(a + b);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(shape_str({2, 3})) != std::string::npos);
    CHECK(msg.find(shape_str({4})) != std::string::npos);
  }
  CHECK_THROWS_AS(log(Tensor::from({1}, {-1.0})), DomainError);
  CHECK_THROWS_AS(sqrt(Tensor::from({1}, {-1.0})), DomainError);
}

TEST_CASE("softplus is stable at both tails") {
  const Tensor x = Tensor::from({3}, {-800.0, 0.0, 800.0});
  const auto y = values(softplus(x));
  CHECK(y[0] == doctest::Approx(0.0));
  CHECK(y[1] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(y[2] == doctest::Approx(800.0));
}

TEST_CASE("matmul identities and inner-extent check") {
  const Tensor eye = Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0});
  const Tensor m = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(values(matmul(eye, m)) == values(m));
  CHECK(values(matmul(Tensor::from({1, 2}, {1.0, 0.0}), Tensor::from({2, 1}, {0.0, 5.0}))) ==
        std::vector<double>{0.0});
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("gradient of sum(A B) with respect to A is the row-broadcast column sums of B") {
  Rng rng(11);
  const Tensor b = random_tensor(rng, {3, 4});
  std::vector<Tensor> params{Tensor::parameter({2, 3}, values(random_tensor(rng, {2, 3})))};
  {
    Tape tape;
    TapeScope scope(tape);
    backward(sum(matmul(params[0], b)));
  }
  const auto g = params[0].grad();
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double row_sum = 0.0;
      for (std::size_t k = 0; k < 4; ++k) row_sum += b[j * 4 + k];
      CHECK(g[i * 3 + j] == doctest::Approx(row_sum).epsilon(1e-14));
    }
  }
  CHECK(grad_check_params([&] { return sum(matmul(params[0], b)); }, params) < 1e-9);
}

TEST_CASE("reductions") {
  const Tensor x = Tensor::from({3}, {1.0, 2.0, 3.0});
  CHECK(sum(x).item() == 6.0);
  CHECK(mean(Tensor::from({2}, {2.0, 4.0})).item() == 3.0);
  const Tensor m = Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0});
  CHECK(values(reduce(Reduction::Sum, m, {})) == values(m));
  CHECK(values(sum(m, {0})) == std::vector<double>{4.0, 6.0});
  CHECK(values(mean(m, {1})) == std::vector<double>{1.5, 3.5});
  CHECK_THROWS_AS(sum(m, {2}), ShapeError);
}

TEST_CASE("backward basics") {
  std::vector<Tensor> x{Tensor::parameter({1}, {3.0})};
  {
    Tape tape;
    TapeScope scope(tape);
    backward(sum(square(x[0])));
  }
  CHECK(x[0].grad()[0] == 6.0);

  Tape tape;
  TapeScope scope(tape);
  CHECK_NOTHROW(backward(Tensor::scalar(4.0)));
  CHECK_THROWS_AS(backward(x[0] * Tensor::from({2}, {1.0, 2.0})), std::invalid_argument);
}

TEST_CASE("no-grad scope records nothing") {
  Tape tape;
  TapeScope scope(tape);
  const Tensor p = Tensor::parameter({2}, {1.0, 2.0});
  {
    NoGradScope off;
    (void)sum(exp(p));
  }
  CHECK(tape.size() == 0);
  (void)sum(exp(p));
  CHECK(tape.size() > 0);
}

TEST_CASE("grad_check on known functions") {
  Rng rng(5);
  CHECK(grad_check([](const Tensor& x) { return sum(x); }, random_tensor(rng, {5})) < 1e-10);
  CHECK(grad_check([](const Tensor& x) { return sum(exp(x)); }, Tensor::from({1}, {0.0})) < 1e-10);
  const Tensor w = random_tensor(rng, {4, 3});
  CHECK(grad_check([&](const Tensor& x) { return sum(tanh(matmul(w, x))); }, random_tensor(rng, {3, 1})) < 1e-6);
}

TEST_CASE("three-layer tanh network gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::vector<Tensor> params;
    for (auto [r, c] : {std::pair{3, 6}, std::pair{6, 6}, std::pair{6, 1}}) {
      params.push_back(Tensor::parameter({std::size_t(r), std::size_t(c)}, values(random_tensor(rng, {std::size_t(r), std::size_t(c)}, 0.7))));
    }
    const Tensor x = random_tensor(rng, {4, 3});
    auto f = [&] { return sum(matmul(tanh(matmul(tanh(matmul(x, params[0])), params[1])), params[2])); };
    CHECK(grad_check_params(f, params) < 1e-6);
  }
}

TEST_CASE("concat, gather and reshape gradients") {
  Rng rng(3);
  std::vector<Tensor> params{Tensor::parameter({4, 2}, values(random_tensor(rng, {4, 2}))),
                             Tensor::parameter({3, 1}, values(random_tensor(rng, {3, 1})))};
  const std::vector<int> rows{3, 0, 3};
  auto f = [&] {
    const Tensor parts[] = {gather_rows(params[0], rows), params[1]};
    return sum(square(reshape(concat_cols(parts), {9})));
  };
  CHECK(grad_check_params(f, params) < 1e-8);
  CHECK_THROWS_AS(gather_rows(params[0], std::vector<int>{4}), ShapeError);
}

TEST_CASE("recorded tensors are immutable") {
  Tape tape;
  TapeScope scope(tape);
  const Tensor p = Tensor::parameter({1}, {1.0});
  Tensor y = p * 2.0;
  CHECK_THROWS_AS(y.mutable_data(), std::logic_error);
}
