#include <doctest.h>

#include <cmath>
#include <limits>

#include "docmae/errors.hpp"
#include "docmae/optim.hpp"
#include "docmae/random.hpp"
#include "docmae/tensor.hpp"

using namespace docmae;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("tensor construction enforces the shape contract") {
  CHECK_THROWS_AS(Tensor(Shape{2, 3}, std::vector<Scalar>(5)), DimensionError);
  Tensor t({2, 3}, Scalar(1.5));
  CHECK(t.numel() == 6);
  CHECK_FALSE(t.has_grad());
  t.set_requires_grad(true);
  CHECK(t.grad().size() == t.numel());
}

TEST_CASE("matmul") {
  Tensor a = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(values(matmul(a, Tensor::matrix({{1, 0}, {0, 1}}))) == std::vector<double>{1, 2, 3, 4});
  CHECK(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})).item() == 11);
  try {
    matmul(a, Tensor::matrix({{1, 2, 3}}));
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x2]") != std::string::npos);
    CHECK(msg.find("[1x3]") != std::string::npos);
  }
}

TEST_CASE("softmax_lastdim") {
  CHECK(values(softmax_lastdim(Tensor({2}, {0, 0}))) == std::vector<double>{0.5, 0.5});
  const Tensor s = softmax_lastdim(Tensor({2}, {1000, 0}));
  CHECK(std::abs(s[0] - 1.0) < 1e-12);
  CHECK(std::abs(s[1]) < 1e-12);
  CHECK(all_finite(s.data()));
  CHECK_THROWS_AS(softmax_lastdim(Tensor(Shape{3, 0})), DimensionError);

  Rng rng(4);
  Tensor x({6, 7});
  for (auto& v : x.data()) v = Scalar(10 * rng.normal());
  const Tensor y = softmax_lastdim(x);
  for (std::size_t r = 0; r < 6; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 7; ++c) total += y[r * 7 + c];
    CHECK(std::abs(total - 1.0) < 1e-6);
  }
}

TEST_CASE("layer_norm") {
  const Tensor one = Tensor::ones({4}), zero = Tensor::zeros({4});
  CHECK(values(layer_norm(Tensor({1, 4}, {5, 5, 5, 5}), one, zero)) == std::vector<double>{0, 0, 0, 0});
  const Tensor two = layer_norm(Tensor({1, 2}, {1, 3}), Tensor::ones({2}), Tensor::zeros({2}));
  CHECK(two[0] == doctest::Approx(-1).epsilon(1e-5));
  CHECK(two[1] == doctest::Approx(1).epsilon(1e-5));
  CHECK_THROWS_AS(layer_norm(Tensor(Shape{2, 0}), Tensor(Shape{0}), Tensor(Shape{0})), DimensionError);
  CHECK_THROWS_AS(layer_norm(Tensor::ones({2, 3}), one, zero), DimensionError);
}

TEST_CASE("gelu") {
  CHECK(gelu(Tensor::scalar(0)).item() == 0);
  CHECK(std::abs(gelu(Tensor::scalar(10)).item() - 10) < 1e-6);
  CHECK(gelu(Tensor::scalar(-10)).item() == doctest::Approx(0).epsilon(1e-6));
}

TEST_CASE("backward") {
  Tensor x = Tensor::ones({2, 3, 2}).set_requires_grad(true);
  backward(sum(x));
  for (auto g : x.grad()) CHECK(g == 1);

  Tensor y = Tensor({3}, {1, -2, 4}).set_requires_grad(true);
  backward(mse_loss(y, y));
  for (auto g : y.grad()) CHECK(g == 0);

  Tensor z = Tensor::ones({2}).set_requires_grad(true);
  CHECK_THROWS_AS(backward(scale(z, 2)), ContractError);
}

TEST_CASE("a leaf used twice accumulates both contributions") {
  Tensor x = Tensor({2}, {3, -1}).set_requires_grad(true);
  Tensor unused = Tensor::ones({2}).set_requires_grad(true);
  backward(sum(add(mul(x, x), scale(x, 5))));
  CHECK(values(Tensor({2}, std::vector<Scalar>(x.grad().begin(), x.grad().end()))) == std::vector<double>{11, 3});
  for (auto g : unused.grad()) CHECK(g == 0);
}

TEST_CASE("no-grad mode records nothing") {
  Tensor x = Tensor::ones({2}).set_requires_grad(true);
  NoGradGuard guard;
  Tensor y = scale(x, 2);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
}

TEST_CASE("graph trace is topological and visits each node once") {
  Tensor x = Tensor::ones({2}).set_requires_grad(true);
  Tensor a = scale(x, 2);
  Tensor loss = sum(add(a, mul(a, x)));
  const Graph g = Graph::trace(loss);
  const auto& nodes = g.nodes();
  CHECK(nodes.back() == loss.impl().get());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (const auto& in : nodes[i]->inputs) {
      if (!in->requires_grad) continue;
      const auto pos = std::find(nodes.begin(), nodes.end(), in.get());
      REQUIRE(pos != nodes.end());
      CHECK(std::size_t(pos - nodes.begin()) < i);
    }
    CHECK(std::count(nodes.begin(), nodes.end(), nodes[i]) == 1);
  }
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p = Tensor({3}, {1, 2, 3}).set_requires_grad(true);
    std::vector<Tensor> params{p};
    AdamState st;
    adam_step(params, st, 0.1);
    CHECK(values(p) == std::vector<double>{1, 2, 3});
    CHECK(st.step == 1);
  }
  SUBCASE("single step from p = 1, g = 1") {
    Tensor p = Tensor::scalar(1).set_requires_grad(true);
    p.grad()[0] = 1;
    std::vector<Tensor> params{p};
    AdamState st;
    adam_step(params, st, 0.1);
    // m_hat = v_hat = 1, so the step is lr / (1 + eps).
    CHECK(p.item() == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)));
    CHECK(std::abs(p.item() - 0.9) < 1e-6);
  }
  SUBCASE("200 steps on p^2") {
    Tensor p = Tensor::scalar(1).set_requires_grad(true);
    std::vector<Tensor> params{p};
    AdamState st;
    for (int i = 0; i < 200; ++i) {
      p.zero_grad();
      backward(sum(mul(p, p)));
      adam_step(params, st, 0.1);
    }
    CHECK(std::abs(p.item()) < 0.05);
  }
  SUBCASE("NaN gradient refuses the update") {
    Tensor p = Tensor({2}, {1, 2}).set_requires_grad(true);
    p.grad()[1] = std::numeric_limits<Scalar>::quiet_NaN();
    std::vector<Tensor> params{p};
    AdamState st;
    CHECK_THROWS_AS(adam_step(params, st, 0.1), PoisonedStateError);
    CHECK(values(p) == std::vector<double>{1, 2});
    CHECK(st.step == 0);
  }
}

TEST_CASE("one_cycle_lr") {
  const OneCycleSchedule s{1e-4, 1000, 0.3};
  CHECK(one_cycle_lr(s, s.peak_step()) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(one_cycle_lr(s, 0) == doctest::Approx(1e-4 / 25).epsilon(1e-12));
  CHECK(one_cycle_lr(s, 999) == doctest::Approx(1e-4 / 1e4).epsilon(1e-9));
  double peak = 0;
  for (std::int64_t t = 0; t < s.total_steps; ++t) {
    const double lr = one_cycle_lr(s, t);
    CHECK(lr > 0);
    peak = std::max(peak, lr);
    if (t > 0 && t <= s.peak_step()) CHECK(lr > one_cycle_lr(s, t - 1));
    if (t > s.peak_step()) CHECK(lr < one_cycle_lr(s, t - 1));
  }
  CHECK(peak == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK_THROWS_AS(one_cycle_lr(s, -1), ContractError);
  CHECK_THROWS_AS(one_cycle_lr(s, 1000), ContractError);
  CHECK(one_cycle_lr(OneCycleSchedule{1e-3, 1, 0.3}, 0) == 1e-3);
}

TEST_CASE("replaying an op sequence with the same seed is bit-identical") {
  auto run = [] {
    Rng rng(77);
    Tensor a({8, 16}), b({16, 4});
    trunc_normal_(a, rng);
    trunc_normal_(b, rng, 1.0);
    Tensor w = Tensor::ones({4});
    return values(layer_norm(gelu(matmul(a, b)), w, Tensor::zeros({4})));
  };
  CHECK(run() == run());
}

TEST_CASE("trunc_normal_ stays within two standard deviations") {
  Rng rng(5);
  Tensor t({4000});
  trunc_normal_(t, rng, 0.02);
  double sq = 0;
  for (auto v : t.data()) {
    CHECK(std::abs(v) <= 0.04 + 1e-9);
    sq += double(v) * v;
  }
  // Truncation at 2 sigma shrinks the standard deviation to about 0.88 sigma.
  CHECK(std::sqrt(sq / 4000) == doctest::Approx(0.02 * 0.88).epsilon(0.05));
}

TEST_CASE("rng streams are portable and independent") {
  Rng a(1), b(1), c(derive_seed(1, {2}));
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
  }
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  Rng u(9);
  for (int i = 0; i < 1000; ++i) {
    const auto k = u.uniform_index(7);
    CHECK(k < 7);
  }
}
