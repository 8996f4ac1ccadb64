// Gradient checks, built against the 64-bit library.

#include <doctest.h>

#include "../support/grad_cases.hpp"
#include "docmae/mae.hpp"

using namespace docmae;
using docmae::testing::compare_gradients;

static_assert(sizeof(Scalar) == 8, "gradient suite needs the 64-bit build");

TEST_CASE("every differentiable op matches central differences") {
  for (const auto& c : docmae::testing::gradient_cases()) {
    CAPTURE(c.name);
    const auto r = c.run();
    CHECK(r.analytic_norm > 0.0);
    CHECK(r.rel_error < c.tolerance);
  }
}

TEST_CASE("d sum(A B) / dA is ones times B transposed") {
  Tensor a = Tensor::matrix({{1, 2, 3}, {4, 5, 6}}).set_requires_grad(true);
  Tensor b = Tensor::matrix({{0.5, -1}, {2, 0.25}, {-3, 1.5}});
  backward(sum(matmul(a, b)));
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k) CHECK(a.grad()[i * 3 + k] == doctest::Approx(b[k * 2] + b[k * 2 + 1]));
}

TEST_CASE("gelu derivative at zero is one half") {
  Tensor x = Tensor::scalar(0).set_requires_grad(true);
  backward(sum(gelu(x)));
  CHECK(x.grad()[0] == doctest::Approx(0.5).epsilon(1e-12));
  NoGradGuard g;
  const double h = 1e-5;
  const double fd = (gelu(Tensor::scalar(h)).item() - gelu(Tensor::scalar(-h)).item()) / (2 * h);
  CHECK(fd == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("gather_visible gradient is one on kept rows and zero on masked rows") {
  const MaskPlan plan = make_mask_plan(6, 0.5, 3);
  Tensor rows = Tensor::ones({6, 4}).set_requires_grad(true);
  backward(sum(gather_visible(rows, plan)));
  for (std::size_t r : plan.keep)
    for (std::size_t c = 0; c < 4; ++c) CHECK(rows.grad()[r * 4 + c] == 1.0);
  for (std::size_t r : plan.masked)
    for (std::size_t c = 0; c < 4; ++c) CHECK(rows.grad()[r * 4 + c] == 0.0);
}

TEST_CASE("mask token gradient is the sum of the masked-row gradients") {
  const MaskPlan plan = make_mask_plan(5, 0.6, 8);
  Tensor visible = Tensor::ones({plan.keep.size(), 3});
  Tensor token = Tensor::zeros({3}).set_requires_grad(true);
  Tensor w({5, 3});
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = Scalar(i + 1);
  backward(sum(mul(restore_with_mask_tokens(visible, token, plan), w)));
  for (std::size_t c = 0; c < 3; ++c) {
    double expected = 0;
    for (std::size_t r : plan.masked) expected += w[r * 3 + c];
    CHECK(token.grad()[c] == doctest::Approx(expected));
  }
}
