#include <doctest.h>

#include <cmath>
#include <set>

#include "docmae/errors.hpp"
#include "docmae/transformer.hpp"

using namespace docmae;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = Scalar(scale * rng.normal());
  return t;
}

void zero_residual_outputs(BlockParams& b) {
  for (Tensor t : {b.proj.weight, b.proj.bias, b.fc2.weight, b.fc2.bias})
    for (auto& v : t.data()) v = 0;
}

}  // namespace

TEST_CASE("sincos_pos_2d") {
  const PosTable t = sincos_pos_2d(18, 18, 64);
  CHECK(t.table.shape() == Shape{324, 64});
  // (0, 0): sin parts 0, cos parts 1. Layout per axis: [sin x16, cos x16].
  for (std::size_t axis = 0; axis < 2; ++axis)
    for (std::size_t k = 0; k < 16; ++k) {
      CHECK(t.table[axis * 32 + k] == 0);
      CHECK(t.table[axis * 32 + 16 + k] == 1);
    }
  for (std::size_t r = 0; r < 324; ++r) {
    double sq = 0;
    for (std::size_t c = 0; c < 64; ++c) sq += double(t.table[r * 64 + c]) * t.table[r * 64 + c];
    CHECK(std::sqrt(sq) == doctest::Approx(std::sqrt(32.0)).epsilon(1e-5));
  }
  std::set<std::vector<Scalar>> rows;
  for (std::size_t r = 0; r < 324; ++r)
    rows.insert(std::vector<Scalar>(t.table.data().begin() + r * 64, t.table.data().begin() + (r + 1) * 64));
  CHECK(rows.size() == 324);
  CHECK_THROWS_AS(sincos_pos_2d(2, 2, 30), ContractError);
  CHECK(&cached_pos_table(3, 4, 8) == &cached_pos_table(3, 4, 8));
  CHECK_FALSE(cached_pos_table(3, 4, 8).table.requires_grad());
}

TEST_CASE("default head count") {
  CHECK(default_heads(512) == 8);
  CHECK(default_heads(128) == 2);
  CHECK(default_heads(64) == 2);
}

TEST_CASE("block with zeroed residual outputs is the identity") {
  Rng rng(1);
  BlockParams b = BlockParams::init(16, 2, rng);
  zero_residual_outputs(b);
  const Tensor x = random_tensor({5, 16}, rng);
  const Tensor y = block_forward(x, b);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y[i] == x[i]);

  std::vector<BlockParams> stack;
  for (int i = 0; i < 6; ++i) {
    stack.push_back(BlockParams::init(16, 2, rng));
    zero_residual_outputs(stack.back());
  }
  const PosTable zero_pos{1, 5, Tensor::zeros({5, 16})};
  const Tensor z = decoder_forward(x, zero_pos, stack);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(z[i] == x[i]);
}

TEST_CASE("block is permutation equivariant") {
  Rng rng(2);
  BlockParams b = BlockParams::init(16, 4, rng);
  NamedTensors named;
  b.collect("b", named);
  for (auto& [n, t] : named) {
    Tensor h = t;
    for (auto& v : h.data()) v += Scalar(0.2 * rng.normal());
  }
  const Tensor x = random_tensor({5, 16}, rng);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  const Tensor y = block_forward(x, b);
  const Tensor yp = block_forward(gather_rows(x, perm), b);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 16; ++c) CHECK(yp[i * 16 + c] == doctest::Approx(y[perm[i] * 16 + c]).epsilon(1e-5));
}

TEST_CASE("attention rows are convex combinations") {
  Rng rng(3);
  BlockParams b = BlockParams::init(32, 4, rng);
  std::vector<Tensor> attn;
  block_forward(random_tensor({7, 32}, rng, 3.0), b, &attn);
  REQUIRE(attn.size() == 4);
  for (const Tensor& a : attn) {
    for (std::size_t r = 0; r < 7; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 7; ++c) {
        CHECK(a[r * 7 + c] >= 0);
        total += a[r * 7 + c];
      }
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
  CHECK_THROWS_AS(block_forward(Tensor::zeros({3, 8}), b), DimensionError);
}

TEST_CASE("encoder_forward") {
  Rng rng(4);
  const PosTable& pos = cached_pos_table(3, 3, 16);
  const MaskPlan plan = make_mask_plan(9, 0.5, 4);
  const Tensor tokens = random_tensor({plan.keep.size(), 16}, rng);
  const Tensor out = encoder_forward(tokens, pos, plan, {});
  for (std::size_t i = 0; i < plan.keep.size(); ++i)
    for (std::size_t c = 0; c < 16; ++c)
      CHECK(out[i * 16 + c] == tokens[i * 16 + c] + pos.table[plan.keep[i] * 16 + c]);
  CHECK_THROWS_AS(encoder_forward(tokens, cached_pos_table(2, 2, 16), plan, {}), ContractError);

  // Shuffling (token, position) pairs and unshuffling the output.
  std::vector<BlockParams> blocks{BlockParams::init(16, 2, rng), BlockParams::init(16, 2, rng)};
  const Tensor base = encoder_forward(tokens, pos, plan, blocks);
  MaskPlan shuffled = plan;
  const std::vector<std::size_t> perm{4, 2, 0, 3, 1};
  REQUIRE(plan.keep.size() == perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) shuffled.keep[i] = plan.keep[perm[i]];
  const Tensor out2 = encoder_forward(gather_rows(tokens, perm), pos, shuffled, blocks);
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t c = 0; c < 16; ++c) CHECK(out2[i * 16 + c] == doctest::Approx(base[perm[i] * 16 + c]).epsilon(1e-5));
}

TEST_CASE("paper-width shapes") {
  Rng rng(5);
  const PosTable& pos = cached_pos_table(18, 18, 512);
  const MaskPlan plan = make_mask_plan(324, 0.75, 1);
  const Tensor enc = encoder_forward(Tensor::zeros({81, 512}), pos, plan, {BlockParams::init(512, 8, rng)});
  CHECK(enc.shape() == Shape{81, 512});
  const Tensor dec = decoder_forward(Tensor::zeros({324, 512}), pos, {});
  CHECK(dec.shape() == Shape{324, 512});
  CHECK_THROWS_AS(decoder_forward(Tensor::zeros({323, 512}), pos, {}), ContractError);
}

TEST_CASE("decoder replay is bit-identical") {
  Rng rng(6);
  std::vector<BlockParams> blocks{BlockParams::init(16, 2, rng)};
  const Tensor x = random_tensor({9, 16}, rng);
  const Tensor a = decoder_forward(x, cached_pos_table(3, 3, 16), blocks);
  const Tensor b = decoder_forward(x, cached_pos_table(3, 3, 16), blocks);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  const Tensor k0 = decoder_forward(x, cached_pos_table(3, 3, 16), {});
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(k0[i] == x[i] + cached_pos_table(3, 3, 16).table[i]);
}
