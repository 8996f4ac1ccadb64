#include "grad_cases.hpp"

#include "docmae/mae.hpp"
#include "docmae/rectifier.hpp"

namespace docmae::testing {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0, double offset = 0.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = Scalar(offset + scale * rng.normal());
  return t;
}

// Scalar probe <out, w> with fixed random weights, so every output entry
// contributes with a distinct factor.
Tensor probe(const Tensor& out, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(out, random_tensor(out.shape(), rng)));
}

std::vector<Tensor> with(std::vector<Tensor> a, const NamedTensors& named) {
  for (const auto& [n, t] : named) a.push_back(t);
  return a;
}

void randomize(const NamedTensors& named, Rng& rng, double scale) {
  for (const auto& [n, t] : named) {
    Tensor h = t;
    for (auto& v : h.data()) v = Scalar(scale * rng.normal());
  }
}

}  // namespace

std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, double tol, std::function<GradComparison()> fn) {
    cases.push_back({std::move(name), tol, std::move(fn)});
  };

  add_case("matmul", 1e-4, [] {
    Rng rng(1);
    return compare_gradients({random_tensor({3, 4}, rng), random_tensor({4, 5}, rng)},
                             [](const auto& in) { return probe(matmul(in[0], in[1]), 11); });
  });
  add_case("matmul_nt", 1e-4, [] {
    Rng rng(2);
    return compare_gradients({random_tensor({3, 4}, rng), random_tensor({5, 4}, rng)},
                             [](const auto& in) { return probe(matmul_nt(in[0], in[1]), 12); });
  });
  add_case("transpose", 1e-4, [] {
    Rng rng(3);
    return compare_gradients({random_tensor({3, 4}, rng)}, [](const auto& in) { return probe(transpose(in[0]), 13); });
  });
  add_case("linear", 1e-4, [] {
    Rng rng(4);
    return compare_gradients({random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)},
                             [](const auto& in) { return probe(linear(in[0], in[1], in[2]), 14); });
  });
  add_case("add_sub_mul_scale", 1e-4, [] {
    Rng rng(5);
    return compare_gradients({random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}, [](const auto& in) {
      return probe(scale(mul(add(in[0], in[1]), sub(in[0], in[1])), Scalar(0.7)), 15);
    });
  });
  add_case("add_rowwise", 1e-4, [] {
    Rng rng(6);
    return compare_gradients({random_tensor({2, 3, 4}, rng), random_tensor({4}, rng)},
                             [](const auto& in) { return probe(add_rowwise(in[0], in[1]), 16); });
  });
  add_case("softmax_lastdim", 1e-4, [] {
    Rng rng(7);
    return compare_gradients({random_tensor({4}, rng)}, [](const auto& in) { return probe(softmax_lastdim(in[0]), 17); });
  });
  add_case("softmax_lastdim_rows", 1e-4, [] {
    Rng rng(8);
    return compare_gradients({random_tensor({3, 5}, rng, 2.0)},
                             [](const auto& in) { return probe(softmax_lastdim(in[0]), 18); });
  });
  add_case("layer_norm", 1e-4, [] {
    Rng rng(9);
    return compare_gradients(
        {random_tensor({3, 8}, rng), random_tensor({8}, rng, 0.5, 1.0), random_tensor({8}, rng)},
        [](const auto& in) { return probe(layer_norm(in[0], in[1], in[2]), 19); });
  });
  add_case("gelu", 1e-4, [] {
    Rng rng(10);
    return compare_gradients({random_tensor({2, 6}, rng, 2.0)}, [](const auto& in) { return probe(gelu(in[0]), 20); });
  });
  add_case("reshape_slice_concat", 1e-4, [] {
    Rng rng(11);
    return compare_gradients({random_tensor({4, 6}, rng), random_tensor({4, 2}, rng)}, [](const auto& in) {
      Tensor joined = concat_cols({slice_cols(in[0], 1, 3), in[1], slice_cols(in[0], 5, 1)});
      return probe(reshape(joined, {2, 12}), 21);
    });
  });
  add_case("gather_rows", 1e-4, [] {
    Rng rng(12);
    return compare_gradients({random_tensor({5, 3}, rng)}, [](const auto& in) {
      const std::vector<std::size_t> rows{4, 0, 4, 2};
      return probe(gather_rows(in[0], rows), 22);
    });
  });
  add_case("mean_mse_l1", 1e-4, [] {
    Rng rng(13);
    // Offsets keep every |a - b| well away from the kink of the L1 term.
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = Tensor::zeros({3, 4});
    for (std::size_t i = 0; i < a.numel(); ++i) b[i] = a[i] + Scalar((i % 2 ? 1 : -1) * (0.5 + 0.1 * double(i)));
    return compare_gradients({a, b}, [](const auto& in) {
      return add(add(mse_loss(in[0], in[1]), l1_loss(in[0], in[1])), mean(mul(in[0], in[0])));
    });
  });
  add_case("patchify_unpatchify", 1e-4, [] {
    Rng rng(14);
    return compare_gradients({random_tensor({4, 6, 3}, rng)}, [](const auto& in) {
      PatchSequence seq = patchify(in[0], 2);
      seq.rows = scale(seq.rows, Scalar(1.5));
      return add(probe(unpatchify(seq), 23), probe(seq.rows, 24));
    });
  });
  add_case("gather_visible_restore", 1e-4, [] {
    Rng rng(15);
    const MaskPlan plan = make_mask_plan(6, 0.5, 99);
    return compare_gradients({random_tensor({6, 4}, rng), random_tensor({4}, rng)}, [plan](const auto& in) {
      Tensor visible = gather_visible(in[0], plan);
      return probe(restore_with_mask_tokens(scale(visible, Scalar(2)), in[1], plan), 25);
    });
  });
  add_case("attention_block", 1e-3, [] {
    Rng rng(16);
    BlockParams block = BlockParams::init(8, 2, rng);
    NamedTensors named;
    block.collect("b", named);
    randomize(named, rng, 0.4);
    return compare_gradients(with({random_tensor({3, 8}, rng)}, named),
                             [block](const auto& in) { return probe(block_forward(in[0], block), 26); });
  });
  add_case("convex_upsample", 1e-4, [] {
    Rng rng(17);
    const std::size_t p = 2;
    return compare_gradients({random_tensor({2, 3, 2}, rng), random_tensor({6, p * p * 9}, rng)},
                             [](const auto& in) { return probe(convex_upsample(in[0], in[1], 2), 27); });
  });
  add_case("bilinear_warp", 1e-4, [] {
    Rng rng(18);
    Tensor image = random_tensor({5, 6, 3}, rng);
    // Fractional source coordinates strictly inside the image, away from the
    // lattice so the bilinear weights are locally smooth.
    Tensor disp = Tensor::zeros({5, 6, 2});
    for (std::size_t u = 0; u < 5; ++u)
      for (std::size_t v = 0; v < 6; ++v) {
        const double tu = 0.8 + 2.4 * rng.uniform(), tv = 0.8 + 3.4 * rng.uniform();
        const double fu = std::floor(tu) + 0.25 + 0.5 * (tu - std::floor(tu));
        const double fv = std::floor(tv) + 0.25 + 0.5 * (tv - std::floor(tv));
        disp[(u * 6 + v) * 2] = Scalar(fu - double(u));
        disp[(u * 6 + v) * 2 + 1] = Scalar(fv - double(v));
      }
    return compare_gradients({image, disp}, [](const auto& in) { return probe(bilinear_warp(in[0], in[1]), 28); });
  });
  add_case("pretrain_loss", 1e-4, [] {
    Rng rng(19);
    const MaskPlan plan = make_mask_plan(6, 0.5, 5);
    Tensor target = random_tensor({4, 6, 3}, rng);
    return compare_gradients({random_tensor({4, 6, 3}, rng)},
                             [plan, target](const auto& in) { return pretrain_loss(in[0], target, plan).value; });
  });
  add_case("finetune_loss", 1e-4, [] {
    Rng rng(20);
    Tensor gt = random_tensor({3, 4, 2}, rng);
    Tensor pred = gt.clone();
    for (std::size_t i = 0; i < pred.numel(); ++i) pred[i] += Scalar((i % 3 ? 1 : -1) * (0.3 + 0.05 * double(i)));
    return compare_gradients({pred}, [gt](const auto& in) { return finetune_loss(FlowField{in[0]}, FlowField{gt}); });
  });
  add_case("mae_two_patch_model", 1e-3, [] {
    ModelConfig cfg;
    cfg.geometry = PatchGeometry::make(2, 4, 2);
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.enc_depth = 1;
    cfg.dec_depth = 1;
    MaeModel model = MaeModel::init(cfg, 3);
    Rng rng(21);
    const NamedTensors named = model.named_parameters();
    randomize(named, rng, 0.3);
    Tensor image = random_tensor({2, 4, 3}, rng, 0.2, 0.5);
    const MaskPlan plan = make_mask_plan(2, 0.5, 7);
    return compare_gradients(with({}, named), [model, image, plan](const auto&) {
      return pretrain_loss(mae_forward(model, image, plan), image, plan).value;
    });
  });
  add_case("rectifier_model", 1e-3, [] {
    ModelConfig cfg;
    cfg.geometry = PatchGeometry::make(4, 4, 2);
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.enc_depth = 1;
    cfg.dec_depth = 1;
    RectModel model = RectModel::init(cfg, 4);
    Rng rng(22);
    const NamedTensors named = model.named_parameters();
    randomize(named, rng, 0.3);
    Tensor image = random_tensor({4, 4, 3}, rng, 0.2, 0.5);
    Tensor gt = random_tensor({4, 4, 2}, rng, 0.5);
    return compare_gradients(with({}, named), [model, image, gt](const auto&) {
      const RectFeatures f = rect_forward(model, image);
      const FlowField flow = convex_upsample(f.coarse, f.features, model);
      return finetune_loss(flow, FlowField{gt});
    });
  });
  return cases;
}

}  // namespace docmae::testing
