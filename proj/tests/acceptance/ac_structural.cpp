// AC2 structural invariants and AC3 warp correctness.

#include <algorithm>
#include <numeric>

#include "../support/oracles.hpp"
#include "acceptance.hpp"
#include "docmae/config.hpp"
#include "docmae/mae.hpp"
#include "docmae/rectifier.hpp"

namespace docmae::acceptance {

namespace {

Tensor random_image(std::size_t h, std::size_t w, std::size_t ch, Rng& rng) {
  Tensor t({h, w, ch});
  for (Scalar& v : t.data()) v = Scalar(rng.uniform());
  return t;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

// Copies `patch_ids` patches of `from` into `into` (same geometry).
void overwrite_patches(Tensor& into, const Tensor& from, const PatchGeometry& g,
                       const std::vector<std::size_t>& patch_ids) {
  for (std::size_t id : patch_ids) {
    const std::size_t r0 = (id / g.grid_w()) * g.patch, c0 = (id % g.grid_w()) * g.patch;
    for (std::size_t r = r0; r < r0 + g.patch; ++r)
      for (std::size_t c = c0; c < c0 + g.patch; ++c)
        for (std::size_t k = 0; k < kChannels; ++k) {
          const std::size_t i = (r * g.width + c) * kChannels + k;
          into[i] = from[i];
        }
  }
}

bool plan_is_partition(const MaskPlan& p, std::size_t n, double ratio) {
  if (p.count() != n || p.keep.size() != visible_count(n, ratio) || p.restore.size() != n) return false;
  if (!std::is_sorted(p.keep.begin(), p.keep.end()) || !std::is_sorted(p.masked.begin(), p.masked.end()))
    return false;
  std::vector<std::size_t> all(p.keep);
  all.insert(all.end(), p.masked.begin(), p.masked.end());
  for (std::size_t i = 0; i < n; ++i)
    if (p.restore[i] >= n || all[p.restore[i]] != i) return false;
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> iota(n);
  std::iota(iota.begin(), iota.end(), 0);
  return all == iota;
}

}  // namespace

Outcome ac2_structural() {
  Outcome o;
  Rng rng(20);

  // Patchify / unpatchify, both directions, over assorted geometries.
  std::size_t geometries = 0;
  bool inverse = true;
  for (auto [h, w, p] : std::vector<std::array<std::size_t, 3>>{
           {96, 96, 8}, {288, 288, 16}, {24, 36, 6}, {36, 24, 4}, {16, 16, 16}, {5, 7, 1}, {64, 32, 8}}) {
    const Tensor img = random_image(h, w, 3, rng);
    const PatchSequence seq = patchify(img, p);
    inverse = inverse && bit_equal(unpatchify(seq), img);
    PatchSequence seq2 = seq;
    seq2.rows = seq.rows.clone();
    for (Scalar& v : seq2.rows.data()) v = Scalar(rng.uniform());
    inverse = inverse && bit_equal(patchify(unpatchify(seq2), p).rows, seq2.rows);
    ++geometries;
  }
  o.check(inverse, "patchify/unpatchify bit-exact inverse both ways over " + std::to_string(geometries) +
                       " geometries");

  // MaskPlan partition over fuzzed (n, ratio, seed).
  std::size_t bad_plans = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.uniform_index(400);
    const double ratio = t % 10 == 0 ? 0.0 : rng.uniform(0.0, 0.99);
    const std::uint64_t seed = rng.next();
    const MaskPlan p = make_mask_plan(n, ratio, seed);
    const MaskPlan q = make_mask_plan(n, ratio, seed);
    if (!plan_is_partition(p, n, ratio) || p.keep != q.keep || p.masked != q.masked) ++bad_plans;
  }
  o.check(bad_plans == 0, "1000 fuzzed mask plans partition [0, N), restore inverts, replay equal (" +
                              std::to_string(bad_plans) + " bad)");

  // Masked loss ignores visible patches of the reconstruction.
  const PatchGeometry g = PatchGeometry::make(96, 96, 8);
  bool loss_invariant = true, loss_sensitive = true;
  for (int t = 0; t < 50; ++t) {
    const MaskPlan plan = make_mask_plan(g.count(), 0.75, rng.next());
    const Tensor target = random_image(96, 96, 3, rng), recon = random_image(96, 96, 3, rng);
    const double base = pretrain_loss(recon, target, plan).value.item();
    Tensor moved = recon.clone();
    overwrite_patches(moved, random_image(96, 96, 3, rng), g, plan.keep);
    loss_invariant = loss_invariant && pretrain_loss(moved, target, plan).value.item() == base;
    Tensor masked_moved = recon.clone();
    overwrite_patches(masked_moved, random_image(96, 96, 3, rng), g, {plan.masked.front()});
    loss_sensitive = loss_sensitive && pretrain_loss(masked_moved, target, plan).value.item() != base;
  }
  o.check(loss_invariant, "masked loss bit-identical under visible-patch perturbation (50 trials)");
  o.check(loss_sensitive, "masked loss changes when a masked patch changes (50 trials)");

  // Masked input pixels never reach the activations (desk model).
  const MaeModel model = MaeModel::init(model_config(preset_config("desk")), 21);
  bool activations_invariant = true;
  for (int t = 0; t < 5; ++t) {
    const MaskPlan plan = make_mask_plan(g.count(), 0.75, rng.next());
    const Tensor img = random_image(96, 96, 3, rng);
    Tensor other = img.clone();
    overwrite_patches(other, random_image(96, 96, 3, rng), g, plan.masked);
    const MaeTrace a = mae_forward_trace(model, img, plan), b = mae_forward_trace(model, other, plan);
    activations_invariant = activations_invariant && bit_equal(a.encoded, b.encoded) &&
                            bit_equal(a.decoded, b.decoded) && bit_equal(a.reconstruction, b.reconstruction);
  }
  o.check(activations_invariant, "encoder, decoder and output bit-identical under masked-input perturbation "
                                 "(desk model, 5 trials)");
  o.summary = "patchify inverse, 1000 mask plans, loss and activation invariance";
  return o;
}

Outcome ac3_warp() {
  Outcome o;
  Rng rng(30);

  bool identity = true;
  for (auto [h, w] : std::vector<std::array<std::size_t, 2>>{{96, 96}, {17, 33}, {1, 1}, {288, 288}}) {
    const Tensor img = random_image(h, w, 3, rng);
    identity = identity && bit_equal(bilinear_warp(img, FlowField::zeros(h, w)), img);
  }
  o.check(identity, "zero flow reproduces the input bit-exactly (4 sizes)");

  std::size_t shifts = 0, mismatched = 0;
  const Tensor img = random_image(40, 56, 3, rng);
  for (long du = -45; du <= 45; du += 3)
    for (long dv = -60; dv <= 60; dv += 7) {
      Tensor disp({40, 56, 2});
      for (std::size_t i = 0; i < 40 * 56; ++i) {
        disp[2 * i] = Scalar(du);
        disp[2 * i + 1] = Scalar(dv);
      }
      if (!bit_equal(bilinear_warp(img, disp), testing::shifted_with_clamp(img, du, dv))) ++mismatched;
      ++shifts;
    }
  o.check(mismatched == 0, std::to_string(shifts) + " integer translations match the clamp oracle bit-exactly (" +
                               std::to_string(mismatched) + " mismatched)");

  std::size_t fields = 0, inexact = 0;
  for (std::size_t p : {8, 16}) {
    for (int t = 0; t < 20; ++t) {
      const std::size_t gh = 1 + rng.uniform_index(12), gw = 1 + rng.uniform_index(12);
      const Scalar cu = Scalar(rng.uniform(-4, 4)), cv = Scalar(rng.uniform(-4, 4));
      Tensor coarse({gh, gw, 2});
      for (std::size_t i = 0; i < gh * gw; ++i) {
        coarse[2 * i] = cu;
        coarse[2 * i + 1] = cv;
      }
      Tensor logits({gh * gw, p * p * 9});
      for (Scalar& v : logits.data()) v = Scalar(rng.uniform(-6, 6));
      const Tensor up = convex_upsample(coarse, logits, p);
      const Scalar eu = Scalar(p) * cu, ev = Scalar(p) * cv;
      for (std::size_t i = 0; i < up.numel() / 2; ++i)
        if (up[2 * i] != eu || up[2 * i + 1] != ev) ++inexact;
      ++fields;
    }
  }
  o.check(inexact == 0, "convex upsampling of " + std::to_string(fields) +
                            " constant coarse fields (P = 8, 16) equals P * constant exactly (" +
                            std::to_string(inexact) + " inexact pixels)");
  o.summary = "identity, integer translations, constant convex upsampling";
  return o;
}

}  // namespace docmae::acceptance
