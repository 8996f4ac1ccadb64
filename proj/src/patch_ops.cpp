#include "docmae/patch_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "docmae/errors.hpp"
#include "docmae/random.hpp"

namespace docmae {

namespace {

// Flat image index of every patch-sequence element.
std::vector<std::size_t> patch_layout(const PatchGeometry& g) {
  std::vector<std::size_t> map(g.height * g.width * kChannels);
  const std::size_t p = g.patch;
  std::size_t k = 0;
  for (std::size_t gi = 0; gi < g.grid_h(); ++gi)
    for (std::size_t gj = 0; gj < g.grid_w(); ++gj)
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b)
          for (std::size_t c = 0; c < kChannels; ++c)
            map[k++] = ((gi * p + a) * g.width + gj * p + b) * kChannels + c;
  return map;
}

Tensor permute(const Tensor& x, Shape shape, std::vector<std::size_t> src, const char* op) {
  // out[i] = x[src[i]]
  std::vector<Scalar> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = x[src[i]];
  auto* px = x.impl().get();
  return detail::make_result(std::move(shape), std::move(out), {x}, op, [px, src = std::move(src)](detail::TensorImpl& self) {
    Scalar* g = px->grad_buffer();
    for (std::size_t i = 0; i < src.size(); ++i) g[src[i]] += self.grad[i];
  });
}

}  // namespace

PatchGeometry PatchGeometry::make(std::size_t height, std::size_t width, std::size_t patch) {
  if (patch == 0 || height == 0 || width == 0 || height % patch != 0 || width % patch != 0) {
    throw GeometryError("patch geometry: H=" + std::to_string(height) + ", W=" + std::to_string(width) +
                        " not divisible by P=" + std::to_string(patch));
  }
  return PatchGeometry{height, width, patch};
}

std::size_t visible_count(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::floor(double(n) * (1.0 - ratio) + 0.5));
}

PatchSequence patchify(const Tensor& image, std::size_t patch) {
  if (image.dim() != 3 || image.size(2) != kChannels) {
    throw DimensionError("patchify: expected an HxWx3 image, got " + shape_str(image.shape()));
  }
  PatchGeometry g = PatchGeometry::make(image.size(0), image.size(1), patch);
  Tensor rows = permute(image, {g.count(), g.row_length()}, patch_layout(g), "patchify");
  return PatchSequence{g, std::move(rows)};
}

Tensor unpatchify(const PatchSequence& seq) {
  const PatchGeometry& g = seq.geometry;
  if (seq.rows.dim() != 2 || seq.rows.size(0) != g.count() || seq.rows.size(1) != g.row_length()) {
    throw GeometryError("unpatchify: rows " + shape_str(seq.rows.shape()) + " inconsistent with geometry " +
                        std::to_string(g.count()) + "x" + std::to_string(g.row_length()));
  }
  std::vector<std::size_t> layout = patch_layout(g);
  std::vector<std::size_t> inverse(layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) inverse[layout[i]] = i;
  return permute(seq.rows, {g.height, g.width, kChannels}, std::move(inverse), "unpatchify");
}

MaskPlan make_mask_plan(std::size_t n, double ratio, std::uint64_t seed) {
  if (n < 1) throw ContractError("make_mask_plan: need at least one patch");
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ContractError("make_mask_plan: ratio " + std::to_string(ratio) + " outside [0, 1)");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t nv = visible_count(n, ratio);
  MaskPlan plan;
  plan.ratio = ratio;
  plan.seed = seed;
  plan.keep.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nv));
  plan.masked.assign(order.begin() + static_cast<std::ptrdiff_t>(nv), order.end());
  std::sort(plan.keep.begin(), plan.keep.end());
  std::sort(plan.masked.begin(), plan.masked.end());
  plan.restore.resize(n);
  for (std::size_t j = 0; j < nv; ++j) plan.restore[plan.keep[j]] = j;
  for (std::size_t j = 0; j < plan.masked.size(); ++j) plan.restore[plan.masked[j]] = nv + j;
  return plan;
}

Tensor gather_visible(const Tensor& rows, const MaskPlan& plan) {
  if (rows.dim() != 2 || rows.size(0) != plan.count()) {
    throw ContractError("gather_visible: plan covers " + std::to_string(plan.count()) + " patches, sequence has " +
                        shape_str(rows.shape()));
  }
  return gather_rows(rows, plan.keep);
}

Tensor gather_visible(const PatchSequence& seq, const MaskPlan& plan) { return gather_visible(seq.rows, plan); }

Tensor restore_with_mask_tokens(const Tensor& visible, const Tensor& mask_token, const MaskPlan& plan) {
  if (visible.dim() != 2 || visible.size(0) != plan.keep.size()) {
    throw ContractError("restore_with_mask_tokens: plan keeps " + std::to_string(plan.keep.size()) + " rows, got " +
                        shape_str(visible.shape()));
  }
  const std::size_t d = visible.size(1);
  if (mask_token.numel() != d) {
    throw DimensionError("restore_with_mask_tokens: mask token " + shape_str(mask_token.shape()) +
                         " does not match width " + std::to_string(d));
  }
  const std::size_t n = plan.count();
  std::vector<Scalar> out(n * d);
  for (std::size_t j = 0; j < plan.keep.size(); ++j)
    std::copy_n(visible.data().data() + j * d, d, out.data() + plan.keep[j] * d);
  for (std::size_t i : plan.masked) std::copy_n(mask_token.data().data(), d, out.data() + i * d);
  auto* pv = visible.impl().get();
  auto* pm = mask_token.impl().get();
  return detail::make_result({n, d}, std::move(out), {visible, mask_token}, "restore_with_mask_tokens",
                             [pv, pm, d, keep = plan.keep, masked = plan.masked](detail::TensorImpl& self) {
                               if (pv->requires_grad) {
                                 Scalar* g = pv->grad_buffer();
                                 for (std::size_t j = 0; j < keep.size(); ++j)
                                   for (std::size_t c = 0; c < d; ++c) g[j * d + c] += self.grad[keep[j] * d + c];
                               }
                               if (pm->requires_grad) {
                                 Scalar* g = pm->grad_buffer();
                                 for (std::size_t i : masked)
                                   for (std::size_t c = 0; c < d; ++c) g[c] += self.grad[i * d + c];
                               }
                             });
}

}  // namespace docmae
