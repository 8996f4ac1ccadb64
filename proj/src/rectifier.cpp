#include "docmae/rectifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "docmae/errors.hpp"

namespace docmae {

RectModel RectModel::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, {0x72656374}));
  RectModel m;
  m.config = cfg;
  m.encoder = Encoder::init(cfg, rng);
  for (std::size_t i = 0; i < cfg.dec_depth; ++i) m.decoder.push_back(BlockParams::init(cfg.dim, cfg.heads, rng));
  m.flow_proj = LinearParams::zeros(cfg.dim, 2);
  m.upsample_proj = LinearParams::init(cfg.dim, cfg.geometry.patch * cfg.geometry.patch * 9, rng);
  for (Tensor& p : m.parameters()) p.set_requires_grad(true);
  return m;
}

NamedTensors RectModel::named_parameters() const {
  NamedTensors out;
  encoder.collect(out);
  for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].collect("rect.decoder." + std::to_string(i), out);
  flow_proj.collect("rect.flow_proj", out);
  upsample_proj.collect("rect.upsample_proj", out);
  return out;
}

std::vector<Tensor> RectModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<Tensor> RectModel::encoder_parameters() const {
  NamedTensors named;
  encoder.collect(named);
  std::vector<Tensor> out;
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

void RectModel::load_encoder(const Encoder& source) {
  NamedTensors src, dst;
  source.collect(src);
  encoder.collect(dst);
  if (src.size() != dst.size()) {
    throw CompatibilityError("load_encoder: source has " + std::to_string(src.size()) + " tensors, model expects " +
                             std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].first != dst[i].first || src[i].second.shape() != dst[i].second.shape()) {
      throw CompatibilityError("load_encoder: tensor " + src[i].first + " " + shape_str(src[i].second.shape()) +
                               " does not match " + dst[i].first + " " + shape_str(dst[i].second.shape()));
    }
    std::copy(src[i].second.data().begin(), src[i].second.data().end(), dst[i].second.data().begin());
  }
}

void RectModel::set_encoder_trainable(bool trainable) {
  for (Tensor& p : encoder_parameters()) {
    p.set_requires_grad(trainable);
    if (!trainable) p.zero_grad();
  }
}

Tensor background_exclude(const Tensor& image, const Tensor& mask) {
  if (image.dim() != 3 || mask.dim() != 3 || mask.size(2) != 1 || image.size(0) != mask.size(0) ||
      image.size(1) != mask.size(1)) {
    throw GeometryError("background_exclude: image " + shape_str(image.shape()) + " vs mask " +
                        shape_str(mask.shape()));
  }
  const std::size_t c = image.size(2);
  std::vector<Scalar> out(image.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = image[i] * mask[i / c];
  auto* pi = image.impl().get();
  auto* pm = mask.impl().get();
  return detail::make_result(image.shape(), std::move(out), {image, mask}, "background_exclude",
                             [pi, pm, c](detail::TensorImpl& self) {
                               Scalar* gi = pi->requires_grad ? pi->grad_buffer() : nullptr;
                               Scalar* gm = pm->requires_grad ? pm->grad_buffer() : nullptr;
                               for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                 if (gi) gi[i] += self.grad[i] * pm->data[i / c];
                                 if (gm) gm[i / c] += self.grad[i] * pi->data[i];
                               }
                             });
}

RectFeatures rect_forward(const RectModel& model, const Tensor& excluded) {
  const ModelConfig& cfg = model.config;
  const PatchGeometry& g = cfg.geometry;
  if (excluded.dim() != 3 || excluded.size(0) != g.height || excluded.size(1) != g.width ||
      excluded.size(2) != kChannels) {
    throw GeometryError("rect_forward: image " + shape_str(excluded.shape()) + " does not match model geometry " +
                        std::to_string(g.height) + "x" + std::to_string(g.width) + "x3");
  }
  const PosTable& pos = cached_pos_table(g.grid_h(), g.grid_w(), cfg.dim);
  PatchSequence seq = patchify(excluded, g.patch);
  Tensor x = add(model.encoder.patch_embed(seq.rows), pos.table);
  for (const auto& b : model.encoder.blocks) x = block_forward(x, b);
  RectFeatures out;
  out.encoded = x;
  out.features = decoder_forward(x, pos, model.decoder);
  out.coarse = reshape(model.flow_proj(out.features), {g.grid_h(), g.grid_w(), 2});
  return out;
}

Tensor convex_upsample(const Tensor& coarse, const Tensor& logits, std::size_t patch) {
  if (coarse.dim() != 3 || coarse.size(2) != 2) {
    throw DimensionError("convex_upsample: coarse flow must be [h, w, 2], got " + shape_str(coarse.shape()));
  }
  const std::size_t gh = coarse.size(0), gw = coarse.size(1), p = patch;
  const std::size_t per_cell = p * p * 9;
  if (logits.dim() != 2 || logits.size(0) != gh * gw || logits.size(1) != per_cell) {
    throw DimensionError("convex_upsample: logits " + shape_str(logits.shape()) + " do not match " +
                         std::to_string(gh * gw) + "x" + std::to_string(per_cell));
  }
  const std::size_t h = gh * p, w = gw * p;
  // Softmax over the 9 neighbours, stored for backward.
  auto weights = std::make_shared<std::vector<Scalar>>(logits.numel());
  for (std::size_t base = 0; base < logits.numel(); base += 9) {
    const Scalar* in = logits.data().data() + base;
    Scalar* o = weights->data() + base;
    const Scalar mx = *std::max_element(in, in + 9);
    Scalar total = 0;
    for (int k = 0; k < 9; ++k) total += (o[k] = std::exp(in[k] - mx));
    for (int k = 0; k < 9; ++k) o[k] /= total;
  }
  // Neighbour cell index for (cell, k), clamped at the border.
  auto neighbours = std::make_shared<std::vector<std::size_t>>(gh * gw * 9);
  for (std::size_t i = 0; i < gh; ++i)
    for (std::size_t j = 0; j < gw; ++j)
      for (int k = 0; k < 9; ++k) {
        const long ni = std::clamp<long>(long(i) + k / 3 - 1, 0, long(gh) - 1);
        const long nj = std::clamp<long>(long(j) + k % 3 - 1, 0, long(gw) - 1);
        (*neighbours)[(i * gw + j) * 9 + k] = std::size_t(ni) * gw + std::size_t(nj);
      }
  std::vector<Scalar> out(h * w * 2);
  const Scalar pscale = Scalar(p);
  for (std::size_t i = 0; i < gh; ++i)
    for (std::size_t j = 0; j < gw; ++j) {
      const std::size_t cell = i * gw + j;
      const std::size_t* nb = neighbours->data() + cell * 9;
      for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b) {
          const Scalar* wk = weights->data() + cell * per_cell + (a * p + b) * 9;
          // Offsets from the centre cell keep a constant field exactly constant
          // (the weights only sum to one up to rounding).
          const Scalar cu = coarse[cell * 2], cv = coarse[cell * 2 + 1];
          Scalar du = 0, dv = 0;
          for (int k = 0; k < 9; ++k) {
            du += wk[k] * (coarse[nb[k] * 2] - cu);
            dv += wk[k] * (coarse[nb[k] * 2 + 1] - cv);
          }
          du += cu;
          dv += cv;
          Scalar* o = out.data() + ((i * p + a) * w + j * p + b) * 2;
          o[0] = pscale * du;
          o[1] = pscale * dv;
        }
    }
  auto* pc = coarse.impl().get();
  auto* pl = logits.impl().get();
  return detail::make_result(
      {h, w, 2}, std::move(out), {coarse, logits}, "convex_upsample",
      [pc, pl, weights, neighbours, gh, gw, p, w, per_cell](detail::TensorImpl& self) {
        Scalar* gc = pc->requires_grad ? pc->grad_buffer() : nullptr;
        Scalar* gl = pl->requires_grad ? pl->grad_buffer() : nullptr;
        const Scalar pscale = Scalar(p);
        for (std::size_t i = 0; i < gh; ++i)
          for (std::size_t j = 0; j < gw; ++j) {
            const std::size_t cell = i * gw + j;
            const std::size_t* nb = neighbours->data() + cell * 9;
            for (std::size_t a = 0; a < p; ++a)
              for (std::size_t b = 0; b < p; ++b) {
                const std::size_t off = cell * per_cell + (a * p + b) * 9;
                const Scalar* wk = weights->data() + off;
                const Scalar* go = self.grad.data() + ((i * p + a) * w + j * p + b) * 2;
                Scalar s[9];
                Scalar avg = 0;
                for (int k = 0; k < 9; ++k) {
                  const Scalar* c = pc->data.data() + nb[k] * 2;
                  s[k] = pscale * (go[0] * c[0] + go[1] * c[1]);
                  avg += wk[k] * s[k];
                  if (gc) {
                    gc[nb[k] * 2] += pscale * wk[k] * go[0];
                    gc[nb[k] * 2 + 1] += pscale * wk[k] * go[1];
                  }
                }
                if (gl)
                  for (int k = 0; k < 9; ++k) gl[off + k] += wk[k] * (s[k] - avg);
              }
          }
      });
}

FlowField convex_upsample(const Tensor& coarse, const Tensor& features, const RectModel& model) {
  const PatchGeometry& g = model.config.geometry;
  if (features.dim() != 2 || features.size(0) != coarse.size(0) * coarse.size(1) ||
      features.size(1) != model.config.dim) {
    throw DimensionError("convex_upsample: features " + shape_str(features.shape()) + " do not match coarse flow " +
                         shape_str(coarse.shape()));
  }
  return FlowField{convex_upsample(coarse, model.upsample_proj(features), g.patch)};
}

Tensor bilinear_warp(const Tensor& image, const Tensor& disp) {
  if (image.dim() != 3 || disp.dim() != 3 || disp.size(2) != 2) {
    throw DimensionError("bilinear_warp: image " + shape_str(image.shape()) + ", flow " + shape_str(disp.shape()));
  }
  const std::size_t h = disp.size(0), w = disp.size(1);
  const std::size_t ih = image.size(0), iw = image.size(1), c = image.size(2);
  // Per output pixel: clamped source corners, fractional weights, and
  // whether each axis was clamped (zero gradient).
  struct Tap {
    std::size_t y0, y1, x0, x1;
    Scalar wy, wx;
    bool free_y, free_x;
  };
  auto taps = std::make_shared<std::vector<Tap>>(h * w);
  std::vector<Scalar> out(h * w * c);
  const Scalar ymax = Scalar(ih - 1), xmax = Scalar(iw - 1);
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      const std::size_t pix = u * w + v;
      Scalar y = Scalar(u) + disp[pix * 2];
      Scalar x = Scalar(v) + disp[pix * 2 + 1];
      Tap t;
      t.free_y = y > 0 && y < ymax;
      t.free_x = x > 0 && x < xmax;
      y = std::clamp(y, Scalar(0), ymax);
      x = std::clamp(x, Scalar(0), xmax);
      const Scalar fy = std::floor(y), fx = std::floor(x);
      t.y0 = std::size_t(fy);
      t.x0 = std::size_t(fx);
      t.y1 = std::min(t.y0 + 1, ih - 1);
      t.x1 = std::min(t.x0 + 1, iw - 1);
      t.wy = y - fy;
      t.wx = x - fx;
      const Scalar* i00 = image.data().data() + (t.y0 * iw + t.x0) * c;
      const Scalar* i01 = image.data().data() + (t.y0 * iw + t.x1) * c;
      const Scalar* i10 = image.data().data() + (t.y1 * iw + t.x0) * c;
      const Scalar* i11 = image.data().data() + (t.y1 * iw + t.x1) * c;
      Scalar* o = out.data() + pix * c;
      for (std::size_t ch = 0; ch < c; ++ch) {
        o[ch] = (Scalar(1) - t.wy) * ((Scalar(1) - t.wx) * i00[ch] + t.wx * i01[ch]) +
                t.wy * ((Scalar(1) - t.wx) * i10[ch] + t.wx * i11[ch]);
      }
      (*taps)[pix] = t;
    }
  auto* pi = image.impl().get();
  auto* pd = disp.impl().get();
  return detail::make_result({h, w, c}, std::move(out), {image, disp}, "bilinear_warp",
                             [pi, pd, taps, h, w, iw, c](detail::TensorImpl& self) {
                               Scalar* gi = pi->requires_grad ? pi->grad_buffer() : nullptr;
                               Scalar* gd = pd->requires_grad ? pd->grad_buffer() : nullptr;
                               for (std::size_t pix = 0; pix < h * w; ++pix) {
                                 const Tap& t = (*taps)[pix];
                                 const Scalar* go = self.grad.data() + pix * c;
                                 const std::size_t k00 = (t.y0 * iw + t.x0) * c, k01 = (t.y0 * iw + t.x1) * c;
                                 const std::size_t k10 = (t.y1 * iw + t.x0) * c, k11 = (t.y1 * iw + t.x1) * c;
                                 Scalar dy = 0, dx = 0;
                                 for (std::size_t ch = 0; ch < c; ++ch) {
                                   const Scalar* img = pi->data.data();
                                   if (gi) {
                                     gi[k00 + ch] += go[ch] * (Scalar(1) - t.wy) * (Scalar(1) - t.wx);
                                     gi[k01 + ch] += go[ch] * (Scalar(1) - t.wy) * t.wx;
                                     gi[k10 + ch] += go[ch] * t.wy * (Scalar(1) - t.wx);
                                     gi[k11 + ch] += go[ch] * t.wy * t.wx;
                                   }
                                   dy += go[ch] * ((Scalar(1) - t.wx) * (img[k10 + ch] - img[k00 + ch]) +
                                                   t.wx * (img[k11 + ch] - img[k01 + ch]));
                                   dx += go[ch] * ((Scalar(1) - t.wy) * (img[k01 + ch] - img[k00 + ch]) +
                                                   t.wy * (img[k11 + ch] - img[k10 + ch]));
                                 }
                                 if (gd) {
                                   if (t.free_y) gd[pix * 2] += dy;
                                   if (t.free_x) gd[pix * 2 + 1] += dx;
                                 }
                               }
                             });
}

Tensor finetune_loss(const FlowField& predicted, const FlowField& gt) {
  if (predicted.disp.shape() != gt.disp.shape() || predicted.disp.dim() != 3 || predicted.disp.size(2) != 2) {
    throw GeometryError("finetune_loss: predicted " + shape_str(predicted.disp.shape()) + " vs ground truth " +
                        shape_str(gt.disp.shape()));
  }
  return l1_loss(predicted.disp, gt.disp);
}

double finetune_step(RectModel& model, const FinetuneBatch& batch, AdamState& opt, const OneCycleSchedule& sched,
                     std::int64_t step, bool freeze_encoder) {
  if (batch.images.empty() || batch.images.size() != batch.flows.size()) {
    throw ContractError("finetune_step: batch needs one flow per image");
  }
  model.set_encoder_trainable(!freeze_encoder);
  std::vector<Tensor> params = model.parameters();
  for (Tensor& p : params) p.zero_grad();
  const Scalar inv_b = Scalar(1) / Scalar(batch.images.size());
  double total = 0;
  for (std::size_t i = 0; i < batch.images.size(); ++i) {
    RectFeatures f = rect_forward(model, batch.images[i]);
    FlowField pred = convex_upsample(f.coarse, f.features, model);
    Tensor loss = finetune_loss(pred, batch.flows[i]);
    const double v = loss.item();
    if (!std::isfinite(v)) {
      throw PoisonedStateError("finetune_step: non-finite loss at step " + std::to_string(step) + ", sample " +
                               std::to_string(i));
    }
    total += v;
    backward(scale(loss, inv_b));
  }
  try {
    adam_step(params, opt, one_cycle_lr(sched, step));
  } catch (const PoisonedStateError& e) {
    throw PoisonedStateError(std::string(e.what()) + " (training step " + std::to_string(step) + ")");
  }
  return total / double(batch.images.size());
}

FlowField predict_flow(const RectModel& model, const Tensor& excluded) {
  NoGradGuard no_grad;
  RectFeatures f = rect_forward(model, excluded);
  return convex_upsample(f.coarse, f.features, model);
}

Rectified rectify(const RectModel& model, const Tensor& distorted, const Tensor& mask) {
  NoGradGuard no_grad;
  Tensor excluded = background_exclude(distorted, mask);
  FlowField flow = predict_flow(model, excluded);
  Tensor image = bilinear_warp(excluded, flow);
  return Rectified{std::move(image), std::move(flow)};
}

}  // namespace docmae
