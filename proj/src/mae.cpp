#include "docmae/mae.hpp"

#include <cmath>
#include <string>

#include "docmae/errors.hpp"

namespace docmae {

namespace {

std::size_t patch_from_plan(const Tensor& image, const MaskPlan& plan) {
  const std::size_t area = image.size(0) * image.size(1);
  const std::size_t n = plan.count();
  const auto p = static_cast<std::size_t>(std::llround(std::sqrt(double(area) / double(n))));
  if (p == 0 || p * p * n != area) {
    throw GeometryError("plan over " + std::to_string(n) + " patches does not tile a " + shape_str(image.shape()) +
                        " image");
  }
  return p;
}

void check_image(const ModelConfig& cfg, const Tensor& image, const char* op) {
  if (image.dim() != 3 || image.size(0) != cfg.geometry.height || image.size(1) != cfg.geometry.width ||
      image.size(2) != kChannels) {
    throw GeometryError(std::string(op) + ": image " + shape_str(image.shape()) + " does not match model geometry " +
                        std::to_string(cfg.geometry.height) + "x" + std::to_string(cfg.geometry.width) + "x3");
  }
}

}  // namespace

void ModelConfig::validate() const {
  PatchGeometry::make(geometry.height, geometry.width, geometry.patch);
  if (dim == 0 || dim % 4 != 0) throw ValidationError("model width D=" + std::to_string(dim) + " is not divisible by 4");
  if (heads == 0 || dim % heads != 0) {
    throw ValidationError("model width D=" + std::to_string(dim) + " is not divisible by heads=" + std::to_string(heads));
  }
}

Encoder Encoder::init(const ModelConfig& cfg, Rng& rng) {
  Encoder e;
  e.patch_embed = LinearParams::init(cfg.geometry.row_length(), cfg.dim, rng);
  for (std::size_t i = 0; i < cfg.enc_depth; ++i) e.blocks.push_back(BlockParams::init(cfg.dim, cfg.heads, rng));
  return e;
}

void Encoder::collect(NamedTensors& out) const {
  patch_embed.collect("encoder.patch_embed", out);
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect("encoder.blocks." + std::to_string(i), out);
}

MaeModel MaeModel::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed(seed, {0x6d6165}));
  MaeModel m;
  m.config = cfg;
  m.encoder = Encoder::init(cfg, rng);
  m.mask_token = Tensor::zeros({cfg.dim});
  for (std::size_t i = 0; i < cfg.dec_depth; ++i) m.decoder.push_back(BlockParams::init(cfg.dim, cfg.heads, rng));
  m.output_proj = LinearParams::init(cfg.dim, cfg.geometry.row_length(), rng);
  for (Tensor& p : m.parameters()) p.set_requires_grad(true);
  return m;
}

NamedTensors MaeModel::named_parameters() const {
  NamedTensors out;
  encoder.collect(out);
  out.emplace_back("mae.mask_token", mask_token);
  for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].collect("mae.decoder." + std::to_string(i), out);
  output_proj.collect("mae.output_proj", out);
  return out;
}

std::vector<Tensor> MaeModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

MaeTrace mae_forward_trace(const MaeModel& model, const Tensor& image, const MaskPlan& plan) {
  const ModelConfig& cfg = model.config;
  check_image(cfg, image, "mae_forward");
  const PatchGeometry& g = cfg.geometry;
  if (plan.count() != g.count()) {
    throw GeometryError("mae_forward: plan covers " + std::to_string(plan.count()) + " patches, geometry has " +
                        std::to_string(g.count()));
  }
  const PosTable& pos = cached_pos_table(g.grid_h(), g.grid_w(), cfg.dim);
  PatchSequence seq = patchify(image, g.patch);
  // Embedding only the kept rows keeps masked pixels out of the graph.
  Tensor visible = model.encoder.patch_embed(gather_visible(seq, plan));
  MaeTrace trace;
  trace.encoded = encoder_forward(visible, pos, plan, model.encoder.blocks);
  Tensor tokens = restore_with_mask_tokens(trace.encoded, model.mask_token, plan);
  trace.decoded = decoder_forward(tokens, pos, model.decoder);
  Tensor rows = model.output_proj(trace.decoded);
  trace.reconstruction = unpatchify(PatchSequence{g, rows});
  return trace;
}

Tensor mae_forward(const MaeModel& model, const Tensor& image, const MaskPlan& plan) {
  return mae_forward_trace(model, image, plan).reconstruction;
}

MaskedLoss pretrain_loss(const Tensor& reconstructed, const Tensor& target, const MaskPlan& plan) {
  if (reconstructed.shape() != target.shape() || reconstructed.dim() != 3 || reconstructed.size(2) != kChannels) {
    throw GeometryError("pretrain_loss: reconstruction " + shape_str(reconstructed.shape()) + " vs target " +
                        shape_str(target.shape()));
  }
  if (plan.masked.empty()) return MaskedLoss{Tensor::scalar(0), true};
  const std::size_t p = patch_from_plan(reconstructed, plan);
  const std::size_t width = reconstructed.size(1);
  const std::size_t gw = width / p;
  std::vector<std::size_t> idx;
  idx.reserve(plan.masked.size() * p * p * kChannels);
  for (std::size_t patch : plan.masked) {
    const std::size_t gi = patch / gw, gj = patch % gw;
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b)
        for (std::size_t c = 0; c < kChannels; ++c) idx.push_back(((gi * p + a) * width + gj * p + b) * kChannels + c);
  }
  double total = 0;
  for (std::size_t i : idx) {
    const double d = double(reconstructed[i]) - double(target[i]);
    total += d * d;
  }
  const std::size_t n = idx.size();
  auto* pr = reconstructed.impl().get();
  auto* pt = target.impl().get();
  Tensor value = detail::make_result({1}, {static_cast<Scalar>(total / double(n))}, {reconstructed, target},
                                     "pretrain_loss", [pr, pt, n, idx = std::move(idx)](detail::TensorImpl& self) {
                                       const Scalar k = Scalar(2) * self.grad[0] / Scalar(n);
                                       Scalar* gr = pr->requires_grad ? pr->grad_buffer() : nullptr;
                                       Scalar* gt = pt->requires_grad ? pt->grad_buffer() : nullptr;
                                       for (std::size_t i : idx) {
                                         const Scalar d = k * (pr->data[i] - pt->data[i]);
                                         if (gr) gr[i] += d;
                                         if (gt) gt[i] -= d;
                                       }
                                     });
  return MaskedLoss{std::move(value), false};
}

double pretrain_step(MaeModel& model, const PretrainBatch& batch, AdamState& opt, const OneCycleSchedule& sched,
                     std::int64_t step) {
  if (batch.images.empty() || batch.images.size() != batch.plans.size()) {
    throw ContractError("pretrain_step: batch needs one plan per image");
  }
  std::vector<Tensor> params = model.parameters();
  for (Tensor& p : params) p.zero_grad();
  const Scalar inv_b = Scalar(1) / Scalar(batch.images.size());
  double total = 0;
  for (std::size_t i = 0; i < batch.images.size(); ++i) {
    Tensor recon = mae_forward(model, batch.images[i], batch.plans[i]);
    MaskedLoss loss = pretrain_loss(recon, batch.images[i], batch.plans[i]);
    const double v = loss.value.item();
    if (!std::isfinite(v)) {
      throw PoisonedStateError("pretrain_step: non-finite loss at step " + std::to_string(step) + ", sample " +
                               std::to_string(i));
    }
    total += v;
    if (!loss.empty_mask) backward(scale(loss.value, inv_b));
  }
  try {
    adam_step(params, opt, one_cycle_lr(sched, step));
  } catch (const PoisonedStateError& e) {
    throw PoisonedStateError(std::string(e.what()) + " (training step " + std::to_string(step) + ")");
  }
  return total / double(batch.images.size());
}

DemoTriple reconstruct_demo(const MaeModel& model, const Tensor& image, const MaskPlan& plan) {
  Tensor pred = mae_forward(model, image.detach(), plan);
  const PatchGeometry& g = model.config.geometry;
  DemoTriple out{image.detach(), image.detach(), image.detach()};
  const std::size_t p = g.patch;
  for (std::size_t patch : plan.masked) {
    const std::size_t gi = patch / g.grid_w(), gj = patch % g.grid_w();
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = 0; b < p; ++b)
        for (std::size_t c = 0; c < kChannels; ++c) {
          const std::size_t i = ((gi * p + a) * g.width + gj * p + b) * kChannels + c;
          out.masked_input[i] = Scalar(0.5);
          out.composite[i] = pred[i];
        }
  }
  return out;
}

}  // namespace docmae
