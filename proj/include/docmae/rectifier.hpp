#pragma once

// Stage 2: flow-field rectification on top of the pre-trained encoder.
//
// Flow convention: disp[u, v] = (du, dv) with u the row and v the column.
// The rectified pixel (u, v) samples the background-excluded input at the
// absolute source coordinate (u + du, v + dv).

#include <cstdint>
#include <vector>

#include "docmae/mae.hpp"

namespace docmae {

struct FlowField {
  Tensor disp;  // [H, W, 2]

  std::size_t height() const { return disp.size(0); }
  std::size_t width() const { return disp.size(1); }
  static FlowField zeros(std::size_t h, std::size_t w) { return FlowField{Tensor::zeros({h, w, 2})}; }
};

struct RectModel {
  ModelConfig config;
  Encoder encoder;
  std::vector<BlockParams> decoder;  // freshly initialised K2 blocks
  LinearParams flow_proj;            // D -> 2, zero-initialised (identity warp)
  LinearParams upsample_proj;        // D -> P*P*9 convex-combination logits

  static RectModel init(const ModelConfig& cfg, std::uint64_t seed);
  NamedTensors named_parameters() const;
  std::vector<Tensor> parameters() const;
  std::vector<Tensor> encoder_parameters() const;

  // Copies weights (not handles) from a stage-1 encoder of the same shape.
  void load_encoder(const Encoder& source);
  void set_encoder_trainable(bool trainable);
};

// Channel-wise multiplication by a [H, W, 1] mask.
Tensor background_exclude(const Tensor& image, const Tensor& mask);

struct RectFeatures {
  Tensor coarse;    // [H/P, W/P, 2], displacement in coarse-cell units
  Tensor features;  // E_f, [N, D]
  Tensor encoded;   // encoder output, [N, D]
};

// Embeds all N patches (no masking in this stage) and runs encoder, rect
// decoder and flow projection.
RectFeatures rect_forward(const RectModel& model, const Tensor& excluded);

// Core convex upsampling op. `logits` holds P*P*9 values per coarse cell,
// laid out [(a*P + b)*9 + k] for sub-pixel (a, b) and 3x3 neighbour k.
// Returns full-resolution displacement in pixels.
Tensor convex_upsample(const Tensor& coarse, const Tensor& logits, std::size_t patch);
FlowField convex_upsample(const Tensor& coarse, const Tensor& features, const RectModel& model);

// I_c(u, v) = bilinear sample of `image` at (u + du, v + dv), coordinates
// clamped to the image. Differentiable in both arguments.
Tensor bilinear_warp(const Tensor& image, const Tensor& disp);
inline Tensor bilinear_warp(const Tensor& image, const FlowField& flow) { return bilinear_warp(image, flow.disp); }

// Mean absolute error over all 2*H*W flow coordinates.
Tensor finetune_loss(const FlowField& predicted, const FlowField& gt);

struct FinetuneBatch {
  std::vector<Tensor> images;  // background-excluded
  std::vector<FlowField> flows;
};

double finetune_step(RectModel& model, const FinetuneBatch& batch, AdamState& opt, const OneCycleSchedule& sched,
                     std::int64_t step, bool freeze_encoder = false);

FlowField predict_flow(const RectModel& model, const Tensor& excluded);

struct Rectified {
  Tensor image;
  FlowField flow;
};

Rectified rectify(const RectModel& model, const Tensor& distorted, const Tensor& mask);

}  // namespace docmae
