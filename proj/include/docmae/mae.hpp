#pragma once

// Stage 1: masked reconstruction of background-excluded document images.

#include <cstdint>
#include <vector>

#include "docmae/optim.hpp"
#include "docmae/patch_ops.hpp"
#include "docmae/transformer.hpp"

namespace docmae {

struct ModelConfig {
  PatchGeometry geometry;
  std::size_t dim = 128;
  std::size_t heads = 2;
  std::size_t enc_depth = 4;
  std::size_t dec_depth = 2;

  // Throws on D % 4 != 0 or D % heads != 0.
  void validate() const;
};

// Patch embedding plus K1 blocks. Shared verbatim by the rectifier so that
// stage-1 checkpoints load into stage 2 under the same tensor names.
struct Encoder {
  LinearParams patch_embed;  // P*P*3 -> D
  std::vector<BlockParams> blocks;

  static Encoder init(const ModelConfig& cfg, Rng& rng);
  void collect(NamedTensors& out) const;  // names prefixed "encoder."
};

struct MaeModel {
  ModelConfig config;
  Encoder encoder;
  Tensor mask_token;  // [D], starts at exactly zero
  std::vector<BlockParams> decoder;
  LinearParams output_proj;  // D -> P*P*3

  static MaeModel init(const ModelConfig& cfg, std::uint64_t seed);
  NamedTensors named_parameters() const;
  std::vector<Tensor> parameters() const;
};

struct MaeTrace {
  Tensor reconstruction;  // [H, W, 3]
  Tensor encoded;         // [N_v, D]
  Tensor decoded;         // [N, D]
};

MaeTrace mae_forward_trace(const MaeModel& model, const Tensor& image, const MaskPlan& plan);
Tensor mae_forward(const MaeModel& model, const Tensor& image, const MaskPlan& plan);

struct MaskedLoss {
  Tensor value;             // scalar
  bool empty_mask = false;  // plan masked nothing; value is a constant 0
};

// Mean squared error over the pixels of masked patches only.
MaskedLoss pretrain_loss(const Tensor& reconstructed, const Tensor& target, const MaskPlan& plan);

struct PretrainBatch {
  std::vector<Tensor> images;  // background-excluded, values in [0, 1]
  std::vector<MaskPlan> plans;
};

// One optimisation step; returns the batch loss measured before the update.
double pretrain_step(MaeModel& model, const PretrainBatch& batch, AdamState& opt, const OneCycleSchedule& sched,
                     std::int64_t step);

struct DemoTriple {
  Tensor masked_input;  // masked patches painted mid-gray
  Tensor composite;     // visible patches from the input, masked from the prediction
  Tensor target;
};

DemoTriple reconstruct_demo(const MaeModel& model, const Tensor& image, const MaskPlan& plan);

}  // namespace docmae
