#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "docmae/patch_ops.hpp"
#include "docmae/random.hpp"
#include "docmae/tensor.hpp"

namespace docmae {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

struct LinearParams {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static LinearParams init(std::size_t in, std::size_t out, Rng& rng);
  static LinearParams zeros(std::size_t in, std::size_t out);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(const std::string& prefix, NamedTensors& out) const;
};

struct BlockParams {
  std::size_t dim = 0;
  std::size_t heads = 0;
  Tensor norm1_gamma, norm1_beta;
  LinearParams qkv;   // D -> 3D
  LinearParams proj;  // D -> D
  Tensor norm2_gamma, norm2_beta;
  LinearParams fc1;  // D -> 4D
  LinearParams fc2;  // 4D -> D

  static BlockParams init(std::size_t dim, std::size_t heads, Rng& rng);
  void collect(const std::string& prefix, NamedTensors& out) const;
};

// Heads of width 64, never fewer than two.
std::size_t default_heads(std::size_t dim);

struct PosTable {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  Tensor table;  // [grid_h * grid_w, D], never trained
};

// Row r, column c: [sincos_1d(r, D/2), sincos_1d(c, D/2)], base 10000.
PosTable sincos_pos_2d(std::size_t grid_h, std::size_t grid_w, std::size_t dim);
// Process-wide cache of sincos_pos_2d results.
const PosTable& cached_pos_table(std::size_t grid_h, std::size_t grid_w, std::size_t dim);

// Pre-norm block: x + MHSA(LN(x)), then + MLP(LN(.)). When `attention` is
// given, the per-head attention weight matrices are appended to it.
Tensor block_forward(const Tensor& x, const BlockParams& params, std::vector<Tensor>* attention = nullptr);

// Adds the positional rows selected by plan.keep, then runs the blocks.
Tensor encoder_forward(const Tensor& visible_tokens, const PosTable& pos, const MaskPlan& plan,
                       const std::vector<BlockParams>& blocks);

// Adds the full positional table, then runs the blocks.
Tensor decoder_forward(const Tensor& tokens, const PosTable& pos, const std::vector<BlockParams>& blocks);

}  // namespace docmae
