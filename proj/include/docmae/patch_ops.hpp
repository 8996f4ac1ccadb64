#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "docmae/tensor.hpp"

namespace docmae {

inline constexpr std::size_t kChannels = 3;

struct PatchGeometry {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t patch = 0;

  // Throws GeometryError unless patch divides both extents.
  static PatchGeometry make(std::size_t height, std::size_t width, std::size_t patch);

  std::size_t grid_h() const { return height / patch; }
  std::size_t grid_w() const { return width / patch; }
  std::size_t count() const { return grid_h() * grid_w(); }
  std::size_t row_length() const { return patch * patch * kChannels; }

  bool operator==(const PatchGeometry&) const = default;
};

// N x (P*P*3) rows in raster patch order; inside a row pixels are raster
// ordered with interleaved channels.
struct PatchSequence {
  PatchGeometry geometry;
  Tensor rows;
};

struct MaskPlan {
  double ratio = 0.0;
  std::vector<std::size_t> keep;     // ascending
  std::vector<std::size_t> masked;   // ascending
  std::vector<std::size_t> restore;  // (keep ++ masked)[restore[i]] == i
  std::uint64_t seed = 0;

  std::size_t count() const { return keep.size() + masked.size(); }
};

// round-half-up of n * (1 - ratio)
std::size_t visible_count(std::size_t n, double ratio);

PatchSequence patchify(const Tensor& image, std::size_t patch);
Tensor unpatchify(const PatchSequence& seq);

MaskPlan make_mask_plan(std::size_t n, double ratio, std::uint64_t seed);

Tensor gather_visible(const PatchSequence& seq, const MaskPlan& plan);
Tensor gather_visible(const Tensor& rows, const MaskPlan& plan);

// Scatters visible rows back to raster order and fills masked rows with the
// (trainable) mask token.
Tensor restore_with_mask_tokens(const Tensor& visible, const Tensor& mask_token, const MaskPlan& plan);

}  // namespace docmae
