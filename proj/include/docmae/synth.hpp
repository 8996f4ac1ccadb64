#pragma once

// Procedural distorted-document generator. Every sample carries the clean
// page, the distorted photo-like image, its foreground mask and the
// ground-truth rectification flow (clean pixel -> distorted coordinate).

#include <array>
#include <cstdint>
#include <string>

#include "docmae/random.hpp"
#include "docmae/rectifier.hpp"

namespace docmae {

struct PageSpec {
  std::size_t height = 96;
  std::size_t width = 96;
  std::size_t line_count = 5;
  std::size_t line_thickness = 3;
  std::size_t margin = 12;           // text block inset from the page edge
  std::size_t border_thickness = 2;  // frame drawn at margin / 2
  double ink = 0.1;
  double paper = 0.9;
  std::uint64_t seed = 0;  // line-length jitter
};

struct WarpSpec {
  double margin = 0.0;      // page inset as a fraction of each extent (zoom out)
  double homography = 0.0;  // max corner jitter in pixels
  std::array<double, 2> fold_amplitude{0.0, 0.0};  // pixels; row shift along columns, column shift along rows
  std::array<double, 2> fold_frequency{1.0, 1.0};  // cycles per page extent
  std::size_t bump_count = 0;
  double bump_amplitude = 0.0;  // pixels
  double bump_sigma = 16.0;     // pixels
  std::uint64_t seed = 0;

  // Sup bound on |grad d| for the fold and bump displacement.
  double gradient_bound(std::size_t height, std::size_t width) const;
};

using Point = std::array<double, 2>;  // (row, column)

// Analytic map h from distorted coordinates to clean-page coordinates:
// h(x) = homography(x + d(x)), d the fold and bump displacement.
class Warp {
 public:
  Warp(const WarpSpec& spec, std::size_t height, std::size_t width);

  Point operator()(Point x) const;
  Point displacement(Point x) const;  // d(x)
  Point homography(Point x) const;
  Point homography_inverse(Point y) const;
  const WarpSpec& spec() const { return spec_; }

 private:
  struct Bump {
    Point centre;
    Point direction;
  };
  WarpSpec spec_;
  std::size_t height_, width_;
  std::array<double, 2> fold_phase_{};
  std::vector<Bump> bumps_;
  std::array<double, 9> hom_{};
  std::array<double, 9> hom_inv_{};
};

Tensor gen_page(const PageSpec& spec);

// Validates the invertibility bound and builds the map.
Warp gen_warp(const WarpSpec& spec, std::size_t height, std::size_t width);

struct InversionResult {
  FlowField flow;  // displacement f - id on the clean grid
  double max_residual = 0.0;      // over converged pixels
  std::size_t unconverged = 0;
};

// Per-pixel fixed point x <- H^-1(y) - d(x) until |h(x) - y| < tol.
InversionResult invert_map(const Warp& warp, std::size_t height, std::size_t width, double tol = 0.01,
                           std::size_t max_iter = 25);

struct Certificate {
  double max_residual = 0.0;
  double roundtrip_mae = 0.0;
  std::size_t scored_pixels = 0;
  bool passed = false;
};

struct SyntheticSample {
  Tensor clean;      // [H, W, 3]
  Tensor distorted;  // [H, W, 3]
  Tensor mask;       // [H, W, 1], values in {0, 1}
  FlowField gt_flow;
  PageSpec page;
  WarpSpec warp;
  std::uint64_t background_seed = 0;
  std::string annotation;  // line-pattern string of the clean page
  Certificate certificate;
};

inline constexpr double kRoundtripTolerance = 0.05;
inline constexpr double kResidualTolerance = 0.01;

// Throws CertificateError when the round trip fails.
SyntheticSample gen_sample(const PageSpec& page, const WarpSpec& warp, std::uint64_t background_seed);

// Rectifies distorted * mask with the given flow and scores it against the
// clean page inside the 2-px eroded mask interior.
Certificate check_roundtrip(const Tensor& clean, const Tensor& distorted, const Tensor& mask, const FlowField& flow);

// Smooth dark noise field, mean below 0.25 and max below 0.5.
Tensor gen_background(std::size_t height, std::size_t width, std::uint64_t seed);

// Random specs in the ranges used for corpora.
PageSpec sample_page_spec(Rng& rng, std::size_t height, std::size_t width);
WarpSpec sample_warp_spec(Rng& rng, std::size_t height, std::size_t width);

// Derives specs from (corpus seed, index, attempt) and retries with the next
// attempt when a certificate fails.
SyntheticSample gen_indexed_sample(std::uint64_t corpus_seed, std::size_t index, std::size_t height,
                                   std::size_t width, std::size_t* attempts_used = nullptr);

// Global threshold at 0.5, largest 4-connected component, hole fill.
Tensor threshold_segment(const Tensor& distorted);

// Encodes the horizontal dark bands of a page as letters ('a' + 26 * dark
// fraction), top to bottom. Stand-in for OCR output in ED/CER scoring.
std::string line_pattern_string(const Tensor& image);

// Box erosion of a binary [H, W, 1] mask.
Tensor erode_mask(const Tensor& mask, std::size_t radius);

}  // namespace docmae
