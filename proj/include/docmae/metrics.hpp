#pragma once

// Evaluation metrics: MS-SSIM, edit distance / CER, and flow end-point error
// against ground truth (`ld_epe`, a stand-in for the SIFT-flow based local
// distortion score).

#include <optional>
#include <string>
#include <vector>

#include "docmae/rectifier.hpp"

namespace docmae {

struct MsSsimResult {
  double value = 0.0;
  std::size_t scales = 0;
  bool reduced = false;  // fewer than 5 scales fit the image
};

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// Images of shape [H, W, C] with values in [0, 1]; converted to grayscale
// (channel mean) and evaluated without resizing.
MsSsimResult ms_ssim_detail(const Tensor& a, const Tensor& b);
double ms_ssim(const Tensor& a, const Tensor& b);

enum class EditOp { Keep, Substitute, Insert, Delete };

struct EditResult {
  std::size_t ed = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t substitutions = 0;
  std::vector<EditOp> script;  // turns pred into target
};

EditResult edit_distance(const std::string& pred, const std::string& target);

double cer(const EditResult& parts, std::size_t target_length);

// Mean Euclidean displacement difference over mask pixels (mask >= 0.5).
double ld_epe(const FlowField& pred, const FlowField& gt, const Tensor& mask);

struct MetricsReport {
  std::size_t samples = 0;
  std::optional<double> ms_ssim;
  std::optional<double> ld_epe;
  std::optional<double> ed;
  std::optional<double> cer;
};

}  // namespace docmae
