#include "docmae/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "docmae/errors.hpp"

namespace docmae {

namespace {

constexpr std::array<double, 5> kScaleWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

struct Plane {
  std::size_t h = 0, w = 0;
  std::vector<double> v;
  double at(std::size_t r, std::size_t c) const { return v[r * w + c]; }
};

Plane gray_plane(const Tensor& img) {
  Plane p{img.size(0), img.size(1), {}};
  const std::size_t ch = img.size(2);
  p.v.resize(p.h * p.w);
  for (std::size_t i = 0; i < p.v.size(); ++i) {
    double s = 0;
    for (std::size_t c = 0; c < ch; ++c) s += img[i * ch + c];
    p.v[i] = s / double(ch);
  }
  return p;
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> g{};
  double total = 0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double x = double(i) - double(kSsimWindow / 2);
    g[i] = std::exp(-x * x / (2 * kSsimSigma * kSsimSigma));
    total += g[i];
  }
  for (double& x : g) x /= total;
  return g;
}

// Separable "valid" Gaussian filter.
Plane filter(const Plane& in) {
  static const auto g = gaussian_window();
  const std::size_t k = kSsimWindow;
  Plane tmp{in.h, in.w - k + 1, {}};
  tmp.v.assign(tmp.h * tmp.w, 0.0);
  for (std::size_t r = 0; r < tmp.h; ++r)
    for (std::size_t c = 0; c < tmp.w; ++c) {
      double s = 0;
      for (std::size_t i = 0; i < k; ++i) s += g[i] * in.at(r, c + i);
      tmp.v[r * tmp.w + c] = s;
    }
  Plane out{in.h - k + 1, tmp.w, {}};
  out.v.assign(out.h * out.w, 0.0);
  for (std::size_t r = 0; r < out.h; ++r)
    for (std::size_t c = 0; c < out.w; ++c) {
      double s = 0;
      for (std::size_t i = 0; i < k; ++i) s += g[i] * tmp.at(r + i, c);
      out.v[r * out.w + c] = s;
    }
  return out;
}

Plane product(const Plane& a, const Plane& b) {
  Plane p{a.h, a.w, a.v};
  for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] *= b.v[i];
  return p;
}

// Mean SSIM and mean contrast-structure term at one scale.
std::pair<double, double> ssim_cs(const Plane& x, const Plane& y) {
  const Plane mx = filter(x), my = filter(y);
  const Plane sxx = filter(product(x, x)), syy = filter(product(y, y)), sxy = filter(product(x, y));
  double ssim = 0, cs = 0;
  for (std::size_t i = 0; i < mx.v.size(); ++i) {
    const double ux = mx.v[i], uy = my.v[i];
    const double vx = sxx.v[i] - ux * ux, vy = syy.v[i] - uy * uy, cxy = sxy.v[i] - ux * uy;
    const double c = (2 * cxy + kC2) / (vx + vy + kC2);
    cs += c;
    ssim += (2 * ux * uy + kC1) / (ux * ux + uy * uy + kC1) * c;
  }
  const double n = double(mx.v.size());
  return {ssim / n, cs / n};
}

Plane downsample(const Plane& p) {
  Plane out{p.h / 2, p.w / 2, {}};
  out.v.resize(out.h * out.w);
  for (std::size_t r = 0; r < out.h; ++r)
    for (std::size_t c = 0; c < out.w; ++c)
      out.v[r * out.w + c] =
          0.25 * (p.at(2 * r, 2 * c) + p.at(2 * r, 2 * c + 1) + p.at(2 * r + 1, 2 * c) + p.at(2 * r + 1, 2 * c + 1));
  return out;
}

}  // namespace

MsSsimResult ms_ssim_detail(const Tensor& a, const Tensor& b) {
  if (a.dim() != 3 || b.dim() != 3 || a.shape() != b.shape()) {
    throw GeometryError("ms_ssim: extent mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  MsSsimResult res;
  std::size_t side = std::min(a.size(0), a.size(1));
  while (res.scales < kScaleWeights.size() && side >= kSsimWindow) {
    ++res.scales;
    side /= 2;
  }
  if (res.scales == 0) {
    throw GeometryError("ms_ssim: images smaller than the " + std::to_string(kSsimWindow) + "px window");
  }
  res.reduced = res.scales < kScaleWeights.size();
  double weight_total = 0;
  for (std::size_t s = 0; s < res.scales; ++s) weight_total += kScaleWeights[s];

  Plane x = gray_plane(a), y = gray_plane(b);
  double log_value = 0;
  for (std::size_t s = 0; s < res.scales; ++s) {
    const auto [ssim, cs] = ssim_cs(x, y);
    const double term = s + 1 == res.scales ? ssim : cs;
    const double w = kScaleWeights[s] / weight_total;
    if (term <= 0.0) return {0.0, res.scales, res.reduced};
    log_value += w * std::log(term);
    if (s + 1 < res.scales) {
      x = downsample(x);
      y = downsample(y);
    }
  }
  res.value = std::exp(log_value);
  return res;
}

double ms_ssim(const Tensor& a, const Tensor& b) { return ms_ssim_detail(a, b).value; }

EditResult edit_distance(const std::string& pred, const std::string& target) {
  const std::size_t n = pred.size(), m = target.size();
  std::vector<std::size_t> dp((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dp[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = at(i - 1, j - 1) + (pred[i - 1] == target[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  EditResult res;
  res.ed = at(n, m);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (pred[i - 1] == target[j - 1] ? 0 : 1)) {
      const bool same = pred[i - 1] == target[j - 1];
      res.script.push_back(same ? EditOp::Keep : EditOp::Substitute);
      res.substitutions += same ? 0 : 1;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      res.script.push_back(EditOp::Delete);
      ++res.deletions;
      --i;
    } else {
      res.script.push_back(EditOp::Insert);
      ++res.insertions;
      --j;
    }
  }
  std::reverse(res.script.begin(), res.script.end());
  return res;
}

double cer(const EditResult& parts, std::size_t target_length) {
  if (target_length == 0) throw ContractError("cer: target length N_s must be at least 1");
  return double(parts.deletions + parts.insertions + parts.substitutions) / double(target_length);
}

double ld_epe(const FlowField& pred, const FlowField& gt, const Tensor& mask) {
  if (pred.disp.shape() != gt.disp.shape()) {
    throw GeometryError("ld_epe: flow extents differ " + shape_str(pred.disp.shape()) + " vs " +
                        shape_str(gt.disp.shape()));
  }
  const std::size_t pixels = pred.height() * pred.width();
  if (mask.numel() != pixels) throw GeometryError("ld_epe: mask extent " + shape_str(mask.shape()));
  double total = 0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < pixels; ++p) {
    if (mask[p] < Scalar(0.5)) continue;
    const double du = double(pred.disp[2 * p]) - double(gt.disp[2 * p]);
    const double dv = double(pred.disp[2 * p + 1]) - double(gt.disp[2 * p + 1]);
    total += std::sqrt(du * du + dv * dv);
    ++count;
  }
  if (count == 0) throw ContractError("ld_epe: empty mask");
  return total / double(count);
}

}  // namespace docmae
