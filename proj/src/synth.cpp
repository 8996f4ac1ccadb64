#include "docmae/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>
#include <numbers>
#include <sstream>

#include "docmae/errors.hpp"

namespace docmae {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Point apply_h(const std::array<double, 9>& m, Point p) {
  const double r = m[0] * p[0] + m[1] * p[1] + m[2];
  const double c = m[3] * p[0] + m[4] * p[1] + m[5];
  const double w = m[6] * p[0] + m[7] * p[1] + m[8];
  return {r / w, c / w};
}

// Homography sending src[i] to dst[i].
std::array<double, 9> solve_homography(const std::array<Point, 4>& src, const std::array<Point, 4>& dst) {
  Eigen::Matrix<double, 8, 8> a;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double r = src[i][0], c = src[i][1], R = dst[i][0], C = dst[i][1];
    a.row(2 * i) << r, c, 1, 0, 0, 0, -r * R, -c * R;
    a.row(2 * i + 1) << 0, 0, 0, r, c, 1, -r * C, -c * C;
    b(2 * i) = R;
    b(2 * i + 1) = C;
  }
  Eigen::Matrix<double, 8, 1> x = a.fullPivLu().solve(b);
  return {x(0), x(1), x(2), x(3), x(4), x(5), x(6), x(7), 1.0};
}

std::array<double, 9> invert3(const std::array<double, 9>& m) {
  Eigen::Matrix3d h;
  h << m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8];
  Eigen::Matrix3d inv = h.inverse();
  inv /= inv(2, 2);
  return {inv(0, 0), inv(0, 1), inv(0, 2), inv(1, 0), inv(1, 1), inv(1, 2), inv(2, 0), inv(2, 1), inv(2, 2)};
}

constexpr std::array<double, 9> kIdentity{1, 0, 0, 0, 1, 0, 0, 0, 1};

// Bilinear sample with edge clamping, one channel.
double sample_clamped(const Tensor& img, double r, double c, std::size_t ch) {
  const std::size_t h = img.size(0), w = img.size(1), nc = img.size(2);
  r = std::clamp(r, 0.0, double(h - 1));
  c = std::clamp(c, 0.0, double(w - 1));
  const auto r0 = std::size_t(std::floor(r)), c0 = std::size_t(std::floor(c));
  const std::size_t r1 = std::min(r0 + 1, h - 1), c1 = std::min(c0 + 1, w - 1);
  const double fr = r - double(r0), fc = c - double(c0);
  auto at = [&](std::size_t y, std::size_t x) { return double(img[(y * w + x) * nc + ch]); };
  return (1 - fr) * ((1 - fc) * at(r0, c0) + fc * at(r0, c1)) + fr * ((1 - fc) * at(r1, c0) + fc * at(r1, c1));
}

// Coverage of the all-ones page canvas (zero outside) at a real coordinate.
double page_coverage(double r, double c, std::size_t h, std::size_t w) {
  auto axis = [](double t, double hi) {
    if (t < -1.0 || t > hi + 1.0) return 0.0;
    if (t < 0.0) return 1.0 + t;
    if (t > hi) return 1.0 - (t - hi);
    return 1.0;
  };
  return axis(r, double(h - 1)) * axis(c, double(w - 1));
}

Tensor to_gray(const Tensor& image) {
  const std::size_t h = image.size(0), w = image.size(1), c = image.size(2);
  Tensor out = Tensor::zeros({h, w, 1});
  for (std::size_t i = 0; i < h * w; ++i) {
    double s = 0;
    for (std::size_t ch = 0; ch < c; ++ch) s += image[i * c + ch];
    out[i] = static_cast<Scalar>(s / double(c));
  }
  return out;
}

}  // namespace

// ---- page ------------------------------------------------------------------

Tensor gen_page(const PageSpec& spec) {
  const std::size_t h = spec.height, w = spec.width;
  if (h == 0 || w == 0) throw SpecError("gen_page: empty page");
  if (spec.ink < 0 || spec.ink > 1 || spec.paper < 0 || spec.paper > 1) {
    throw SpecError("gen_page: intensities must lie in [0, 1]");
  }
  if (2 * spec.margin >= std::min(h, w)) throw SpecError("gen_page: margin leaves no text area");
  const std::size_t inset = spec.margin / 2;
  if (inset + spec.border_thickness > spec.margin) throw SpecError("gen_page: border overlaps the text block");
  const std::size_t avail = h - 2 * spec.margin;
  if (spec.line_count > 0 && (spec.line_thickness == 0 || spec.line_count * (spec.line_thickness + 1) > avail)) {
    throw SpecError("gen_page: " + std::to_string(spec.line_count) + " lines of thickness " +
                    std::to_string(spec.line_thickness) + " do not fit in " + std::to_string(avail) + " rows");
  }

  Tensor page(Shape{h, w, kChannels}, static_cast<Scalar>(spec.paper));
  const auto ink = static_cast<Scalar>(spec.ink);
  auto paint = [&](std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
    for (std::size_t r = r0; r < r1; ++r)
      for (std::size_t c = c0; c < c1; ++c)
        for (std::size_t ch = 0; ch < kChannels; ++ch) page[(r * w + c) * kChannels + ch] = ink;
  };
  const std::size_t bt = spec.border_thickness;
  if (bt > 0) {
    paint(inset, inset + bt, inset, w - inset);
    paint(h - inset - bt, h - inset, inset, w - inset);
    paint(inset, h - inset, inset, inset + bt);
    paint(inset, h - inset, w - inset - bt, w - inset);
  }
  Rng rng(derive_seed(spec.seed, {0x6c696e65}));
  const double spacing = spec.line_count ? double(avail) / double(spec.line_count) : 0.0;
  const std::size_t text_w = w - 2 * spec.margin;
  for (std::size_t k = 0; k < spec.line_count; ++k) {
    const auto top = spec.margin +
                     std::size_t(std::floor(double(k) * spacing + (spacing - double(spec.line_thickness)) / 2.0));
    const auto jitter = std::size_t(std::floor(rng.uniform(0.0, 0.5) * double(text_w)));
    paint(top, top + spec.line_thickness, spec.margin, w - spec.margin - jitter);
  }
  // One-pixel anti-aliasing rim around every inked region.
  const auto mid = static_cast<Scalar>(0.5 * (spec.ink + spec.paper));
  std::vector<char> inked(h * w);
  for (std::size_t p = 0; p < h * w; ++p) inked[p] = page[p * kChannels] == ink;
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t p = r * w + c;
      if (inked[p]) continue;
      const bool rim = (r > 0 && inked[p - w]) || (r + 1 < h && inked[p + w]) || (c > 0 && inked[p - 1]) ||
                       (c + 1 < w && inked[p + 1]);
      if (rim)
        for (std::size_t ch = 0; ch < kChannels; ++ch) page[p * kChannels + ch] = mid;
    }
  return page;
}

// ---- warp ------------------------------------------------------------------

double WarpSpec::gradient_bound(std::size_t height, std::size_t width) const {
  const double folds = std::abs(fold_amplitude[0]) * kTwoPi * std::abs(fold_frequency[0]) / double(width) +
                       std::abs(fold_amplitude[1]) * kTwoPi * std::abs(fold_frequency[1]) / double(height);
  const double bumps =
      bump_count == 0 ? 0.0 : double(bump_count) * std::abs(bump_amplitude) / bump_sigma * std::exp(-0.5);
  return folds + bumps;
}

Warp::Warp(const WarpSpec& spec, std::size_t height, std::size_t width)
    : spec_(spec), height_(height), width_(width) {
  Rng rng(derive_seed(spec.seed, {0x77617270}));
  fold_phase_ = {rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi)};
  for (std::size_t i = 0; i < spec.bump_count; ++i) {
    const double angle = rng.uniform(0.0, kTwoPi);
    bumps_.push_back({{rng.uniform(0.0, double(height)), rng.uniform(0.0, double(width))},
                      {std::sin(angle), std::cos(angle)}});
  }
  if (spec.margin == 0.0 && spec.homography == 0.0) {
    hom_ = kIdentity;
    hom_inv_ = kIdentity;
    return;
  }
  const double hi_r = double(height) - 0.5, hi_c = double(width) - 0.5;
  const std::array<Point, 4> canvas{Point{-0.5, -0.5}, Point{-0.5, hi_c}, Point{hi_r, hi_c}, Point{hi_r, -0.5}};
  const double mr = spec.margin * double(height), mc = spec.margin * double(width);
  const std::array<Point, 4> inward{Point{mr, mc}, Point{mr, -mc}, Point{-mr, -mc}, Point{-mr, mc}};
  std::array<Point, 4> quad;
  for (int i = 0; i < 4; ++i) {
    quad[i] = {canvas[i][0] + inward[i][0] + rng.uniform(-spec.homography, spec.homography),
               canvas[i][1] + inward[i][1] + rng.uniform(-spec.homography, spec.homography)};
  }
  hom_ = solve_homography(quad, canvas);
  hom_inv_ = invert3(hom_);
}

Point Warp::displacement(Point x) const {
  Point d{0.0, 0.0};
  if (spec_.fold_amplitude[0] != 0.0)
    d[0] += spec_.fold_amplitude[0] *
            std::sin(kTwoPi * spec_.fold_frequency[0] * x[1] / double(width_) + fold_phase_[0]);
  if (spec_.fold_amplitude[1] != 0.0)
    d[1] += spec_.fold_amplitude[1] *
            std::sin(kTwoPi * spec_.fold_frequency[1] * x[0] / double(height_) + fold_phase_[1]);
  if (spec_.bump_amplitude != 0.0) {
    const double inv = 1.0 / (2.0 * spec_.bump_sigma * spec_.bump_sigma);
    for (const Bump& b : bumps_) {
      const double dr = x[0] - b.centre[0], dc = x[1] - b.centre[1];
      const double g = spec_.bump_amplitude * std::exp(-(dr * dr + dc * dc) * inv);
      d[0] += g * b.direction[0];
      d[1] += g * b.direction[1];
    }
  }
  return d;
}

Point Warp::homography(Point x) const { return apply_h(hom_, x); }
Point Warp::homography_inverse(Point y) const { return apply_h(hom_inv_, y); }

Point Warp::operator()(Point x) const {
  const Point d = displacement(x);
  return homography({x[0] + d[0], x[1] + d[1]});
}

Warp gen_warp(const WarpSpec& spec, std::size_t height, std::size_t width) {
  const double bound = spec.gradient_bound(height, width);
  if (!(bound < 0.5)) {
    std::ostringstream os;
    os << "gen_warp: displacement gradient bound " << bound << " >= 0.5 (fold amplitudes " << spec.fold_amplitude[0]
       << ", " << spec.fold_amplitude[1] << "; bump amplitude " << spec.bump_amplitude << " x " << spec.bump_count
       << ")";
    throw SpecError(os.str());
  }
  if (spec.margin < 0.0 || spec.margin >= 0.3 || spec.homography < 0.0) {
    throw SpecError("gen_warp: margin " + std::to_string(spec.margin) + " / homography " +
                    std::to_string(spec.homography) + " out of range");
  }
  if (spec.bump_count > 0 && !(spec.bump_sigma > 0.0)) throw SpecError("gen_warp: bump sigma must be positive");
  Warp warp(spec, height, width);
  // The projective part must stay orientation preserving over the canvas.
  const double hi_r = double(height), hi_c = double(width);
  for (Point p : {Point{-1, -1}, Point{-1, hi_c}, Point{hi_r, hi_c}, Point{hi_r, -1}}) {
    const double e = 1e-3;
    Point a = warp.homography(p), br = warp.homography({p[0] + e, p[1]}), bc = warp.homography({p[0], p[1] + e});
    const double det = (br[0] - a[0]) * (bc[1] - a[1]) - (br[1] - a[1]) * (bc[0] - a[0]);
    if (!(det > 0.0)) throw SpecError("gen_warp: homography jitter " + std::to_string(spec.homography) + " folds the page");
  }
  return warp;
}

InversionResult invert_map(const Warp& warp, std::size_t height, std::size_t width, double tol,
                           std::size_t max_iter) {
  InversionResult res;
  res.flow = FlowField::zeros(height, width);
  double worst_unconverged = 0.0;
  for (std::size_t u = 0; u < height; ++u) {
    for (std::size_t v = 0; v < width; ++v) {
      const Point y{double(u), double(v)};
      const Point base = warp.homography_inverse(y);
      Point x = base;
      double r = 0.0;
      // Keep contracting well past tol so float storage of the flow cannot
      // push a pixel over it; tol still decides convergence.
      for (std::size_t it = 0; it <= max_iter; ++it) {
        const Point hx = warp(x);
        r = std::hypot(hx[0] - y[0], hx[1] - y[1]);
        if (r < tol * 1e-3 || it == max_iter) break;
        const Point d = warp.displacement(x);
        x = {base[0] - d[0], base[1] - d[1]};
      }
      const bool ok = r < tol;
      if (ok) {
        res.max_residual = std::max(res.max_residual, r);
      } else {
        ++res.unconverged;
        worst_unconverged = std::max(worst_unconverged, r);
      }
      const std::size_t pix = u * width + v;
      res.flow.disp[pix * 2] = static_cast<Scalar>(x[0] - y[0]);
      res.flow.disp[pix * 2 + 1] = static_cast<Scalar>(x[1] - y[1]);
    }
  }
  if (double(res.unconverged) > 0.001 * double(height * width)) {
    throw InversionError("invert_map: " + std::to_string(res.unconverged) + " pixels did not converge, worst residual " +
                         std::to_string(worst_unconverged) + " px");
  }
  return res;
}

// ---- samples ---------------------------------------------------------------

Tensor gen_background(std::size_t height, std::size_t width, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x626b67}));
  const std::size_t cell = 12;
  const std::size_t gh = height / cell + 2, gw = width / cell + 2;
  Tensor grid = Tensor::zeros({gh, gw, kChannels});
  for (std::size_t i = 0; i < gh * gw; ++i) {
    const double base = rng.uniform(0.03, 0.2);
    for (std::size_t ch = 0; ch < kChannels; ++ch)
      grid[i * kChannels + ch] = static_cast<Scalar>(std::clamp(base + rng.uniform(-0.03, 0.03), 0.0, 0.3));
  }
  Tensor out = Tensor::zeros({height, width, kChannels});
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c)
      for (std::size_t ch = 0; ch < kChannels; ++ch)
        out[(r * width + c) * kChannels + ch] =
            static_cast<Scalar>(sample_clamped(grid, double(r) / double(cell), double(c) / double(cell), ch));
  return out;
}

Tensor erode_mask(const Tensor& mask, std::size_t radius) {
  const std::size_t h = mask.size(0), w = mask.size(1);
  Tensor out = Tensor::zeros({h, w, 1});
  const long rad = long(radius);
  for (long r = 0; r < long(h); ++r)
    for (long c = 0; c < long(w); ++c) {
      bool keep = true;
      for (long dr = -rad; dr <= rad && keep; ++dr)
        for (long dc = -rad; dc <= rad && keep; ++dc) {
          const long rr = r + dr, cc = c + dc;
          keep = rr >= 0 && cc >= 0 && rr < long(h) && cc < long(w) && mask[std::size_t(rr) * w + std::size_t(cc)] >= 0.5;
        }
      out[std::size_t(r) * w + std::size_t(c)] = keep ? Scalar(1) : Scalar(0);
    }
  return out;
}

Certificate check_roundtrip(const Tensor& clean, const Tensor& distorted, const Tensor& mask, const FlowField& flow) {
  NoGradGuard no_grad;
  const std::size_t h = clean.size(0), w = clean.size(1);
  Tensor rect = bilinear_warp(background_exclude(distorted, mask), flow);
  Tensor rect_mask = bilinear_warp(mask, flow);
  Tensor inside = Tensor::zeros({h, w, 1});
  for (std::size_t i = 0; i < h * w; ++i) inside[i] = rect_mask[i] >= Scalar(0.999) ? Scalar(1) : Scalar(0);
  Tensor interior = erode_mask(inside, 2);
  Certificate cert;
  double total = 0;
  for (std::size_t i = 0; i < h * w; ++i) {
    if (interior[i] < 0.5) continue;
    ++cert.scored_pixels;
    for (std::size_t ch = 0; ch < kChannels; ++ch)
      total += std::abs(double(rect[i * kChannels + ch]) - double(clean[i * kChannels + ch]));
  }
  cert.roundtrip_mae = cert.scored_pixels ? total / double(cert.scored_pixels * kChannels) : 0.0;
  cert.passed = cert.scored_pixels > 0 && cert.roundtrip_mae < kRoundtripTolerance;
  return cert;
}

SyntheticSample gen_sample(const PageSpec& page, const WarpSpec& warp_spec, std::uint64_t background_seed) {
  const std::size_t h = page.height, w = page.width;
  SyntheticSample s;
  s.page = page;
  s.warp = warp_spec;
  s.background_seed = background_seed;
  s.clean = gen_page(page);
  Warp warp = gen_warp(warp_spec, h, w);
  Tensor background = gen_background(h, w, background_seed);
  s.distorted = Tensor::zeros({h, w, kChannels});
  s.mask = Tensor::zeros({h, w, 1});
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t pix = r * w + c;
      const Point q = warp({double(r), double(c)});
      const bool on_page = page_coverage(q[0], q[1], h, w) >= 0.5;
      s.mask[pix] = on_page ? Scalar(1) : Scalar(0);
      for (std::size_t ch = 0; ch < kChannels; ++ch)
        s.distorted[pix * kChannels + ch] =
            on_page ? static_cast<Scalar>(sample_clamped(s.clean, q[0], q[1], ch)) : background[pix * kChannels + ch];
    }
  InversionResult inv = invert_map(warp, h, w, kResidualTolerance, 25);
  s.gt_flow = inv.flow;
  s.certificate = check_roundtrip(s.clean, s.distorted, s.mask, s.gt_flow);
  s.certificate.max_residual = inv.max_residual;
  if (!s.certificate.passed || inv.max_residual >= kResidualTolerance) {
    throw CertificateError("gen_sample: round trip error " + std::to_string(s.certificate.roundtrip_mae) + " over " +
                           std::to_string(s.certificate.scored_pixels) + " pixels, residual " +
                           std::to_string(inv.max_residual));
  }
  s.annotation = line_pattern_string(s.clean);
  return s;
}

PageSpec sample_page_spec(Rng& rng, std::size_t height, std::size_t width) {
  const double s = double(std::min(height, width)) / 96.0;
  PageSpec p;
  p.height = height;
  p.width = width;
  p.line_count = 3 + rng.uniform_index(4);
  p.line_thickness = std::max<std::size_t>(2, std::size_t(std::lround(rng.uniform(2.5, 4.5) * s)));
  p.margin = std::size_t(std::lround(0.14 * double(std::min(height, width))));
  p.border_thickness = std::max<std::size_t>(1, std::size_t(std::lround(2.0 * s)));
  p.ink = rng.uniform(0.2, 0.35);
  p.paper = rng.uniform(0.75, 0.95);
  p.seed = rng.next();
  return p;
}

WarpSpec sample_warp_spec(Rng& rng, std::size_t height, std::size_t width) {
  const double extent = double(std::min(height, width));
  WarpSpec w;
  w.margin = rng.uniform(0.03, 0.07);
  w.homography = rng.uniform(0.0, 0.04) * extent;
  for (int a = 0; a < 2; ++a) {
    w.fold_amplitude[a] = rng.uniform(0.0, 0.03) * extent;
    w.fold_frequency[a] = rng.uniform(0.3, 1.0);
  }
  w.bump_count = rng.uniform_index(3);
  w.bump_amplitude = rng.uniform(0.0, 0.04) * extent;
  w.bump_sigma = rng.uniform(0.15, 0.3) * extent;
  w.seed = rng.next();
  // Keep the contraction comfortably below the invertibility bound.
  const double bound = w.gradient_bound(height, width);
  if (bound > 0.4) {
    const double k = 0.4 / bound;
    w.fold_amplitude[0] *= k;
    w.fold_amplitude[1] *= k;
    w.bump_amplitude *= k;
  }
  return w;
}

SyntheticSample gen_indexed_sample(std::uint64_t corpus_seed, std::size_t index, std::size_t height,
                                   std::size_t width, std::size_t* attempts_used) {
  constexpr std::size_t kMaxAttempts = 16;
  std::string last_error;
  for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_seed(corpus_seed, {index, attempt}));
    PageSpec page = sample_page_spec(rng, height, width);
    WarpSpec warp = sample_warp_spec(rng, height, width);
    const std::uint64_t bg = rng.next();
    try {
      SyntheticSample s = gen_sample(page, warp, bg);
      if (attempts_used) *attempts_used = attempt + 1;
      return s;
    } catch (const CertificateError& e) {
      last_error = e.what();
    } catch (const InversionError& e) {
      last_error = e.what();
    }
    std::cerr << "synth: sample " << index << " attempt " << attempt << " rejected: " << last_error << "\n";
  }
  throw CertificateError("gen_indexed_sample: sample " + std::to_string(index) + " failed " +
                         std::to_string(kMaxAttempts) + " attempts; last: " + last_error);
}

// ---- segmentation ------------------------------------------------------------

Tensor threshold_segment(const Tensor& distorted) {
  if (distorted.dim() != 3) throw DimensionError("threshold_segment: expected HxWxC, got " + shape_str(distorted.shape()));
  const std::size_t h = distorted.size(0), w = distorted.size(1);
  Tensor gray = to_gray(distorted);
  std::vector<char> bright(h * w);
  for (std::size_t p = 0; p < h * w; ++p) bright[p] = gray[p] > Scalar(0.5);
  if (std::find(bright.begin(), bright.end(), 1) == bright.end()) {
    throw SegmentationError("threshold_segment: no pixel above 0.5, empty foreground");
  }
  std::deque<std::size_t> queue;
  auto flood = [&](std::vector<int>& label, int id, std::size_t start, auto&& accept) {
    std::size_t count = 0;
    label[start] = id;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      ++count;
      const std::size_t r = p / w, c = p % w;
      auto visit = [&](std::size_t q) {
        if (label[q] < 0 && accept(q)) {
          label[q] = id;
          queue.push_back(q);
        }
      };
      if (r > 0) visit(p - w);
      if (r + 1 < h) visit(p + w);
      if (c > 0) visit(p - 1);
      if (c + 1 < w) visit(p + 1);
    }
    return count;
  };
  // Hole fill first: dark pixels not reachable from the border join the
  // foreground. The page frame is dark, so filling before the component
  // search keeps the paper rim outside the frame attached to the page.
  std::vector<int> outside(h * w, -1);
  auto dark = [&](std::size_t q) { return !bright[q]; };
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t p = r * w + c;
      const bool border = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
      if (border && dark(p) && outside[p] < 0) flood(outside, 0, p, dark);
    }
  std::vector<int> label(h * w, -1);
  auto filled = [&](std::size_t q) { return outside[q] < 0; };
  int best = -1, id = 0;
  std::size_t best_size = 0;
  for (std::size_t p = 0; p < h * w; ++p) {
    if (!filled(p) || label[p] >= 0) continue;
    const std::size_t n = flood(label, id, p, filled);
    if (n > best_size) {
      best_size = n;
      best = id;
    }
    ++id;
  }
  Tensor mask = Tensor::zeros({h, w, 1});
  for (std::size_t p = 0; p < h * w; ++p) mask[p] = label[p] == best ? Scalar(1) : Scalar(0);
  return mask;
}

std::string line_pattern_string(const Tensor& image) {
  const std::size_t h = image.size(0), w = image.size(1);
  Tensor gray = to_gray(image);
  std::string out;
  double band_total = 0;
  std::size_t band_rows = 0;
  auto flush = [&] {
    if (band_rows == 0) return;
    const double frac = band_total / double(band_rows);
    out.push_back(char('a' + std::min(25, int(std::floor(frac * 26.0)))));
    band_total = 0;
    band_rows = 0;
  };
  for (std::size_t r = 0; r < h; ++r) {
    std::size_t dark = 0;
    for (std::size_t c = 0; c < w; ++c) dark += gray[r * w + c] < Scalar(0.5) ? 1 : 0;
    const double frac = double(dark) / double(w);
    if (frac >= 0.15) {
      band_total += frac;
      ++band_rows;
    } else {
      flush();
    }
  }
  flush();
  return out;
}

}  // namespace docmae
