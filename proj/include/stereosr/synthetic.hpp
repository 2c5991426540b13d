#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "stereosr/tensor.hpp"
#include "stereosr/warp.hpp"

namespace ssr {

/// Antialiased bicubic downscale by integer factor s: the cubic kernel is
/// stretched by s (support 4s) so high frequencies are filtered out before
/// decimation. Plain forward computation, never recorded on tape.
template <class T>
TensorT<T> bicubic_downsample(const TensorT<T>& x, int s) {
  check(s >= 1, "bicubic_downsample: scale must be >= 1");
  const Shape in = x.shape();
  check(in.h % s == 0 && in.w % s == 0, "bicubic_downsample: size not divisible by scale");
  const int oh = in.h / s, ow = in.w / s;

  struct Axis {
    std::vector<int> idx;     // per output position: first source index
    std::vector<double> wts;  // taps per output position, back to back
    int taps = 0;
  };
  auto build = [&](int n_in, int n_out) {
    Axis a;
    a.taps = 4 * s;
    a.idx.resize(n_out);
    a.wts.resize(std::size_t(n_out) * a.taps);
    for (int o = 0; o < n_out; ++o) {
      const double src = (o + 0.5) * s - 0.5;
      const int first = int(std::floor(src - 2.0 * s)) + 1;
      a.idx[o] = first;
      double sum = 0;
      for (int t = 0; t < a.taps; ++t) {
        const double w = detail::cubic_weight((src - (first + t)) / s) / s;
        a.wts[std::size_t(o) * a.taps + t] = w;
        sum += w;
      }
      for (int t = 0; t < a.taps; ++t) a.wts[std::size_t(o) * a.taps + t] /= sum;
    }
    return a;
  };
  const Axis ax = build(in.w, ow), ay = build(in.h, oh);

  // Horizontal pass then vertical, symmetric boundary fold.
  TensorT<T> mid = TensorT<T>::zeros({in.n, in.c, in.h, ow});
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c)
      for (int y = 0; y < in.h; ++y)
        for (int o = 0; o < ow; ++o) {
          double acc = 0;
          for (int t = 0; t < ax.taps; ++t)
            acc += ax.wts[std::size_t(o) * ax.taps + t] *
                   double(x.at(n, c, y, detail::sym_index(ax.idx[o] + t, in.w)));
          mid.at(n, c, y, o) = T(acc);
        }
  TensorT<T> out = TensorT<T>::zeros({in.n, in.c, oh, ow});
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c)
      for (int o = 0; o < oh; ++o)
        for (int xcol = 0; xcol < ow; ++xcol) {
          double acc = 0;
          for (int t = 0; t < ay.taps; ++t)
            acc += ay.wts[std::size_t(o) * ay.taps + t] *
                   double(mid.at(n, c, detail::sym_index(ay.idx[o] + t, in.h), xcol));
          out.at(n, c, o, xcol) = T(acc);
        }
  return out;
}

/// One rendered stereo pair with ground truth. Images are (1,3,H,W) in
/// [0,1]; disparities and non-occlusion masks are (1,1,H,W) at HR size.
template <class T>
struct StereoSample {
  TensorT<T> hr_left, hr_right;
  TensorT<T> lr_left, lr_right;
  TensorT<T> disp_left, disp_right;
  TensorT<T> noc_left, noc_right;
};

struct SceneSpec {
  int hr_height = 32;
  int hr_width = 96;
  int scale = 2;
  double bg_disparity = 4.0;  // integer-valued keeps the splat exact
  bool has_foreground = false;
  int fg_x0 = 0, fg_y0 = 0, fg_w = 0, fg_h = 0;
  double fg_disparity = 0.0;
  enum class Texture { kNoise, kGradient } texture = Texture::kNoise;
  int texture_blur_passes = 2;  // box-blur passes per axis; higher = smoother surface
  std::uint64_t seed = 7;
};

namespace detail {

// Smoothly varying random texture on an extended canvas: uniform noise,
// `passes` 5-tap box blur rounds per axis, then contrast-stretched into
// [0.08, 0.92]. More passes narrow the band and make the surface smoother.
template <class T>
std::vector<T> noise_texture(int h, int we, std::uint64_t seed, int passes = 2) {
  std::mt19937_64 rng(seed);
  std::vector<double> a(std::size_t(h) * we), b(a.size());
  for (auto& v : a) v = double(rng()) / double(std::mt19937_64::max());
  auto at = [&](std::vector<double>& m, int y, int x) -> double& {
    return m[std::size_t(sym_index(y, h)) * we + sym_index(x, we)];
  };
  for (int pass = 0; pass < passes; ++pass) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < we; ++x) {
        double s = 0;
        for (int t = -2; t <= 2; ++t) s += at(a, y, x + t);
        b[std::size_t(y) * we + x] = s / 5;
      }
    std::swap(a, b);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < we; ++x) {
        double s = 0;
        for (int t = -2; t <= 2; ++t) s += at(a, y + t, x);
        b[std::size_t(y) * we + x] = s / 5;
      }
    std::swap(a, b);
  }
  double lo = a[0], hi = a[0];
  for (double v : a) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    out[i] = T(0.08 + 0.84 * (a[i] - lo) / span);
  return out;
}

template <class T>
std::vector<T> gradient_texture(int h, int we, int channel) {
  std::vector<T> out(std::size_t(h) * we);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < we; ++x) {
      double v;
      if (channel == 0)
        v = (x + 0.5) / we;
      else if (channel == 1)
        v = (y + 0.5) / h;
      else
        v = 0.5 * ((x + 0.5) / we + (y + 0.5) / h);
      out[std::size_t(y) * we + x] = T(0.1 + 0.8 * v);
    }
  return out;
}

}  // namespace detail

/// Renders a stereo pair by forward-splatting the left view into the right
/// with a z-buffer (larger disparity wins). Surface textures live in
/// right-view coordinates on an extended canvas, so with integer disparities
/// every pixel of both views is an exact texture read and the ground-truth
/// disparities are exact. Occlusion holes in the right view expose the
/// background layer. noc_left marks left pixels that win their splat target;
/// noc_right marks right pixels some left pixel projects onto.
template <class T = double>
StereoSample<T> make_scene(const SceneSpec& spec) {
  const int H = spec.hr_height, W = spec.hr_width, s = spec.scale;
  check(H % s == 0 && W % s == 0, "make_scene: HR size must be divisible by scale");
  const double dmaxd = spec.has_foreground ? std::max(spec.bg_disparity, spec.fg_disparity)
                                           : spec.bg_disparity;
  check(spec.bg_disparity >= 0 && (!spec.has_foreground || spec.fg_disparity >= 0),
        "make_scene: disparities must be non-negative");
  const int dmax = int(std::ceil(dmaxd));
  const int we = W + dmax;  // texture x in [0, we): right-view x + dmax

  // Layer textures (channel-major planes of h x we).
  std::vector<std::vector<T>> bg(3), fg(3);
  for (int c = 0; c < 3; ++c) {
    if (spec.texture == SceneSpec::Texture::kNoise) {
      bg[c] = detail::noise_texture<T>(H, we, spec.seed * 6364136223846793005ull + c,
                                       spec.texture_blur_passes);
      fg[c] = detail::noise_texture<T>(H, we, spec.seed * 6364136223846793005ull + 101 + c,
                                       spec.texture_blur_passes);
    } else {
      bg[c] = detail::gradient_texture<T>(H, we, c);
      fg[c] = detail::gradient_texture<T>(H, we, 2 - c);
    }
  }

  auto in_fg = [&](int y, int x_left) {
    return spec.has_foreground && y >= spec.fg_y0 && y < spec.fg_y0 + spec.fg_h &&
           x_left >= spec.fg_x0 && x_left < spec.fg_x0 + spec.fg_w;
  };

  StereoSample<T> out;
  out.hr_left = TensorT<T>::zeros({1, 3, H, W});
  out.hr_right = TensorT<T>::zeros({1, 3, H, W});
  out.disp_left = TensorT<T>::zeros({1, 1, H, W});
  out.disp_right = TensorT<T>::zeros({1, 1, H, W});
  out.noc_left = TensorT<T>::zeros({1, 1, H, W});
  out.noc_right = TensorT<T>::zeros({1, 1, H, W});

  std::vector<double> zd(W);     // winning disparity per right column
  std::vector<int> zsrc(W);      // winning left column, -1 for hole
  for (int y = 0; y < H; ++y) {
    std::fill(zd.begin(), zd.end(), -1.0);
    std::fill(zsrc.begin(), zsrc.end(), -1);
    // Left view: direct texture reads.
    for (int x = 0; x < W; ++x) {
      const bool f = in_fg(y, x);
      const double d = f ? spec.fg_disparity : spec.bg_disparity;
      out.disp_left.at(0, 0, y, x) = T(d);
      const int tx = x - int(std::lround(d)) + dmax;  // right-view coordinate
      for (int c = 0; c < 3; ++c)
        out.hr_left.at(0, c, y, x) = (f ? fg : bg)[c][std::size_t(y) * we + tx];
      const int xr = x - int(std::lround(d));
      if (xr >= 0 && xr < W && d > zd[xr]) {
        zd[xr] = d;
        zsrc[xr] = x;
      }
    }
    // Right view: winners take their surface, holes fall back to background.
    for (int xr = 0; xr < W; ++xr) {
      const bool hole = zsrc[xr] < 0;
      const bool f = !hole && in_fg(y, zsrc[xr]);
      const double d = hole ? spec.bg_disparity : zd[xr];
      out.disp_right.at(0, 0, y, xr) = T(d);
      out.noc_right.at(0, 0, y, xr) = hole ? T(0) : T(1);
      for (int c = 0; c < 3; ++c)
        out.hr_right.at(0, c, y, xr) = (f ? fg : bg)[c][std::size_t(y) * we + xr + dmax];
    }
    for (int x = 0; x < W; ++x) {
      const int xr = x - int(std::lround(double(out.disp_left.at(0, 0, y, x))));
      out.noc_left.at(0, 0, y, x) = (xr >= 0 && xr < W && zsrc[xr] == x) ? T(1) : T(0);
    }
  }

  out.lr_left = bicubic_downsample(out.hr_left, s);
  out.lr_right = bicubic_downsample(out.hr_right, s);
  return out;
}

/// Crops every field of a sample consistently; offsets and sizes are given
/// at LR granularity, HR fields use the scaled window.
template <class T>
StereoSample<T> crop_sample(const StereoSample<T>& in, int lr_y0, int lr_x0, int lr_h, int lr_w) {
  const Shape hs = in.hr_left.shape(), ls = in.lr_left.shape();
  const int s = hs.h / ls.h;
  check(hs.h == ls.h * s && hs.w == ls.w * s, "crop_sample: inconsistent sample");
  check(lr_y0 >= 0 && lr_x0 >= 0 && lr_y0 + lr_h <= ls.h && lr_x0 + lr_w <= ls.w,
        "crop_sample: window out of range");
  auto cut = [&](const TensorT<T>& t, int f) {
    const Shape ts = t.shape();
    TensorT<T> o = TensorT<T>::zeros({ts.n, ts.c, lr_h * f, lr_w * f});
    for (int c = 0; c < ts.c; ++c)
      for (int y = 0; y < lr_h * f; ++y)
        for (int x = 0; x < lr_w * f; ++x)
          o.at(0, c, y, x) = t.at(0, c, lr_y0 * f + y, lr_x0 * f + x);
    return o;
  };
  StereoSample<T> out;
  out.hr_left = cut(in.hr_left, s);
  out.hr_right = cut(in.hr_right, s);
  out.lr_left = cut(in.lr_left, 1);
  out.lr_right = cut(in.lr_right, 1);
  out.disp_left = cut(in.disp_left, s);
  out.disp_right = cut(in.disp_right, s);
  out.noc_left = cut(in.noc_left, s);
  out.noc_right = cut(in.noc_right, s);
  return out;
}

}  // namespace ssr
