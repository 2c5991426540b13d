#pragma once

#include <cmath>
#include <vector>

#include "stereosr/ops.hpp"
#include "stereosr/tensor.hpp"

namespace ssr {

namespace detail {

/// Symmetric fold: the edge sample is duplicated (-1 -> 0, n -> n-1).
inline int sym_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

/// Catmull-Rom style cubic, a = -0.5. Partition of unity on the integer grid,
/// exact on linear ramps.
template <class T>
T cubic_weight(T t) {
  t = std::abs(t);
  if (t <= T(1)) return (T(1.5) * t - T(2.5)) * t * t + T(1);
  if (t < T(2)) return ((T(-0.5) * t + T(2.5)) * t - T(4)) * t + T(2);
  return T(0);
}

/// Per-axis tap table for separable resampling with center-aligned mapping
/// src = (dst + 0.5) / scale - 0.5.
template <class T>
struct ResampleTaps {
  std::vector<int> idx;  // out * taps source indices, boundary-folded
  std::vector<T> wt;
};

template <class T>
ResampleTaps<T> bicubic_taps(int out, int in, int scale) {
  ResampleTaps<T> r;
  r.idx.resize(std::size_t(out) * 4);
  r.wt.resize(std::size_t(out) * 4);
  for (int o = 0; o < out; ++o) {
    const T src = (T(o) + T(0.5)) / T(scale) - T(0.5);
    const int base = int(std::floor(src)) - 1;
    for (int t = 0; t < 4; ++t) {
      r.idx[std::size_t(o) * 4 + t] = sym_index(base + t, in);
      r.wt[std::size_t(o) * 4 + t] = cubic_weight(src - T(base + t));
    }
  }
  return r;
}

template <class T>
ResampleTaps<T> bilinear_taps(int out, int in, int scale) {
  ResampleTaps<T> r;
  r.idx.resize(std::size_t(out) * 2);
  r.wt.resize(std::size_t(out) * 2);
  for (int o = 0; o < out; ++o) {
    T src = (T(o) + T(0.5)) / T(scale) - T(0.5);
    if (src < T(0)) src = T(0);
    if (src > T(in - 1)) src = T(in - 1);
    int i0 = int(std::floor(src));
    if (i0 > in - 2) i0 = in >= 2 ? in - 2 : 0;
    const T f = in >= 2 ? src - T(i0) : T(0);
    r.idx[std::size_t(o) * 2] = i0;
    r.idx[std::size_t(o) * 2 + 1] = in >= 2 ? i0 + 1 : 0;
    r.wt[std::size_t(o) * 2] = T(1) - f;
    r.wt[std::size_t(o) * 2 + 1] = f;
  }
  return r;
}

template <class T, int Taps>
TensorT<T> separable_upsample(const TensorT<T>& x, int scale, const ResampleTaps<T>& ty,
                              const ResampleTaps<T>& tx) {
  const Shape s = x.shape();
  const int oh = s.h * scale, ow = s.w * scale;
  TensorT<T> out = TensorT<T>::zeros({s.n, s.c, oh, ow});
  const std::size_t in_hw = std::size_t(s.h) * s.w;
  const std::size_t out_hw = std::size_t(oh) * ow;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T* plane = x.values().data() + (std::size_t(n) * s.c + c) * in_hw;
      T* oplane = out.values().data() + (std::size_t(n) * s.c + c) * out_hw;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = 0;
          for (int a = 0; a < Taps; ++a) {
            const T wy = ty.wt[std::size_t(oy) * Taps + a];
            if (wy == T(0)) continue;
            const T* row = plane + std::size_t(ty.idx[std::size_t(oy) * Taps + a]) * s.w;
            for (int b = 0; b < Taps; ++b)
              acc += wy * tx.wt[std::size_t(ox) * Taps + b] *
                     row[tx.idx[std::size_t(ox) * Taps + b]];
          }
          oplane[std::size_t(oy) * ow + ox] = acc;
        }
    }
  if (recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s, oh, ow, ty, tx] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      const std::size_t in_hw = std::size_t(s.h) * s.w;
      const std::size_t out_hw = std::size_t(oh) * ow;
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
          T* gplane = xi->grad.data() + (std::size_t(n) * s.c + c) * in_hw;
          const T* goplane = oi->grad.data() + (std::size_t(n) * s.c + c) * out_hw;
          for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
              const T g = goplane[std::size_t(oy) * ow + ox];
              if (g == T(0)) continue;
              for (int a = 0; a < Taps; ++a) {
                const T wy = ty.wt[std::size_t(oy) * Taps + a];
                if (wy == T(0)) continue;
                T* grow = gplane + std::size_t(ty.idx[std::size_t(oy) * Taps + a]) * s.w;
                for (int b = 0; b < Taps; ++b)
                  grow[tx.idx[std::size_t(ox) * Taps + b]] +=
                      g * wy * tx.wt[std::size_t(ox) * Taps + b];
              }
            }
        }
    });
  }
  return out;
}

}  // namespace detail

/// Integer-factor bilinear upsampling, center-aligned, edges clamped.
template <class T>
TensorT<T> bilinear_upsample(const TensorT<T>& x, int scale) {
  check(scale >= 1, "bilinear_upsample: scale must be positive");
  const Shape s = x.shape();
  return detail::separable_upsample<T, 2>(x, scale, detail::bilinear_taps<T>(s.h * scale, s.h, scale),
                                          detail::bilinear_taps<T>(s.w * scale, s.w, scale));
}

/// Integer-factor bicubic upsampling (a = -0.5), center-aligned, symmetric
/// boundary fold.
template <class T>
TensorT<T> bicubic_upsample(const TensorT<T>& x, int scale) {
  check(scale >= 1, "bicubic_upsample: scale must be positive");
  const Shape s = x.shape();
  return detail::separable_upsample<T, 4>(x, scale, detail::bicubic_taps<T>(s.h * scale, s.h, scale),
                                          detail::bicubic_taps<T>(s.w * scale, s.w, scale));
}

template <class T>
struct WarpResult {
  TensorT<T> value;
  TensorT<T> mask;  // (N,1,H,W), 1 where the source column was inside the image
};

/// Samples `f` horizontally at x - sign * d(x) with linear interpolation.
/// sign = +1 warps the right view toward the left (left disparity),
/// sign = -1 the other way. Out-of-range samples produce 0 and a 0 mask bit;
/// the mask is a constant, the value is differentiable in both f and d.
template <class T>
WarpResult<T> warp_by_disparity(const TensorT<T>& f, const TensorT<T>& d, int sign) {
  const Shape fs = f.shape();
  const Shape ds = d.shape();
  check(sign == 1 || sign == -1, "warp_by_disparity: sign must be +1 or -1");
  check(ds.n == fs.n && ds.c == 1 && ds.h == fs.h && ds.w == fs.w,
        "warp_by_disparity: disparity " + to_string(ds) + " does not match features " +
            to_string(fs));
  TensorT<T> out = TensorT<T>::zeros(fs);
  TensorT<T> mask = TensorT<T>::zeros({fs.n, 1, fs.h, fs.w});
  const std::size_t hw = std::size_t(fs.h) * fs.w;
  for (int n = 0; n < fs.n; ++n)
    for (int y = 0; y < fs.h; ++y)
      for (int x = 0; x < fs.w; ++x) {
        const std::size_t di = (std::size_t(n) * fs.h + y) * fs.w + x;
        const T xs = T(x) - T(sign) * d.values()[di];
        if (!(xs >= T(0) && xs <= T(fs.w - 1))) continue;
        mask.values()[di] = T(1);
        int x0 = int(std::floor(xs));
        if (x0 > fs.w - 2) x0 = fs.w >= 2 ? fs.w - 2 : 0;
        const T fr = fs.w >= 2 ? xs - T(x0) : T(0);
        for (int c = 0; c < fs.c; ++c) {
          const T* row = f.values().data() + (std::size_t(n) * fs.c + c) * hw + std::size_t(y) * fs.w;
          const T v0 = row[x0];
          const T v1 = fs.w >= 2 ? row[x0 + 1] : v0;
          out.values()[(std::size_t(n) * fs.c + c) * hw + std::size_t(y) * fs.w + x] =
              (T(1) - fr) * v0 + fr * v1;
        }
      }
  if (detail::recording<T>({&f, &d})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([fi = f.impl(), di = d.impl(), oi = out.impl(), fs, sign] {
      if (oi->grad.empty()) return;
      if (fi->requires_grad) fi->ensure_grad();
      if (di->requires_grad) di->ensure_grad();
      const std::size_t hw = std::size_t(fs.h) * fs.w;
      for (int n = 0; n < fs.n; ++n)
        for (int y = 0; y < fs.h; ++y)
          for (int x = 0; x < fs.w; ++x) {
            const std::size_t dix = (std::size_t(n) * fs.h + y) * fs.w + x;
            const T xs = T(x) - T(sign) * di->value[dix];
            if (!(xs >= T(0) && xs <= T(fs.w - 1))) continue;
            int x0 = int(std::floor(xs));
            if (x0 > fs.w - 2) x0 = fs.w >= 2 ? fs.w - 2 : 0;
            const T fr = fs.w >= 2 ? xs - T(x0) : T(0);
            T dacc = 0;
            for (int c = 0; c < fs.c; ++c) {
              const std::size_t base = (std::size_t(n) * fs.c + c) * hw + std::size_t(y) * fs.w;
              const T g = oi->grad[base + x];
              if (g == T(0)) continue;
              const T v0 = fi->value[base + x0];
              const T v1 = fs.w >= 2 ? fi->value[base + x0 + 1] : v0;
              if (fi->requires_grad) {
                fi->grad[base + x0] += g * (T(1) - fr);
                if (fs.w >= 2) fi->grad[base + x0 + 1] += g * fr;
              }
              dacc += g * (v1 - v0);
            }
            if (di->requires_grad) di->grad[dix] += dacc * T(-sign);
          }
    });
  }
  return {out, mask};
}

}  // namespace ssr
