#pragma once

#include <algorithm>
#include <vector>

#include "stereosr/ops.hpp"
#include "stereosr/tensor.hpp"

namespace ssr {

enum class PadMode { kZero, kReflect };

/// Weight container for conv2d / transposed_conv2d. Kernel layout is
/// (out_ch, in_ch, kh, kw); transposed_conv2d reads the same layout as
/// (in_ch, out_ch, kh, kw), so a conv and its adjoint can share one spec.
template <class T>
struct ConvSpec {
  TensorT<T> kernel;
  TensorT<T> bias;  // (1, ch, 1, 1); undefined means no bias
  int stride = 1;
  int pad = 0;
  PadMode pad_mode = PadMode::kZero;
};

namespace detail {

/// Mirror about the edge pixel, no edge duplication.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

/// Source index per (output position, kernel tap); -1 for zero-padded taps.
inline std::vector<int> conv_source_map(int out, int k, int stride, int pad, int in,
                                        PadMode mode) {
  std::vector<int> map(std::size_t(out) * k);
  for (int o = 0; o < out; ++o)
    for (int t = 0; t < k; ++t) {
      const int p = o * stride + t - pad;
      int s = -1;
      if (p >= 0 && p < in)
        s = p;
      else if (mode == PadMode::kReflect)
        s = reflect_index(p, in);
      map[std::size_t(o) * k + t] = s;
    }
  return map;
}

/// Dot product with eight fixed-order partial sums; the lane structure is
/// what lets the compiler vectorize without reassociating a serial sum, and
/// the order is the same on every run.
template <class T>
T dot_span(const T* __restrict a, const T* __restrict b, int n) {
  T acc[8] = {};
  int i = 0;
  for (; i + 8 <= n; i += 8)
    for (int l = 0; l < 8; ++l) acc[l] += a[i + l] * b[i + l];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  return (((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))) +
         tail;
}

template <class T>
void axpy_span(T* __restrict y, const T* __restrict x, T w, int n) {
  for (int i = 0; i < n; ++i) y[i] += w * x[i];
}

template <class T>
T sum_span(const T* __restrict a, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int l = 0; l < 8; ++l) acc[l] += a[i + l];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i];
  return (((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]))) +
         tail;
}

/// Per-tap range of positions whose source o*stride + t - pad lies in
/// bounds. Inside the range the source index is affine in o, so inner loops
/// run branch-free; outside they fall back to the source map.
struct TapSpan {
  int lo = 0, hi = 0;
};
inline std::vector<TapSpan> tap_spans(int out, int k, int stride, int pad, int in) {
  std::vector<TapSpan> sp(k);
  for (int t = 0; t < k; ++t) {
    const int shift = pad - t;
    int lo = shift > 0 ? (shift + stride - 1) / stride : 0;
    const int num = in - 1 - t + pad;
    int hi = num < 0 ? 0 : num / stride + 1;
    lo = std::min(lo, out);
    hi = std::min(hi, out);
    sp[t] = {lo, std::max(hi, lo)};
  }
  return sp;
}

}  // namespace detail

inline int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

inline int transposed_conv_out_size(int in, int k, int stride, int pad) {
  return (in - 1) * stride + k - 2 * pad;
}

template <class T>
TensorT<T> conv2d(const TensorT<T>& x, const ConvSpec<T>& spec) {
  const Shape xs = x.shape();
  const Shape ks = spec.kernel.shape();
  check(xs.c == ks.c, "conv2d: input channels " + to_string(xs) + " do not match kernel " +
                          to_string(ks));
  check(spec.stride >= 1 && spec.pad >= 0, "conv2d: bad stride/padding");
  const int oh = conv_out_size(xs.h, ks.h, spec.stride, spec.pad);
  const int ow = conv_out_size(xs.w, ks.w, spec.stride, spec.pad);
  check(oh >= 1 && ow >= 1, "conv2d: kernel " + to_string(ks) + " does not fit input " +
                                to_string(xs) + " with pad " + std::to_string(spec.pad));
  if (spec.bias.defined())
    check(spec.bias.shape().c == ks.n, "conv2d: bias shape " + to_string(spec.bias.shape()) +
                                           " does not match kernel " + to_string(ks));

  const auto ymap = detail::conv_source_map(oh, ks.h, spec.stride, spec.pad, xs.h, spec.pad_mode);
  const auto xmap = detail::conv_source_map(ow, ks.w, spec.stride, spec.pad, xs.w, spec.pad_mode);
  const auto xspan = detail::tap_spans(ow, ks.w, spec.stride, spec.pad, xs.w);

  TensorT<T> out = TensorT<T>::zeros({xs.n, ks.n, oh, ow});
  const T* in = x.values().data();
  const T* kw = spec.kernel.values().data();
  T* ov = out.values().data();
  const std::size_t in_hw = std::size_t(xs.h) * xs.w;
  const std::size_t out_hw = std::size_t(oh) * ow;
  const int stride = spec.stride;
  for (int n = 0; n < xs.n; ++n)
    for (int oc = 0; oc < ks.n; ++oc) {
      T* oplane = ov + (std::size_t(n) * ks.n + oc) * out_hw;
      if (spec.bias.defined()) {
        const T b = spec.bias.values()[oc];
        for (std::size_t i = 0; i < out_hw; ++i) oplane[i] = b;
      }
      for (int ic = 0; ic < ks.c; ++ic) {
        const T* iplane = in + (std::size_t(n) * xs.c + ic) * in_hw;
        const T* kplane = kw + (std::size_t(oc) * ks.c + ic) * ks.h * ks.w;
        for (int ky = 0; ky < ks.h; ++ky)
          for (int kx = 0; kx < ks.w; ++kx) {
            const T wv = kplane[std::size_t(ky) * ks.w + kx];
            if (wv == T(0)) continue;
            const int lo = xspan[kx].lo, hi = xspan[kx].hi, base = kx - spec.pad;
            for (int oy = 0; oy < oh; ++oy) {
              const int sy = ymap[std::size_t(oy) * ks.h + ky];
              if (sy < 0) continue;
              const T* irow = iplane + std::size_t(sy) * xs.w;
              T* orow = oplane + std::size_t(oy) * ow;
              for (int ox = 0; ox < lo; ++ox) {
                const int sx = xmap[std::size_t(ox) * ks.w + kx];
                if (sx >= 0) orow[ox] += wv * irow[sx];
              }
              if (stride == 1) {
                detail::axpy_span(orow + lo, irow + base + lo, wv, hi - lo);
              } else {
                for (int ox = lo; ox < hi; ++ox) orow[ox] += wv * irow[ox * stride + base];
              }
              for (int ox = hi; ox < ow; ++ox) {
                const int sx = xmap[std::size_t(ox) * ks.w + kx];
                if (sx >= 0) orow[ox] += wv * irow[sx];
              }
            }
          }
      }
    }

  if (detail::recording<T>({&x, &spec.kernel}) ||
      (spec.bias.defined() && detail::recording<T>({&spec.bias}))) {
    out.set_requires_grad(true);
    auto bias_impl = spec.bias.defined() ? spec.bias.impl() : nullptr;
    const int stride_c = spec.stride;
    const int pad_c = spec.pad;
    TapeT<T>::current()->record([xi = x.impl(), ki = spec.kernel.impl(), bias_impl,
                                 oi = out.impl(), ymap, xmap, xspan, xs, ks, oh, ow, stride_c,
                                 pad_c] {
      if (oi->grad.empty()) return;
      const std::size_t in_hw = std::size_t(xs.h) * xs.w;
      const std::size_t out_hw = std::size_t(oh) * ow;
      if (xi->requires_grad) xi->ensure_grad();
      if (ki->requires_grad) ki->ensure_grad();
      if (bias_impl && bias_impl->requires_grad) bias_impl->ensure_grad();
      for (int n = 0; n < xs.n; ++n)
        for (int oc = 0; oc < ks.n; ++oc) {
          const T* gplane = oi->grad.data() + (std::size_t(n) * ks.n + oc) * out_hw;
          if (bias_impl && bias_impl->requires_grad)
            bias_impl->grad[oc] += detail::sum_span(gplane, out_hw);
          for (int ic = 0; ic < ks.c; ++ic) {
            const T* iplane = xi->value.data() + (std::size_t(n) * xs.c + ic) * in_hw;
            T* giplane =
                xi->requires_grad ? xi->grad.data() + (std::size_t(n) * xs.c + ic) * in_hw : nullptr;
            const std::size_t kbase = (std::size_t(oc) * ks.c + ic) * ks.h * ks.w;
            for (int ky = 0; ky < ks.h; ++ky)
              for (int kx = 0; kx < ks.w; ++kx) {
                const T wv = ki->value[kbase + std::size_t(ky) * ks.w + kx];
                const int lo = xspan[kx].lo, hi = xspan[kx].hi, base = kx - pad_c;
                T wacc = 0;
                for (int oy = 0; oy < oh; ++oy) {
                  const int sy = ymap[std::size_t(oy) * ks.h + ky];
                  if (sy < 0) continue;
                  const T* grow = gplane + std::size_t(oy) * ow;
                  const T* irow = iplane + std::size_t(sy) * xs.w;
                  T* girow = giplane ? giplane + std::size_t(sy) * xs.w : nullptr;
                  for (int ox = 0; ox < lo; ++ox) {
                    const int sx = xmap[std::size_t(ox) * ks.w + kx];
                    if (sx < 0) continue;
                    const T g = grow[ox];
                    if (girow) girow[sx] += g * wv;
                    wacc += g * irow[sx];
                  }
                  if (stride_c == 1) {
                    if (girow && wv != T(0))
                      detail::axpy_span(girow + base + lo, grow + lo, wv, hi - lo);
                    wacc += detail::dot_span(grow + lo, irow + base + lo, hi - lo);
                  } else {
                    for (int ox = lo; ox < hi; ++ox) {
                      const int sx = ox * stride_c + base;
                      const T g = grow[ox];
                      if (girow) girow[sx] += g * wv;
                      wacc += g * irow[sx];
                    }
                  }
                  for (int ox = hi; ox < ow; ++ox) {
                    const int sx = xmap[std::size_t(ox) * ks.w + kx];
                    if (sx < 0) continue;
                    const T g = grow[ox];
                    if (girow) girow[sx] += g * wv;
                    wacc += g * irow[sx];
                  }
                }
                if (ki->requires_grad) ki->grad[kbase + std::size_t(ky) * ks.w + kx] += wacc;
              }
          }
        }
    });
  }
  return out;
}

/// Adjoint of conv2d under the same spec: input channels are the kernel's
/// leading dim, output channels its second. Output spatial size is
/// (in-1)*stride + k - 2*pad.
template <class T>
TensorT<T> transposed_conv2d(const TensorT<T>& x, const ConvSpec<T>& spec) {
  const Shape xs = x.shape();
  const Shape ks = spec.kernel.shape();
  check(xs.c == ks.n, "transposed_conv2d: input channels " + to_string(xs) +
                          " do not match kernel leading dim " + to_string(ks));
  check(spec.stride >= 1 && spec.pad >= 0, "transposed_conv2d: bad stride/padding");
  const int oh = transposed_conv_out_size(xs.h, ks.h, spec.stride, spec.pad);
  const int ow = transposed_conv_out_size(xs.w, ks.w, spec.stride, spec.pad);
  check(oh >= 1 && ow >= 1, "transposed_conv2d: degenerate output for input " + to_string(xs));
  if (spec.bias.defined())
    check(spec.bias.shape().c == ks.c, "transposed_conv2d: bias shape " +
                                           to_string(spec.bias.shape()) +
                                           " does not match kernel second dim " + to_string(ks));

  // Maps of the forward conv this op is the adjoint of.
  const auto ymap = detail::conv_source_map(xs.h, ks.h, spec.stride, spec.pad, oh, spec.pad_mode);
  const auto xmap = detail::conv_source_map(xs.w, ks.w, spec.stride, spec.pad, ow, spec.pad_mode);
  const auto xspan = detail::tap_spans(xs.w, ks.w, spec.stride, spec.pad, ow);

  TensorT<T> out = TensorT<T>::zeros({xs.n, ks.c, oh, ow});
  const std::size_t in_hw = std::size_t(xs.h) * xs.w;
  const std::size_t out_hw = std::size_t(oh) * ow;
  const int stride = spec.stride;
  T* ov = out.values().data();
  if (spec.bias.defined())
    for (int n = 0; n < xs.n; ++n)
      for (int c = 0; c < ks.c; ++c) {
        const T b = spec.bias.values()[c];
        T* plane = ov + (std::size_t(n) * ks.c + c) * out_hw;
        for (std::size_t i = 0; i < out_hw; ++i) plane[i] = b;
      }
  for (int n = 0; n < xs.n; ++n)
    for (int ic = 0; ic < ks.n; ++ic) {
      const T* iplane = x.values().data() + (std::size_t(n) * xs.c + ic) * in_hw;
      for (int c = 0; c < ks.c; ++c) {
        T* oplane = ov + (std::size_t(n) * ks.c + c) * out_hw;
        const T* kplane = spec.kernel.values().data() + (std::size_t(ic) * ks.c + c) * ks.h * ks.w;
        for (int ky = 0; ky < ks.h; ++ky)
          for (int kx = 0; kx < ks.w; ++kx) {
            const T wv = kplane[std::size_t(ky) * ks.w + kx];
            if (wv == T(0)) continue;
            const int lo = xspan[kx].lo, hi = xspan[kx].hi, base = kx - spec.pad;
            for (int iy = 0; iy < xs.h; ++iy) {
              const int sy = ymap[std::size_t(iy) * ks.h + ky];
              if (sy < 0) continue;
              const T* irow = iplane + std::size_t(iy) * xs.w;
              T* orow = oplane + std::size_t(sy) * ow;
              for (int ix = 0; ix < lo; ++ix) {
                const int sx = xmap[std::size_t(ix) * ks.w + kx];
                if (sx >= 0) orow[sx] += wv * irow[ix];
              }
              if (stride == 1) {
                detail::axpy_span(orow + base + lo, irow + lo, wv, hi - lo);
              } else {
                for (int ix = lo; ix < hi; ++ix) orow[ix * stride + base] += wv * irow[ix];
              }
              for (int ix = hi; ix < xs.w; ++ix) {
                const int sx = xmap[std::size_t(ix) * ks.w + kx];
                if (sx >= 0) orow[sx] += wv * irow[ix];
              }
            }
          }
      }
    }

  if (detail::recording<T>({&x, &spec.kernel}) ||
      (spec.bias.defined() && detail::recording<T>({&spec.bias}))) {
    out.set_requires_grad(true);
    auto bias_impl = spec.bias.defined() ? spec.bias.impl() : nullptr;
    const int stride_c = spec.stride;
    const int pad_c = spec.pad;
    TapeT<T>::current()->record([xi = x.impl(), ki = spec.kernel.impl(), bias_impl,
                                 oi = out.impl(), ymap, xmap, xspan, xs, ks, oh, ow, stride_c,
                                 pad_c] {
      if (oi->grad.empty()) return;
      const std::size_t in_hw = std::size_t(xs.h) * xs.w;
      const std::size_t out_hw = std::size_t(oh) * ow;
      if (xi->requires_grad) xi->ensure_grad();
      if (ki->requires_grad) ki->ensure_grad();
      if (bias_impl && bias_impl->requires_grad) {
        bias_impl->ensure_grad();
        for (int n = 0; n < xs.n; ++n)
          for (int c = 0; c < ks.c; ++c) {
            const T* gplane = oi->grad.data() + (std::size_t(n) * ks.c + c) * out_hw;
            T acc = 0;
            for (std::size_t i = 0; i < out_hw; ++i) acc += gplane[i];
            bias_impl->grad[c] += acc;
          }
      }
      for (int n = 0; n < xs.n; ++n)
        for (int ic = 0; ic < ks.n; ++ic) {
          const T* iplane = xi->value.data() + (std::size_t(n) * xs.c + ic) * in_hw;
          T* giplane =
              xi->requires_grad ? xi->grad.data() + (std::size_t(n) * xs.c + ic) * in_hw : nullptr;
          for (int c = 0; c < ks.c; ++c) {
            const T* gplane = oi->grad.data() + (std::size_t(n) * ks.c + c) * out_hw;
            const std::size_t kbase = (std::size_t(ic) * ks.c + c) * ks.h * ks.w;
            for (int ky = 0; ky < ks.h; ++ky)
              for (int kx = 0; kx < ks.w; ++kx) {
                const T wv = ki->value[kbase + std::size_t(ky) * ks.w + kx];
                const int lo = xspan[kx].lo, hi = xspan[kx].hi, base = kx - pad_c;
                T wacc = 0;
                for (int iy = 0; iy < xs.h; ++iy) {
                  const int sy = ymap[std::size_t(iy) * ks.h + ky];
                  if (sy < 0) continue;
                  const T* grow = gplane + std::size_t(sy) * ow;
                  const T* irow = iplane + std::size_t(iy) * xs.w;
                  T* girow = giplane ? giplane + std::size_t(iy) * xs.w : nullptr;
                  for (int ix = 0; ix < lo; ++ix) {
                    const int sx = xmap[std::size_t(ix) * ks.w + kx];
                    if (sx < 0) continue;
                    const T g = grow[sx];
                    if (girow) girow[ix] += g * wv;
                    wacc += g * irow[ix];
                  }
                  if (stride_c == 1) {
                    if (girow && wv != T(0))
                      detail::axpy_span(girow + lo, grow + base + lo, wv, hi - lo);
                    wacc += detail::dot_span(grow + base + lo, irow + lo, hi - lo);
                  } else {
                    for (int ix = lo; ix < hi; ++ix) {
                      const T g = grow[ix * stride_c + base];
                      if (girow) girow[ix] += g * wv;
                      wacc += g * irow[ix];
                    }
                  }
                  for (int ix = hi; ix < xs.w; ++ix) {
                    const int sx = xmap[std::size_t(ix) * ks.w + kx];
                    if (sx < 0) continue;
                    const T g = grow[sx];
                    if (girow) girow[ix] += g * wv;
                    wacc += g * irow[ix];
                  }
                }
                if (ki->requires_grad) ki->grad[kbase + std::size_t(ky) * ks.w + kx] += wacc;
              }
          }
        }
    });
  }
  return out;
}

/// Mean pooling with square window. Trailing partial windows are averaged
/// over their actual size, so non-divisible extents are accepted.
template <class T>
TensorT<T> avg_pool(const TensorT<T>& x, int window) {
  const Shape s = x.shape();
  check(window >= 1, "avg_pool: window must be positive");
  check(window <= s.h && window <= s.w,
        "avg_pool: window " + std::to_string(window) + " larger than input " + to_string(s));
  const int oh = (s.h + window - 1) / window;
  const int ow = (s.w + window - 1) / window;
  TensorT<T> out = TensorT<T>::zeros({s.n, s.c, oh, ow});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const int y0 = oy * window, y1 = std::min(y0 + window, s.h);
          const int x0 = ox * window, x1 = std::min(x0 + window, s.w);
          T acc = 0;
          for (int y = y0; y < y1; ++y)
            for (int xx = x0; xx < x1; ++xx) acc += x.at(n, c, y, xx);
          out.at(n, c, oy, ox) = acc / T((y1 - y0) * (x1 - x0));
        }
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s, window, oh, ow] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
              const int y0 = oy * window, y1 = std::min(y0 + window, s.h);
              const int x0 = ox * window, x1 = std::min(x0 + window, s.w);
              const T g = oi->grad[((std::size_t(n) * s.c + c) * oh + oy) * ow + ox] /
                          T((y1 - y0) * (x1 - x0));
              for (int y = y0; y < y1; ++y)
                for (int xx = x0; xx < x1; ++xx)
                  xi->grad[((std::size_t(n) * s.c + c) * s.h + y) * s.w + xx] += g;
            }
    });
  }
  return out;
}

/// (N, C*s^2, H, W) -> (N, C, s*H, s*W), periodic channel-to-space rearrangement.
template <class T>
TensorT<T> pixel_shuffle(const TensorT<T>& x, int s) {
  const Shape xs = x.shape();
  check(s >= 1, "pixel_shuffle: scale must be positive");
  check(xs.c % (s * s) == 0, "pixel_shuffle: channels of " + to_string(xs) +
                                 " not divisible by s^2 = " + std::to_string(s * s));
  const int oc = xs.c / (s * s);
  TensorT<T> out = TensorT<T>::zeros({xs.n, oc, xs.h * s, xs.w * s});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < oc; ++c)
      for (int dy = 0; dy < s; ++dy)
        for (int dx = 0; dx < s; ++dx)
          for (int y = 0; y < xs.h; ++y)
            for (int xx = 0; xx < xs.w; ++xx)
              out.at(n, c, y * s + dy, xx * s + dx) = x.at(n, c * s * s + dy * s + dx, y, xx);
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), xs, oc, s] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      const int ohh = xs.h * s, oww = xs.w * s;
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < oc; ++c)
          for (int dy = 0; dy < s; ++dy)
            for (int dx = 0; dx < s; ++dx)
              for (int y = 0; y < xs.h; ++y)
                for (int xx = 0; xx < xs.w; ++xx)
                  xi->grad[((std::size_t(n) * xs.c + c * s * s + dy * s + dx) * xs.h + y) * xs.w +
                           xx] +=
                      oi->grad[((std::size_t(n) * oc + c) * ohh + y * s + dy) * oww + xx * s + dx];
    });
  }
  return out;
}

/// Exact inverse of pixel_shuffle: (N, C, s*H, s*W) -> (N, C*s^2, H, W).
template <class T>
TensorT<T> space_to_depth(const TensorT<T>& x, int s) {
  const Shape xs = x.shape();
  check(s >= 1, "space_to_depth: scale must be positive");
  check(xs.h % s == 0 && xs.w % s == 0, "space_to_depth: spatial dims of " + to_string(xs) +
                                            " not divisible by s = " + std::to_string(s));
  const int oh = xs.h / s, ow = xs.w / s;
  TensorT<T> out = TensorT<T>::zeros({xs.n, xs.c * s * s, oh, ow});
  for (int n = 0; n < xs.n; ++n)
    for (int c = 0; c < xs.c; ++c)
      for (int dy = 0; dy < s; ++dy)
        for (int dx = 0; dx < s; ++dx)
          for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx)
              out.at(n, c * s * s + dy * s + dx, y, xx) = x.at(n, c, y * s + dy, xx * s + dx);
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), xs, oh, ow, s] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      for (int n = 0; n < xs.n; ++n)
        for (int c = 0; c < xs.c; ++c)
          for (int dy = 0; dy < s; ++dy)
            for (int dx = 0; dx < s; ++dx)
              for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx)
                  xi->grad[((std::size_t(n) * xs.c + c) * xs.h + y * s + dy) * xs.w + xx * s +
                           dx] +=
                      oi->grad[((std::size_t(n) * xs.c * s * s + c * s * s + dy * s + dx) * oh +
                                y) *
                                   ow +
                               xx];
    });
  }
  return out;
}

/// PReLU with one learnable slope per channel; alpha has shape (1,C,1,1).
template <class T>
TensorT<T> prelu(const TensorT<T>& x, const TensorT<T>& alpha) {
  const Shape s = x.shape();
  const Shape as = alpha.shape();
  check(as.n == 1 && as.c == s.c && as.h == 1 && as.w == 1,
        "prelu: alpha shape " + to_string(as) + " does not match channels of " + to_string(s));
  TensorT<T> out = TensorT<T>::zeros(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T a = alpha.values()[c];
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) {
          const T v = x.at(n, c, h, w);
          out.at(n, c, h, w) = v > T(0) ? v : a * v;
        }
    }
  if (detail::recording<T>({&x, &alpha})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), ai = alpha.impl(), oi = out.impl(), s] {
      if (oi->grad.empty()) return;
      if (xi->requires_grad) xi->ensure_grad();
      if (ai->requires_grad) ai->ensure_grad();
      const std::size_t hw = std::size_t(s.h) * s.w;
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
          const T a = ai->value[c];
          const std::size_t base = (std::size_t(n) * s.c + c) * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            const T v = xi->value[base + i];
            const T g = oi->grad[base + i];
            if (xi->requires_grad) xi->grad[base + i] += g * (v > T(0) ? T(1) : a);
            if (ai->requires_grad && v <= T(0)) ai->grad[c] += g * v;
          }
        }
    });
  }
  return out;
}

}  // namespace ssr
