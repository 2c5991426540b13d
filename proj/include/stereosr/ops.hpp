#pragma once

#include <algorithm>
#include <cmath>

#include "stereosr/tensor.hpp"

namespace ssr {

namespace detail {

template <class T>
bool recording(std::initializer_list<const TensorT<T>*> inputs) {
  if (!TapeT<T>::current()) return false;
  for (const auto* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

/// Pointwise unary op. df(x, y) is dy/dx from the input and output values.
template <class T, class F, class DF>
TensorT<T> pointwise(const TensorT<T>& x, F f, DF df) {
  TensorT<T> out = TensorT<T>::zeros(x.shape());
  const auto& xv = x.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = f(xv[i]);
  if (recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), df] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      for (std::size_t i = 0; i < xi->value.size(); ++i)
        xi->grad[i] += oi->grad[i] * df(xi->value[i], oi->value[i]);
    });
  }
  return out;
}

/// Pointwise binary op on equal shapes. dfa/dfb give d(out)/d(a|b).
template <class T, class F, class DA, class DB>
TensorT<T> pointwise2(const TensorT<T>& a, const TensorT<T>& b, const char* name, F f, DA dfa,
                      DB dfb) {
  check(a.shape() == b.shape(), std::string(name) + ": shape mismatch " + to_string(a.shape()) +
                                    " vs " + to_string(b.shape()));
  TensorT<T> out = TensorT<T>::zeros(a.shape());
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = out.values();
  for (std::size_t i = 0; i < av.size(); ++i) ov[i] = f(av[i], bv[i]);
  if (recording<T>({&a, &b})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([ai = a.impl(), bi = b.impl(), oi = out.impl(), dfa, dfb] {
      if (oi->grad.empty()) return;
      if (ai->requires_grad) {
        ai->ensure_grad();
        for (std::size_t i = 0; i < ai->value.size(); ++i)
          ai->grad[i] += oi->grad[i] * dfa(ai->value[i], bi->value[i]);
      }
      if (bi->requires_grad) {
        bi->ensure_grad();
        for (std::size_t i = 0; i < bi->value.size(); ++i)
          bi->grad[i] += oi->grad[i] * dfb(ai->value[i], bi->value[i]);
      }
    });
  }
  return out;
}

}  // namespace detail

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::pointwise2(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::pointwise2(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::pointwise2(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

/// Elementwise quotient. Caller guarantees the denominator is bounded away
/// from zero (the SSIM terms add their stabilizing constants first).
template <class T>
TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::pointwise2(
      a, b, "div", [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <class T>
TensorT<T> mul_scalar(const TensorT<T>& x, T k) {
  return detail::pointwise(
      x, [k](T v) { return v * k; }, [k](T, T) { return k; });
}

template <class T>
TensorT<T> add_scalar(const TensorT<T>& x, T k) {
  return detail::pointwise(
      x, [k](T v) { return v + k; }, [](T, T) { return T(1); });
}

template <class T>
TensorT<T> neg(const TensorT<T>& x) {
  return mul_scalar(x, T(-1));
}

template <class T>
TensorT<T> abs_val(const TensorT<T>& x) {
  return detail::pointwise(
      x, [](T v) { return std::abs(v); },
      [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <class T>
TensorT<T> exp_op(const TensorT<T>& x) {
  return detail::pointwise(
      x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
TensorT<T> tanh_op(const TensorT<T>& x) {
  return detail::pointwise(
      x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
TensorT<T> sigmoid(const TensorT<T>& x) {
  return detail::pointwise(
      x, [](T v) { return v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                                    : std::exp(v) / (T(1) + std::exp(v)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
TensorT<T> relu(const TensorT<T>& x) {
  return detail::pointwise(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
TensorT<T> clamp(const TensorT<T>& x, T lo, T hi) {
  return detail::pointwise(
      x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <class T>
TensorT<T> sum_all(const TensorT<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v;
  TensorT<T> out = TensorT<T>::scalar(acc);
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl()] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      const T g = oi->grad[0];
      for (auto& gv : xi->grad) gv += g;
    });
  }
  return out;
}

template <class T>
TensorT<T> mean_all(const TensorT<T>& x) {
  return mul_scalar(sum_all(x), T(1) / T(x.numel()));
}

/// Sum over the channel axis: (N,C,H,W) -> (N,1,H,W).
template <class T>
TensorT<T> channel_sum(const TensorT<T>& x) {
  const Shape s = x.shape();
  TensorT<T> out = TensorT<T>::zeros({s.n, 1, s.h, s.w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, 0, h, w) += x.at(n, c, h, w);
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
              xi->grad[((std::size_t(n) * s.c + c) * s.h + h) * s.w + w] +=
                  oi->grad[(std::size_t(n) * s.h + h) * s.w + w];
    });
  }
  return out;
}

/// Mean over both spatial axes: (N,C,H,W) -> (N,C,1,1).
template <class T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
  const Shape s = x.shape();
  check(s.h >= 1 && s.w >= 1, "global_avg_pool: empty spatial extent " + to_string(s));
  TensorT<T> out = TensorT<T>::zeros({s.n, s.c, 1, 1});
  const T inv = T(1) / T(s.h * s.w);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      T acc = 0;
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) acc += x.at(n, c, h, w);
      out.at(n, c, 0, 0) = acc * inv;
    }
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s, inv] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
          const T g = oi->grad[std::size_t(n) * s.c + c] * inv;
          T* gx = xi->grad.data() + (std::size_t(n) * s.c + c) * s.h * s.w;
          for (int i = 0; i < s.h * s.w; ++i) gx[i] += g;
        }
    });
  }
  return out;
}

/// x * gate with gate of shape (N,C,1,1) broadcast over the spatial axes.
template <class T>
TensorT<T> mul_channel_gate(const TensorT<T>& x, const TensorT<T>& gate) {
  const Shape s = x.shape();
  const Shape gs = gate.shape();
  check(gs.n == s.n && gs.c == s.c && gs.h == 1 && gs.w == 1,
        "mul_channel_gate: gate shape " + to_string(gs) + " does not broadcast over " +
            to_string(s));
  TensorT<T> out = TensorT<T>::zeros(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const T g = gate.at(n, c, 0, 0);
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, c, h, w) = x.at(n, c, h, w) * g;
    }
  if (detail::recording<T>({&x, &gate})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), gi = gate.impl(), oi = out.impl(), s] {
      if (oi->grad.empty()) return;
      const std::size_t hw = std::size_t(s.h) * s.w;
      if (xi->requires_grad) xi->ensure_grad();
      if (gi->requires_grad) gi->ensure_grad();
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
          const std::size_t base = (std::size_t(n) * s.c + c) * hw;
          const T g = gi->value[std::size_t(n) * s.c + c];
          for (std::size_t i = 0; i < hw; ++i) {
            const T og = oi->grad[base + i];
            if (xi->requires_grad) xi->grad[base + i] += og * g;
            if (gi->requires_grad)
              gi->grad[std::size_t(n) * s.c + c] += og * xi->value[base + i];
          }
        }
    });
  }
  return out;
}

template <class T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& parts) {
  check(!parts.empty(), "concat_channels: no inputs");
  const Shape s0 = parts[0].shape();
  int ctotal = 0;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    check(s.n == s0.n && s.h == s0.h && s.w == s0.w,
          "concat_channels: incompatible shapes " + to_string(s0) + " vs " + to_string(s));
    ctotal += s.c;
  }
  TensorT<T> out = TensorT<T>::zeros({s0.n, ctotal, s0.h, s0.w});
  const std::size_t hw = std::size_t(s0.h) * s0.w;
  int coff = 0;
  for (const auto& p : parts) {
    for (int n = 0; n < s0.n; ++n)
      for (int c = 0; c < p.shape().c; ++c)
        std::copy_n(p.values().data() + (std::size_t(n) * p.shape().c + c) * hw, hw,
                    out.values().data() + (std::size_t(n) * ctotal + coff + c) * hw);
    coff += p.shape().c;
  }
  bool need = false;
  if (TapeT<T>::current())
    for (const auto& p : parts) need = need || p.requires_grad();
  if (need) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorImpl<T>>> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    TapeT<T>::current()->record([impls, oi = out.impl(), s0, ctotal, hw] {
      if (oi->grad.empty()) return;
      int coff = 0;
      for (const auto& pi : impls) {
        const int pc = pi->shape.c;
        if (pi->requires_grad) {
          pi->ensure_grad();
          for (int n = 0; n < s0.n; ++n)
            for (int c = 0; c < pc; ++c) {
              const T* g = oi->grad.data() + (std::size_t(n) * ctotal + coff + c) * hw;
              T* dst = pi->grad.data() + (std::size_t(n) * pc + c) * hw;
              for (std::size_t i = 0; i < hw; ++i) dst[i] += g[i];
            }
        }
        coff += pc;
      }
    });
  }
  return out;
}

/// Single channel c as (N,1,H,W).
template <class T>
TensorT<T> channel_slice(const TensorT<T>& x, int c) { return slice_channels(x, c, 1); }

/// Contiguous channel range [c0, c0 + len).
template <class T>
TensorT<T> slice_channels(const TensorT<T>& x, int c0, int len) {
  const Shape s = x.shape();
  check(c0 >= 0 && len >= 1 && c0 + len <= s.c,
        "slice_channels: range [" + std::to_string(c0) + ", " + std::to_string(c0 + len) +
            ") out of bounds for " + to_string(s));
  TensorT<T> out = TensorT<T>::zeros({s.n, len, s.h, s.w});
  const std::size_t hw = std::size_t(s.h) * s.w;
  for (int n = 0; n < s.n; ++n)
    std::copy_n(x.values().data() + (std::size_t(n) * s.c + c0) * hw, hw * len,
                out.values().data() + std::size_t(n) * len * hw);
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s, c0, len, hw] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      for (int n = 0; n < s.n; ++n) {
        const T* g = oi->grad.data() + std::size_t(n) * len * hw;
        T* dst = xi->grad.data() + (std::size_t(n) * s.c + c0) * hw;
        for (std::size_t i = 0; i < hw * std::size_t(len); ++i) dst[i] += g[i];
      }
    });
  }
  return out;
}

/// Zero padding appended at the bottom/right edges.
template <class T>
TensorT<T> pad_bottom_right(const TensorT<T>& x, int ph, int pw) {
  const Shape s = x.shape();
  check(ph >= 0 && pw >= 0, "pad_bottom_right: negative padding");
  TensorT<T> out = TensorT<T>::zeros({s.n, s.c, s.h + ph, s.w + pw});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, c, h, w) = x.at(n, c, h, w);
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      const Shape os = oi->shape;
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int h = 0; h < s.h; ++h)
            for (int w = 0; w < s.w; ++w)
              xi->grad[((std::size_t(n) * s.c + c) * s.h + h) * s.w + w] +=
                  oi->grad[((std::size_t(n) * os.c + c) * os.h + h) * os.w + w];
    });
  }
  return out;
}

/// Spatial crop starting at (y0, x0), size h x w.
template <class T>
TensorT<T> crop_offset(const TensorT<T>& x, int y0, int x0, int h, int w) {
  const Shape s = x.shape();
  check(y0 >= 0 && x0 >= 0 && h >= 1 && w >= 1 && y0 + h <= s.h && x0 + w <= s.w,
        "crop_offset: window does not fit in " + to_string(s));
  TensorT<T> out = TensorT<T>::zeros({s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y)
        for (int x2 = 0; x2 < w; ++x2) out.at(n, c, y, x2) = x.at(n, c, y0 + y, x0 + x2);
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s, y0, x0, h, w] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int y = 0; y < h; ++y)
            for (int x2 = 0; x2 < w; ++x2)
              xi->grad[((std::size_t(n) * s.c + c) * s.h + y0 + y) * s.w + x0 + x2] +=
                  oi->grad[((std::size_t(n) * oi->shape.c + c) * h + y) * w + x2];
    });
  }
  return out;
}

template <class T>
TensorT<T> crop_top_left(const TensorT<T>& x, int h, int w) {
  return crop_offset(x, 0, 0, h, w);
}

/// Forward difference along x: out(...,w) = in(...,w+1) - in(...,w), width W-1.
template <class T>
TensorT<T> diff_x(const TensorT<T>& x) {
  const Shape s = x.shape();
  check(s.w >= 2, "diff_x: width must be >= 2, got " + to_string(s));
  TensorT<T> out = TensorT<T>::zeros({s.n, s.c, s.h, s.w - 1});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w + 1 < s.w; ++w)
          out.at(n, c, h, w) = x.at(n, c, h, w + 1) - x.at(n, c, h, w);
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      auto xidx = [&](int n, int c, int h, int w) {
        return ((std::size_t(n) * s.c + c) * s.h + h) * s.w + w;
      };
      auto oidx = [&](int n, int c, int h, int w) {
        return ((std::size_t(n) * s.c + c) * s.h + h) * (s.w - 1) + w;
      };
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int h = 0; h < s.h; ++h)
            for (int w = 0; w + 1 < s.w; ++w) {
              const T g = oi->grad[oidx(n, c, h, w)];
              xi->grad[xidx(n, c, h, w + 1)] += g;
              xi->grad[xidx(n, c, h, w)] -= g;
            }
    });
  }
  return out;
}

/// Forward difference along y, height H-1.
template <class T>
TensorT<T> diff_y(const TensorT<T>& x) {
  const Shape s = x.shape();
  check(s.h >= 2, "diff_y: height must be >= 2, got " + to_string(s));
  TensorT<T> out = TensorT<T>::zeros({s.n, s.c, s.h - 1, s.w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h + 1 < s.h; ++h)
        for (int w = 0; w < s.w; ++w)
          out.at(n, c, h, w) = x.at(n, c, h + 1, w) - x.at(n, c, h, w);
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      auto xidx = [&](int n, int c, int h, int w) {
        return ((std::size_t(n) * s.c + c) * s.h + h) * s.w + w;
      };
      auto oidx = [&](int n, int c, int h, int w) {
        return ((std::size_t(n) * s.c + c) * (s.h - 1) + h) * s.w + w;
      };
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int h = 0; h + 1 < s.h; ++h)
            for (int w = 0; w < s.w; ++w) {
              const T g = oi->grad[oidx(n, c, h, w)];
              xi->grad[xidx(n, c, h + 1, w)] += g;
              xi->grad[xidx(n, c, h, w)] -= g;
            }
    });
  }
  return out;
}

}  // namespace ssr
