#pragma once

#include <cmath>

#include "stereosr/ops.hpp"
#include "stereosr/tensor.hpp"

namespace ssr {

/// Softmax along one axis (1 = channels, 3 = innermost). Max-subtracted for
/// stability; rows of the result sum to 1 exactly up to rounding.
template <class T>
TensorT<T> softmax_axis(const TensorT<T>& x, int axis) {
  check(axis == 1 || axis == 3, "softmax_axis: only axes 1 and 3 are supported");
  const Shape s = x.shape();
  TensorT<T> out = TensorT<T>::zeros(s);
  auto run_lane = [](const T* in, T* o, int len, std::size_t stride) {
    T m = in[0];
    for (int i = 1; i < len; ++i) m = std::max(m, in[i * stride]);
    T z = 0;
    for (int i = 0; i < len; ++i) {
      const T e = std::exp(in[i * stride] - m);
      o[i * stride] = e;
      z += e;
    }
    for (int i = 0; i < len; ++i) o[i * stride] /= z;
  };
  const T* in = x.values().data();
  T* ov = out.values().data();
  if (axis == 3) {
    const std::size_t lanes = std::size_t(s.n) * s.c * s.h;
    for (std::size_t l = 0; l < lanes; ++l) run_lane(in + l * s.w, ov + l * s.w, s.w, 1);
  } else {
    const std::size_t hw = std::size_t(s.h) * s.w;
    for (int n = 0; n < s.n; ++n)
      for (std::size_t i = 0; i < hw; ++i)
        run_lane(in + std::size_t(n) * s.c * hw + i, ov + std::size_t(n) * s.c * hw + i, s.c, hw);
  }
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s, axis] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      auto back_lane = [](const T* y, const T* g, T* gx, int len, std::size_t stride) {
        T dot = 0;
        for (int i = 0; i < len; ++i) dot += y[i * stride] * g[i * stride];
        for (int i = 0; i < len; ++i) gx[i * stride] += y[i * stride] * (g[i * stride] - dot);
      };
      if (axis == 3) {
        const std::size_t lanes = std::size_t(s.n) * s.c * s.h;
        for (std::size_t l = 0; l < lanes; ++l)
          back_lane(oi->value.data() + l * s.w, oi->grad.data() + l * s.w,
                    xi->grad.data() + l * s.w, s.w, 1);
      } else {
        const std::size_t hw = std::size_t(s.h) * s.w;
        for (int n = 0; n < s.n; ++n)
          for (std::size_t i = 0; i < hw; ++i) {
            const std::size_t base = std::size_t(n) * s.c * hw + i;
            back_lane(oi->value.data() + base, oi->grad.data() + base, xi->grad.data() + base, s.c,
                      hw);
          }
      }
    });
  }
  return out;
}

template <class T>
TensorT<T> softmax_lastdim(const TensorT<T>& x) {
  return softmax_axis(x, 3);
}

/// Row-wise similarity between two feature maps along the width axis:
/// out(b,y,i,j) = sum_c Q(b,c,y,i) * K(b,c,y,j). Result is stored in the
/// (batch, row, query x, reference x) layout, i.e. shape {B, H, W, W}.
template <class T>
TensorT<T> epipolar_qk(const TensorT<T>& q, const TensorT<T>& k) {
  const Shape s = q.shape();
  check(s == k.shape(), "epipolar_qk: shapes " + to_string(s) + " vs " + to_string(k.shape()));
  TensorT<T> out = TensorT<T>::zeros({s.n, s.h, s.w, s.w});
  const std::size_t hw = std::size_t(s.h) * s.w;
  for (int b = 0; b < s.n; ++b)
    for (int y = 0; y < s.h; ++y) {
      T* orow = out.values().data() + ((std::size_t(b) * s.h + y) * s.w) * s.w;
      for (int c = 0; c < s.c; ++c) {
        const T* qrow = q.values().data() + (std::size_t(b) * s.c + c) * hw + std::size_t(y) * s.w;
        const T* krow = k.values().data() + (std::size_t(b) * s.c + c) * hw + std::size_t(y) * s.w;
        for (int i = 0; i < s.w; ++i) {
          const T qv = qrow[i];
          if (qv == T(0)) continue;
          T* o = orow + std::size_t(i) * s.w;
          for (int j = 0; j < s.w; ++j) o[j] += qv * krow[j];
        }
      }
    }
  if (detail::recording<T>({&q, &k})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([qi = q.impl(), ki = k.impl(), oi = out.impl(), s] {
      if (oi->grad.empty()) return;
      if (qi->requires_grad) qi->ensure_grad();
      if (ki->requires_grad) ki->ensure_grad();
      const std::size_t hw = std::size_t(s.h) * s.w;
      for (int b = 0; b < s.n; ++b)
        for (int y = 0; y < s.h; ++y) {
          const T* grow = oi->grad.data() + ((std::size_t(b) * s.h + y) * s.w) * s.w;
          for (int c = 0; c < s.c; ++c) {
            const std::size_t base = (std::size_t(b) * s.c + c) * hw + std::size_t(y) * s.w;
            const T* qrow = qi->value.data() + base;
            const T* krow = ki->value.data() + base;
            for (int i = 0; i < s.w; ++i) {
              const T* g = grow + std::size_t(i) * s.w;
              if (qi->requires_grad) {
                T acc = 0;
                for (int j = 0; j < s.w; ++j) acc += g[j] * krow[j];
                qi->grad[base + i] += acc;
              }
              if (ki->requires_grad) {
                const T qv = qrow[i];
                if (qv != T(0))
                  for (int j = 0; j < s.w; ++j) ki->grad[base + j] += g[j] * qv;
              }
            }
          }
        }
    });
  }
  return out;
}

/// Chains two attention maps: out(b,y,i,j) = sum_k A(b,y,i,k) * B(b,y,k,j).
/// Per (b,y) slice this is a plain W x W matrix product.
template <class T>
TensorT<T> attn_compose(const TensorT<T>& a, const TensorT<T>& b) {
  const Shape s = a.shape();
  check(s == b.shape() && s.h == s.w,
        "attn_compose: expected matching square maps, got " + to_string(s) + " and " +
            to_string(b.shape()));
  const int w = s.w;
  TensorT<T> out = TensorT<T>::zeros(s);
  const std::size_t slice = std::size_t(w) * w;
  const std::size_t nslices = std::size_t(s.n) * s.c;
  for (std::size_t sl = 0; sl < nslices; ++sl) {
    const T* av = a.values().data() + sl * slice;
    const T* bv = b.values().data() + sl * slice;
    T* ov = out.values().data() + sl * slice;
    for (int i = 0; i < w; ++i)
      for (int k = 0; k < w; ++k) {
        const T av_ik = av[std::size_t(i) * w + k];
        if (av_ik == T(0)) continue;
        const T* brow = bv + std::size_t(k) * w;
        T* orow = ov + std::size_t(i) * w;
        for (int j = 0; j < w; ++j) orow[j] += av_ik * brow[j];
      }
  }
  if (detail::recording<T>({&a, &b})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([ai = a.impl(), bi = b.impl(), oi = out.impl(), nslices, slice, w] {
      if (oi->grad.empty()) return;
      if (ai->requires_grad) ai->ensure_grad();
      if (bi->requires_grad) bi->ensure_grad();
      for (std::size_t sl = 0; sl < nslices; ++sl) {
        const T* av = ai->value.data() + sl * slice;
        const T* bv = bi->value.data() + sl * slice;
        const T* gv = oi->grad.data() + sl * slice;
        for (int i = 0; i < w; ++i)
          for (int k = 0; k < w; ++k) {
            const T* grow = gv + std::size_t(i) * w;
            const T* brow = bv + std::size_t(k) * w;
            if (ai->requires_grad) {
              T acc = 0;
              for (int j = 0; j < w; ++j) acc += grow[j] * brow[j];
              ai->grad[sl * slice + std::size_t(i) * w + k] += acc;
            }
            if (bi->requires_grad) {
              const T av_ik = av[std::size_t(i) * w + k];
              if (av_ik != T(0)) {
                T* gb = bi->grad.data() + sl * slice + std::size_t(k) * w;
                for (int j = 0; j < w; ++j) gb[j] += av_ik * grow[j];
              }
            }
          }
      }
    });
  }
  return out;
}

/// Applies an attention map to a feature tensor along the width axis:
/// out(b,c,y,x) = sum_k M(b,y,x,k) * F(b,c,y,k).
template <class T>
TensorT<T> attn_warp(const TensorT<T>& m, const TensorT<T>& f) {
  const Shape ms = m.shape();
  const Shape fs = f.shape();
  check(ms.n == fs.n && ms.c == fs.h && ms.h == fs.w && ms.w == fs.w,
        "attn_warp: map " + to_string(ms) + " does not match features " + to_string(fs));
  TensorT<T> out = TensorT<T>::zeros(fs);
  const std::size_t hw = std::size_t(fs.h) * fs.w;
  for (int b = 0; b < fs.n; ++b)
    for (int y = 0; y < fs.h; ++y) {
      const T* mrow = m.values().data() + ((std::size_t(b) * fs.h + y) * fs.w) * fs.w;
      for (int c = 0; c < fs.c; ++c) {
        const T* frow = f.values().data() + (std::size_t(b) * fs.c + c) * hw + std::size_t(y) * fs.w;
        T* orow = out.values().data() + (std::size_t(b) * fs.c + c) * hw + std::size_t(y) * fs.w;
        for (int x = 0; x < fs.w; ++x) {
          const T* mr = mrow + std::size_t(x) * fs.w;
          T acc = 0;
          for (int k = 0; k < fs.w; ++k) acc += mr[k] * frow[k];
          orow[x] = acc;
        }
      }
    }
  if (detail::recording<T>({&m, &f})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([mi = m.impl(), fi = f.impl(), oi = out.impl(), fs] {
      if (oi->grad.empty()) return;
      if (mi->requires_grad) mi->ensure_grad();
      if (fi->requires_grad) fi->ensure_grad();
      const std::size_t hw = std::size_t(fs.h) * fs.w;
      for (int b = 0; b < fs.n; ++b)
        for (int y = 0; y < fs.h; ++y) {
          const std::size_t mbase = ((std::size_t(b) * fs.h + y) * fs.w) * fs.w;
          for (int c = 0; c < fs.c; ++c) {
            const std::size_t fbase = (std::size_t(b) * fs.c + c) * hw + std::size_t(y) * fs.w;
            const T* grow = oi->grad.data() + fbase;
            const T* frow = fi->value.data() + fbase;
            for (int x = 0; x < fs.w; ++x) {
              const T g = grow[x];
              if (g == T(0)) continue;
              const T* mr = mi->value.data() + mbase + std::size_t(x) * fs.w;
              if (mi->requires_grad) {
                T* gm = mi->grad.data() + mbase + std::size_t(x) * fs.w;
                for (int k = 0; k < fs.w; ++k) gm[k] += g * frow[k];
              }
              if (fi->requires_grad) {
                T* gf = fi->grad.data() + fbase;
                for (int k = 0; k < fs.w; ++k) gf[k] += g * mr[k];
              }
            }
          }
        }
    });
  }
  return out;
}

}  // namespace ssr
