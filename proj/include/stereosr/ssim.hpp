#pragma once

#include <cmath>

#include "stereosr/conv.hpp"
#include "stereosr/ops.hpp"
#include "stereosr/tensor.hpp"

namespace ssr {

/// Normalized Gaussian window as a depthwise conv kernel: (C, C, k, k) with
/// the window on the diagonal and zeros elsewhere, so conv2d filters each
/// channel independently.
template <class T>
TensorT<T> gaussian_window(int channels, int size = 11, T sigma = T(1.5)) {
  check(size >= 1 && size % 2 == 1, "gaussian_window: size must be odd and positive");
  std::vector<T> w1(size);
  const int half = size / 2;
  T sum = 0;
  for (int i = 0; i < size; ++i) {
    w1[i] = std::exp(-T((i - half) * (i - half)) / (T(2) * sigma * sigma));
    sum += w1[i];
  }
  for (T& v : w1) v /= sum;
  TensorT<T> k = TensorT<T>::zeros({channels, channels, size, size});
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) k.at(c, c, y, x) = w1[y] * w1[x];
  return k;
}

/// Per-pixel structural similarity on [0,1] data: 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, valid windows only, so the map is
/// (H-10) x (W-10). Differentiable; both denominators are bounded below by
/// the stabilizing constants. ssim_map(a, a) is exactly 1 everywhere.
template <class T>
TensorT<T> ssim_map(const TensorT<T>& a, const TensorT<T>& b) {
  const Shape s = a.shape();
  check(s == b.shape(), "ssim_map: shapes " + to_string(s) + " vs " + to_string(b.shape()));
  check(s.h >= 11 && s.w >= 11,
        "ssim_map: input " + to_string(s) + " smaller than the 11x11 window");
  const T c1 = T(0.01) * T(0.01);
  const T c2 = T(0.03) * T(0.03);
  ConvSpec<T> g{gaussian_window<T>(s.c), TensorT<T>{}, 1, 0, PadMode::kZero};

  TensorT<T> mu_a = conv2d(a, g);
  TensorT<T> mu_b = conv2d(b, g);
  TensorT<T> mu_aa = mul(mu_a, mu_a);
  TensorT<T> mu_bb = mul(mu_b, mu_b);
  TensorT<T> mu_ab = mul(mu_a, mu_b);
  TensorT<T> var_a = sub(conv2d(mul(a, a), g), mu_aa);
  TensorT<T> var_b = sub(conv2d(mul(b, b), g), mu_bb);
  TensorT<T> cov = sub(conv2d(mul(a, b), g), mu_ab);

  TensorT<T> num = mul(add_scalar(mul_scalar(mu_ab, T(2)), c1),
                       add_scalar(mul_scalar(cov, T(2)), c2));
  TensorT<T> den = mul(add_scalar(add(mu_aa, mu_bb), c1), add_scalar(add(var_a, var_b), c2));
  return div(num, den);
}

/// Scalar SSIM score: plain mean of the valid-window map over all channels.
template <class T>
T ssim_metric(const TensorT<T>& a, const TensorT<T>& b) {
  return mean_all(ssim_map(a, b)).item();
}

}  // namespace ssr
