#pragma once

#include <cmath>

#include "stereosr/ops.hpp"
#include "stereosr/ssim.hpp"
#include "stereosr/tensor.hpp"

namespace ssr {

/// Peak signal-to-noise ratio for [0,1] data, capped at 100 dB when the
/// error vanishes.
template <class T>
double psnr(const TensorT<T>& a, const TensorT<T>& b) {
  check(a.shape() == b.shape(),
        "psnr: shapes " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  double mse = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = double(a.values()[i]) - double(b.values()[i]);
    mse += d * d;
  }
  mse /= double(a.numel());
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

/// Drops the leftmost `border` columns (evaluation convention for the left
/// view, where the disoccluded strip is excluded).
template <class T>
TensorT<T> crop_left_border(const TensorT<T>& x, int border) {
  const Shape s = x.shape();
  check(border >= 0 && border < s.w, "crop_left_border: border " + std::to_string(border) +
                                         " leaves nothing of " + to_string(s));
  return crop_offset(x, 0, border, s.h, s.w - border);
}

struct PairScore {
  double left = 0, right = 0;
  double average() const { return 0.5 * (left + right); }
};

/// Left-view protocol: score after cropping the 64 leftmost columns.
template <class T>
double psnr_left_protocol(const TensorT<T>& sr_l, const TensorT<T>& hr_l, int border = 64) {
  return psnr(crop_left_border(sr_l, border), crop_left_border(hr_l, border));
}

template <class T>
double ssim_left_protocol(const TensorT<T>& sr_l, const TensorT<T>& hr_l, int border = 64) {
  return double(ssim_metric(crop_left_border(sr_l, border), crop_left_border(hr_l, border)));
}

/// Pair protocol: plain per-view scores, no cropping; report the average.
template <class T>
PairScore psnr_pair(const TensorT<T>& sr_l, const TensorT<T>& hr_l, const TensorT<T>& sr_r,
                    const TensorT<T>& hr_r) {
  return {psnr(sr_l, hr_l), psnr(sr_r, hr_r)};
}

template <class T>
PairScore ssim_pair(const TensorT<T>& sr_l, const TensorT<T>& hr_l, const TensorT<T>& sr_r,
                    const TensorT<T>& hr_r) {
  return {double(ssim_metric(sr_l, hr_l)), double(ssim_metric(sr_r, hr_r))};
}

struct EpeScore {
  double noc = 0;  // non-occluded pixels only
  double all = 0;
  std::size_t noc_count = 0, all_count = 0;
};

/// Mean absolute disparity error. `noc_mask` marks non-occluded pixels with
/// 1; pass an all-ones mask when occlusion info is unavailable.
template <class T>
EpeScore epe(const TensorT<T>& est, const TensorT<T>& gt, const TensorT<T>& noc_mask) {
  check(est.shape() == gt.shape() && est.shape() == noc_mask.shape(),
        "epe: mismatched shapes " + to_string(est.shape()) + ", " + to_string(gt.shape()) + ", " +
            to_string(noc_mask.shape()));
  EpeScore score;
  double sum_noc = 0, sum_all = 0;
  for (std::size_t i = 0; i < est.numel(); ++i) {
    const double err = std::abs(double(est.values()[i]) - double(gt.values()[i]));
    sum_all += err;
    ++score.all_count;
    if (noc_mask.values()[i] > T(0.5)) {
      sum_noc += err;
      ++score.noc_count;
    }
  }
  score.all = score.all_count ? sum_all / double(score.all_count) : 0.0;
  score.noc = score.noc_count ? sum_noc / double(score.noc_count) : 0.0;
  return score;
}

}  // namespace ssr
