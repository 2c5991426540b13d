#pragma once

#include <string>
#include <vector>

#include "stereosr/conv.hpp"
#include "stereosr/nn.hpp"
#include "stereosr/ops.hpp"
#include "stereosr/warp.hpp"

namespace ssr {

/// Back-projects aggregated HR features to LR resolution and re-emphasizes
/// the high-frequency content lost by the projection: W = relu(lowpass - LB)
/// marks where the smoothed copy overshoots, and LB + lambda*(LB*W) boosts
/// those regions.
template <class T>
struct HRFeedback {
  std::vector<Conv2dLayer<T>> downs;  // one stride-2 conv per halving
  std::vector<PReLULayer<T>> acts;
  TransposedConv2dLayer<T> unpool;  // k2 s2: exact inverse footprint of the pool
  T lambda = T(1);

  HRFeedback() = default;
  HRFeedback(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels,
             int scale, T lam)
      : lambda(lam) {
    check(scale == 2 || scale == 4, "HRFeedback: scale must be 2 or 4");
    const int halvings = scale == 2 ? 1 : 2;
    for (int i = 0; i < halvings; ++i) {
      downs.emplace_back(ps, prefix + ".down" + std::to_string(i), rng, channels, channels, 3, 2,
                         1);
      acts.emplace_back(ps, prefix + ".dact" + std::to_string(i), channels);
    }
    unpool = TransposedConv2dLayer<T>(ps, prefix + ".unpool", rng, channels, channels, 2, 2, 0);
  }

  TensorT<T> operator()(const TensorT<T>& h_hat) const {
    TensorT<T> lb = h_hat;
    for (std::size_t i = 0; i < downs.size(); ++i) lb = acts[i](downs[i](lb));
    const Shape s = lb.shape();
    TensorT<T> smoothed = unpool(avg_pool(lb, 2));
    if (!(smoothed.shape() == s)) smoothed = crop_top_left(smoothed, s.h, s.w);
    TensorT<T> w = relu(sub(smoothed, lb));
    return add(lb, mul_scalar(mul(lb, w), lambda));
  }
};

/// Enriches LR features with HR disparity detail: the HR disparity map is
/// rearranged into s^2 LR-resolution slices (values divided by s to convert
/// to LR pixel units), each slice warps the other view's LR features, and a
/// shared ResBlock + 1x1 fusion folds every warped/own pair; the s^2 results
/// are summed.
template <class T>
struct LREnrich {
  ResBlock<T> res;
  Conv2dLayer<T> fuse;

  LREnrich() = default;
  LREnrich(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels) {
    res = ResBlock<T>(ps, prefix + ".res", rng, 2 * channels);
    fuse = Conv2dLayer<T>(ps, prefix + ".fuse", rng, 2 * channels, channels, 1);
  }

  TensorT<T> operator()(const TensorT<T>& own, const TensorT<T>& other,
                        const TensorT<T>& disp_hr, int scale, int sign) const {
    TensorT<T> cube = space_to_depth(disp_hr, scale);  // (B, s^2, H, W)
    TensorT<T> acc;
    for (int i = 0; i < scale * scale; ++i) {
      TensorT<T> slice = mul_scalar(channel_slice(cube, i), T(1) / T(scale));
      TensorT<T> warped = warp_by_disparity(other, slice, sign).value;
      TensorT<T> fused = fuse(res(concat_channels(std::vector<TensorT<T>>{own, warped})));
      acc = acc.defined() ? add(acc, fused) : fused;
    }
    return acc;
  }
};

/// Iteration hand-off: concatenates enriched LR features with the projected
/// HR feedback and reduces back to the trunk width.
template <class T>
struct IterationFuse {
  Conv2dLayer<T> fuse;

  IterationFuse() = default;
  IterationFuse(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels) {
    fuse = Conv2dLayer<T>(ps, prefix + ".fuse", rng, 2 * channels, channels, 1);
  }

  TensorT<T> operator()(const TensorT<T>& enriched, const TensorT<T>& feedback) const {
    return fuse(concat_channels(std::vector<TensorT<T>>{enriched, feedback}));
  }
};

}  // namespace ssr
