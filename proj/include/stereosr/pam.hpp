#pragma once

#include <string>
#include <vector>

#include "stereosr/attention_ops.hpp"
#include "stereosr/nn.hpp"
#include "stereosr/ops.hpp"
#include "stereosr/tensor.hpp"

namespace ssr {

/// Attention maps named by what they produce: `to_left` has one row per left
/// pixel over right-view columns and pulls right-view data into the left
/// view; `to_right` the mirror. Valid masks are constant binary tensors
/// (row confidence above threshold), shape (B,1,H,W).
template <class T>
struct PAMMaps {
  TensorT<T> to_left, to_right;
  TensorT<T> valid_left, valid_right;
};

/// One cascade stage: a shared two-conv transform applied to both views and
/// per-stage query/key projections. Weights are siamese across views but not
/// across stages.
template <class T>
struct PAMStage {
  Conv2dLayer<T> conv_a, conv_b;
  PReLULayer<T> act;
  Conv2dLayer<T> query, key;

  PAMStage() = default;
  PAMStage(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels) {
    conv_a = Conv2dLayer<T>(ps, prefix + ".conv_a", rng, channels, channels, 3, 1, 1);
    act = PReLULayer<T>(ps, prefix + ".act", channels);
    conv_b = Conv2dLayer<T>(ps, prefix + ".conv_b", rng, channels, channels, 3, 1, 1);
    query = Conv2dLayer<T>(ps, prefix + ".query", rng, channels, channels, 1);
    key = Conv2dLayer<T>(ps, prefix + ".key", rng, channels, channels, 1);
  }

  TensorT<T> transform(const TensorT<T>& x) const { return conv_b(act(conv_a(x))); }
};

/// Cascaded bidirectional parallax attention. Each stage refines the shared
/// cost in both directions and feeds a residual-updated feature pair to the
/// next stage; the final costs are row-softmaxed into attention maps.
template <class T>
struct BiPAM {
  std::vector<PAMStage<T>> stages;
  T valid_threshold_scale = T(2);  // row max >= scale / W marks a confident row

  BiPAM() = default;
  BiPAM(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels,
        int num_stages, T threshold_scale)
      : valid_threshold_scale(threshold_scale) {
    check(num_stages >= 1, "BiPAM: need at least one stage");
    for (int i = 0; i < num_stages; ++i)
      stages.emplace_back(ps, prefix + ".stage" + std::to_string(i), rng, channels);
  }

  PAMMaps<T> operator()(const TensorT<T>& feat_l, const TensorT<T>& feat_r) const {
    TensorT<T> cur_l = feat_l, cur_r = feat_r;
    TensorT<T> cost_to_left, cost_to_right;
    for (const auto& st : stages) {
      TensorT<T> pl = st.transform(cur_l);
      TensorT<T> pr = st.transform(cur_r);
      TensorT<T> inc_left = epipolar_qk(st.query(pl), st.key(pr));   // rows: left x
      TensorT<T> inc_right = epipolar_qk(st.query(pr), st.key(pl));  // rows: right x
      cost_to_left = cost_to_left.defined() ? add(cost_to_left, inc_left) : inc_left;
      cost_to_right = cost_to_right.defined() ? add(cost_to_right, inc_right) : inc_right;
      cur_l = add(cur_l, pl);
      cur_r = add(cur_r, pr);
    }
    PAMMaps<T> maps;
    maps.to_left = softmax_lastdim(cost_to_left);
    maps.to_right = softmax_lastdim(cost_to_right);
    maps.valid_left = confidence_mask(maps.to_left);
    maps.valid_right = confidence_mask(maps.to_right);
    return maps;
  }

  /// Binary row-confidence mask; rows whose peak attention stays at or above
  /// scale/W count as matched. scale <= 0 turns masking off (all ones).
  TensorT<T> confidence_mask(const TensorT<T>& map) const {
    const Shape s = map.shape();  // (B, H, W, W)
    TensorT<T> mask = TensorT<T>::zeros({s.n, 1, s.c, s.h});
    if (valid_threshold_scale <= T(0)) {
      for (T& v : mask.values()) v = T(1);
      return mask;
    }
    const T tau = valid_threshold_scale / T(s.w);
    for (int b = 0; b < s.n; ++b)
      for (int y = 0; y < s.c; ++y)
        for (int x = 0; x < s.h; ++x) {
          T peak = 0;
          for (int k = 0; k < s.w; ++k) peak = std::max(peak, map.at(b, y, x, k));
          mask.at(b, 0, y, x) = peak >= tau ? T(1) : T(0);
        }
    return mask;
  }
};

/// Column-index ramp (B,1,H,W): value = x. Constant helper for expected
/// coordinate regression.
template <class T>
TensorT<T> column_ramp(int b, int h, int w) {
  TensorT<T> t = TensorT<T>::zeros({b, 1, h, w});
  for (int n = 0; n < b; ++n)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) t.at(n, 0, y, x) = T(x);
  return t;
}

/// Disparity regressed from an attention map: the map's rows give a
/// distribution over the other view's columns, whose expectation E yields
/// d = x - E for the left view and d = E - x for the right, clamped to
/// [0, W-1]. Differentiable through the map.
template <class T>
TensorT<T> disparity_from_attention(const TensorT<T>& map, bool left_view) {
  const Shape s = map.shape();  // (B, H, W, W)
  TensorT<T> ramp = column_ramp<T>(s.n, s.c, s.h);
  TensorT<T> expected = attn_warp(map, ramp);
  TensorT<T> raw = left_view ? sub(ramp, expected) : sub(expected, ramp);
  return clamp(raw, T(0), T(s.h - 1));
}

}  // namespace ssr
