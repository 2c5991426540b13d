#pragma once

#include <string>
#include <vector>

#include "stereosr/nn.hpp"
#include "stereosr/ops.hpp"
#include "stereosr/warp.hpp"

namespace ssr {

/// Two-level encoder/decoder over the hypothesis channels. Strided k4 convs
/// halve exactly, their transposed counterparts double exactly; inputs are
/// padded bottom-right to a multiple of 4 and cropped on the way out, so any
/// spatial size round-trips. All-zero weights make this an identity.
template <class T>
struct Hourglass {
  Conv2dLayer<T> down1, down2;
  PReLULayer<T> act1, act2, act3;
  TransposedConv2dLayer<T> up1, up2;

  Hourglass() = default;
  Hourglass(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels) {
    down1 = Conv2dLayer<T>(ps, prefix + ".down1", rng, channels, channels, 4, 2, 1);
    act1 = PReLULayer<T>(ps, prefix + ".act1", channels);
    down2 = Conv2dLayer<T>(ps, prefix + ".down2", rng, channels, channels, 4, 2, 1);
    act2 = PReLULayer<T>(ps, prefix + ".act2", channels);
    up1 = TransposedConv2dLayer<T>(ps, prefix + ".up1", rng, channels, channels, 4, 2, 1);
    act3 = PReLULayer<T>(ps, prefix + ".act3", channels);
    up2 = TransposedConv2dLayer<T>(ps, prefix + ".up2", rng, channels, channels, 4, 2, 1);
  }

  TensorT<T> operator()(const TensorT<T>& x) const {
    const Shape s = x.shape();
    const int ph = (4 - s.h % 4) % 4;
    const int pw = (4 - s.w % 4) % 4;
    TensorT<T> xp = (ph || pw) ? pad_bottom_right(x, ph, pw) : x;
    TensorT<T> e1 = act1(down1(xp));
    TensorT<T> e2 = act2(down2(e1));
    TensorT<T> u = add(act3(up1(e2)), e1);
    TensorT<T> out = add(up2(u), xp);
    return (ph || pw) ? crop_top_left(out, s.h, s.w) : out;
  }
};

/// Narrow-band disparity refinement: P hypotheses spread over a window of
/// delta_d pixels around an initial estimate; per-hypothesis correlation
/// between own features and the other view warped by that hypothesis;
/// hourglass aggregation; softmax-weighted expectation over the hypotheses.
/// Differentiable in both feature maps and the initial disparity.
template <class T>
struct DisparityRefiner {
  int hypotheses = 24;
  int delta_d = 24;
  Hourglass<T> agg;

  DisparityRefiner() = default;
  DisparityRefiner(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int p,
                   int dd)
      : hypotheses(p), delta_d(dd) {
    check(p >= 2, "DisparityRefiner: need at least two hypotheses");
    agg = Hourglass<T>(ps, prefix + ".agg", rng, p);
  }

  /// Clamped hypothesis grid around the initial estimate, one channel per
  /// hypothesis: d_j = clamp(init - delta_d/2 + j*delta_d/P, 0, width-1).
  TensorT<T> hypothesis_stack(const TensorT<T>& disp_init, int width) const {
    std::vector<TensorT<T>> hyps;
    hyps.reserve(hypotheses);
    for (int j = 0; j < hypotheses; ++j) {
      const T offset = -T(delta_d) / T(2) + T(j) * T(delta_d) / T(hypotheses);
      hyps.push_back(clamp(add_scalar(disp_init, offset), T(0), T(width - 1)));
    }
    return concat_channels(hyps);
  }

  /// (B, P, H, W) matching scores: channel-mean correlation between own
  /// features and the other view warped by each hypothesis.
  TensorT<T> build_volume(const TensorT<T>& own, const TensorT<T>& other,
                          const TensorT<T>& disp_init, int sign) const {
    const Shape s = own.shape();
    std::vector<TensorT<T>> costs;
    costs.reserve(hypotheses);
    const T inv_c = T(1) / T(s.c);
    for (int j = 0; j < hypotheses; ++j) {
      const T offset = -T(delta_d) / T(2) + T(j) * T(delta_d) / T(hypotheses);
      TensorT<T> dj = clamp(add_scalar(disp_init, offset), T(0), T(s.w - 1));
      WarpResult<T> wr = warp_by_disparity(other, dj, sign);
      costs.push_back(mul_scalar(channel_sum(mul(own, wr.value)), inv_c));
    }
    return concat_channels(costs);
  }

  /// sign as in warp_by_disparity: +1 refines the left view against the
  /// right, -1 the opposite.
  TensorT<T> operator()(const TensorT<T>& own, const TensorT<T>& other,
                        const TensorT<T>& disp_init, int sign) const {
    TensorT<T> volume = build_volume(own, other, disp_init, sign);
    TensorT<T> prob = softmax_axis(agg(volume), 1);
    return channel_sum(mul(prob, hypothesis_stack(disp_init, own.shape().w)));
  }
};

}  // namespace ssr
