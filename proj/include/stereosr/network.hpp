#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stereosr/backbone.hpp"
#include "stereosr/costvol.hpp"
#include "stereosr/feedback.hpp"
#include "stereosr/nn.hpp"
#include "stereosr/pam.hpp"
#include "stereosr/warp.hpp"

namespace ssr {

struct StereoNetConfig {
  int scale = 2;     // super-resolution factor (2 or 4)
  int channels = 16;
  int in_channels = 3;
  int extract_blocks = 4;
  int rdb_layers = 4;
  int growth = 16;
  int pam_stages = 2;       // cascaded attention refinements
  int iterations = 2;       // feedback passes
  int hypotheses = 24;      // P
  int delta_d = 24;         // search window in HR pixels
  int ca_reduction = 4;
  std::vector<int> spp_levels{1, 2, 4};
  double valid_threshold_scale = 2.0;  // LR confidence mask; <= 0 disables
  double feedback_lambda = 1.0;
  std::uint64_t seed = 1234;
};

/// Everything one pass produces for one feedback iteration. Attention maps
/// are (B,H,W,W); LR disparities (B,1,H,W); HR tensors live at (sH, sW).
/// valid_* lr masks and oov_* are constants; valid_hr_* stay on the tape.
template <class T>
struct StereoIteration {
  TensorT<T> sr0_l, sr0_r;  // first-step super-resolved pair
  TensorT<T> sr1_l, sr1_r;  // after HR-disparity aggregation
  TensorT<T> map_to_left, map_to_right;
  TensorT<T> valid_lr_left, valid_lr_right;
  TensorT<T> disp_lr_left, disp_lr_right;
  TensorT<T> disp_hr_left, disp_hr_right;
  TensorT<T> cross_disp_left, cross_disp_right;  // other view's disparity warped in
  TensorT<T> oov_left, oov_right;                // in-range masks of that warp
  TensorT<T> valid_hr_left, valid_hr_right;      // 1 - tanh(0.2|own - cross|)
};

template <class T>
struct StereoTrace {
  std::vector<StereoIteration<T>> iterations;
};

template <class T>
class StereoNet {
 public:
  StereoNetConfig cfg;
  ParamStore<T> params;

  explicit StereoNet(const StereoNetConfig& c) : cfg(c) {
    std::mt19937_64 rng(cfg.seed);
    extract_ = FeatureExtractor<T>(params, "extract", rng, cfg.in_channels, cfg.channels,
                                   cfg.extract_blocks, cfg.rdb_layers, cfg.growth);
    transition_ = TransitionBlock<T>(params, "transition", rng, cfg.channels, cfg.spp_levels);
    pam_ = BiPAM<T>(params, "pam", rng, cfg.channels, cfg.pam_stages,
                    T(cfg.valid_threshold_scale));
    ffm_ = FusionBlock<T>(params, "ffm", rng, cfg.channels, cfg.rdb_layers, cfg.growth,
                          cfg.ca_reduction, false);
    recon_ = Reconstructor<T>(params, "recon", rng, cfg.channels, cfg.extract_blocks,
                              cfg.rdb_layers, cfg.growth, cfg.scale);
    to_image_ = Conv2dLayer<T>(params, "to_image", rng, cfg.channels, cfg.in_channels, 3, 1, 1);
    refiner_ = DisparityRefiner<T>(params, "refine", rng, cfg.hypotheses, cfg.delta_d);
    hr_agg_ = FusionBlock<T>(params, "hr_agg", rng, cfg.channels, cfg.rdb_layers, cfg.growth,
                             cfg.ca_reduction, true);
    hr_feedback_ = HRFeedback<T>(params, "hr_feedback", rng, cfg.channels, cfg.scale,
                                 T(cfg.feedback_lambda));
    enrich_ = LREnrich<T>(params, "enrich", rng, cfg.channels);
    iter_fuse_ = IterationFuse<T>(params, "iter_fuse", rng, cfg.channels);
  }

  /// Full pipeline: per iteration one LR registration + SR step, one HR
  /// disparity refinement + aggregation step, then (between iterations) the
  /// two feedback paths rebuild the LR features.
  StereoTrace<T> forward(const TensorT<T>& lr_l, const TensorT<T>& lr_r) const {
    check(lr_l.shape() == lr_r.shape(),
          "forward: stereo shapes differ, " + to_string(lr_l.shape()) + " vs " +
              to_string(lr_r.shape()));
    check(lr_l.shape().c == cfg.in_channels, "forward: expected " +
                                                 std::to_string(cfg.in_channels) +
                                                 " input channels, got " + to_string(lr_l.shape()));
    const int s = cfg.scale;
    StereoTrace<T> trace;
    TensorT<T> up_l = bicubic_upsample(lr_l, s);
    TensorT<T> up_r = bicubic_upsample(lr_r, s);
    TensorT<T> feat_l = extract_(lr_l);
    TensorT<T> feat_r = extract_(lr_r);

    for (int t = 0; t < cfg.iterations; ++t) {
      StereoIteration<T> it;

      TensorT<T> tb_l = transition_(feat_l);
      TensorT<T> tb_r = transition_(feat_r);
      PAMMaps<T> maps = pam_(tb_l, tb_r);
      it.map_to_left = maps.to_left;
      it.map_to_right = maps.to_right;
      it.valid_lr_left = maps.valid_left;
      it.valid_lr_right = maps.valid_right;

      TensorT<T> fused_l = ffm_(feat_l, attn_warp(maps.to_left, feat_r));
      TensorT<T> fused_r = ffm_(feat_r, attn_warp(maps.to_right, feat_l));
      TensorT<T> h_l = recon_(fused_l);
      TensorT<T> h_r = recon_(fused_r);
      it.sr0_l = add(up_l, to_image_(h_l));
      it.sr0_r = add(up_r, to_image_(h_r));

      it.disp_lr_left = disparity_from_attention(maps.to_left, true);
      it.disp_lr_right = disparity_from_attention(maps.to_right, false);
      TensorT<T> init_l = mul_scalar(bilinear_upsample(it.disp_lr_left, s), T(s));
      TensorT<T> init_r = mul_scalar(bilinear_upsample(it.disp_lr_right, s), T(s));
      it.disp_hr_left = refiner_(h_l, h_r, init_l, +1);
      it.disp_hr_right = refiner_(h_r, h_l, init_r, -1);

      WarpResult<T> hw_l = warp_by_disparity(h_r, it.disp_hr_left, +1);
      WarpResult<T> hw_r = warp_by_disparity(h_l, it.disp_hr_right, -1);
      it.oov_left = hw_l.mask;
      it.oov_right = hw_r.mask;
      TensorT<T> hhat_l = hr_agg_(h_l, hw_l.value);
      TensorT<T> hhat_r = hr_agg_(h_r, hw_r.value);
      it.sr1_l = add(up_l, to_image_(hhat_l));
      it.sr1_r = add(up_r, to_image_(hhat_r));

      it.cross_disp_left = warp_by_disparity(it.disp_hr_right, it.disp_hr_left, +1).value;
      it.cross_disp_right = warp_by_disparity(it.disp_hr_left, it.disp_hr_right, -1).value;
      it.valid_hr_left = add_scalar(
          neg(tanh_op(mul_scalar(abs_val(sub(it.disp_hr_left, it.cross_disp_left)), T(0.2)))),
          T(1));
      it.valid_hr_right = add_scalar(
          neg(tanh_op(mul_scalar(abs_val(sub(it.disp_hr_right, it.cross_disp_right)), T(0.2)))),
          T(1));

      trace.iterations.push_back(it);

      if (t + 1 < cfg.iterations) {
        TensorT<T> back_l = hr_feedback_(hhat_l);
        TensorT<T> back_r = hr_feedback_(hhat_r);
        TensorT<T> rich_l = enrich_(feat_l, feat_r, it.disp_hr_left, s, +1);
        TensorT<T> rich_r = enrich_(feat_r, feat_l, it.disp_hr_right, s, -1);
        feat_l = iter_fuse_(rich_l, back_l);
        feat_r = iter_fuse_(rich_r, back_r);
      }
    }
    return trace;
  }

  /// The plain one-step SR path written out as a straight line. forward()'s
  /// first iteration must reproduce these outputs bit for bit.
  std::pair<TensorT<T>, TensorT<T>> baseline_forward(const TensorT<T>& lr_l,
                                                     const TensorT<T>& lr_r) const {
    TensorT<T> up_l = bicubic_upsample(lr_l, cfg.scale);
    TensorT<T> up_r = bicubic_upsample(lr_r, cfg.scale);
    TensorT<T> feat_l = extract_(lr_l);
    TensorT<T> feat_r = extract_(lr_r);
    PAMMaps<T> maps = pam_(transition_(feat_l), transition_(feat_r));
    TensorT<T> fused_l = ffm_(feat_l, attn_warp(maps.to_left, feat_r));
    TensorT<T> fused_r = ffm_(feat_r, attn_warp(maps.to_right, feat_l));
    TensorT<T> sr_l = add(up_l, to_image_(recon_(fused_l)));
    TensorT<T> sr_r = add(up_r, to_image_(recon_(fused_r)));
    return {sr_l, sr_r};
  }

 private:
  FeatureExtractor<T> extract_;
  TransitionBlock<T> transition_;
  BiPAM<T> pam_;
  FusionBlock<T> ffm_;
  Reconstructor<T> recon_;
  Conv2dLayer<T> to_image_;
  DisparityRefiner<T> refiner_;
  FusionBlock<T> hr_agg_;
  HRFeedback<T> hr_feedback_;
  LREnrich<T> enrich_;
  IterationFuse<T> iter_fuse_;
};

}  // namespace ssr
