#pragma once

#include <string>
#include <vector>

#include "stereosr/attention_ops.hpp"
#include "stereosr/network.hpp"
#include "stereosr/ops.hpp"
#include "stereosr/ssim.hpp"
#include "stereosr/warp.hpp"

namespace ssr {

template <class T>
struct LossOptions {
  T w_bipam = T(0.1);
  T w_disp = T(0.1);
  T alpha = T(0.85);        // SSIM share of the reconstruction term
  T w_disp_smooth = T(0.1);
  bool residual_manner = true;  // add the high-pass photometric term
};

struct LossReport {
  double total = 0, sr = 0, bipam = 0, disp = 0;
  double bipam_photo = 0, bipam_cycle = 0, bipam_smooth = 0, bipam_cons = 0;
  double disp_rc = 0, disp_cycle = 0, disp_cons = 0, disp_smooth = 0;
  std::vector<std::string> warnings;
};

template <class T>
struct LossResult {
  TensorT<T> value;  // scalar, on the tape
  LossReport report;
};

namespace detail {

template <class T>
TensorT<T> ones_like_plane(const Shape& s) {
  return TensorT<T>::full({s.n, 1, s.h, s.w}, T(1));
}

/// Weighted mean sum(w*x)/sum(w); an (almost) all-zero weight map yields a
/// constant 0 instead of dividing by nothing.
template <class T>
TensorT<T> masked_mean(const TensorT<T>& x, const TensorT<T>& w, LossReport& report,
                       const std::string& label) {
  TensorT<T> den = sum_all(w);
  if (den.item() < T(1e-8)) {
    report.warnings.push_back("empty valid mask: " + label);
    return TensorT<T>::zeros({1, 1, 1, 1});
  }
  return div(sum_all(mul(x, w)), den);
}

/// Mean over channels of |a - b|, kept per pixel: (B,1,H,W).
template <class T>
TensorT<T> l1_map(const TensorT<T>& a, const TensorT<T>& b) {
  return mul_scalar(channel_sum(abs_val(sub(a, b))), T(1) / T(a.shape().c));
}

template <class T>
TensorT<T> box_blur3(const TensorT<T>& x) {
  const int c = x.shape().c;
  TensorT<T> k = TensorT<T>::zeros({c, c, 3, 3});
  for (int i = 0; i < c; ++i)
    for (int y = 0; y < 3; ++y)
      for (int xx = 0; xx < 3; ++xx) k.at(i, i, y, xx) = T(1) / T(9);
  ConvSpec<T> spec{k, TensorT<T>{}, 1, 1, PadMode::kReflect};
  return conv2d(x, spec);
}

template <class T>
TensorT<T> highpass(const TensorT<T>& x) {
  return sub(x, box_blur3(x));
}

/// Identity attention map (B,H,W,W).
template <class T>
TensorT<T> identity_rows(int b, int h, int w) {
  TensorT<T> t = TensorT<T>::zeros({b, h, w, w});
  for (int n = 0; n < b; ++n)
    for (int y = 0; y < h; ++y)
      for (int i = 0; i < w; ++i) t.at(n, y, i, i) = T(1);
  return t;
}

/// Sum over the reference axis of an attention-shaped tensor: (B,H,W,W) ->
/// (B,1,H,W).
template <class T>
TensorT<T> row_sum(const TensorT<T>& m) {
  const Shape s = m.shape();
  return attn_warp(m, TensorT<T>::full({s.n, 1, s.c, s.h}, T(1)));
}

}  // namespace detail

/// Super-resolution fidelity: mean absolute error of every SR output
/// against ground truth, both steps, both views, every iteration.
template <class T>
TensorT<T> sr_loss(const StereoTrace<T>& trace, const TensorT<T>& hr_l, const TensorT<T>& hr_r) {
  TensorT<T> acc;
  auto mae = [](const TensorT<T>& a, const TensorT<T>& b) {
    return mean_all(abs_val(sub(a, b)));
  };
  for (const auto& it : trace.iterations) {
    TensorT<T> term = add(add(mae(it.sr0_l, hr_l), mae(it.sr0_r, hr_r)),
                          add(mae(it.sr1_l, hr_l), mae(it.sr1_r, hr_r)));
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

/// Joint objective. Component values (before weighting) are recorded in the
/// report; value = sr + w_bipam * bipam + w_disp * disp with
/// bipam = photo + cycle + smooth + cons and
/// disp = rc + cycle + cons + w_disp_smooth * smooth.
template <class T>
LossResult<T> total_loss(const StereoTrace<T>& trace, const TensorT<T>& hr_l,
                         const TensorT<T>& hr_r, const TensorT<T>& lr_l, const TensorT<T>& lr_r,
                         const LossOptions<T>& opt = {}) {
  using detail::l1_map;
  using detail::masked_mean;
  check(!trace.iterations.empty(), "total_loss: empty trace");
  LossResult<T> out;
  LossReport& rep = out.report;
  auto zero = [] { return TensorT<T>::zeros({1, 1, 1, 1}); };
  auto acc = [](TensorT<T>& a, const TensorT<T>& t) { a = a.defined() ? add(a, t) : t; };

  const Shape lrs = lr_l.shape();
  const int s_up = hr_l.shape().h / lrs.h;

  TensorT<T> sr = sr_loss(trace, hr_l, hr_r);

  TensorT<T> photo, cycle_lr, smooth_lr, cons_lr;
  TensorT<T> rc, cycle_hr, cons_hr, smooth_hr;
  TensorT<T> res_l, res_r;
  if (opt.residual_manner) {
    res_l = detail::highpass(lr_l);
    res_r = detail::highpass(lr_r);
  }
  TensorT<T> ident = detail::identity_rows<T>(lrs.n, lrs.h, lrs.w);

  for (std::size_t ti = 0; ti < trace.iterations.size(); ++ti) {
    const auto& it = trace.iterations[ti];
    const std::string tag = " t" + std::to_string(ti);

    // Photometric match through the attention maps.
    acc(photo, masked_mean(l1_map(lr_l, attn_warp(it.map_to_left, lr_r)), it.valid_lr_left, rep,
                           "photo left" + tag));
    acc(photo, masked_mean(l1_map(lr_r, attn_warp(it.map_to_right, lr_l)), it.valid_lr_right, rep,
                           "photo right" + tag));
    if (opt.residual_manner) {
      acc(cons_lr, masked_mean(l1_map(res_l, attn_warp(it.map_to_left, res_r)), it.valid_lr_left,
                               rep, "cons left" + tag));
      acc(cons_lr, masked_mean(l1_map(res_r, attn_warp(it.map_to_right, res_l)),
                               it.valid_lr_right, rep, "cons right" + tag));
    }

    // Round-trip attention should be the identity on confident rows.
    acc(cycle_lr, masked_mean(detail::row_sum(abs_val(sub(
                                  attn_compose(it.map_to_left, it.map_to_right), ident))),
                              it.valid_lr_left, rep, "cycle left" + tag));
    acc(cycle_lr, masked_mean(detail::row_sum(abs_val(sub(
                                  attn_compose(it.map_to_right, it.map_to_left), ident))),
                              it.valid_lr_right, rep, "cycle right" + tag));

    // Attention smoothness: neighboring rows and equal-disparity diagonals.
    for (const TensorT<T>* m : {&it.map_to_left, &it.map_to_right}) {
      const Shape ms = m->shape();
      acc(smooth_lr, mean_all(abs_val(sub(slice_channels(*m, 0, ms.c - 1),
                                          slice_channels(*m, 1, ms.c - 1)))));
      acc(smooth_lr, mean_all(abs_val(sub(crop_offset(*m, 0, 0, ms.h - 1, ms.w - 1),
                                          crop_offset(*m, 1, 1, ms.h - 1, ms.w - 1)))));
    }

    // Reconstruction through each disparity source, SSIM/L1 blend.
    auto rc_term = [&](const TensorT<T>& d, const TensorT<T>& own, const TensorT<T>& other,
                       const TensorT<T>& valid, int sign, const std::string& label) {
      WarpResult<T> wr = warp_by_disparity(other, d, sign);
      TensorT<T> w = mul(valid, wr.mask);
      TensorT<T> l1 = masked_mean(l1_map(own, wr.value), w, rep, label + " l1" + tag);
      TensorT<T> smap = mul_scalar(channel_sum(ssim_map(own, wr.value)), T(1) / T(own.shape().c));
      const Shape sh = smap.shape();
      TensorT<T> wc = crop_offset(w, 5, 5, sh.h, sh.w);
      TensorT<T> sv = masked_mean(smap, wc, rep, label + " ssim" + tag);
      TensorT<T> ssim_part = mul_scalar(add_scalar(neg(sv), T(1)), opt.alpha / T(2));
      return add(ssim_part, mul_scalar(l1, T(1) - opt.alpha));
    };
    TensorT<T> up_l = mul_scalar(bilinear_upsample(it.disp_lr_left, s_up), T(s_up));
    TensorT<T> up_r = mul_scalar(bilinear_upsample(it.disp_lr_right, s_up), T(s_up));
    acc(rc, rc_term(up_l, hr_l, hr_r, it.valid_hr_left, +1, "rc up-left"));
    acc(rc, rc_term(up_r, hr_r, hr_l, it.valid_hr_right, -1, "rc up-right"));
    acc(rc, rc_term(it.disp_hr_left, hr_l, hr_r, it.valid_hr_left, +1, "rc hr-left"));
    acc(rc, rc_term(it.disp_hr_right, hr_r, hr_l, it.valid_hr_right, -1, "rc hr-right"));

    // Disparity round trip: own -> other -> back.
    auto cycle_term = [&](const TensorT<T>& d_own, const TensorT<T>& cross_other,
                          const TensorT<T>& valid, int sign, const std::string& label) {
      WarpResult<T> back = warp_by_disparity(cross_other, d_own, sign);
      return masked_mean(abs_val(sub(d_own, back.value)), mul(valid, back.mask), rep,
                         label + tag);
    };
    acc(cycle_hr, cycle_term(it.disp_hr_left, it.cross_disp_right, it.valid_hr_left, +1,
                             "cycle hr left"));
    acc(cycle_hr, cycle_term(it.disp_hr_right, it.cross_disp_left, it.valid_hr_right, -1,
                             "cycle hr right"));

    // Left/right agreement of the disparities themselves.
    acc(cons_hr, masked_mean(abs_val(sub(it.disp_hr_left, it.cross_disp_left)),
                             mul(it.valid_hr_left, it.oov_left), rep, "cons hr left" + tag));
    acc(cons_hr, masked_mean(abs_val(sub(it.disp_hr_right, it.cross_disp_right)),
                             mul(it.valid_hr_right, it.oov_right), rep, "cons hr right" + tag));

    // Edge-aware smoothness of the HR disparity.
    auto smooth_term = [&](const TensorT<T>& d, const TensorT<T>& img, const TensorT<T>& valid,
                           const TensorT<T>& oov, const std::string& label) {
      TensorT<T> w = mul(valid, oov);
      const Shape ds = d.shape();
      const T inv_c = T(1) / T(img.shape().c);
      TensorT<T> ex = exp_op(neg(mul_scalar(channel_sum(abs_val(diff_x(img))), inv_c)));
      TensorT<T> ey = exp_op(neg(mul_scalar(channel_sum(abs_val(diff_y(img))), inv_c)));
      TensorT<T> tx = masked_mean(mul(abs_val(diff_x(d)), ex),
                                  crop_offset(w, 0, 0, ds.h, ds.w - 1), rep, label + " x" + tag);
      TensorT<T> ty = masked_mean(mul(abs_val(diff_y(d)), ey),
                                  crop_offset(w, 0, 0, ds.h - 1, ds.w), rep, label + " y" + tag);
      return add(tx, ty);
    };
    acc(smooth_hr, smooth_term(it.disp_hr_left, hr_l, it.valid_hr_left, it.oov_left,
                               "smooth left"));
    acc(smooth_hr, smooth_term(it.disp_hr_right, hr_r, it.valid_hr_right, it.oov_right,
                               "smooth right"));
  }

  if (!photo.defined()) photo = zero();
  if (!cycle_lr.defined()) cycle_lr = zero();
  if (!smooth_lr.defined()) smooth_lr = zero();
  if (!cons_lr.defined()) cons_lr = zero();
  TensorT<T> bipam = add(add(photo, cycle_lr), add(smooth_lr, cons_lr));
  TensorT<T> disp = add(add(rc, cycle_hr), add(cons_hr, mul_scalar(smooth_hr, opt.w_disp_smooth)));
  TensorT<T> total = add(sr, add(mul_scalar(bipam, opt.w_bipam), mul_scalar(disp, opt.w_disp)));

  rep.sr = double(sr.item());
  rep.bipam_photo = double(photo.item());
  rep.bipam_cycle = double(cycle_lr.item());
  rep.bipam_smooth = double(smooth_lr.item());
  rep.bipam_cons = double(cons_lr.item());
  rep.bipam = double(bipam.item());
  rep.disp_rc = double(rc.item());
  rep.disp_cycle = double(cycle_hr.item());
  rep.disp_cons = double(cons_hr.item());
  rep.disp_smooth = double(smooth_hr.item());
  rep.disp = double(disp.item());
  rep.total = double(total.item());
  out.value = total;
  return out;
}

}  // namespace ssr
