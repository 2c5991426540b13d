// Acceptance harness. Ten independent checks cover the gradient machinery,
// attention and mask identities, oracle agreement for the matching stack,
// metric closed forms, a short overfit training run with the two properties
// it must exhibit (coarse-to-fine disparity, second-step improvement),
// training determinism, and single-pass equivalence. One PASS/FAIL line is
// printed per criterion; the exit code is the number of failures.

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "stereosr/stereosr.hpp"

using namespace ssr;
using oracle::max_abs_diff;
using oracle::rand_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.values().data(), b.values().data(),
                     a.numel() * sizeof(double)) == 0;
}

// ---------------------------------------------------------------------------
// Criterion 1: finite differences. A sweep over every differentiable
// operation, then the full two-iteration network on an 8x12 input. Probe
// inputs are frozen: activations, clamps and bilinear sampling are only
// piecewise smooth, and central differences are meaningless astride a kink.

struct OpErr {
  std::string name;
  double err = 0;
  bool det = false;
};

template <class F>
void check_op(std::vector<OpErr>& out, const std::string& name,
              std::vector<std::pair<std::string, Tensor>> params, F loss) {
  for (auto& [n, p] : params) p.set_requires_grad(true);
  GradCheckReport r = finite_diff_check<double>(params, loss);
  out.push_back({name, r.max_rel_err, r.deterministic});
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<OpErr> ops;

  {
    Tensor a = rand_tensor({1, 3, 5, 6}, 301, 0.2, 1.2);
    Tensor b = rand_tensor({1, 3, 5, 6}, 302, 0.3, 1.3);
    check_op(ops, "arithmetic", {{"a", a}, {"b", b}}, [&] {
      Tensor q = div(add(mul(a, b), sub(a, b)), add_scalar(mul(b, b), 0.5));
      return mean_all(add(q, neg(mul_scalar(a, 0.25))));
    });
  }
  {
    Tensor x = rand_tensor({1, 2, 6, 7}, 303);
    check_op(ops, "pointwise", {{"x", x}}, [&] {
      return mean_all(mul(sigmoid(x), add(tanh_op(x), exp_op(mul_scalar(x, 0.3)))));
    });
  }
  {
    Tensor x = rand_tensor({1, 2, 5, 6}, 304);
    Tensor al = rand_tensor({1, 2, 1, 1}, 305, 0.1, 0.4);
    check_op(ops, "kinked activations", {{"x", x}, {"alpha", al}}, [&] {
      Tensor s = add(add(abs_val(x), relu(x)), add(clamp(x, -0.6, 0.6), prelu(x, al)));
      return mean_all(s);
    });
  }
  {
    Tensor x = rand_tensor({2, 3, 4, 5}, 306);
    check_op(ops, "reductions", {{"x", x}}, [&] {
      return add(add(sum_all(channel_sum(x)), sum_all(global_avg_pool(mul(x, x)))),
                 mean_all(x));
    });
  }
  {
    Tensor x1 = rand_tensor({1, 2, 4, 5}, 307);
    Tensor x2 = rand_tensor({1, 3, 4, 5}, 308);
    check_op(ops, "channel ops", {{"x1", x1}, {"x2", x2}}, [&] {
      Tensor y = concat_channels(std::vector<Tensor>{x1, x2});
      Tensor z = slice_channels(y, 1, 3);
      Tensor g = sigmoid(global_avg_pool(y));
      return add(add(mean_all(mul(z, z)), mean_all(mul_channel_gate(y, g))),
                 mean_all(channel_slice(y, 2)));
    });
  }
  {
    Tensor x = rand_tensor({1, 2, 5, 6}, 309);
    check_op(ops, "pad/crop/diff", {{"x", x}}, [&] {
      Tensor p = pad_bottom_right(x, 2, 3);
      Tensor c = crop_offset(p, 1, 1, 4, 5);
      Tensor dx = diff_x(c), dy = diff_y(c);
      return add(add(mean_all(mul(dx, dx)), mean_all(mul(dy, dy))),
                 mean_all(crop_top_left(p, 5, 6)));
    });
  }
  {
    Tensor q = rand_tensor({1, 8, 3, 4}, 310);
    check_op(ops, "shuffle round trip", {{"q", q}}, [&] {
      Tensor u = pixel_shuffle(q, 2);
      Tensor v = space_to_depth(u, 2);
      return add(mean_all(mul(u, u)), mean_all(mul(v, q)));
    });
  }
  {
    Tensor x = rand_tensor({1, 2, 5, 5}, 311);
    Tensor k = rand_tensor({3, 2, 3, 3}, 312);
    Tensor b = rand_tensor({1, 3, 1, 1}, 313);
    Tensor k2 = rand_tensor({2, 2, 3, 3}, 314);
    check_op(ops, "conv2d", {{"x", x}, {"k", k}, {"b", b}, {"k2", k2}}, [&] {
      Tensor y = conv2d(x, ConvSpec<double>{k, b, 1, 1, PadMode::kReflect});
      Tensor z = conv2d(x, ConvSpec<double>{k2, Tensor(), 2, 1, PadMode::kZero});
      return add(mean_all(mul(y, y)), mean_all(mul(z, z)));
    });
  }
  {
    Tensor x = rand_tensor({1, 3, 3, 4}, 315);
    Tensor k = rand_tensor({3, 2, 4, 4}, 316);
    Tensor b = rand_tensor({1, 2, 1, 1}, 317);
    check_op(ops, "transposed conv", {{"x", x}, {"k", k}, {"b", b}}, [&] {
      Tensor y = transposed_conv2d(x, ConvSpec<double>{k, b, 2, 1, PadMode::kZero});
      return mean_all(mul(y, y));
    });
  }
  {
    Tensor x = rand_tensor({1, 3, 5, 7}, 318);
    check_op(ops, "avg_pool", {{"x", x}}, [&] {
      return add(mean_all(mul(avg_pool(x, 2), avg_pool(x, 2))), mean_all(avg_pool(x, 3)));
    });
  }
  {
    Tensor x = rand_tensor({1, 2, 4, 5}, 319);
    check_op(ops, "upsampling", {{"x", x}}, [&] {
      Tensor u = bilinear_upsample(x, 2);
      Tensor v = bicubic_upsample(x, 2);
      return add(mean_all(mul(u, u)), mean_all(mul(v, v)));
    });
  }
  {
    Tensor q = rand_tensor({1, 8, 3, 6}, 320);
    Tensor k = rand_tensor({1, 8, 3, 6}, 321);
    Tensor f = rand_tensor({1, 5, 3, 6}, 322);
    check_op(ops, "attention chain", {{"q", q}, {"k", k}, {"f", f}}, [&] {
      Tensor m = softmax_lastdim(epipolar_qk(q, k));
      Tensor c = attn_compose(m, m);
      Tensor w = attn_warp(c, f);
      return add(mean_all(mul(w, w)), mean_all(mul(softmax_axis(f, 1), f)));
    });
  }
  {
    // Fractional parts of the sample positions stay in [0.3, 0.7]: bilinear
    // warps have gradient kinks at integer source columns.
    Tensor f = rand_tensor({1, 4, 6, 10}, 323);
    Tensor d = rand_tensor({1, 1, 6, 10}, 324, 1.3, 1.7);
    check_op(ops, "disparity warp", {{"f", f}, {"d", d}}, [&] {
      WarpResult<double> a = warp_by_disparity(f, d, +1);
      WarpResult<double> b = warp_by_disparity(f, d, -1);
      return add(mean_all(mul(a.value, a.value)), mean_all(mul(b.value, b.value)));
    });
  }
  {
    Tensor a = rand_tensor({1, 1, 12, 14}, 325, 0.0, 1.0);
    Tensor b = rand_tensor({1, 1, 12, 14}, 326, 0.0, 1.0);
    check_op(ops, "ssim map", {{"a", a}, {"b", b}}, [&] {
      return mean_all(ssim_map(a, b));
    });
  }

  double worst_op = 0;
  std::string worst_op_name = "none";
  bool det = true;
  for (const OpErr& e : ops) {
    det = det && e.det;
    if (e.err > worst_op) {
      worst_op = e.err;
      worst_op_name = e.name;
    }
  }

  // Full network, two feedback iterations, 8x12 input. The confidence
  // binarization is disabled for the check: a hard threshold is a step
  // function, which finite differences cannot cross meaningfully. The
  // hypothesis window is sized to the frame (width must cover 2*delta_d/scale;
  // the training default of 24 exceeds the whole 24-px frame here, pinning
  // most hypotheses against the clamp and the warp's out-of-view cutoff).
  StereoNetConfig cfg;
  cfg.valid_threshold_scale = 0;
  cfg.hypotheses = 8;
  cfg.delta_d = 8;
  StereoNet<double> net(cfg);
  Tensor lr_l = rand_tensor({1, 3, 8, 12}, 401, 0.0, 1.0);
  Tensor lr_r = rand_tensor({1, 3, 8, 12}, 402, 0.0, 1.0);
  Tensor hr_l = rand_tensor({1, 3, 16, 24}, 403, 0.0, 1.0);
  Tensor hr_r = rand_tensor({1, 3, 16, 24}, 404, 0.0, 1.0);
  auto net_loss = [&] {
    StereoTrace<double> trace = net.forward(lr_l, lr_r);
    return total_loss(trace, hr_l, hr_r, lr_l, lr_r, LossOptions<double>{}).value;
  };
  std::vector<std::pair<std::string, Tensor>> params(net.params.items().begin(),
                                                     net.params.items().end());
  FiniteDiffOptions<double> fopt;
  fopt.samples_per_tensor = 2;
  // Smaller step for the composite check: the warps make the loss piecewise
  // smooth, and the narrower stencil keeps probes inside one smooth cell.
  fopt.step_scale = 1e-6;
  GradCheckReport netrep = finite_diff_check<double>(params, net_loss, fopt);
  std::string worst_net = "-";
  for (const GradCheckEntry& e : netrep.entries)
    if (e.max_rel_err == netrep.max_rel_err) worst_net = e.name;

  const double wall = seconds_since(t0);
  const bool pass = det && netrep.deterministic && worst_op < 1e-4 &&
                    netrep.max_rel_err < 1e-4 && wall < 300.0;
  return {pass, fmt("ops max %.2e (%s), network max %.2e (%s) over %zu tensors, %.0f s",
                    worst_op, worst_op_name.c_str(), netrep.max_rel_err,
                    worst_net.c_str(), netrep.entries.size(), wall)};
}

// ---------------------------------------------------------------------------
// Criterion 2: attention identities.

Outcome criterion2() {
  // Row-stochasticity of the cascaded bidirectional maps.
  ParamStore<double> ps;
  std::mt19937_64 rng(8);
  BiPAM<double> pam(ps, "pam", rng, 4, 2, 2.0);
  Tensor fl = rand_tensor({1, 4, 8, 12}, 411);
  Tensor fr = rand_tensor({1, 4, 8, 12}, 412);
  PAMMaps<double> maps = pam(fl, fr);
  double worst_row = 0;
  for (const Tensor* m : {&maps.to_left, &maps.to_right}) {
    const Shape s = m->shape();
    for (int y = 0; y < s.c; ++y)
      for (int x = 0; x < s.h; ++x) {
        double row = 0;
        for (int k = 0; k < s.w; ++k) row += m->at(0, y, x, k);
        worst_row = std::max(worst_row, std::abs(row - 1.0));
      }
  }

  // Identity attention must reproduce the features bit for bit.
  const int H = 6, W = 10, C = 4;
  Tensor eye = Tensor::zeros({1, H, W, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) eye.at(0, y, x, x) = 1.0;
  Tensor f = rand_tensor({1, C, H, W}, 413);
  const double warp_err = max_abs_diff(attn_warp(eye, f), f);

  // A map peaked at x - d regresses exactly d wherever the shift fits.
  const int d = 3;
  Tensor shifted = Tensor::zeros({1, H, W, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) shifted.at(0, y, x, std::max(x - d, 0)) = 1.0;
  Tensor disp = disparity_from_attention(shifted, true);
  bool shift_exact = true;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      shift_exact = shift_exact && disp.at(0, 0, y, x) == double(std::min(x, d));

  const bool pass = worst_row <= 1e-6 && warp_err <= 1e-12 && shift_exact;
  return {pass, fmt("row sum dev %.2e, identity warp dev %.2e, shift-%d recovery %s",
                    worst_row, warp_err, d, shift_exact ? "exact" : "BROKEN")};
}

// ---------------------------------------------------------------------------
// Criterion 3: left-right consistency mask values.

Outcome criterion3() {
  auto mask = [](const Tensor& own, const Tensor& cross) {
    return add_scalar(neg(tanh_op(mul_scalar(abs_val(sub(own, cross)), 0.2))), 1.0);
  };
  Tensor a = rand_tensor({1, 1, 6, 9}, 421, 0.0, 12.0);
  Tensor v1 = mask(a, a);
  double dev1 = 0;
  for (double v : v1.values()) dev1 = std::max(dev1, std::abs(v - 1.0));

  Tensor b = add_scalar(a, 5.0);
  Tensor v5 = mask(a, b);
  const double expect = 1.0 - std::tanh(1.0);
  double dev5 = 0;
  for (double v : v5.values()) dev5 = std::max(dev5, std::abs(v - expect));

  const bool pass = dev1 == 0.0 && dev5 <= 1e-6;
  return {pass, fmt("consistent dev %.1e, 5-px value %.7f vs %.7f (dev %.1e)", dev1,
                    double(v5.values()[0]), expect, dev5)};
}

// ---------------------------------------------------------------------------
// Criterion 4: naive-loop oracles for the matching stack.

Outcome criterion4() {
  double worst = 0;

  {  // partial matching volume, both warp directions
    ParamStore<double> ps;
    std::mt19937_64 rng(6);
    const int P = 4, W = 12;
    DisparityRefiner<double> rf(ps, "rf", rng, P, 4);
    Tensor own = rand_tensor({2, 4, 8, W}, 431);
    Tensor other = rand_tensor({2, 4, 8, W}, 432);
    Tensor init = rand_tensor({2, 1, 8, W}, 433, 0.5, 10.5);
    for (int sign : {+1, -1}) {
      Tensor vol = rf.build_volume(own, other, init, sign);
      for (int j = 0; j < P; ++j) {
        Tensor dj = Tensor::zeros({2, 1, 8, W});
        for (int n = 0; n < 2; ++n)
          for (int y = 0; y < 8; ++y)
            for (int x = 0; x < W; ++x)
              dj.at(n, 0, y, x) =
                  std::min(std::max(init.at(n, 0, y, x) - 2.0 + j, 0.0), double(W - 1));
        Tensor warped = oracle::warp_disp_ref(other, dj, sign);
        for (int n = 0; n < 2; ++n)
          for (int y = 0; y < 8; ++y)
            for (int x = 0; x < W; ++x) {
              double acc = 0;
              for (int c = 0; c < 4; ++c) acc += own.at(n, c, y, x) * warped.at(n, c, y, x);
              worst = std::max(worst, std::abs(vol.at(n, j, y, x) - acc / 4.0));
            }
      }
    }
  }
  {  // warp
    Tensor f = rand_tensor({2, 4, 8, 12}, 434);
    Tensor d = rand_tensor({2, 1, 8, 12}, 435, 0.0, 10.0);
    for (int sign : {+1, -1})
      worst = std::max(worst, max_abs_diff(warp_by_disparity(f, d, sign).value,
                                           oracle::warp_disp_ref(f, d, sign)));
  }
  {  // pooling
    Tensor x = rand_tensor({2, 4, 8, 12}, 436);
    for (int w : {2, 3})
      worst = std::max(worst, max_abs_diff(avg_pool(x, w), oracle::avg_pool_ref(x, w)));
  }
  {  // convolution
    Tensor x = rand_tensor({2, 4, 8, 12}, 437);
    Tensor k = rand_tensor({4, 4, 3, 3}, 438);
    Tensor b = rand_tensor({1, 4, 1, 1}, 439);
    for (bool reflect : {false, true}) {
      ConvSpec<double> spec{k, b, 1, 1, reflect ? PadMode::kReflect : PadMode::kZero};
      worst = std::max(worst, max_abs_diff(conv2d(x, spec),
                                           oracle::conv2d_ref(x, k, b, 1, 1, reflect)));
    }
  }

  return {worst <= 1e-10, fmt("worst deviation %.2e", worst)};
}

// ---------------------------------------------------------------------------
// Criterion 5: metric closed forms and cross-agreement.

Outcome criterion5() {
  const double off = 16.0 / 255.0;
  Tensor a = rand_tensor({1, 3, 12, 40}, 441, 0.0, 1.0 - off);
  const double got = psnr(a, add_scalar(a, off));
  const double want = 20.0 * std::log10(255.0 / 16.0);
  const double psnr_dev = std::abs(got - want);

  Tensor s = rand_tensor({1, 3, 12, 16}, 442, 0.0, 1.0);
  const bool ssim_one = ssim_metric(s, s) == 1.0;

  Tensor est = rand_tensor({1, 1, 6, 8}, 443, 0.0, 9.0);
  Tensor gt = rand_tensor({1, 1, 6, 8}, 444, 0.0, 9.0);
  Tensor noc = Tensor::zeros({1, 1, 6, 8});
  std::mt19937_64 rng(445);
  for (double& v : noc.values()) v = double(rng() & 1);
  EpeScore sc = epe(est, gt, noc);
  double sum_all = 0, sum_noc = 0;
  std::size_t n_noc = 0;
  for (std::size_t i = 0; i < est.numel(); ++i) {
    const double e = std::abs(est.values()[i] - gt.values()[i]);
    sum_all += e;
    if (noc.values()[i] > 0.5) {
      sum_noc += e;
      ++n_noc;
    }
  }
  const bool epe_exact = sc.all == sum_all / double(est.numel()) &&
                         sc.noc == sum_noc / double(n_noc) && sc.noc_count == n_noc;

  Tensor u = rand_tensor({1, 3, 16, 18}, 446, 0.0, 1.0);
  Tensor v = rand_tensor({1, 3, 16, 18}, 447, 0.0, 1.0);
  const double loss_side = mean_all(mul_scalar(channel_sum(ssim_map(u, v)), 1.0 / 3.0)).item();
  const double metric_side = ssim_metric(u, v);
  const double ssim_gap = std::abs(loss_side - metric_side);

  const bool pass = psnr_dev <= 1e-4 && ssim_one && epe_exact && ssim_gap <= 1e-12;
  return {pass, fmt("psnr dev %.2e, ssim(a,a)=1 %s, epe %s, loss/metric ssim gap %.2e",
                    psnr_dev, ssim_one ? "yes" : "NO", epe_exact ? "exact" : "BROKEN",
                    ssim_gap)};
}

// ---------------------------------------------------------------------------
// Criteria 6-8 share one overfit run: desk-sized network, four fixed
// band-limited patches, plain Adam at 2e-4.

Tensor cat_batch(const std::vector<const Tensor*>& parts) {
  const Shape s = parts.front()->shape();
  Tensor out = Tensor::zeros({int(parts.size()), s.c, s.h, s.w});
  double* dst = out.values().data();
  for (const Tensor* p : parts) {
    std::copy(p->values().begin(), p->values().end(), dst);
    dst += p->numel();
  }
  return out;
}

struct OverfitRun {
  std::unique_ptr<StereoNet<double>> net;
  Tensor bl, br, bhl, bhr;
  bool ran = false, mono_ok = false, reached = false, finite = true;
  int stop_step = 0;
  double wall = 0, psnr0 = 0, psnr1 = 0;
};

OverfitRun run_overfit() {
  OverfitRun r;
  StereoNetConfig cfg;  // 16 channels, T=2, s=2
  r.net = std::make_unique<StereoNet<double>>(cfg);

  std::vector<StereoSample<double>> data;
  for (int i = 0; i < 4; ++i) {
    SceneSpec spec;
    spec.hr_height = 16;
    spec.hr_width = 48;
    spec.scale = cfg.scale;
    spec.bg_disparity = 2.0 * (i + 1);
    spec.texture_blur_passes = 4;
    spec.seed = 11 + std::uint64_t(i);
    data.push_back(make_scene(spec));
  }
  std::vector<const Tensor*> ll, rr, hl, hr;
  for (const auto& s : data) {
    ll.push_back(&s.lr_left);
    rr.push_back(&s.lr_right);
    hl.push_back(&s.hr_left);
    hr.push_back(&s.hr_right);
  }
  r.bl = cat_batch(ll);
  r.br = cat_batch(rr);
  r.bhl = cat_batch(hl);
  r.bhr = cat_batch(hr);

  LossReport last{};
  auto loss_fn = [&](std::mt19937_64&) {
    StereoTrace<double> trace = r.net->forward(r.bl, r.br);
    LossResult<double> res = total_loss(trace, r.bhl, r.bhr, r.bl, r.br, LossOptions<double>{});
    last = res.report;
    return res;
  };
  Trainer<double> trainer(r.net->params, loss_fn, TrainOptions{});

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> first50;
  auto measure = [&] {
    StereoTrace<double> tr = r.net->forward(r.bl, r.br);
    const auto& it = tr.iterations.back();
    r.psnr0 = psnr_pair(it.sr0_l, r.bhl, it.sr0_r, r.bhr).average();
    r.psnr1 = psnr_pair(it.sr1_l, r.bhl, it.sr1_r, r.bhr).average();
  };
  for (int s = 1; s <= 2000; ++s) {
    if (trainer.step() == StepStatus::kNonFinite) {
      r.finite = false;
      break;
    }
    r.stop_step = s;
    if (s <= 50) first50.push_back(last.total);
    if (s % 20 == 0)
      std::fprintf(stderr, "  overfit step %4d loss %.5f (%.0f s)\n", s, last.total,
                   seconds_since(t0));
    if (s >= 100 && s % 10 == 0) {
      measure();
      if (r.psnr1 >= 40.0) {
        r.reached = true;
        break;
      }
    }
    if (seconds_since(t0) > 1740.0) break;  // leave room for the final measure
  }
  r.wall = seconds_since(t0);
  if (!r.reached && r.finite) measure();

  r.mono_ok = first50.size() == 50;
  for (std::size_t i = 1; i < first50.size(); ++i)
    r.mono_ok = r.mono_ok && first50[i] < first50[i - 1];
  r.ran = true;
  return r;
}

Outcome criterion6(const OverfitRun& r) {
  const bool pass = r.finite && r.mono_ok && r.reached && r.stop_step <= 2000 &&
                    r.wall < 1800.0;
  return {pass,
          fmt("train PSNR %.2f dB at step %d (%.0f s), first-50 monotone %s%s", r.psnr1,
              r.stop_step, r.wall, r.mono_ok ? "yes" : "NO",
              r.finite ? "" : ", loss went non-finite")};
}

Outcome criterion7(const OverfitRun& r) {
  if (!r.ran || !r.net) return {false, "overfit run unavailable"};
  double sum_hr = 0, sum_up = 0;
  const int scale = 2;
  for (int i = 0; i < 3; ++i) {
    SceneSpec spec;
    spec.hr_height = 16;
    spec.hr_width = 48;
    spec.scale = scale;
    spec.bg_disparity = 3.0 + 2.0 * i;  // 3, 5, 7: inside the trained range
    spec.texture_blur_passes = 4;
    spec.seed = 311 + std::uint64_t(i);
    StereoSample<double> s = make_scene(spec);
    StereoTrace<double> tr = r.net->forward(s.lr_left, s.lr_right);
    const auto& it = tr.iterations.back();
    Tensor up = mul_scalar(bilinear_upsample(it.disp_lr_left, scale), double(scale));
    sum_hr += epe(it.disp_hr_left, s.disp_left, s.noc_left).noc;
    sum_up += epe(up, s.disp_left, s.noc_left).noc;
  }
  const double mean_hr = sum_hr / 3.0, mean_up = sum_up / 3.0;
  return {mean_hr <= mean_up,
          fmt("held-out EPE: refined %.4f vs upsampled %.4f", mean_hr, mean_up)};
}

Outcome criterion8(const OverfitRun& r) {
  if (!r.ran) return {false, "overfit run unavailable"};
  return {r.psnr1 >= r.psnr0,
          fmt("final iteration PSNR: step 2 %.2f dB vs step 1 %.2f dB", r.psnr1, r.psnr0)};
}

// ---------------------------------------------------------------------------
// Criterion 9: training determinism, checked at the checkpoint byte level.

StereoNetConfig small_config() {
  StereoNetConfig cfg;
  cfg.channels = 8;
  cfg.extract_blocks = 2;
  cfg.rdb_layers = 2;
  cfg.growth = 8;
  cfg.pam_stages = 1;
  cfg.iterations = 2;
  cfg.hypotheses = 4;
  cfg.delta_d = 4;
  cfg.spp_levels = {1, 2};
  cfg.seed = 5150;
  return cfg;
}

std::string train_small_and_save(const std::string& path) {
  StereoNetConfig cfg = small_config();
  StereoNet<double> net(cfg);
  std::vector<StereoSample<double>> data;
  for (int i = 0; i < 2; ++i) {
    SceneSpec spec;
    spec.hr_height = 12;
    spec.hr_width = 24;
    spec.scale = 2;
    spec.bg_disparity = 2.0 + i;
    spec.seed = 21 + std::uint64_t(i);
    data.push_back(make_scene(spec));
  }
  Tensor bl = cat_batch({&data[0].lr_left, &data[1].lr_left});
  Tensor br = cat_batch({&data[0].lr_right, &data[1].lr_right});
  Tensor bhl = cat_batch({&data[0].hr_left, &data[1].hr_left});
  Tensor bhr = cat_batch({&data[0].hr_right, &data[1].hr_right});
  auto loss_fn = [&](std::mt19937_64&) {
    StereoTrace<double> trace = net.forward(bl, br);
    return total_loss(trace, bhl, bhr, bl, br, LossOptions<double>{});
  };
  Trainer<double> trainer(net.params, loss_fn, TrainOptions{});
  if (trainer.run(100) != StepStatus::kOk) return "non-finite loss";
  trainer.save(path, 0xACCE97);
  return "";
}

Outcome criterion9(const std::string& dir) {
  const std::string pa = dir + "/det_a.bin", pb = dir + "/det_b.bin";
  std::string err = train_small_and_save(pa);
  if (err.empty()) err = train_small_and_save(pb);
  if (!err.empty()) return {false, err};
  auto slurp = [](const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  };
  const std::string a = slurp(pa), b = slurp(pb);
  const bool pass = !a.empty() && a == b;
  return {pass, fmt("step-100 checkpoints %s (%zu bytes)",
                    pass ? "bit-identical" : "DIFFER", a.size())};
}

// ---------------------------------------------------------------------------
// Criterion 10: one iteration with feedback off equals the straight-line
// baseline bit for bit.

Outcome criterion10() {
  StereoNetConfig cfg = small_config();
  cfg.iterations = 1;
  StereoNet<double> net(cfg);
  Tensor lr_l = rand_tensor({1, 3, 6, 10}, 76, 0.0, 1.0);
  Tensor lr_r = rand_tensor({1, 3, 6, 10}, 77, 0.0, 1.0);
  StereoTrace<double> trace = net.forward(lr_l, lr_r);
  auto [bl, br] = net.baseline_forward(lr_l, lr_r);
  const bool pass = trace.iterations.size() == 1 &&
                    bit_equal(trace.iterations[0].sr0_l, bl) &&
                    bit_equal(trace.iterations[0].sr0_r, br);
  return {pass, pass ? "single-pass outputs bit-identical to the baseline"
                     : "outputs DIFFER from the baseline"};
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string dir =
      (std::filesystem::temp_directory_path() / "stereosr_acceptance").string();
  std::filesystem::create_directories(dir);

  int failures = 0;
  auto emit = [&](int n, const Outcome& o) {
    std::printf("criterion %2d: %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  emit(1, criterion1());
  emit(2, criterion2());
  emit(3, criterion3());
  emit(4, criterion4());
  emit(5, criterion5());
  OverfitRun run = run_overfit();
  emit(6, criterion6(run));
  emit(7, criterion7(run));
  emit(8, criterion8(run));
  emit(9, criterion9(dir));
  emit(10, criterion10());

  std::printf("%d/10 criteria passed in %.0f s\n", 10 - failures, seconds_since(t0));
  return failures;
}
