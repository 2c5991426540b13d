#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "stereosr/stereosr.hpp"

using namespace ssr;
using oracle::max_abs_diff;
using oracle::rand_tensor;

namespace {

StereoNetConfig tiny_config() {
  StereoNetConfig cfg;
  cfg.channels = 8;
  cfg.extract_blocks = 2;
  cfg.rdb_layers = 2;
  cfg.growth = 8;
  cfg.pam_stages = 2;
  cfg.iterations = 2;
  cfg.hypotheses = 4;
  cfg.delta_d = 4;
  cfg.spp_levels = {1, 2};
  cfg.seed = 77;
  return cfg;
}

// Param handles share storage, so a copied handle grants mutation.
void zero_prefixed(const ParamStore<double>& ps, const std::string& prefix) {
  for (const auto& [name, t] : ps.items())
    if (name.rfind(prefix, 0) == 0) {
      Tensor h = t;
      for (double& v : h.values()) v = 0;
    }
}

std::vector<std::pair<std::string, Tensor>> named_params(const ParamStore<double>& ps) {
  return {ps.items().begin(), ps.items().end()};
}

bool bit_equal_tensors(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.values().data(), b.values().data(), a.numel() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("one seed rebuilds the network bit for bit") {
  StereoNetConfig cfg = tiny_config();
  StereoNet<double> a(cfg), b(cfg);
  REQUIRE(a.params.size() == b.params.size());
  for (std::size_t i = 0; i < a.params.items().size(); ++i) {
    const auto& [an, at] = a.params.items()[i];
    const auto& [bn, bt] = b.params.items()[i];
    REQUIRE(an == bn);
    REQUIRE(bit_equal_tensors(at, bt));
  }

  cfg.seed = 78;
  StereoNet<double> c(cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params.items().size(); ++i)
    if (!bit_equal_tensors(a.params.items()[i].second, c.params.items()[i].second))
      any_diff = true;
  REQUIRE(any_diff);
}

TEST_CASE("default configuration keeps its parameter budget") {
  StereoNet<double> net(StereoNetConfig{});
  REQUIRE(net.params.size() == 211);
  REQUIRE(net.params.total_scalars() == 335603);
}

TEST_CASE("grid pooling matches the floor-partition oracle") {
  Tensor x = rand_tensor({2, 3, 5, 7}, 41);
  for (int g : {1, 2, 3, 5}) {
    Tensor got = grid_pool_expand(x, g);
    const Shape s = x.shape();
    Tensor want = Tensor::zeros(s);
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int gy = 0; gy < g; ++gy)
          for (int gx = 0; gx < g; ++gx) {
            const int y0 = gy * s.h / g, y1 = (gy + 1) * s.h / g;
            const int x0 = gx * s.w / g, x1 = (gx + 1) * s.w / g;
            double acc = 0;
            for (int y = y0; y < y1; ++y)
              for (int xx = x0; xx < x1; ++xx) acc += x.at(n, c, y, xx);
            const double mean = acc / ((y1 - y0) * (x1 - x0));
            for (int y = y0; y < y1; ++y)
              for (int xx = x0; xx < x1; ++xx) want.at(n, c, y, xx) = mean;
          }
    REQUIRE(max_abs_diff(got, want) < 1e-14);
  }

  Tensor p = rand_tensor({1, 2, 5, 6}, 42);
  p.set_requires_grad(true);
  Tensor w = rand_tensor({1, 2, 5, 6}, 43);
  auto loss = [&] { return sum_all(mul(grid_pool_expand(p, 2), w)); };
  REQUIRE(finite_diff_check<double>({{"p", p}}, loss).ok(1e-6));
}

TEST_CASE("transition block collapses to identity under surgical fuse weights") {
  ParamStore<double> ps;
  std::mt19937_64 rng(3);
  const int C = 4;
  TransitionBlock<double> tb(ps, "tb", rng, C, {1, 2});

  Tensor w = ps.get("tb.fuse.weight");  // (C, 3C, 1, 1)
  for (double& v : w.values()) v = 0;
  for (int oc = 0; oc < C; ++oc) w.at(oc, oc, 0, 0) = 1.0;
  Tensor b = ps.get("tb.fuse.bias");
  for (double& v : b.values()) v = 0;

  Tensor x = rand_tensor({2, C, 5, 6}, 44);
  REQUIRE(max_abs_diff(tb(x), x) == 0.0);
}

TEST_CASE("hourglass with zero weights passes any extent through unchanged") {
  ParamStore<double> ps;
  std::mt19937_64 rng(4);
  Hourglass<double> hg(ps, "hg", rng, 4);
  zero_prefixed(ps, "hg");
  for (Shape s : {Shape{2, 4, 5, 7}, Shape{1, 4, 8, 12}, Shape{1, 4, 6, 9}}) {
    Tensor x = rand_tensor(s, 45 + s.w);
    REQUIRE(max_abs_diff(hg(x), x) == 0.0);
  }
}

TEST_CASE("hypothesis stack spreads and clamps around the initial estimate") {
  ParamStore<double> ps;
  std::mt19937_64 rng(5);
  DisparityRefiner<double> rf(ps, "rf", rng, 4, 4);
  Tensor init = rand_tensor({1, 1, 3, 8}, 46, 0.0, 7.0);
  Tensor stack = rf.hypothesis_stack(init, 8);
  REQUIRE(stack.shape() == Shape{1, 4, 3, 8});
  for (int j = 0; j < 4; ++j) {
    const double offset = -2.0 + j * 1.0;
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 8; ++x) {
        const double want = std::min(std::max(init.at(0, 0, y, x) + offset, 0.0), 7.0);
        REQUIRE(stack.at(0, j, y, x) == Catch::Approx(want).epsilon(1e-14));
      }
  }
}

TEST_CASE("matching volume agrees with a naive per-hypothesis loop") {
  ParamStore<double> ps;
  std::mt19937_64 rng(6);
  const int P = 4, W = 12;
  DisparityRefiner<double> rf(ps, "rf", rng, P, 4);
  Tensor own = rand_tensor({2, 4, 8, W}, 47);
  Tensor other = rand_tensor({2, 4, 8, W}, 48);
  Tensor init = rand_tensor({2, 1, 8, W}, 49, 0.5, 10.5);

  for (int sign : {+1, -1}) {
    Tensor vol = rf.build_volume(own, other, init, sign);
    REQUIRE(vol.shape() == Shape{2, P, 8, W});
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
            REQUIRE(std::abs(vol.at(n, j, y, x) - acc / 4.0) < 1e-10);
          }
    }
  }
}

TEST_CASE("uniform correlation leaves the soft-argmax half a grid step low") {
  ParamStore<double> ps;
  std::mt19937_64 rng(7);
  const int P = 24, W = 32;
  DisparityRefiner<double> rf(ps, "rf", rng, P, 24);
  zero_prefixed(ps, "rf");  // aggregation becomes identity

  Tensor own = Tensor::full({1, 3, 6, W}, 0.7);
  Tensor other = Tensor::full({1, 3, 6, W}, 0.4);
  Tensor init = Tensor::full({1, 1, 6, W}, 14.0);
  Tensor out = rf(own, other, init, +1);
  // Hypotheses run 2..25; columns >= 25 sample in-range for every one, so
  // the correlation there is constant across hypotheses and the expectation
  // is the plain grid mean: init - delta_d / (2 P).
  for (int y = 0; y < 6; ++y)
    for (int x = 25; x < W; ++x)
      REQUIRE(out.at(0, 0, y, x) == Catch::Approx(13.5).epsilon(1e-12));
}

TEST_CASE("delta attention maps recover integer shifts exactly") {
  const int B = 1, H = 3, W = 6, d = 2;

  SECTION("identity map means zero disparity and an identity warp") {
    Tensor m = Tensor::zeros({B, H, W, W});
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) m.at(0, y, x, x) = 1.0;
    Tensor f = rand_tensor({B, 4, H, W}, 50);
    REQUIRE(max_abs_diff(attn_warp(m, f), f) == 0.0);
    Tensor dl = disparity_from_attention(m, true);
    Tensor dr = disparity_from_attention(m, false);
    for (double v : dl.values()) REQUIRE(v == 0.0);
    for (double v : dr.values()) REQUIRE(v == 0.0);
  }

  SECTION("left rows peaked at x - d read back d") {
    Tensor m = Tensor::zeros({B, H, W, W});
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) m.at(0, y, x, std::max(x - d, 0)) = 1.0;
    Tensor disp = disparity_from_attention(m, true);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) REQUIRE(disp.at(0, 0, y, x) == double(std::min(x, d)));
  }

  SECTION("right rows peaked at x + d read back d") {
    Tensor m = Tensor::zeros({B, H, W, W});
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) m.at(0, y, x, std::min(x + d, W - 1)) = 1.0;
    Tensor disp = disparity_from_attention(m, false);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        REQUIRE(disp.at(0, 0, y, x) == double(std::min(W - 1 - x, d)));
  }
}

TEST_CASE("cascaded attention rows normalize and masks stay binary") {
  ParamStore<double> ps;
  std::mt19937_64 rng(8);
  BiPAM<double> pam(ps, "pam", rng, 4, 2, 2.0);
  Tensor fl = rand_tensor({1, 4, 4, 6}, 51);
  Tensor fr = rand_tensor({1, 4, 4, 6}, 52);
  PAMMaps<double> maps = pam(fl, fr);

  REQUIRE(maps.to_left.shape() == Shape{1, 4, 6, 6});
  REQUIRE(maps.to_right.shape() == Shape{1, 4, 6, 6});
  for (const Tensor* m : {&maps.to_left, &maps.to_right})
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 6; ++x) {
        double row = 0;
        for (int k = 0; k < 6; ++k) row += m->at(0, y, x, k);
        REQUIRE(row == Catch::Approx(1.0).epsilon(1e-12));
      }

  REQUIRE(maps.valid_left.shape() == Shape{1, 1, 4, 6});
  for (double v : maps.valid_left.values()) REQUIRE((v == 0.0 || v == 1.0));
  for (double v : maps.valid_right.values()) REQUIRE((v == 0.0 || v == 1.0));
  REQUIRE_FALSE(maps.valid_left.requires_grad());
}

TEST_CASE("confidence mask thresholds row peaks at scale over width") {
  ParamStore<double> ps;
  std::mt19937_64 rng(9);
  BiPAM<double> pam(ps, "pam", rng, 2, 1, 2.0);  // threshold 2 / W

  Tensor m = Tensor::zeros({1, 2, 2, 5});  // threshold 0.4
  // row (y=0,x=0): sharp peak; row (y=0,x=1): flat 0.2; rows at y=1: border case
  m.at(0, 0, 0, 2) = 0.5;
  for (int k = 0; k < 5; ++k) m.at(0, 0, 1, k) = 0.2;
  m.at(0, 1, 0, 0) = 0.4;   // boundary counts as confident
  m.at(0, 1, 1, 4) = 0.39;  // just below
  Tensor mask = pam.confidence_mask(m);
  REQUIRE(mask.shape() == Shape{1, 1, 2, 2});
  REQUIRE(mask.at(0, 0, 0, 0) == 1.0);
  REQUIRE(mask.at(0, 0, 0, 1) == 0.0);
  REQUIRE(mask.at(0, 0, 1, 0) == 1.0);
  REQUIRE(mask.at(0, 0, 1, 1) == 0.0);

  pam.valid_threshold_scale = 0.0;  // disabled: everything counts
  Tensor all = pam.confidence_mask(m);
  for (double v : all.values()) REQUIRE(v == 1.0);
}

TEST_CASE("feature extractor and transition gradients pass finite differences") {
  ParamStore<double> ps;
  std::mt19937_64 rng(10);
  FeatureExtractor<double> fx(ps, "fx", rng, 2, 4, 2, 2, 4);
  TransitionBlock<double> tb(ps, "tb", rng, 4, {1, 2});
  Tensor x = rand_tensor({1, 2, 5, 6}, 53);
  x.set_requires_grad(true);
  Tensor w = rand_tensor({1, 4, 5, 6}, 54);
  auto params = named_params(ps);
  params.emplace_back("input", x);
  auto loss = [&] { return sum_all(mul(tb(fx(x)), w)); };
  GradCheckReport rep = finite_diff_check<double>(params, loss);
  REQUIRE(rep.deterministic);
  REQUIRE(rep.max_rel_err < 1e-4);
}

TEST_CASE("parallax attention gradients pass finite differences") {
  ParamStore<double> ps;
  std::mt19937_64 rng(11);
  BiPAM<double> pam(ps, "pam", rng, 3, 2, 2.0);
  Tensor fl = rand_tensor({1, 3, 3, 6}, 55);
  Tensor fr = rand_tensor({1, 3, 3, 6}, 56);
  fl.set_requires_grad(true);
  fr.set_requires_grad(true);
  Tensor wl = rand_tensor({1, 3, 3, 6}, 57);
  Tensor wr = rand_tensor({1, 3, 3, 6}, 58);
  auto params = named_params(ps);
  params.emplace_back("feat_l", fl);
  params.emplace_back("feat_r", fr);
  auto loss = [&] {
    PAMMaps<double> m = pam(fl, fr);
    return add(sum_all(mul(attn_warp(m.to_left, fr), wl)),
               sum_all(mul(attn_warp(m.to_right, fl), wr)));
  };
  GradCheckReport rep = finite_diff_check<double>(params, loss);
  REQUIRE(rep.deterministic);
  REQUIRE(rep.max_rel_err < 1e-4);
}

TEST_CASE("disparity refiner gradients pass finite differences") {
  ParamStore<double> ps;
  std::mt19937_64 rng(12);
  DisparityRefiner<double> rf(ps, "rf", rng, 4, 4);
  // Zero biases park the zero-padded aggregation region exactly on the
  // activation kink, where central differences are undefined; nudge them off.
  std::mt19937_64 brng(123);
  for (const auto& [name, t] : ps.items())
    if (name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0) {
      Tensor h = t;
      std::uniform_real_distribution<double> u(-0.3, 0.3);
      for (double& v : h.values()) v = u(brng);
    }
  Tensor own = rand_tensor({1, 3, 6, 10}, 59);
  Tensor other = rand_tensor({1, 3, 6, 10}, 60);
  Tensor init = rand_tensor({1, 1, 6, 10}, 61, 3.2, 5.8);
  own.set_requires_grad(true);
  other.set_requires_grad(true);
  init.set_requires_grad(true);
  Tensor wa = rand_tensor({1, 1, 6, 10}, 62);
  Tensor wb = rand_tensor({1, 1, 6, 10}, 63);
  auto params = named_params(ps);
  params.emplace_back("own", own);
  params.emplace_back("other", other);
  params.emplace_back("init", init);
  auto loss = [&] {
    return add(sum_all(mul(rf(own, other, init, +1), wa)),
               sum_all(mul(rf(other, own, init, -1), wb)));
  };
  GradCheckReport rep = finite_diff_check<double>(params, loss);
  REQUIRE(rep.deterministic);
  REQUIRE(rep.max_rel_err < 1e-4);
}

TEST_CASE("feedback stages pass finite differences") {
  ParamStore<double> ps;
  std::mt19937_64 rng(13);
  HRFeedback<double> hf(ps, "hf", rng, 4, 2, 1.0);
  LREnrich<double> en(ps, "en", rng, 4);
  IterationFuse<double> fu(ps, "fu", rng, 4);
  Tensor hr = rand_tensor({1, 4, 8, 12}, 64);
  Tensor own = rand_tensor({1, 4, 4, 6}, 65);
  Tensor other = rand_tensor({1, 4, 4, 6}, 66);
  Tensor disp = rand_tensor({1, 1, 8, 12}, 67, 1.1, 4.7);
  hr.set_requires_grad(true);
  own.set_requires_grad(true);
  other.set_requires_grad(true);
  disp.set_requires_grad(true);
  Tensor w = rand_tensor({1, 4, 4, 6}, 68);
  auto params = named_params(ps);
  params.emplace_back("hr", hr);
  params.emplace_back("own", own);
  params.emplace_back("other", other);
  params.emplace_back("disp", disp);
  auto loss = [&] {
    Tensor mixed = fu(en(own, other, disp, 2, +1), hf(hr));
    return sum_all(mul(mixed, w));
  };
  GradCheckReport rep = finite_diff_check<double>(params, loss);
  REQUIRE(rep.deterministic);
  REQUIRE(rep.max_rel_err < 1e-4);
}

TEST_CASE("fusion and reconstruction gradients pass finite differences") {
  ParamStore<double> ps;
  std::mt19937_64 rng(14);
  FusionBlock<double> fb(ps, "fb", rng, 4, 2, 4, 2, true);
  Reconstructor<double> rc(ps, "rc", rng, 4, 1, 2, 4, 2);
  Tensor own = rand_tensor({1, 4, 3, 4}, 69);
  Tensor warped = rand_tensor({1, 4, 3, 4}, 70);
  own.set_requires_grad(true);
  warped.set_requires_grad(true);
  Tensor w = rand_tensor({1, 4, 6, 8}, 71);
  auto params = named_params(ps);
  params.emplace_back("own", own);
  params.emplace_back("warped", warped);
  auto loss = [&] { return sum_all(mul(rc(fb(own, warped)), w)); };
  GradCheckReport rep = finite_diff_check<double>(params, loss);
  REQUIRE(rep.deterministic);
  REQUIRE(rep.max_rel_err < 1e-4);
}

TEST_CASE("feedback projection halves extents per scale step and keeps its formula") {
  ParamStore<double> ps;
  std::mt19937_64 rng(15);
  HRFeedback<double> h2(ps, "h2", rng, 4, 2, 0.8);
  HRFeedback<double> h4(ps, "h4", rng, 4, 4, 1.0);

  Tensor x2 = rand_tensor({1, 4, 8, 12}, 72);
  Tensor out2 = h2(x2);
  REQUIRE(out2.shape() == Shape{1, 4, 4, 6});

  Tensor x4 = rand_tensor({1, 4, 8, 8}, 73);
  REQUIRE(h4(x4).shape() == Shape{1, 4, 2, 2});

  // Recompute through the members: boost = lb + lambda * lb * relu(smooth - lb).
  Tensor lb = h2.acts[0](h2.downs[0](x2));
  Tensor smooth = h2.unpool(avg_pool(lb, 2));
  Tensor want = add(lb, mul_scalar(mul(lb, relu(sub(smooth, lb))), 0.8));
  REQUIRE(max_abs_diff(out2, want) == 0.0);
}

TEST_CASE("enrichment with a constant integer map shifts the other view") {
  ParamStore<double> ps;
  std::mt19937_64 rng(16);
  const int C = 3, H = 4, W = 8, s = 2, d0 = 2;
  LREnrich<double> en(ps, "en", rng, C);
  zero_prefixed(ps, "en.res");  // residual block becomes identity
  Tensor fw = ps.get("en.fuse.weight");  // (C, 2C, 1, 1): keep only the warped half
  for (double& v : fw.values()) v = 0;
  for (int oc = 0; oc < C; ++oc) fw.at(oc, C + oc, 0, 0) = 1.0;

  Tensor own = rand_tensor({1, C, H, W}, 74);
  Tensor other = rand_tensor({1, C, H, W}, 75);
  Tensor disp_hr = Tensor::full({1, 1, s * H, s * W}, double(s * d0));
  Tensor out = en(own, other, disp_hr, s, +1);
  REQUIRE(out.shape() == Shape{1, C, H, W});
  // Every phase slice carries the same LR shift d0, so the sum is s^2 copies.
  for (int c = 0; c < C; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = d0; x < W; ++x)
        REQUIRE(out.at(0, c, y, x) ==
                Catch::Approx(s * s * other.at(0, c, y, x - d0)).epsilon(1e-12));
}

TEST_CASE("single-pass network equals the straight-line baseline bit for bit") {
  StereoNetConfig cfg = tiny_config();
  cfg.iterations = 1;
  StereoNet<double> net(cfg);
  Tensor lr_l = rand_tensor({1, 3, 6, 10}, 76, 0.0, 1.0);
  Tensor lr_r = rand_tensor({1, 3, 6, 10}, 77, 0.0, 1.0);
  StereoTrace<double> trace = net.forward(lr_l, lr_r);
  auto [bl, br] = net.baseline_forward(lr_l, lr_r);
  REQUIRE(trace.iterations.size() == 1);
  REQUIRE(bit_equal_tensors(trace.iterations[0].sr0_l, bl));
  REQUIRE(bit_equal_tensors(trace.iterations[0].sr0_r, br));
}

TEST_CASE("two-pass trace honours every shape and range contract") {
  StereoNetConfig cfg = tiny_config();
  StereoNet<double> net(cfg);
  const int B = 1, H = 6, W = 10, s = cfg.scale;
  Tensor lr_l = rand_tensor({B, 3, H, W}, 78, 0.0, 1.0);
  Tensor lr_r = rand_tensor({B, 3, H, W}, 79, 0.0, 1.0);
  StereoTrace<double> trace = net.forward(lr_l, lr_r);
  REQUIRE(trace.iterations.size() == 2);

  for (const StereoIteration<double>& it : trace.iterations) {
    REQUIRE(it.sr0_l.shape() == Shape{B, 3, s * H, s * W});
    REQUIRE(it.sr1_l.shape() == Shape{B, 3, s * H, s * W});
    REQUIRE(it.map_to_left.shape() == Shape{B, H, W, W});
    REQUIRE(it.disp_lr_left.shape() == Shape{B, 1, H, W});
    REQUIRE(it.disp_hr_left.shape() == Shape{B, 1, s * H, s * W});
    REQUIRE(it.valid_hr_left.shape() == Shape{B, 1, s * H, s * W});
    for (const Tensor* t :
         {&it.sr0_l, &it.sr0_r, &it.sr1_l, &it.sr1_r, &it.disp_hr_left, &it.disp_hr_right})
      REQUIRE(t->all_finite());
    for (double v : it.disp_lr_left.values()) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= double(W - 1));
    }
    for (double v : it.disp_hr_left.values()) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= double(s * W - 1));
    }
    for (double v : it.oov_left.values()) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
    for (double v : it.valid_hr_left.values()) {
      REQUIRE(v > 0.0);
      REQUIRE(v <= 1.0);
    }
  }

  // The feedback hand-off must actually change the second pass.
  REQUIRE(max_abs_diff(trace.iterations[0].sr0_l, trace.iterations[1].sr0_l) > 0.0);
}

TEST_CASE("scale-4 configuration runs end to end") {
  StereoNetConfig cfg = tiny_config();
  cfg.scale = 4;
  StereoNet<double> net(cfg);
  Tensor lr_l = rand_tensor({1, 3, 4, 6}, 80, 0.0, 1.0);
  Tensor lr_r = rand_tensor({1, 3, 4, 6}, 81, 0.0, 1.0);
  StereoTrace<double> trace = net.forward(lr_l, lr_r);
  REQUIRE(trace.iterations.size() == 2);
  REQUIRE(trace.iterations[1].sr1_l.shape() == Shape{1, 3, 16, 24});
  REQUIRE(trace.iterations[1].sr1_l.all_finite());
}
