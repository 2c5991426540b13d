#pragma once

#include <string>
#include <vector>

#include "stereosr/conv.hpp"
#include "stereosr/nn.hpp"
#include "stereosr/ops.hpp"
#include "stereosr/tensor.hpp"

namespace ssr {

/// Average over a g x g grid partition, written back at full resolution
/// (every pixel takes its cell's mean). Cell edges follow the floor split
/// floor(i*H/g) .. floor((i+1)*H/g).
template <class T>
TensorT<T> grid_pool_expand(const TensorT<T>& x, int g) {
  const Shape s = x.shape();
  check(g >= 1 && g <= s.h && g <= s.w,
        "grid_pool_expand: grid " + std::to_string(g) + " does not fit " + to_string(s));
  TensorT<T> out = TensorT<T>::zeros(s);
  auto edge = [](int i, int extent, int g2) { return i * extent / g2; };
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int gy = 0; gy < g; ++gy)
        for (int gx = 0; gx < g; ++gx) {
          const int y0 = edge(gy, s.h, g), y1 = edge(gy + 1, s.h, g);
          const int x0 = edge(gx, s.w, g), x1 = edge(gx + 1, s.w, g);
          T acc = 0;
          for (int y = y0; y < y1; ++y)
            for (int xx = x0; xx < x1; ++xx) acc += x.at(n, c, y, xx);
          const T mean = acc / T((y1 - y0) * (x1 - x0));
          for (int y = y0; y < y1; ++y)
            for (int xx = x0; xx < x1; ++xx) out.at(n, c, y, xx) = mean;
        }
  if (detail::recording<T>({&x})) {
    out.set_requires_grad(true);
    TapeT<T>::current()->record([xi = x.impl(), oi = out.impl(), s, g] {
      if (oi->grad.empty()) return;
      xi->ensure_grad();
      auto edge = [](int i, int extent, int g2) { return i * extent / g2; };
      for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c)
          for (int gy = 0; gy < g; ++gy)
            for (int gx = 0; gx < g; ++gx) {
              const int y0 = edge(gy, s.h, g), y1 = edge(gy + 1, s.h, g);
              const int x0 = edge(gx, s.w, g), x1 = edge(gx + 1, s.w, g);
              T acc = 0;
              for (int y = y0; y < y1; ++y)
                for (int xx = x0; xx < x1; ++xx)
                  acc += oi->grad[((std::size_t(n) * s.c + c) * s.h + y) * s.w + xx];
              const T share = acc / T((y1 - y0) * (x1 - x0));
              for (int y = y0; y < y1; ++y)
                for (int xx = x0; xx < x1; ++xx)
                  xi->grad[((std::size_t(n) * s.c + c) * s.h + y) * s.w + xx] += share;
            }
    });
  }
  return out;
}

/// Shallow conv + a chain of residual dense blocks whose outputs are
/// concatenated and fused back to the trunk width.
template <class T>
struct FeatureExtractor {
  Conv2dLayer<T> shallow;
  PReLULayer<T> act;
  std::vector<RDB<T>> blocks;
  Conv2dLayer<T> fuse;

  FeatureExtractor() = default;
  FeatureExtractor(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int in_ch,
                   int channels, int num_blocks, int rdb_layers, int growth) {
    shallow = Conv2dLayer<T>(ps, prefix + ".shallow", rng, in_ch, channels, 3, 1, 1);
    act = PReLULayer<T>(ps, prefix + ".act", channels);
    for (int i = 0; i < num_blocks; ++i)
      blocks.emplace_back(ps, prefix + ".rdb" + std::to_string(i), rng, channels, rdb_layers,
                          growth);
    fuse = Conv2dLayer<T>(ps, prefix + ".fuse", rng, channels * num_blocks, channels, 1);
  }

  TensorT<T> operator()(const TensorT<T>& x) const {
    TensorT<T> cur = act(shallow(x));
    std::vector<TensorT<T>> outs;
    for (const auto& b : blocks) {
      cur = b(cur);
      outs.push_back(cur);
    }
    return fuse(concat_channels(outs));
  }
};

/// Pyramid-pooled context: grid means at several scales concatenated with
/// the input, then a linear 1x1 projection (deliberately no activation).
template <class T>
struct TransitionBlock {
  std::vector<int> levels;
  Conv2dLayer<T> fuse;

  TransitionBlock() = default;
  TransitionBlock(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels,
                  std::vector<int> spp_levels)
      : levels(std::move(spp_levels)) {
    fuse = Conv2dLayer<T>(ps, prefix + ".fuse", rng, channels * (int(levels.size()) + 1), channels,
                          1);
  }

  TensorT<T> operator()(const TensorT<T>& x) const {
    std::vector<TensorT<T>> parts{x};
    for (int g : levels) parts.push_back(grid_pool_expand(x, g));
    return fuse(concat_channels(parts));
  }
};

/// Residual cross-view aggregation: work on (warped - own), optionally gated
/// by a learned similarity map, then RDB + channel attention over own + res.
template <class T>
struct FusionBlock {
  bool gated = false;
  Conv2dLayer<T> gate_own, gate_warp;
  RDB<T> rdb;
  CALayer<T> ca;

  FusionBlock() = default;
  FusionBlock(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels,
              int rdb_layers, int growth, int ca_reduction, bool with_gate)
      : gated(with_gate) {
    if (gated) {
      gate_own = Conv2dLayer<T>(ps, prefix + ".gate_own", rng, channels, channels, 3, 1, 1);
      gate_warp = Conv2dLayer<T>(ps, prefix + ".gate_warp", rng, channels, channels, 3, 1, 1);
    }
    rdb = RDB<T>(ps, prefix + ".rdb", rng, channels, rdb_layers, growth);
    ca = CALayer<T>(ps, prefix + ".ca", rng, channels, ca_reduction);
  }

  TensorT<T> operator()(const TensorT<T>& own, const TensorT<T>& warped) const {
    TensorT<T> res = sub(warped, own);
    if (gated) {
      TensorT<T> att = sigmoid(mul_scalar(mul(gate_own(own), gate_warp(warped)), T(5)));
      res = mul(res, att);
    }
    return ca(add(rdb(res), own));
  }
};

/// Extraction-shaped trunk followed by a sub-pixel stage producing features
/// at s times the resolution.
template <class T>
struct Reconstructor {
  FeatureExtractor<T> core;
  Conv2dLayer<T> up;
  int scale = 2;

  Reconstructor() = default;
  Reconstructor(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels,
                int num_blocks, int rdb_layers, int growth, int s)
      : scale(s) {
    core = FeatureExtractor<T>(ps, prefix + ".core", rng, channels, channels, num_blocks,
                               rdb_layers, growth);
    up = Conv2dLayer<T>(ps, prefix + ".up", rng, channels, channels * s * s, 3, 1, 1);
  }

  TensorT<T> operator()(const TensorT<T>& x) const {
    return pixel_shuffle(up(core(x)), scale);
  }
};

}  // namespace ssr
