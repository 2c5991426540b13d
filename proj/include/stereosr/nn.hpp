#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stereosr/conv.hpp"
#include "stereosr/ops.hpp"
#include "stereosr/tensor.hpp"

namespace ssr {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// One standard normal draw from two engine words (Box-Muller, no hidden
/// distribution state, so serializing the engine captures everything).
template <class T = double>
T gaussian(std::mt19937_64& rng) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const double u1 = double(rng() >> 11) * (1.0 / 9007199254740992.0);
  const double u2 = double(rng() >> 11) * (1.0 / 9007199254740992.0);
  return T(std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(kTwoPi * u2));
}

/// Ordered name -> tensor registry. Insertion order is the canonical
/// parameter order for optimizers and checkpoints.
template <class T>
class ParamStore {
 public:
  TensorT<T>& add(const std::string& name, TensorT<T> t) {
    check(index_.find(name) == index_.end(), "ParamStore: duplicate parameter '" + name + "'");
    t.set_requires_grad(true);
    index_[name] = items_.size();
    items_.emplace_back(name, std::move(t));
    return items_.back().second;
  }

  TensorT<T>& get(const std::string& name) {
    auto it = index_.find(name);
    check(it != index_.end(), "ParamStore: unknown parameter '" + name + "'");
    return items_[it->second].second;
  }

  const TensorT<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    check(it != index_.end(), "ParamStore: unknown parameter '" + name + "'");
    return items_[it->second].second;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::pair<std::string, TensorT<T>>>& items() const { return items_; }

  std::size_t size() const { return items_.size(); }

  std::size_t total_scalars() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items_) n += t.numel();
    return n;
  }

  void clear_grads() const {
    for (const auto& [name, t] : items_) t.clear_grad();
  }

 private:
  std::vector<std::pair<std::string, TensorT<T>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

// Fan-in scaled normal init. Gain 1 keeps the empirical per-conv amplitude
// ratio near unity through this network's deep residual/dense cascades;
// sqrt(2) compounds to ~50x across a branch and the multiplicative feedback
// then squares it.
template <class T>
void kaiming_fill(TensorT<T>& w, int fan_in, std::mt19937_64& rng) {
  const T std = std::sqrt(T(1) / T(fan_in));
  for (T& v : w.values()) v = gaussian<T>(rng) * std;
}

}  // namespace detail

/// 2D convolution layer; weights live in the owning ParamStore under
/// "<prefix>.weight" / "<prefix>.bias". Kaiming fan-in init, zero biases.
template <class T>
struct Conv2dLayer {
  ConvSpec<T> spec;

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int in_ch,
              int out_ch, int k, int stride = 1, int pad = 0, PadMode mode = PadMode::kZero,
              bool bias = true) {
    TensorT<T> w = TensorT<T>::zeros({out_ch, in_ch, k, k});
    detail::kaiming_fill(w, in_ch * k * k, rng);
    spec.kernel = ps.add(prefix + ".weight", w);
    if (bias) spec.bias = ps.add(prefix + ".bias", TensorT<T>::zeros({1, out_ch, 1, 1}));
    spec.stride = stride;
    spec.pad = pad;
    spec.pad_mode = mode;
  }

  TensorT<T> operator()(const TensorT<T>& x) const { return conv2d(x, spec); }
};

/// Transposed counterpart; kernel layout (in_ch, out_ch, k, k) as read by
/// transposed_conv2d.
template <class T>
struct TransposedConv2dLayer {
  ConvSpec<T> spec;

  TransposedConv2dLayer() = default;
  TransposedConv2dLayer(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng,
                        int in_ch, int out_ch, int k, int stride = 1, int pad = 0,
                        bool bias = true) {
    TensorT<T> w = TensorT<T>::zeros({in_ch, out_ch, k, k});
    detail::kaiming_fill(w, in_ch * k * k, rng);
    spec.kernel = ps.add(prefix + ".weight", w);
    if (bias) spec.bias = ps.add(prefix + ".bias", TensorT<T>::zeros({1, out_ch, 1, 1}));
    spec.stride = stride;
    spec.pad = pad;
  }

  TensorT<T> operator()(const TensorT<T>& x) const { return transposed_conv2d(x, spec); }
};

template <class T>
struct PReLULayer {
  TensorT<T> alpha;

  PReLULayer() = default;
  PReLULayer(ParamStore<T>& ps, const std::string& prefix, int channels, T init = T(0.25)) {
    alpha = ps.add(prefix + ".alpha", TensorT<T>::full({1, channels, 1, 1}, init));
  }

  TensorT<T> operator()(const TensorT<T>& x) const { return prelu(x, alpha); }
};

/// Channel attention: global average pool, bottleneck 1x1 convs, sigmoid
/// gate multiplied back onto the input.
template <class T>
struct CALayer {
  Conv2dLayer<T> squeeze, expand;

  CALayer() = default;
  CALayer(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels,
          int reduction = 4) {
    const int mid = std::max(1, channels / reduction);
    squeeze = Conv2dLayer<T>(ps, prefix + ".squeeze", rng, channels, mid, 1);
    expand = Conv2dLayer<T>(ps, prefix + ".expand", rng, mid, channels, 1);
  }

  TensorT<T> operator()(const TensorT<T>& x) const {
    TensorT<T> gate = sigmoid(expand(relu(squeeze(global_avg_pool(x)))));
    return mul_channel_gate(x, gate);
  }
};

/// Residual dense block: growth convs with dense concatenation, 1x1 local
/// fusion back to the trunk width, local residual.
template <class T>
struct RDB {
  std::vector<Conv2dLayer<T>> convs;
  std::vector<PReLULayer<T>> acts;
  Conv2dLayer<T> fuse;

  RDB() = default;
  RDB(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels,
      int layers, int growth) {
    for (int i = 0; i < layers; ++i) {
      convs.emplace_back(ps, prefix + ".conv" + std::to_string(i), rng, channels + i * growth,
                         growth, 3, 1, 1);
      acts.emplace_back(ps, prefix + ".act" + std::to_string(i), growth);
    }
    fuse = Conv2dLayer<T>(ps, prefix + ".fuse", rng, channels + layers * growth, channels, 1);
  }

  TensorT<T> operator()(const TensorT<T>& x) const {
    std::vector<TensorT<T>> feats{x};
    TensorT<T> cur = x;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      feats.push_back(acts[i](convs[i](cur)));
      cur = concat_channels(feats);
    }
    return add(fuse(cur), x);
  }
};

/// Plain two-conv residual block with PReLU in the middle.
template <class T>
struct ResBlock {
  Conv2dLayer<T> c1, c2;
  PReLULayer<T> act;

  ResBlock() = default;
  ResBlock(ParamStore<T>& ps, const std::string& prefix, std::mt19937_64& rng, int channels) {
    c1 = Conv2dLayer<T>(ps, prefix + ".conv0", rng, channels, channels, 3, 1, 1);
    act = PReLULayer<T>(ps, prefix + ".act", channels);
    c2 = Conv2dLayer<T>(ps, prefix + ".conv1", rng, channels, channels, 3, 1, 1);
  }

  TensorT<T> operator()(const TensorT<T>& x) const { return add(c2(act(c1(x))), x); }
};

}  // namespace ssr
