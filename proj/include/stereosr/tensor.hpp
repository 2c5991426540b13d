#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ssr {

/// Dense 4-d shape, (batch, channels, height, width) row-major.
/// Attention maps reuse the same container with layout (batch, row, x, k).
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return std::size_t(n) * std::size_t(c) * std::size_t(h) * std::size_t(w);
  }
  bool operator==(const Shape&) const = default;
};

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << "(" << s.n << "," << s.c << "," << s.h << "," << s.w << ")";
  return os.str();
}

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

template <class T>
struct TensorImpl {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty means zero
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
  }
};

/// Shared-storage dense tensor. Immutable by convention once an operation has
/// produced it; leaf tensors (parameters, inputs) may be rewritten between
/// forward passes.
template <class T>
class TensorT {
 public:
  TensorT() = default;

  static TensorT zeros(Shape s) {
    TensorT t;
    t.impl_ = std::make_shared<TensorImpl<T>>();
    t.impl_->shape = s;
    t.impl_->value.assign(s.numel(), T(0));
    return t;
  }
  static TensorT full(Shape s, T v) {
    TensorT t = zeros(s);
    for (auto& x : t.impl_->value) x = v;
    return t;
  }
  static TensorT from(Shape s, std::vector<T> data) {
    check(data.size() == s.numel(), "tensor data length " + std::to_string(data.size()) +
                                        " does not match shape " + to_string(s));
    TensorT t;
    t.impl_ = std::make_shared<TensorImpl<T>>();
    t.impl_->shape = s;
    t.impl_->value = std::move(data);
    return t;
  }
  static TensorT scalar(T v) { return full({1, 1, 1, 1}, v); }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->shape.numel(); }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  TensorT& set_requires_grad(bool b) {
    impl_->requires_grad = b;
    return *this;
  }

  std::vector<T>& values() & { return impl_->value; }
  const std::vector<T>& values() const& { return impl_->value; }
  // A temporary handle may be the storage's last owner; forbid keeping the
  // reference (e.g. range-for over values() of an unnamed result).
  std::vector<T>& values() && = delete;

  std::size_t index(int n, int c, int h, int w) const {
    const Shape& s = impl_->shape;
    return ((std::size_t(n) * s.c + c) * s.h + h) * s.w + w;
  }
  T& at(int n, int c, int h, int w) { return impl_->value[index(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return impl_->value[index(n, c, h, w)]; }

  T item() const {
    check(numel() == 1, "item() on non-scalar tensor of shape " + to_string(shape()));
    return impl_->value[0];
  }

  /// Gradient values; zeros if nothing has been accumulated.
  std::vector<T> grad_or_zero() const {
    if (impl_->grad.empty()) return std::vector<T>(numel(), T(0));
    return impl_->grad;
  }
  bool has_grad() const { return !impl_->grad.empty(); }
  void clear_grad() const { impl_->grad.clear(); }

  /// Same values, cut loose from any tape history.
  TensorT detach() const {
    TensorT t = TensorT::from(shape(), impl_->value);
    return t;
  }
  TensorT clone() const { return detach().set_requires_grad(requires_grad()); }

  std::shared_ptr<TensorImpl<T>> impl() const { return impl_; }

  bool all_finite() const {
    for (T v : impl_->value)
      if (!std::isfinite(double(v))) return false;
    return true;
  }

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

/// Define-by-run gradient tape. Operations append a backward closure as they
/// execute; creation order is a topological order, so replaying the closures
/// in reverse propagates every adjoint exactly once. Confined to one thread.
template <class T>
class TapeT {
 public:
  static TapeT*& current() {
    thread_local TapeT* cur = nullptr;
    return cur;
  }

  void record(std::function<void()> back) { nodes_.push_back(std::move(back)); }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and accumulates adjoints into every
  /// requires_grad tensor reachable from the loss. Grad accumulation is
  /// additive; tensors consumed k times receive the sum of k contributions.
  void backward(const TensorT<T>& loss) {
    check(loss.numel() == 1,
          "backward() expects a scalar loss, got shape " + to_string(loss.shape()));
    loss.impl()->grad.assign(1, T(1));
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> nodes_;
};

/// RAII activation of a tape for the current thread. The default constructor
/// owns a fresh tape; the other form activates a caller-owned one.
template <class T>
class TapeScope {
  std::unique_ptr<TapeT<T>> owned_;  // declared first: `tape` may bind to it

 public:
  TapeScope() : owned_(std::make_unique<TapeT<T>>()), tape(*owned_), prev_(TapeT<T>::current()) {
    TapeT<T>::current() = &tape;
  }
  explicit TapeScope(TapeT<T>& t) : tape(t), prev_(TapeT<T>::current()) {
    TapeT<T>::current() = &tape;
  }
  ~TapeScope() { TapeT<T>::current() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

  TapeT<T>& tape;

 private:
  TapeT<T>* prev_;
};

using Tensor = TensorT<double>;
using Tape = TapeT<double>;

}  // namespace ssr
