#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "stereosr/tensor.hpp"

namespace ssr {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0;
  int samples = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0;
  bool deterministic = false;  // two plain forward passes agreed bit for bit
  bool ok(double tol) const { return deterministic && max_rel_err <= tol; }
};

template <class T>
struct FiniteDiffOptions {
  int samples_per_tensor = 6;
  T step_scale = T(1e-5);  // h = step_scale * max(1, |theta|)
  std::uint64_t seed = 0x5eed;
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

template <class T>
bool bit_equal(T a, T b) {
  return std::memcmp(&a, &b, sizeof(T)) == 0;
}

}  // namespace detail

/// Central-difference check of tape gradients for a set of named parameters.
/// `make_loss` must build the scalar loss from the current parameter values;
/// it runs under a tape for the analytic pass and without one for the
/// perturbed evaluations. A sampled subset of each tensor is probed; the
/// relative error uses max(|fd|, |analytic|, 1e-3) as denominator.
template <class T>
GradCheckReport finite_diff_check(const std::vector<std::pair<std::string, TensorT<T>>>& params,
                                  const std::function<TensorT<T>()>& make_loss,
                                  const FiniteDiffOptions<T>& opt = {}) {
  for (const auto& [name, p] : params) {
    check(p.defined(), "finite_diff_check: parameter '" + name + "' is undefined");
    check(p.requires_grad(), "finite_diff_check: parameter '" + name + "' has requires_grad off");
  }

  GradCheckReport report;
  const T base1 = make_loss().item();
  const T base2 = make_loss().item();
  report.deterministic = detail::bit_equal(base1, base2);

  for (const auto& [name, p] : params) p.clear_grad();
  std::vector<std::vector<T>> analytic;
  {
    TapeScope<T> scope;
    TensorT<T> loss = make_loss();
    scope.tape.backward(loss);
  }
  analytic.reserve(params.size());
  for (const auto& [name, p] : params) analytic.push_back(p.grad_or_zero());

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, p] = params[pi];
    const std::size_t n = p.numel();
    std::mt19937_64 rng(opt.seed ^ detail::fnv1a(name));
    std::vector<std::size_t> picks;
    if (n <= std::size_t(opt.samples_per_tensor)) {
      for (std::size_t i = 0; i < n; ++i) picks.push_back(i);
    } else {
      for (int i = 0; i < opt.samples_per_tensor; ++i) picks.push_back(rng() % n);
    }
    GradCheckEntry entry;
    entry.name = name;
    TensorT<T> handle = p;  // shares storage, grants mutation
    for (std::size_t idx : picks) {
      T& slot = handle.values()[idx];
      const T orig = slot;
      const T h = opt.step_scale * std::max(T(1), std::abs(orig));
      slot = orig + h;
      const T lp = make_loss().item();
      slot = orig - h;
      const T lm = make_loss().item();
      slot = orig;
      const double fd = (double(lp) - double(lm)) / (2.0 * double(h));
      const double an = double(analytic[pi][idx]);
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-3});
      const double rel = std::abs(fd - an) / denom;
      if (rel > entry.max_rel_err) entry.max_rel_err = rel;
      ++entry.samples;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ssr
