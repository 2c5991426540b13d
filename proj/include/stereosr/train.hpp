#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stereosr/gradcheck.hpp"
#include "stereosr/losses.hpp"
#include "stereosr/nn.hpp"

namespace ssr {

/// Step-decay schedule: the base rate is halved after every `halve_every`
/// completed epochs. Epochs are 1-based, so epochs 1..30 run at the base
/// rate and epoch 31 is the first halved one.
inline double scheduled_lr(double base, int epoch, int halve_every = 30) {
  check(epoch >= 1 && halve_every >= 1, "scheduled_lr: epoch and period must be positive");
  return base * std::pow(0.5, (epoch - 1) / halve_every);
}

/// Adam with bias correction. Moment buffers are kept in double regardless
/// of the parameter scalar type so checkpoints round-trip exactly.
template <class T>
class Adam {
 public:
  explicit Adam(ParamStore<T>& ps, double lr = 2e-4, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : ps_(&ps), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    m_.resize(ps.items().size());
    v_.resize(ps.items().size());
    for (std::size_t i = 0; i < ps.items().size(); ++i) {
      m_[i].assign(ps.items()[i].second.numel(), 0.0);
      v_[i].assign(ps.items()[i].second.numel(), 0.0);
    }
  }

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }
  std::uint64_t t() const { return t_; }

  /// One update from the gradients currently accumulated in the store.
  /// Parameters with no accumulated gradient see a zero gradient.
  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, double(t_));
    const double c2 = 1.0 - std::pow(b2_, double(t_));
    for (std::size_t i = 0; i < ps_->items().size(); ++i) {
      const TensorT<T>& p = ps_->items()[i].second;
      const std::vector<T>& g = p.impl()->grad;  // empty = zero
      std::vector<T>& val = p.impl()->value;
      for (std::size_t k = 0; k < val.size(); ++k) {
        const double gk = g.empty() ? 0.0 : double(g[k]);
        m_[i][k] = b1_ * m_[i][k] + (1.0 - b1_) * gk;
        v_[i][k] = b2_ * v_[i][k] + (1.0 - b2_) * gk * gk;
        const double mhat = m_[i][k] / c1;
        const double vhat = v_[i][k] / c2;
        val[k] = T(double(val[k]) - lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  std::vector<std::vector<double>>& moment1() { return m_; }
  std::vector<std::vector<double>>& moment2() { return v_; }
  const std::vector<std::vector<double>>& moment1() const { return m_; }
  const std::vector<std::vector<double>>& moment2() const { return v_; }
  void set_t(std::uint64_t t) { t_ = t; }

 private:
  ParamStore<T>* ps_;
  double lr_, b1_, b2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;  // parallel to store order
};

inline std::uint64_t config_fingerprint(const std::string& canonical) {
  return detail::fnv1a(canonical);
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}
inline void put_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(os, bits);
}
inline double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}
inline void put_str(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}
inline std::string get_str(std::istream& is) {
  const std::uint64_t n = get_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), std::streamsize(n));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

inline constexpr char kCkptMagic[8] = {'S', 'S', 'R', 'C', 'K', 'P', 'T', '\x01'};

}  // namespace detail

struct CheckpointInfo {
  std::uint64_t step = 0;
  std::uint64_t config_fingerprint = 0;
  double lr = 0.0;
};

/// Binary checkpoint: magic, version, step, lr, config fingerprint, RNG
/// engine state (text form), named parameter arrays as f64, then Adam
/// moments. Everything a resumed run needs to continue bit-identically.
template <class T>
void save_checkpoint(const std::string& path, const ParamStore<T>& ps, const Adam<T>& opt,
                     const std::mt19937_64& rng, std::uint64_t step,
                     std::uint64_t config_fp) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
  os.write(detail::kCkptMagic, 8);
  detail::put_u64(os, 1);  // version
  detail::put_u64(os, step);
  detail::put_f64(os, opt.lr());
  detail::put_u64(os, config_fp);
  std::ostringstream rs;
  rs << rng;
  detail::put_str(os, rs.str());
  detail::put_u64(os, ps.items().size());
  for (const auto& [name, p] : ps.items()) {
    detail::put_str(os, name);
    detail::put_u64(os, p.numel());
    for (const T v : p.values()) detail::put_f64(os, double(v));
  }
  detail::put_u64(os, opt.t());
  for (std::size_t i = 0; i < ps.items().size(); ++i) {
    for (double v : opt.moment1()[i]) detail::put_f64(os, v);
    for (double v : opt.moment2()[i]) detail::put_f64(os, v);
  }
  if (!os) throw std::runtime_error("save_checkpoint: write failure " + path);
}

/// Restores parameters (matched by name, counts must agree), optimizer
/// moments and the RNG engine. Optimizer/RNG pointers may be null when only
/// the weights are wanted (e.g. eval).
template <class T>
CheckpointInfo load_checkpoint(const std::string& path, const ParamStore<T>& ps, Adam<T>* opt,
                               std::mt19937_64* rng) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  if (detail::get_u64(is) != 1) throw std::runtime_error("load_checkpoint: unknown version");
  CheckpointInfo info;
  info.step = detail::get_u64(is);
  info.lr = detail::get_f64(is);
  info.config_fingerprint = detail::get_u64(is);
  const std::string rstate = detail::get_str(is);
  if (rng) {
    std::istringstream rs(rstate);
    rs >> *rng;
    if (rs.fail()) throw std::runtime_error("load_checkpoint: bad RNG state");
  }
  const std::uint64_t n = detail::get_u64(is);
  if (n != ps.items().size())
    throw std::runtime_error("load_checkpoint: parameter count mismatch");
  for (const auto& [name, p] : ps.items()) {
    const std::string got = detail::get_str(is);
    if (got != name)
      throw std::runtime_error("load_checkpoint: parameter order mismatch, expected '" + name +
                               "' found '" + got + "'");
    const std::uint64_t cnt = detail::get_u64(is);
    if (cnt != p.numel()) throw std::runtime_error("load_checkpoint: size mismatch for " + name);
    std::vector<T>& val = p.impl()->value;
    for (std::uint64_t k = 0; k < cnt; ++k) val[k] = T(detail::get_f64(is));
    p.clear_grad();
  }
  const std::uint64_t t = detail::get_u64(is);
  if (opt) {
    opt->set_t(t);
    opt->set_lr(info.lr);
    for (std::size_t i = 0; i < ps.items().size(); ++i) {
      for (double& v : opt->moment1()[i]) v = detail::get_f64(is);
      for (double& v : opt->moment2()[i]) v = detail::get_f64(is);
    }
  }
  return info;
}

struct TrainOptions {
  double base_lr = 2e-4;
  int halve_every_epochs = 30;
  int steps_per_epoch = 100;
  int log_every = 10;
  std::string log_path;  // empty disables the jsonl log
};

enum class StepStatus { kOk, kNonFinite };

/// Minimal deterministic training loop. The loss closure runs the forward
/// pass under the active tape; the trainer owns the optimizer, the schedule,
/// the data RNG and the step counter. A non-finite loss aborts the step
/// before any parameter update so the last good state survives.
template <class T>
class Trainer {
 public:
  using LossFn = std::function<LossResult<T>(std::mt19937_64&)>;

  Trainer(ParamStore<T>& ps, LossFn loss_fn, TrainOptions opt = {},
          std::uint64_t data_seed = 99)
      : ps_(&ps), loss_fn_(std::move(loss_fn)), opt_(opt),
        adam_(ps, opt.base_lr), rng_(data_seed) {}

  int epoch() const { return int(step_ / std::uint64_t(opt_.steps_per_epoch)) + 1; }
  std::uint64_t step_count() const { return step_; }
  double last_loss() const { return last_report_.total; }
  const LossReport& last_report() const { return last_report_; }
  Adam<T>& optimizer() { return adam_; }
  std::mt19937_64& rng() { return rng_; }

  StepStatus step() {
    adam_.set_lr(scheduled_lr(opt_.base_lr, epoch(), opt_.halve_every_epochs));
    ps_->clear_grads();
    TapeScope<T> scope;
    LossResult<T> res = loss_fn_(rng_);
    last_report_ = res.report;
    if (!std::isfinite(res.report.total)) return StepStatus::kNonFinite;
    scope.tape.backward(res.value);
    adam_.step();
    ++step_;
    if (!opt_.log_path.empty() && (step_ % std::uint64_t(opt_.log_every) == 0 || step_ == 1))
      append_log();
    return StepStatus::kOk;
  }

  /// Runs up to n steps; stops early on a non-finite loss and reports it.
  StepStatus run(int n) {
    for (int i = 0; i < n; ++i)
      if (step() == StepStatus::kNonFinite) return StepStatus::kNonFinite;
    return StepStatus::kOk;
  }

  void save(const std::string& path, std::uint64_t config_fp = 0) const {
    save_checkpoint(path, *ps_, adam_, rng_, step_, config_fp);
  }
  CheckpointInfo load(const std::string& path) {
    const CheckpointInfo info = load_checkpoint(path, *ps_, &adam_, &rng_);
    step_ = info.step;
    return info;
  }

 private:
  void append_log() {
    std::ofstream os(opt_.log_path, std::ios::app);
    if (!os) return;
    std::ostringstream line;
    line << std::setprecision(17);
    line << "{\"step\":" << step_ << ",\"epoch\":" << epoch() << ",\"lr\":" << adam_.lr()
         << ",\"loss\":" << last_report_.total << ",\"sr\":" << last_report_.sr
         << ",\"bipam\":" << last_report_.bipam << ",\"disp\":" << last_report_.disp << "}";
    os << line.str() << "\n";
  }

  ParamStore<T>* ps_;
  LossFn loss_fn_;
  TrainOptions opt_;
  Adam<T> adam_;
  std::mt19937_64 rng_;
  std::uint64_t step_ = 0;
  LossReport last_report_;
};

}  // namespace ssr
