#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ssc/core.hpp"
#include "ssc/layers.hpp"

namespace ssc {

/// One flat parameter block under optimization. Blocks are identified by
/// name, which must stay stable across steps.
struct ParamRef {
  std::string name;
  double* value = nullptr;
  const double* grad = nullptr;
  std::size_t count = 0;
};

inline ParamRef to_param_ref(const ParamView& v) {
  return {v.name, v.value->data(), v.grad->data(), v.value->numel()};
}

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    require(lr > 0.0, "OptimizerConfig: lr must be > 0");
    require(beta1 >= 0.0 && beta1 < 1.0, "OptimizerConfig: beta1 in [0,1)");
    require(beta2 >= 0.0 && beta2 < 1.0, "OptimizerConfig: beta2 in [0,1)");
    require(eps > 0.0, "OptimizerConfig: eps must be > 0");
  }
};

inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd") return OptimizerKind::kSgd;
  fail("unknown optimizer '", s, "' (expected adam or sgd)");
}

/// Full-batch first-order optimizer with per-block Adam moments. A non-finite
/// gradient aborts the run naming the offending block.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) {
    require(lr > 0.0, "Optimizer: lr must be > 0");
    cfg_.lr = lr;
  }

  void step(const std::vector<ParamRef>& blocks) {
    ++t_;
    for (const ParamRef& b : blocks) {
      require(b.value != nullptr && b.grad != nullptr, "Optimizer: null block");
      for (std::size_t i = 0; i < b.count; ++i)
        require(std::isfinite(b.grad[i]),
                cat("Optimizer: non-finite gradient in block '", b.name, "' at index ", i));
      if (cfg_.kind == OptimizerKind::kSgd) {
        for (std::size_t i = 0; i < b.count; ++i) b.value[i] -= cfg_.lr * b.grad[i];
        continue;
      }
      State& s = states_[b.name];
      if (s.m.empty()) {
        s.m.assign(b.count, 0.0);
        s.v.assign(b.count, 0.0);
      }
      require(s.m.size() == b.count, cat("Optimizer: block '", b.name, "' changed size"));
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
      for (std::size_t i = 0; i < b.count; ++i) {
        s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * b.grad[i];
        s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * b.grad[i] * b.grad[i];
        const double mhat = s.m[i] / bc1;
        const double vhat = s.v[i] / bc2;
        b.value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  void reset() {
    t_ = 0;
    states_.clear();
  }

 private:
  struct State {
    std::vector<double> m, v;
  };
  OptimizerConfig cfg_;
  std::map<std::string, State> states_;
  std::uint64_t t_ = 0;
};

/// Reduce-on-plateau schedule: when the monitored loss fails to improve by
/// at least min_delta for `patience` consecutive epochs, multiply the rate by
/// `factor`, never dropping below min_lr.
struct PlateauScheduler {
  double factor = 0.5;
  int patience = 10;
  double min_delta = 1e-6;
  double min_lr = 1e-6;

  double best = std::numeric_limits<double>::infinity();
  int stale = 0;

  // Returns true when the rate was reduced this epoch.
  bool observe(double loss, Optimizer& opt) {
    if (loss < best - min_delta) {
      best = loss;
      stale = 0;
      return false;
    }
    if (++stale < patience) return false;
    stale = 0;
    const double next = std::max(opt.lr() * factor, min_lr);
    if (next < opt.lr()) {
      opt.set_lr(next);
      return true;
    }
    return false;
  }
};

/// Loss-only early stopping: trip after `patience` consecutive epochs without
/// an improvement of at least min_delta. Disabled when patience <= 0.
struct EarlyStopper {
  int patience = 0;
  double min_delta = 1e-8;

  double best = std::numeric_limits<double>::infinity();
  int stale = 0;

  bool observe(double loss) {
    if (patience <= 0) return false;
    if (loss < best - min_delta) {
      best = loss;
      stale = 0;
      return false;
    }
    return ++stale >= patience;
  }
};

}  // namespace ssc
