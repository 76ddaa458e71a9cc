#pragma once

#include <cmath>
#include <vector>

#include "colorcnn/kernels/kernels.hpp"
#include "colorcnn/nn/layers.hpp"

namespace colorcnn::nn {

template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(std::vector<ParamRef<T>> params, T momentum, T weight_decay)
      : params_(std::move(params)), momentum_(momentum), wd_(weight_decay) {
    vel_.reserve(params_.size());
    for (auto& p : params_) vel_.emplace_back(std::vector<T>(size_t(p.value->numel()), T(0)));
  }

  void step(T lr) {
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      kernels::sgd_momentum(p.value->numel(), p.value->ptr(), p.grad->ptr(),
                            vel_[i].data(), lr, momentum_, wd_);
    }
  }

 private:
  std::vector<ParamRef<T>> params_;
  std::vector<std::vector<T>> vel_;
  T momentum_, wd_;
};

// one-cycle schedule: linear ramp from peak/25 over the first 30% of steps,
// cosine decay to zero over the rest
class OneCycleSchedule {
 public:
  OneCycleSchedule(double peak_lr, int64_t total_steps)
      : peak_(peak_lr), total_(total_steps) {}

  double lr(int64_t step) const {
    const double up = 0.3 * double(total_);
    double t = double(step);
    if (t < up) {
      double f = t / up;
      return peak_ / 25.0 + (peak_ - peak_ / 25.0) * f;
    }
    double f = (t - up) / (double(total_) - up);
    return 0.5 * peak_ * (1.0 + std::cos(M_PI * f));
  }

 private:
  double peak_;
  int64_t total_;
};

// cosine annealing with warm restarts: decays from peak to floor over each
// period, then snaps back to peak
class CosineRestartSchedule {
 public:
  CosineRestartSchedule(double peak_lr, double min_lr, int64_t period_steps)
      : peak_(peak_lr), min_(min_lr), period_(period_steps) {}

  double lr(int64_t step) const {
    double f = double(step % period_) / double(period_);
    return min_ + 0.5 * (peak_ - min_) * (1.0 + std::cos(M_PI * f));
  }

 private:
  double peak_, min_;
  int64_t period_;
};

}  // namespace colorcnn::nn
