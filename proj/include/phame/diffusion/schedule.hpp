#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "phame/core/error.hpp"

namespace phame::diffusion {

inline constexpr double kMaxBeta = 0.999;

/// Variance schedule indexed 0..T. Index 0 is the clean-data convention
/// (alpha_bar = 1, alpha = 1, beta = 0); steps are 1..T.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  /// Builds from per-step betas b_1..b_T.
  static NoiseSchedule from_betas(const std::vector<double>& betas) {
    if (betas.size() < 2) throw Error(ErrorCode::InvalidParameters, "schedule needs at least two steps");
    NoiseSchedule s;
    s.T_ = static_cast<int>(betas.size());
    s.beta_.assign(1, 0.0);
    s.alpha_.assign(1, 1.0);
    s.alpha_bar_.assign(1, 1.0);
    for (double b : betas) {
      if (!(b > 0.0 && b < 1.0)) throw Error(ErrorCode::InvalidParameters, "beta must lie in (0, 1)");
      s.beta_.push_back(b);
      s.alpha_.push_back(1.0 - b);
      s.alpha_bar_.push_back(s.alpha_bar_.back() * (1.0 - b));
    }
    return s;
  }

  int T() const { return T_; }
  double alpha_bar(int t) const { return alpha_bar_.at(check(t, 0)); }
  double alpha(int t) const { return alpha_.at(check(t, 1)); }
  double beta(int t) const { return beta_.at(check(t, 1)); }

  /// Posterior standard deviation sqrt(beta_t (1 - abar_{t-1}) / (1 - abar_t)); zero at t = 1.
  double posterior_sigma(int t) const {
    check(t, 1);
    return std::sqrt(beta_[t] * (1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]));
  }

  int check(int t, int lo) const {
    if (t < lo || t > T_) {
      throw Error(ErrorCode::StepOutOfRange,
                  "step " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " + std::to_string(T_) + "]");
    }
    return t;
  }

 private:
  int T_ = 0;
  std::vector<double> alpha_bar_;
  std::vector<double> alpha_;
  std::vector<double> beta_;
};

/// Cosine schedule: abar_t = f(t)/f(0), f(t) = cos^2(((t/T + s)/(1 + s)) pi/2),
/// with each beta clipped to 0.999 and abar recomputed as the running product.
inline NoiseSchedule cosine_schedule(int T, double s = 0.008) {
  if (T < 2) throw Error(ErrorCode::InvalidParameters, "cosine schedule needs T >= 2");
  if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::InvalidParameters, "offset s must be positive");
  auto f = [&](int t) {
    const double c = std::cos((static_cast<double>(t) / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  const double f0 = f(0);
  std::vector<double> betas;
  betas.reserve(T);
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double cur = f(t) / f0;
    betas.push_back(std::min(1.0 - cur / prev, kMaxBeta));
    prev = cur;
  }
  return NoiseSchedule::from_betas(betas);
}

}  // namespace phame::diffusion
