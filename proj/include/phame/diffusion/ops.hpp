#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "phame/core/error.hpp"
#include "phame/core/random.hpp"
#include "phame/core/vector_ops.hpp"
#include "phame/diffusion/schedule.hpp"

namespace phame::diffusion {

inline constexpr double kDefaultTau = 0.8;
inline constexpr double kDefaultPUncond = 0.1;

/// A condition input that is either a finite vector or the null token.
class ConditionSlot {
 public:
  ConditionSlot() = default;
  explicit ConditionSlot(RealVector v) : value_(std::move(v)) {
    if (!all_finite(*value_)) throw Error(ErrorCode::Data, "condition vector has non-finite components");
  }
  static ConditionSlot null() { return {}; }

  bool is_null() const { return !value_.has_value(); }
  const RealVector& value() const {
    if (!value_) throw Error(ErrorCode::InvalidParameters, "null condition slot has no value");
    return *value_;
  }

  friend bool operator==(const ConditionSlot&, const ConditionSlot&) = default;

 private:
  std::optional<RealVector> value_;
};

enum class GuidanceMode { Standard, Compositional };

struct GuidanceConfig {
  GuidanceMode mode = GuidanceMode::Compositional;
  double w = 0.0;
  double w_c = 0.0;
  double w_a = 0.0;

  static GuidanceConfig standard(double w) {
    GuidanceConfig g;
    g.mode = GuidanceMode::Standard;
    g.w = w;
    g.validate();
    return g;
  }
  static GuidanceConfig compositional(double w_c, double w_a) {
    GuidanceConfig g;
    g.mode = GuidanceMode::Compositional;
    g.w_c = w_c;
    g.w_a = w_a;
    g.validate();
    return g;
  }

  void validate() const {
    auto ok = [](double x) { return std::isfinite(x) && x >= 0.0; };
    if (mode == GuidanceMode::Standard ? !(ok(w) && w_c == 0.0 && w_a == 0.0)
                                       : !(ok(w_c) && ok(w_a) && w == 0.0)) {
      throw Error(ErrorCode::InvalidParameters, "guidance scales must be finite, >= 0, and match the mode");
    }
  }
};

enum class SigmaRule { Ddpm, Ddim };

struct SamplerConfig {
  SigmaRule sigma_rule = SigmaRule::Ddpm;
  double ddim_eta = 0.0;
  /// Number of forward noising steps applied to a seed; absent means de novo.
  std::optional<int> edit_t_star;

  void validate(const NoiseSchedule& sched) const {
    if (sigma_rule == SigmaRule::Ddim && !(ddim_eta >= 0.0 && ddim_eta <= 1.0)) {
      throw Error(ErrorCode::InvalidParameters, "ddim_eta must lie in [0, 1]");
    }
    if (edit_t_star && (*edit_t_star < 0 || *edit_t_star >= sched.T())) {
      throw Error(ErrorCode::StepOutOfRange, "edit t* must satisfy 0 <= t* < T");
    }
  }
};

inline RealVector forward_noise(const RealVector& z0, int t, const RealVector& eps, const NoiseSchedule& sched) {
  require_same_size(z0, eps, "forward_noise");
  const double ab = sched.alpha_bar(sched.check(t, 0));
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  RealVector out(z0.size());
  for (std::size_t i = 0; i < z0.size(); ++i) out[i] = a * z0[i] + b * eps[i];
  return out;
}

inline RealVector predict_z0(const RealVector& z_t, const RealVector& eps_pred, int t, const NoiseSchedule& sched) {
  require_same_size(z_t, eps_pred, "predict_z0");
  const double ab = sched.alpha_bar(sched.check(t, 1));
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  RealVector out(z_t.size());
  for (std::size_t i = 0; i < z_t.size(); ++i) out[i] = (z_t[i] - b * eps_pred[i]) / a;
  return out;
}

/// Cosine-margin penalty max(0, tau - cos(z0_hat, anchor)).
inline double alignment_loss(const RealVector& z0_hat, const RealVector& projected_align, double tau = kDefaultTau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(ErrorCode::InvalidParameters, "tau must lie in (0, 1]");
  return std::max(0.0, tau - cosine(z0_hat, projected_align));
}

inline double diffusion_loss(const RealVector& eps_true, const RealVector& eps_pred) {
  return squared_distance(eps_true, eps_pred);
}

inline double diffusion_loss(const std::vector<RealVector>& eps_true, const std::vector<RealVector>& eps_pred) {
  if (eps_true.size() != eps_pred.size()) throw Error(ErrorCode::DimensionMismatch, "batch sizes differ");
  if (eps_true.empty()) throw Error(ErrorCode::EmptyInput, "empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < eps_true.size(); ++i) s += diffusion_loss(eps_true[i], eps_pred[i]);
  return s / static_cast<double>(eps_true.size());
}

inline double total_loss(double l_diff, double l_align, double gamma) {
  if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidParameters, "gamma must be >= 0");
  return l_diff + gamma * l_align;
}

inline RealVector cfg_standard(const RealVector& eps_uncond, const RealVector& eps_cond, double w) {
  require_same_size(eps_uncond, eps_cond, "cfg_standard");
  RealVector out(eps_uncond.size());
  // affine form: exact at w = 0 and w = 1
  const double keep = 1.0 - w;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = keep * eps_uncond[i] + w * eps_cond[i];
  return out;
}

inline RealVector cfg_compositional(const RealVector& eps_null_null, const RealVector& eps_c_null,
                                    const RealVector& eps_null_a, double w_c, double w_a) {
  require_same_size(eps_null_null, eps_c_null, "cfg_compositional");
  require_same_size(eps_null_null, eps_null_a, "cfg_compositional");
  RealVector out(eps_null_null.size());
  // eps_nn + w_c (eps_c - eps_nn) + w_a (eps_a - eps_nn), regrouped so single-term settings are exact
  const double keep = 1.0 - w_c - w_a;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = keep * eps_null_null[i] + w_c * eps_c_null[i] + w_a * eps_null_a[i];
  }
  return out;
}

inline double step_sigma(int t, const NoiseSchedule& sched, const SamplerConfig& cfg) {
  const double s = sched.posterior_sigma(t);
  return cfg.sigma_rule == SigmaRule::Ddim ? cfg.ddim_eta * s : s;
}

/// One ancestral step z_t -> z_{t-1}. eta_noise is only read when sigma_t > 0.
inline RealVector reverse_step(const RealVector& z_t, const RealVector& eps_tilde, int t, const NoiseSchedule& sched,
                               const SamplerConfig& cfg, const RealVector& eta_noise) {
  require_same_size(z_t, eps_tilde, "reverse_step");
  sched.check(t, 1);
  const double a = sched.alpha(t);
  const double coef = (1.0 - a) / std::sqrt(1.0 - sched.alpha_bar(t));
  const double inv = 1.0 / std::sqrt(a);
  const double sigma = step_sigma(t, sched, cfg);
  if (sigma > 0.0) require_same_size(z_t, eta_noise, "reverse_step noise");
  RealVector out(z_t.size());
  for (std::size_t i = 0; i < z_t.size(); ++i) {
    out[i] = inv * (z_t[i] - coef * eps_tilde[i]);
    if (sigma > 0.0) out[i] += sigma * eta_noise[i];
  }
  return out;
}

/// Independently replaces each slot by the null token with probability p_uncond.
/// Always consumes two draws so the stream does not depend on slot contents.
inline std::pair<ConditionSlot, ConditionSlot> condition_dropout(const ConditionSlot& c, const ConditionSlot& a,
                                                                 double p_uncond, Rng& rng) {
  if (!(p_uncond >= 0.0 && p_uncond <= 1.0)) throw Error(ErrorCode::InvalidParameters, "p_uncond must lie in [0, 1]");
  const bool drop_c = rng.uniform() < p_uncond;
  const bool drop_a = rng.uniform() < p_uncond;
  return {drop_c ? ConditionSlot::null() : c, drop_a ? ConditionSlot::null() : a};
}

}  // namespace phame::diffusion
