#pragma once

#include <concepts>
#include <cstdint>

#include "phame/core/error.hpp"
#include "phame/core/random.hpp"
#include "phame/core/vector_ops.hpp"
#include "phame/diffusion/ops.hpp"
#include "phame/diffusion/schedule.hpp"

namespace phame::diffusion {

/// Anything that predicts the noise in z_t given the two condition slots.
template <typename M>
concept NoisePredictor = requires(const M& m, const RealVector& z, int t, const ConditionSlot& s) {
  { m.dimension() } -> std::convertible_to<int>;
  { m.predict(z, t, s, s) } -> std::convertible_to<RealVector>;
};

/// Guided noise estimate at one step. Terms with zero weight are not
/// evaluated; their contribution is exactly zero either way.
template <NoisePredictor M>
RealVector guided_noise(const M& model, const RealVector& z, int t, const ConditionSlot& c, const ConditionSlot& a,
                        const GuidanceConfig& g) {
  const ConditionSlot none;
  RealVector uncond = model.predict(z, t, none, none);
  if (g.mode == GuidanceMode::Standard) {
    if (g.w == 0.0) return uncond;
    return cfg_standard(uncond, model.predict(z, t, c, a), g.w);
  }
  const RealVector eps_c = g.w_c == 0.0 ? uncond : model.predict(z, t, c, none);
  const RealVector eps_a = g.w_a == 0.0 ? uncond : model.predict(z, t, none, a);
  return cfg_compositional(uncond, eps_c, eps_a, g.w_c, g.w_a);
}

namespace detail {

template <NoisePredictor M>
RealVector denoise_from(const M& model, RealVector z, int t_start, const ConditionSlot& c, const ConditionSlot& a,
                        const NoiseSchedule& sched, const GuidanceConfig& g, const SamplerConfig& s, Rng& rng) {
  for (int t = t_start; t >= 1; --t) {
    const RealVector eps = guided_noise(model, z, t, c, a, g);
    const RealVector eta = rng.normal_vector(z.size());
    z = reverse_step(z, eps, t, sched, s, eta);
  }
  if (!all_finite(z)) throw Error(ErrorCode::NonFiniteLoss, "sampler produced a non-finite latent");
  return z;
}

}  // namespace detail

/// De novo generation: start from a standard-normal latent at step T.
template <NoisePredictor M>
RealVector sample(const M& model, const ConditionSlot& c, const ConditionSlot& a, const NoiseSchedule& sched,
                  const GuidanceConfig& guidance, const SamplerConfig& sampler, std::uint64_t rng_seed) {
  guidance.validate();
  sampler.validate(sched);
  if (sampler.edit_t_star) throw Error(ErrorCode::MissingSeed, "edit mode requires a seed latent");
  Rng rng(rng_seed);
  RealVector z = rng.normal_vector(model.dimension());
  return detail::denoise_from(model, std::move(z), sched.T(), c, a, sched, guidance, sampler, rng);
}

/// Editing: noise the seed for t* steps, then denoise t* steps.
template <NoisePredictor M>
RealVector edit(const M& model, const RealVector& z_seed, const ConditionSlot& c, const ConditionSlot& a,
                const NoiseSchedule& sched, const GuidanceConfig& guidance, const SamplerConfig& sampler,
                std::uint64_t rng_seed) {
  guidance.validate();
  sampler.validate(sched);
  if (!sampler.edit_t_star) throw Error(ErrorCode::InvalidParameters, "edit requires edit_t_star");
  if (static_cast<int>(z_seed.size()) != model.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "seed latent dimension differs from model");
  }
  const int t_star = *sampler.edit_t_star;
  if (t_star == 0) return z_seed;
  Rng rng(rng_seed);
  const RealVector eps = rng.normal_vector(z_seed.size());
  RealVector z = forward_noise(z_seed, t_star, eps, sched);
  return detail::denoise_from(model, std::move(z), t_star, c, a, sched, guidance, sampler, rng);
}

/// Dispatches on whether a seed is supplied.
template <NoisePredictor M>
RealVector generate(const M& model, const std::optional<RealVector>& z_seed, const ConditionSlot& c,
                    const ConditionSlot& a, const NoiseSchedule& sched, const GuidanceConfig& guidance,
                    const SamplerConfig& sampler, std::uint64_t rng_seed) {
  if (sampler.edit_t_star) {
    if (!z_seed) throw Error(ErrorCode::MissingSeed, "edit mode requires a seed latent");
    return edit(model, *z_seed, c, a, sched, guidance, sampler, rng_seed);
  }
  return sample(model, c, a, sched, guidance, sampler, rng_seed);
}

}  // namespace phame::diffusion
