#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phame/core/error.hpp"
#include "phame/core/random.hpp"
#include "phame/core/vector_ops.hpp"
#include "phame/denoiser/model.hpp"
#include "phame/diffusion/ops.hpp"
#include "phame/diffusion/schedule.hpp"

namespace phame::denoiser {

using diffusion::NoiseSchedule;

/// One training triple: target latent, target condition, seed embedding.
/// An empty z_align means the item has no anchor (no alignment term, a is null).
struct TrainingExample {
  RealVector z0;
  ConditionSlot c;
  RealVector z_align;
};

/// Per-item randomness for one loss evaluation: timestep, noise, and the
/// condition slots after dropout.
struct ItemDraw {
  int t = 1;
  RealVector eps;
  ConditionSlot c;
  ConditionSlot a;
};

struct LossOptions {
  double gamma = 0.0;
  double tau = diffusion::kDefaultTau;
  double dropout_rate = 0.0;
};

struct LossResult {
  double loss = 0.0;
  double diffusion = 0.0;
  double alignment = 0.0;
  RealVector gradient;
};

/// Mean over the batch of ||eps - eps_theta||^2 + gamma * max(0, tau - cos(z0_hat, psi(z_align))),
/// with gradients for every parameter. The anchor always uses the item's own
/// z_align, whatever dropout did to the a slot.
inline LossResult loss_and_gradients(const Denoiser& model, std::span<const TrainingExample> batch,
                                     std::span<const ItemDraw> draws, const NoiseSchedule& sched,
                                     const LossOptions& opt, Rng* dropout_rng = nullptr, int batch_index = 0) {
  if (batch.empty()) throw Error(ErrorCode::EmptyInput, "empty training batch");
  if (batch.size() != draws.size()) throw Error(ErrorCode::DimensionMismatch, "one draw per batch item required");
  if (!(opt.gamma >= 0.0)) throw Error(ErrorCode::InvalidParameters, "gamma must be >= 0");
  const double B = static_cast<double>(batch.size());
  LossResult res;
  res.gradient.assign(model.parameter_count(), 0.0);
  ForwardTrace tr;
  PsiTrace anchor_tr;
  RealVector d_out(model.dimension());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    const auto& dr = draws[i];
    const RealVector z_t = diffusion::forward_noise(ex.z0, dr.t, dr.eps, sched);
    const RealVector eps_pred = model.forward(z_t, dr.t, dr.c, dr.a, tr, opt.dropout_rate, dropout_rng);
    double l_diff = 0.0;
    for (int k = 0; k < model.dimension(); ++k) {
      const double r = dr.eps[k] - eps_pred[k];
      l_diff += r * r;
      d_out[k] = -2.0 * r / B;
    }
    double l_align = 0.0;
    if (opt.gamma > 0.0 && !ex.z_align.empty()) {
      const RealVector anchor = model.psi(ex.z_align, &anchor_tr);
      const RealVector z0_hat = diffusion::predict_z0(z_t, eps_pred, dr.t, sched);
      const double xx = squared_norm(z0_hat), yy = squared_norm(anchor);
      if (xx == 0.0 || yy == 0.0) throw Error(ErrorCode::ZeroVector, "zero vector in alignment loss");
      const double nx = std::sqrt(xx), ny = std::sqrt(yy);
      const double cosv = dot(z0_hat, anchor) / std::sqrt(xx * yy);
      l_align = std::max(0.0, opt.tau - cosv);
      if (opt.tau - cosv > 0.0) {
        const double g = -opt.gamma / B;  // dL/dcos
        const double ab = sched.alpha_bar(dr.t);
        const double dz_deps = -std::sqrt(1.0 - ab) / std::sqrt(ab);
        RealVector d_anchor(anchor.size());
        for (int k = 0; k < model.dimension(); ++k) {
          const double dcos_dx = anchor[k] / (nx * ny) - cosv * z0_hat[k] / xx;
          const double dcos_dy = z0_hat[k] / (nx * ny) - cosv * anchor[k] / yy;
          d_out[k] += g * dcos_dx * dz_deps;
          d_anchor[k] = g * dcos_dy;
        }
        model.psi_backward(anchor_tr, d_anchor, res.gradient);
      }
    }
    model.backward(tr, d_out, res.gradient);
    res.diffusion += l_diff / B;
    res.alignment += l_align / B;
  }
  res.loss = diffusion::total_loss(res.diffusion, res.alignment, opt.gamma);
  if (!std::isfinite(res.loss) || !all_finite(res.gradient)) {
    throw Error(ErrorCode::NonFiniteLoss, "non-finite loss or gradient in batch " + std::to_string(batch_index));
  }
  return res;
}

struct AdamState {
  RealVector m;
  RealVector v;
  std::int64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

inline void adam_step(RealVector& params, const RealVector& grad, AdamState& st, double lr) {
  require_same_size(params, grad, "adam_step");
  if (st.m.empty()) {
    st.m.assign(params.size(), 0.0);
    st.v.assign(params.size(), 0.0);
  }
  require_same_size(params, st.m, "adam_step state");
  ++st.step;
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    st.m[i] = kAdamBeta1 * st.m[i] + (1.0 - kAdamBeta1) * g;
    st.v[i] = kAdamBeta2 * st.v[i] + (1.0 - kAdamBeta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
  }
}

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 64;
  double gamma = 0.0;
  double p_uncond = diffusion::kDefaultPUncond;
  double tau = diffusion::kDefaultTau;
  std::optional<double> ema_decay;
  int warmup_epochs = 0;
  double dropout_rate = 0.0;
  std::uint64_t rng_seed = 0;
  /// Stop after this many epochs without a lower training loss.
  std::optional<int> early_stop_patience;

  void validate() const {
    const bool ok = learning_rate > 0.0 && std::isfinite(learning_rate) && epochs > 0 && batch_size > 0 &&
                    gamma >= 0.0 && p_uncond >= 0.0 && p_uncond <= 1.0 && tau > 0.0 && tau <= 1.0 &&
                    (!ema_decay || (*ema_decay >= 0.0 && *ema_decay < 1.0)) && warmup_epochs >= 0 &&
                    dropout_rate >= 0.0 && dropout_rate < 1.0 && (!early_stop_patience || *early_stop_patience > 0);
    if (!ok) throw Error(ErrorCode::InvalidParameters, "training configuration out of range");
  }
};

struct TrainResult {
  /// Parameters for inference: the EMA shadow when enabled, raw otherwise.
  Denoiser model;
  RealVector raw_parameters;
  std::optional<RealVector> ema_parameters;
  AdamState optimizer;
  std::vector<double> loss_curve;
  int epochs_run = 0;
};

/// Draws (t, eps, dropped slots) for one example.
inline ItemDraw draw_item(const TrainingExample& ex, const NoiseSchedule& sched, double p_uncond, Rng& rng) {
  ItemDraw d;
  d.t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.T())));
  d.eps = rng.normal_vector(ex.z0.size());
  const ConditionSlot a = ex.z_align.empty() ? ConditionSlot::null() : ConditionSlot(ex.z_align);
  auto [c2, a2] = diffusion::condition_dropout(ex.c, a, p_uncond, rng);
  d.c = std::move(c2);
  d.a = std::move(a2);
  return d;
}

inline TrainResult train(Denoiser model, const std::vector<TrainingExample>& data, const NoiseSchedule& sched,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw Error(ErrorCode::EmptyInput, "empty training set");
  TrainResult res;
  Rng rng(cfg.rng_seed);
  Rng dropout_rng(derive_seed(cfg.rng_seed, "dropout", 0));
  std::optional<RealVector> ema;
  if (cfg.ema_decay) ema = model.parameters();
  const LossOptions lopt{cfg.gamma, cfg.tau, cfg.dropout_rate};

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t per_epoch = (data.size() + cfg.batch_size - 1) / cfg.batch_size;
  const double warmup_steps = static_cast<double>(cfg.warmup_epochs) * per_epoch;
  std::int64_t step = 0;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  std::vector<TrainingExample> batch;
  std::vector<ItemDraw> draws;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(data.size(), lo + cfg.batch_size);
      batch.clear();
      draws.clear();
      for (std::size_t k = lo; k < hi; ++k) {
        batch.push_back(data[order[k]]);
        draws.push_back(draw_item(batch.back(), sched, cfg.p_uncond, rng));
      }
      const auto lr_scale = warmup_steps > 0 ? std::min(1.0, static_cast<double>(step + 1) / warmup_steps) : 1.0;
      auto lg = loss_and_gradients(model, batch, draws, sched, lopt, &dropout_rng, static_cast<int>(step));
      adam_step(model.parameters(), lg.gradient, res.optimizer, cfg.learning_rate * lr_scale);
      if (ema) {
        const double d = *cfg.ema_decay;
        const auto& p = model.parameters();
        for (std::size_t i = 0; i < p.size(); ++i) (*ema)[i] = d * (*ema)[i] + (1.0 - d) * p[i];
      }
      epoch_loss += lg.loss * static_cast<double>(hi - lo);
      ++step;
    }
    epoch_loss /= static_cast<double>(data.size());
    res.loss_curve.push_back(epoch_loss);
    res.epochs_run = epoch + 1;
    if (cfg.early_stop_patience) {
      if (epoch_loss < best) {
        best = epoch_loss;
        stale = 0;
      } else if (++stale >= *cfg.early_stop_patience) {
        break;
      }
    }
  }
  res.raw_parameters = model.parameters();
  res.ema_parameters = ema;
  res.model = ema ? Denoiser::from_parameters(model.shape(), *ema) : std::move(model);
  return res;
}

}  // namespace phame::denoiser
