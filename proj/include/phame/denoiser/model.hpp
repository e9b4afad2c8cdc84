#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "phame/core/error.hpp"
#include "phame/core/random.hpp"
#include "phame/core/vector_ops.hpp"
#include "phame/diffusion/ops.hpp"

namespace phame::denoiser {

using diffusion::ConditionSlot;

struct DenoiserShape {
  int latent_dim = 16;
  int cond_dim = 1;
  int align_dim = 16;
  /// Width of the projected condition; 0 means latent_dim.
  int cond_proj_dim = 0;
  /// Hidden width of the align projection; 0 means 2 * latent_dim.
  int psi_hidden = 0;
  int time_dim = 32;
  std::vector<int> hidden{128, 128, 128};

  int cond_proj() const { return cond_proj_dim > 0 ? cond_proj_dim : latent_dim; }
  int psi_width() const { return psi_hidden > 0 ? psi_hidden : 2 * latent_dim; }
  int trunk_input() const { return latent_dim + time_dim + cond_proj() + latent_dim + 2; }

  void validate() const {
    bool ok = latent_dim > 0 && cond_dim > 0 && align_dim > 0 && cond_proj_dim >= 0 && psi_hidden >= 0 &&
              time_dim >= 2 && time_dim % 2 == 0 && !hidden.empty();
    for (int h : hidden) ok = ok && h > 0;
    if (!ok) throw Error(ErrorCode::InvalidParameters, "invalid denoiser shape");
  }

  friend bool operator==(const DenoiserShape&, const DenoiserShape&) = default;
};

/// A dense layer stored in the flat parameter array: row-major weights
/// (out x in) followed by the bias.
struct Linear {
  std::size_t offset = 0;
  int in = 0;
  int out = 0;

  std::size_t size() const { return static_cast<std::size_t>(out) * in + out; }
  std::size_t bias_offset() const { return offset + static_cast<std::size_t>(out) * in; }

  void forward(const RealVector& p, const RealVector& x, RealVector& y) const {
    y.resize(out);
    const double* w = p.data() + offset;
    const double* b = p.data() + bias_offset();
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) s += row[i] * x[i];
      y[o] = s;
    }
  }

  /// Accumulates parameter gradients into g and returns dL/dx.
  void backward(const RealVector& p, const RealVector& x, const RealVector& dy, RealVector& g, RealVector* dx) const {
    double* gw = g.data() + offset;
    double* gb = g.data() + bias_offset();
    const double* w = p.data() + offset;
    if (dx) dx->assign(in, 0.0);
    for (int o = 0; o < out; ++o) {
      const double d = dy[o];
      if (d == 0.0) continue;
      gb[o] += d;
      double* grow = gw + static_cast<std::size_t>(o) * in;
      const double* row = w + static_cast<std::size_t>(o) * in;
      for (int i = 0; i < in; ++i) grow[i] += d * x[i];
      if (dx)
        for (int i = 0; i < in; ++i) (*dx)[i] += d * row[i];
    }
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

/// Sinusoidal embedding: sin/cos of t * 10000^(-i/(half-1)).
inline RealVector time_embedding(int t, int dim) {
  const int half = dim / 2;
  RealVector e(dim);
  for (int i = 0; i < half; ++i) {
    const double freq = half > 1 ? std::exp(-std::log(10000.0) * i / (half - 1)) : 1.0;
    e[i] = std::sin(t * freq);
    e[half + i] = std::cos(t * freq);
  }
  return e;
}

struct PsiTrace {
  RealVector in, pre, act, out;
};

/// Everything the reverse pass needs from one forward evaluation.
struct ForwardTrace {
  RealVector input;
  std::vector<RealVector> pre;
  std::vector<RealVector> act;
  std::vector<RealVector> mask;
  RealVector out;
  bool c_present = false;
  bool a_present = false;
  RealVector c_in;
  PsiTrace psi;
};

/// Noise-prediction network: [z_t, time, proj_c(c) | null_c, psi(a) | null_a,
/// presence flags] through a SiLU trunk to a D-dimensional output.
class Denoiser {
 public:
  Denoiser() = default;

  Denoiser(DenoiserShape shape, std::uint64_t seed) : shape_(std::move(shape)) {
    shape_.validate();
    build_layout();
    params_.assign(total_, 0.0);
    Rng rng(seed);
    auto init_linear = [&](const Linear& l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
      for (std::size_t k = 0; k < l.size(); ++k) params_[l.offset + k] = rng.uniform(-bound, bound);
    };
    init_linear(proj_c_);
    init_linear(psi1_);
    init_linear(psi2_);
    for (int k = 0; k < shape_.cond_proj(); ++k) params_[null_c_ + k] = rng.uniform(-1.0, 1.0) / std::sqrt(shape_.cond_proj());
    for (int k = 0; k < shape_.latent_dim; ++k) params_[null_a_ + k] = rng.uniform(-1.0, 1.0) / std::sqrt(shape_.latent_dim);
    for (const auto& l : trunk_) init_linear(l);
  }

  /// Rebuilds a model around an existing parameter array.
  static Denoiser from_parameters(DenoiserShape shape, RealVector params) {
    Denoiser d;
    d.shape_ = std::move(shape);
    d.shape_.validate();
    d.build_layout();
    if (params.size() != d.total_) {
      throw Error(ErrorCode::DimensionMismatch, "parameter array has " + std::to_string(params.size()) +
                                                    " entries, shape needs " + std::to_string(d.total_));
    }
    d.params_ = std::move(params);
    return d;
  }

  const DenoiserShape& shape() const { return shape_; }
  int dimension() const { return shape_.latent_dim; }
  std::size_t parameter_count() const { return total_; }
  const RealVector& parameters() const { return params_; }
  RealVector& parameters() { return params_; }

  /// Parameter index ranges, for inspection and tests.
  struct Block {
    std::string name;
    std::size_t offset;
    std::size_t size;
  };
  std::vector<Block> blocks() const {
    std::vector<Block> b{{"proj_c", proj_c_.offset, proj_c_.size()},
                         {"psi1", psi1_.offset, psi1_.size()},
                         {"psi2", psi2_.offset, psi2_.size()},
                         {"null_c", null_c_, static_cast<std::size_t>(shape_.cond_proj())},
                         {"null_a", null_a_, static_cast<std::size_t>(shape_.latent_dim)}};
    for (std::size_t i = 0; i < trunk_.size(); ++i) b.push_back({"trunk" + std::to_string(i), trunk_[i].offset, trunk_[i].size()});
    return b;
  }

  RealVector predict(const RealVector& z, int t, const ConditionSlot& c, const ConditionSlot& a) const {
    ForwardTrace tr;
    return forward(z, t, c, a, tr, 0.0, nullptr);
  }

  /// Align projection psi: A -> hidden -> D with SiLU between.
  RealVector psi(const RealVector& a, PsiTrace* trace = nullptr) const {
    PsiTrace local;
    PsiTrace& tr = trace ? *trace : local;
    if (static_cast<int>(a.size()) != shape_.align_dim) {
      throw Error(ErrorCode::DimensionMismatch, "align embedding has dimension " + std::to_string(a.size()));
    }
    tr.in = a;
    psi1_.forward(params_, tr.in, tr.pre);
    tr.act.resize(tr.pre.size());
    for (std::size_t k = 0; k < tr.pre.size(); ++k) tr.act[k] = silu(tr.pre[k]);
    psi2_.forward(params_, tr.act, tr.out);
    return tr.out;
  }

  void psi_backward(const PsiTrace& tr, const RealVector& d_out, RealVector& grad) const {
    RealVector d_act;
    psi2_.backward(params_, tr.act, d_out, grad, &d_act);
    for (std::size_t k = 0; k < d_act.size(); ++k) d_act[k] *= silu_grad(tr.pre[k]);
    psi1_.backward(params_, tr.in, d_act, grad, nullptr);
  }

  /// Forward pass recording a trace. With dropout_rate > 0 and an rng, hidden
  /// activations are masked with inverted scaling.
  RealVector forward(const RealVector& z, int t, const ConditionSlot& c, const ConditionSlot& a, ForwardTrace& tr,
                     double dropout_rate, Rng* rng) const {
    const int D = shape_.latent_dim;
    if (static_cast<int>(z.size()) != D) throw Error(ErrorCode::DimensionMismatch, "latent has wrong dimension");
    auto& x = tr.input;
    x.clear();
    x.reserve(shape_.trunk_input());
    x.insert(x.end(), z.begin(), z.end());
    const auto te = time_embedding(t, shape_.time_dim);
    x.insert(x.end(), te.begin(), te.end());

    tr.c_present = !c.is_null();
    if (tr.c_present) {
      if (static_cast<int>(c.value().size()) != shape_.cond_dim) {
        throw Error(ErrorCode::DimensionMismatch, "condition has dimension " + std::to_string(c.value().size()));
      }
      tr.c_in = c.value();
      RealVector pc;
      proj_c_.forward(params_, tr.c_in, pc);
      x.insert(x.end(), pc.begin(), pc.end());
    } else {
      x.insert(x.end(), params_.begin() + null_c_, params_.begin() + null_c_ + shape_.cond_proj());
    }

    tr.a_present = !a.is_null();
    if (tr.a_present) {
      const auto pa = psi(a.value(), &tr.psi);
      x.insert(x.end(), pa.begin(), pa.end());
    } else {
      x.insert(x.end(), params_.begin() + null_a_, params_.begin() + null_a_ + D);
    }
    x.push_back(tr.c_present ? 1.0 : 0.0);
    x.push_back(tr.a_present ? 1.0 : 0.0);

    const std::size_t hidden = trunk_.size() - 1;
    tr.pre.resize(hidden);
    tr.act.resize(hidden);
    tr.mask.assign(hidden, RealVector());
    const RealVector* cur = &x;
    for (std::size_t l = 0; l < hidden; ++l) {
      trunk_[l].forward(params_, *cur, tr.pre[l]);
      auto& act = tr.act[l];
      act.resize(tr.pre[l].size());
      for (std::size_t k = 0; k < act.size(); ++k) act[k] = silu(tr.pre[l][k]);
      if (dropout_rate > 0.0 && rng) {
        auto& m = tr.mask[l];
        m.resize(act.size());
        const double keep = 1.0 - dropout_rate;
        for (std::size_t k = 0; k < act.size(); ++k) {
          m[k] = rng->uniform() < keep ? 1.0 / keep : 0.0;
          act[k] *= m[k];
        }
      }
      cur = &act;
    }
    trunk_.back().forward(params_, *cur, tr.out);
    return tr.out;
  }

  /// Reverse pass for one forward evaluation; accumulates into grad.
  void backward(const ForwardTrace& tr, const RealVector& d_out, RealVector& grad) const {
    const int D = shape_.latent_dim;
    const std::size_t hidden = trunk_.size() - 1;
    RealVector d = d_out;
    RealVector dx;
    const RealVector& last_in = hidden > 0 ? tr.act[hidden - 1] : tr.input;
    trunk_.back().backward(params_, last_in, d, grad, &dx);
    for (std::size_t l = hidden; l-- > 0;) {
      d.swap(dx);
      if (!tr.mask[l].empty())
        for (std::size_t k = 0; k < d.size(); ++k) d[k] *= tr.mask[l][k];
      for (std::size_t k = 0; k < d.size(); ++k) d[k] *= silu_grad(tr.pre[l][k]);
      const RealVector& in = l > 0 ? tr.act[l - 1] : tr.input;
      trunk_[l].backward(params_, in, d, grad, &dx);
    }
    // dx is now dL/d(trunk input): route the condition segments.
    const std::size_t c_at = D + shape_.time_dim;
    const std::size_t a_at = c_at + shape_.cond_proj();
    if (tr.c_present) {
      RealVector dpc(dx.begin() + c_at, dx.begin() + a_at);
      proj_c_.backward(params_, tr.c_in, dpc, grad, nullptr);
    } else {
      for (int k = 0; k < shape_.cond_proj(); ++k) grad[null_c_ + k] += dx[c_at + k];
    }
    if (tr.a_present) {
      RealVector dpa(dx.begin() + a_at, dx.begin() + a_at + D);
      psi_backward(tr.psi, dpa, grad);
    } else {
      for (int k = 0; k < D; ++k) grad[null_a_ + k] += dx[a_at + k];
    }
  }

 private:
  void build_layout() {
    std::size_t at = 0;
    auto take = [&](int in, int out) {
      Linear l{at, in, out};
      at += l.size();
      return l;
    };
    const int D = shape_.latent_dim;
    proj_c_ = take(shape_.cond_dim, shape_.cond_proj());
    psi1_ = take(shape_.align_dim, shape_.psi_width());
    psi2_ = take(shape_.psi_width(), D);
    null_c_ = at;
    at += shape_.cond_proj();
    null_a_ = at;
    at += D;
    trunk_.clear();
    int in = shape_.trunk_input();
    for (int h : shape_.hidden) {
      trunk_.push_back(take(in, h));
      in = h;
    }
    trunk_.push_back(take(in, D));
    total_ = at;
  }

  DenoiserShape shape_;
  Linear proj_c_, psi1_, psi2_;
  std::size_t null_c_ = 0;
  std::size_t null_a_ = 0;
  std::vector<Linear> trunk_;
  std::size_t total_ = 0;
  RealVector params_;
};

}  // namespace phame::denoiser
