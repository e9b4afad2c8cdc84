#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "phame/core/error.hpp"
#include "phame/core/io.hpp"
#include "phame/denoiser/model.hpp"
#include "phame/denoiser/training.hpp"

namespace phame::denoiser {

inline constexpr char kCheckpointMagic[] = "PHAMED1";

struct Checkpoint {
  DenoiserShape shape;
  RealVector parameters;
  AdamState optimizer;
  std::optional<RealVector> ema;
  int epochs = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;

  static Checkpoint from_training(const TrainResult& r, std::uint64_t seed) {
    Checkpoint c;
    c.shape = r.model.shape();
    c.parameters = r.raw_parameters;
    c.optimizer = r.optimizer;
    c.ema = r.ema_parameters;
    c.epochs = r.epochs_run;
    c.final_loss = r.loss_curve.empty() ? 0.0 : r.loss_curve.back();
    c.seed = seed;
    return c;
  }

  /// The model used for sampling: EMA weights when present.
  Denoiser inference_model() const { return Denoiser::from_parameters(shape, ema ? *ema : parameters); }

  std::string serialize() const {
    io::BinaryWriter w;
    w.bytes(std::string_view(kCheckpointMagic, 7));
    for (int v : {shape.latent_dim, shape.cond_dim, shape.align_dim, shape.cond_proj_dim, shape.psi_hidden,
                  shape.time_dim}) {
      w.u32(static_cast<std::uint32_t>(v));
    }
    w.u32(static_cast<std::uint32_t>(shape.hidden.size()));
    for (int h : shape.hidden) w.u32(static_cast<std::uint32_t>(h));
    w.reals(parameters);
    w.u64(static_cast<std::uint64_t>(optimizer.step));
    w.reals(optimizer.m);
    w.reals(optimizer.v);
    w.u32(ema ? 1 : 0);
    if (ema) w.reals(*ema);
    w.u32(static_cast<std::uint32_t>(epochs));
    w.f64(final_loss);
    w.u64(seed);
    return w.buffer();
  }

  static Checkpoint deserialize(std::string_view bytes) {
    io::BinaryReader r(bytes);
    if (r.bytes(7) != std::string_view(kCheckpointMagic, 7)) throw Error(ErrorCode::Data, "not a checkpoint file");
    Checkpoint c;
    c.shape.latent_dim = static_cast<int>(r.u32());
    c.shape.cond_dim = static_cast<int>(r.u32());
    c.shape.align_dim = static_cast<int>(r.u32());
    c.shape.cond_proj_dim = static_cast<int>(r.u32());
    c.shape.psi_hidden = static_cast<int>(r.u32());
    c.shape.time_dim = static_cast<int>(r.u32());
    const auto layers = r.u32();
    if (layers > 64) throw Error(ErrorCode::Data, "checkpoint header is corrupt");
    c.shape.hidden.resize(layers);
    for (auto& h : c.shape.hidden) h = static_cast<int>(r.u32());
    c.parameters = r.reals();
    c.optimizer.step = static_cast<std::int64_t>(r.u64());
    c.optimizer.m = r.reals();
    c.optimizer.v = r.reals();
    if (r.u32()) c.ema = r.reals();
    c.epochs = static_cast<int>(r.u32());
    c.final_loss = r.f64();
    c.seed = r.u64();
    if (!r.at_end()) throw Error(ErrorCode::Data, "trailing bytes in checkpoint");
    try {
      c.inference_model();
    } catch (const Error& e) {
      throw Error(ErrorCode::Data, std::string("checkpoint does not describe a valid model: ") + e.what());
    }
    return c;
  }

  nlohmann::json manifest(const std::string& checksum) const {
    return {{"format", kCheckpointMagic},
            {"epochs", epochs},
            {"final_loss", final_loss},
            {"seed", seed},
            {"parameter_count", parameters.size()},
            {"ema", ema.has_value()},
            {"checksum", checksum}};
  }

  /// Writes the binary checkpoint and "<path>.json".
  void save(const std::filesystem::path& path) const {
    const auto bytes = serialize();
    io::write_file(path, bytes);
    io::write_file(path.string() + ".json", manifest(io::checksum(bytes)).dump(2) + "\n");
  }

  static Checkpoint load(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    const auto sidecar = std::filesystem::path(path.string() + ".json");
    if (std::filesystem::exists(sidecar)) {
      const auto m = nlohmann::json::parse(io::read_file(sidecar), nullptr, false);
      if (m.is_discarded()) throw Error(ErrorCode::Data, "unreadable checkpoint manifest " + sidecar.string());
      if (m.contains("checksum") && m["checksum"] != io::checksum(bytes)) {
        throw Error(ErrorCode::ChecksumMismatch, "checkpoint does not match its manifest");
      }
    }
    return deserialize(bytes);
  }
};

}  // namespace phame::denoiser
