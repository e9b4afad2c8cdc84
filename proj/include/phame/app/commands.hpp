#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "phame/app/config.hpp"
#include "phame/app/world.hpp"
#include "phame/denoiser/checkpoint.hpp"
#include "phame/denoiser/training.hpp"
#include "phame/diffusion/sampler.hpp"
#include "phame/diffusion/schedule.hpp"
#include "phame/eval/metrics.hpp"
#include "phame/eval/report.hpp"
#include "phame/eval/retrieval.hpp"

namespace phame::app {

using nlohmann::json;
using diffusion::ConditionSlot;

inline RunContext make_context(std::string_view config_text, fs::path base_dir, fs::path out_dir,
                               std::optional<std::uint64_t> seed_override = std::nullopt) {
  RunContext ctx{Config::parse(config_text, schema()), std::move(base_dir), std::move(out_dir)};
  if (seed_override) ctx.cfg.set("run.seed", std::to_string(*seed_override));
  return ctx;
}

/// --out-dir wins, then PHAME_OUT_DIR, then ./phame_out.
inline fs::path resolve_out_dir(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("PHAME_OUT_DIR"); env && *env) return env;
  return "phame_out";
}

// ---- configuration views -------------------------------------------------

inline diffusion::NoiseSchedule make_schedule(const Config& cfg) {
  return diffusion::cosine_schedule(static_cast<int>(cfg.integer("schedule.steps")), cfg.real("schedule.cosine_offset"));
}

inline diffusion::GuidanceConfig make_guidance(const Config& cfg, std::optional<double> w_c = std::nullopt,
                                               std::optional<double> w_a = std::nullopt) {
  if (cfg.str("guidance.mode") == "standard") return diffusion::GuidanceConfig::standard(cfg.real("guidance.w"));
  return diffusion::GuidanceConfig::compositional(w_c.value_or(cfg.real("guidance.w_c")),
                                                  w_a.value_or(cfg.real("guidance.w_a")));
}

inline diffusion::SamplerConfig make_sampler(const Config& cfg, bool edit, std::optional<int> t_star = std::nullopt) {
  diffusion::SamplerConfig s;
  s.sigma_rule = cfg.str("sampler.sigma_rule") == "ddim" ? diffusion::SigmaRule::Ddim : diffusion::SigmaRule::Ddpm;
  s.ddim_eta = cfg.real("sampler.ddim_eta");
  if (edit) s.edit_t_star = t_star.value_or(static_cast<int>(cfg.integer("sampler.t_star")));
  return s;
}

inline denoiser::TrainConfig make_train_config(const Config& cfg, std::uint64_t seed) {
  denoiser::TrainConfig t;
  t.learning_rate = cfg.real("train.learning_rate");
  t.epochs = static_cast<int>(cfg.integer("train.epochs"));
  t.batch_size = static_cast<int>(cfg.integer("train.batch_size"));
  t.gamma = cfg.real("train.gamma");
  t.tau = cfg.real("train.tau");
  t.p_uncond = cfg.real("train.p_uncond");
  t.ema_decay = cfg.opt_real("train.ema_decay");
  t.warmup_epochs = static_cast<int>(cfg.integer("train.warmup_epochs"));
  t.dropout_rate = cfg.real("train.dropout_rate");
  if (const auto p = cfg.opt_integer("train.early_stop_patience")) t.early_stop_patience = static_cast<int>(*p);
  t.rng_seed = derive_seed(seed, "train", 0);
  return t;
}

inline std::optional<std::vector<pairing::StageSpec>> curriculum_stages(const Config& cfg) {
  const auto pct = cfg.reals("curriculum.percentiles");
  const auto thr = cfg.reals("curriculum.thresholds");
  if (pct.empty() && thr.empty()) return std::nullopt;
  if (!pct.empty() && !thr.empty()) {
    throw Error(ErrorCode::Config, "give curriculum.percentiles or curriculum.thresholds, not both");
  }
  const std::size_t n = pct.empty() ? thr.size() : pct.size();
  const auto lrs = cfg.reals("curriculum.learning_rates");
  const auto eps = cfg.integers("curriculum.epochs");
  if (!lrs.empty() && lrs.size() != n) throw Error(ErrorCode::Config, "curriculum.learning_rates needs one value per stage");
  if (!eps.empty() && eps.size() != n) throw Error(ErrorCode::Config, "curriculum.epochs needs one value per stage");
  std::vector<pairing::StageSpec> out(n);
  for (std::size_t s = 0; s < n; ++s) {
    if (!pct.empty()) out[s].percentile = pct[s];
    else out[s].threshold = thr[s];
    if (!lrs.empty()) out[s].overrides.learning_rate = lrs[s];
    if (!eps.empty()) out[s].overrides.epochs = static_cast<int>(eps[s]);
  }
  return out;
}

inline std::optional<eval::TargetRegion> configured_region(const Config& cfg) {
  eval::TargetRegion r{cfg.opt_real("eval.target_lower"), cfg.opt_real("eval.target_upper")};
  if (!r.lower && !r.upper) return std::nullopt;
  return r;
}

/// Semantic checks on the whole configuration, run before any computation.
inline void validate(const RunContext& ctx) {
  const Config& cfg = ctx.cfg;
  auto fail = [](const std::string& m) { return Error(ErrorCode::Config, m); };
  auto wrap = [&](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      throw fail(key + ": " + e.what());
    }
  };
  if (ctx.molecules() && !cfg.has("corpus.path")) throw fail("corpus.path is required when run.world = molecules");
  if (!ctx.molecules()) {
    if (cfg.integer("synthetic.count") < 2) throw fail("synthetic.count must be at least 2");
    if (cfg.integer("synthetic.angles") < 1) throw fail("synthetic.angles must be at least 1");
    if (cfg.reals("synthetic.radii").empty()) throw fail("synthetic.radii is empty");
    wrap("[synthetic]", [&] { mixture_codec(cfg); });
    if (cfg.str("pairs.mode") == "condition") throw fail("pairs.mode = condition needs run.world = molecules");
    if (cfg.has("generate.seeds")) throw fail("generate.seeds needs run.world = molecules");
  }
  if (cfg.integer("codec.latent_dim") < 1) throw fail("codec.latent_dim must be at least 1");
  if (cfg.integer("codec.fingerprint_width") < 1) throw fail("codec.fingerprint_width must be at least 1");
  const double pct = cfg.real("pairs.percentile");
  if (!(pct > 0.0 && pct < 1.0)) throw fail("pairs.percentile must lie in (0, 1)");
  if (cfg.integer("pairs.max_pairs") < 1) throw fail("pairs.max_pairs must be at least 1");
  wrap("[schedule]", [&] { make_schedule(cfg); });
  const auto steps = cfg.integer("schedule.steps");
  if (cfg.integer("sampler.t_star") >= steps) throw fail("sampler.t_star must be below schedule.steps");
  for (long long t : cfg.integers("sweep.t_star"))
    if (t >= steps) throw fail("sweep.t_star value " + std::to_string(t) + " must be below schedule.steps");
  const auto hidden = cfg.integers("model.hidden");
  if (hidden.empty() || std::find(hidden.begin(), hidden.end(), 0) != hidden.end()) {
    throw fail("model.hidden needs positive widths");
  }
  if (cfg.integer("model.time_dim") < 2) throw fail("model.time_dim must be at least 2");
  wrap("[train]", [&] { make_train_config(cfg, 0).validate(); });
  wrap("[guidance]", [&] { make_guidance(cfg); });
  wrap("[sampler]", [&] { make_sampler(cfg, true).validate(make_schedule(cfg)); });
  const bool de_novo = cfg.str("generate.mode") == "sample";
  if (de_novo && cfg.str("guidance.mode") == "compositional" && cfg.real("guidance.w_a") > 0.0) {
    throw fail("guidance.w_a > 0 needs a seed; generate.mode = sample cannot use it");
  }
  if (de_novo && cfg.has("generate.seeds")) throw fail("generate.seeds is only used when generate.mode = edit");
  if (cfg.integer("generate.samples_per_seed") < 1) throw fail("generate.samples_per_seed must be at least 1");
  if (cfg.reals("generate.condition").empty()) throw fail("generate.condition is empty");
  curriculum_stages(cfg);
  if (const auto r = configured_region(cfg)) wrap("[eval] target region", [&] { r->validate(); });
  const double frac = cfg.real("eval.top_fraction");
  if (!(frac > 0.0 && frac <= 1.0)) throw fail("eval.top_fraction must lie in (0, 1]");
  if (const auto l = cfg.opt_real("eval.objective_lambda"); l && !(*l >= 0.0)) throw fail("eval.objective_lambda must be >= 0");
  for (long long k : cfg.integers("eval.k"))
    if (k < 1) throw fail("eval.k values must be at least 1");
  if (cfg.integer("eval.retrieval_n") < 1) throw fail("eval.retrieval_n must be at least 1");
  for (const auto& key : {"sweep.w_c", "sweep.w_a"}) {
    const auto v = cfg.reals(key);
    if (v.empty()) throw fail(std::string(key) + " is empty");
    for (double w : v)
      if (!(w >= 0.0) || !std::isfinite(w)) throw fail(std::string(key) + " values must be finite and >= 0");
  }
  if (cfg.integers("sweep.t_star").empty()) throw fail("sweep.t_star is empty");
  if (cfg.integers("sweep.seeds").empty()) throw fail("sweep.seeds is empty");
}

// ---- run bookkeeping -----------------------------------------------------

/// Writes <command>.config (resolved) and <command>.manifest.json.
class RunRecorder {
 public:
  RunRecorder(const RunContext& ctx, std::string command)
      : ctx_(ctx), command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

  void input(const fs::path& p) { inputs_[p.string()] = io::file_checksum(p); }
  void output(const fs::path& p) { outputs_[p.filename().string()] = io::file_checksum(p); }
  void stage(json s) { stages_.push_back(std::move(s)); }

  void finish() {
    const auto config_path = ctx_.out_dir / (command_ + ".config");
    const auto text = ctx_.cfg.resolved_text();
    io::write_file(config_path, text);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json m{{"command", command_},
           {"seed", ctx_.seed()},
           {"resolved_config", config_path.filename().string()},
           {"config_checksum", io::checksum(text)},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"stages", stages_},
           {"wall_clock_seconds", secs}};
    io::write_file(ctx_.out_dir / (command_ + ".manifest.json"), m.dump(2) + "\n");
  }

 private:
  const RunContext& ctx_;
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  json inputs_ = json::object(), outputs_ = json::object(), stages_ = json::array();
};

inline void record_corpus(RunRecorder& rec, const Corpus& c) {
  for (const auto& f : c.files) rec.input(f);
}

// ---- pairs ---------------------------------------------------------------

struct PairsOutcome {
  std::vector<pairing::TrainingPair> pairs;
  std::optional<double> threshold;
  std::size_t low = 0, high = 0;
};

inline PairsOutcome mine_configured_pairs(const RunContext& ctx, const Corpus& c) {
  PairsOutcome out;
  if (ctx.cfg.str("pairs.mode") == "condition") {
    out.pairs = condition_pairs(ctx, c);
    return out;
  }
  out.threshold = pair_threshold(ctx, c);
  const auto part = pairing::split_by_threshold(c.property, *out.threshold);
  out.low = part.low.size();
  out.high = part.high.size();
  out.pairs = threshold_pairs(c, *out.threshold);
  return out;
}

inline fs::path cmd_pairs(const RunContext& ctx) {
  validate(ctx);
  RunRecorder rec(ctx, "pairs");
  const auto corpus = load_corpus(ctx);
  record_corpus(rec, corpus);
  const auto res = mine_configured_pairs(ctx, corpus);
  const auto path = ctx.out_dir / "pairs.csv";
  io::write_file(path, pairing::pairs_csv(res.pairs, corpus.keys));
  rec.output(path);
  json st{{"stage", "mine"}, {"mode", ctx.cfg.str("pairs.mode")}, {"pairs", res.pairs.size()}};
  if (res.threshold) {
    st["threshold"] = *res.threshold;
    st["low"] = res.low;
    st["high"] = res.high;
  }
  rec.stage(st);
  rec.finish();
  return path;
}

// ---- train ---------------------------------------------------------------

inline std::vector<denoiser::TrainingExample> training_examples(const std::vector<pairing::TrainingPair>& pairs,
                                                                const Corpus& c, const Encoder& enc) {
  std::vector<denoiser::TrainingExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.seed_id >= c.size() || p.target_id >= c.size()) {
      throw Error(ErrorCode::Data, "pair index outside the corpus");
    }
    out.push_back({enc.latent(c, p.target_id), ConditionSlot(p.condition), enc.anchor(c, p.seed_id)});
  }
  return out;
}

inline denoiser::DenoiserShape model_shape(const Config& cfg, int latent_dim, int cond_dim) {
  denoiser::DenoiserShape s;
  s.latent_dim = latent_dim;
  s.cond_dim = cond_dim;
  s.align_dim = latent_dim;
  s.cond_proj_dim = static_cast<int>(cfg.integer("model.cond_proj_dim"));
  s.psi_hidden = static_cast<int>(cfg.integer("model.psi_hidden"));
  s.time_dim = static_cast<int>(cfg.integer("model.time_dim"));
  s.hidden.clear();
  for (long long h : cfg.integers("model.hidden")) s.hidden.push_back(static_cast<int>(h));
  return s;
}

/// Saves a checkpoint whose sidecar also pins the codec it was trained with.
inline void save_checkpoint(const denoiser::Checkpoint& ck, const fs::path& path, const std::string& codec_checksum) {
  ck.save(path);
  const auto sidecar = fs::path(path.string() + ".json");
  auto m = json::parse(io::read_file(sidecar));
  m["codec_checksum"] = codec_checksum;
  io::write_file(sidecar, m.dump(2) + "\n");
}

struct TrainOutcome {
  std::vector<fs::path> checkpoints;
  std::vector<std::vector<double>> loss_curves;
};

inline TrainOutcome cmd_train(const RunContext& ctx) {
  validate(ctx);
  const Config& cfg = ctx.cfg;
  RunRecorder rec(ctx, "train");
  const auto corpus = load_corpus(ctx);
  record_corpus(rec, corpus);
  const auto stages = curriculum_stages(cfg);

  // Pairs per stage: from the pairs file for a single stage, mined in memory for a curriculum.
  std::vector<std::vector<pairing::TrainingPair>> stage_pairs;
  std::vector<json> stage_info;
  if (stages) {
    const auto built = pairing::build_curriculum_by(*stages, corpus.property, [&](const pairing::Partition& part) {
      auto pairs = corpus.molecules
                       ? pairing::mine_pairs(part, corpus.fps, corpus.keys)
                       : pairing::mine_pairs_by(part, [&](std::size_t a, std::size_t b) { return similarity(corpus, a, b); },
                                                &corpus.keys);
      return pairs;
    });
    for (const auto& sp : built) {
      auto pairs = sp.pairs;
      for (auto& p : pairs) p.condition = side_condition(corpus.property[p.target_id], sp.stage.resolved_threshold);
      stage_pairs.push_back(std::move(pairs));
      json info{{"stage", sp.stage.stage_index},
                {"threshold", sp.stage.resolved_threshold},
                {"low", sp.partition.low.size()},
                {"high", sp.partition.high.size()}};
      if (sp.stage.percentile) info["percentile"] = *sp.stage.percentile;
      stage_info.push_back(info);
    }
  } else {
    const auto path = ctx.input("train.pairs", "pairs.csv");
    if (!fs::exists(path)) throw Error(ErrorCode::Io, "pairs file " + path.string() + " not found; run `phame pairs` first");
    rec.input(path);
    const auto table = pairing::parse_pairs_csv(io::read_file(path));
    for (std::size_t i = 0; i < table.pairs.size(); ++i) {
      const auto& p = table.pairs[i];
      if (p.seed_id >= corpus.size() || p.target_id >= corpus.size() || table.seed_smiles[i] != corpus.keys[p.seed_id] ||
          table.target_smiles[i] != corpus.keys[p.target_id]) {
        throw Error(ErrorCode::Data, "pairs file row " + std::to_string(i + 1) + " does not match the corpus");
      }
    }
    stage_pairs.push_back(table.pairs);
    stage_info.push_back({{"stage", 1}});
  }
  for (std::size_t s = 0; s < stage_pairs.size(); ++s) {
    if (stage_pairs[s].empty()) throw Error(ErrorCode::InsufficientData, "stage " + std::to_string(s + 1) + " has no pairs");
  }

  const Encoder enc = fit_encoder(ctx, corpus);
  const auto codec_path = ctx.out_dir / "codec.bin";
  const std::string codec_bytes = serialize_encoder(enc);
  io::write_file(codec_path, codec_bytes);
  rec.output(codec_path);
  const std::string codec_sum = io::checksum(codec_bytes);

  const auto sched = make_schedule(cfg);
  const int cond_dim = static_cast<int>(stage_pairs.front().front().condition.size());
  denoiser::Denoiser model(model_shape(cfg, enc.dimension(), cond_dim), derive_seed(ctx.seed(), "init", 0));

  TrainOutcome out;
  std::string curve = "stage,epoch,loss\n";
  for (std::size_t s = 0; s < stage_pairs.size(); ++s) {
    const auto data = training_examples(stage_pairs[s], corpus, enc);
    auto tc = make_train_config(cfg, ctx.seed());
    tc.rng_seed = derive_seed(ctx.seed(), "train", s);
    if (stages) {
      const auto& ov = (*stages)[s].overrides;
      if (ov.learning_rate) tc.learning_rate = *ov.learning_rate;
      if (ov.epochs) tc.epochs = *ov.epochs;
    }
    auto res = denoiser::train(std::move(model), data, sched, tc);
    model = denoiser::Denoiser::from_parameters(res.model.shape(), res.raw_parameters);
    for (std::size_t e = 0; e < res.loss_curve.size(); ++e) {
      curve += std::to_string(s + 1) + ',' + std::to_string(e + 1) + ',' + io::format_real(res.loss_curve[e]) + '\n';
    }
    const auto ck = denoiser::Checkpoint::from_training(res, ctx.seed());
    const auto path = ctx.out_dir / (stages ? "checkpoint_stage" + std::to_string(s + 1) + ".bin" : "checkpoint.bin");
    save_checkpoint(ck, path, codec_sum);
    rec.output(path);
    out.checkpoints.push_back(path);
    auto info = stage_info[s];
    info["pairs"] = data.size();
    info["learning_rate"] = tc.learning_rate;
    info["epochs_run"] = res.epochs_run;
    info["initial_loss"] = res.loss_curve.front();
    info["final_loss"] = res.loss_curve.back();
    rec.stage(info);
    out.loss_curves.push_back(std::move(res.loss_curve));
  }
  if (stages) {
    // the last stage is also the default inference checkpoint
    const auto final_path = ctx.out_dir / "checkpoint.bin";
    fs::copy_file(out.checkpoints.back(), final_path, fs::copy_options::overwrite_existing);
    fs::copy_file(out.checkpoints.back().string() + ".json", final_path.string() + ".json",
                  fs::copy_options::overwrite_existing);
    rec.output(final_path);
  }
  const auto curve_path = ctx.out_dir / "loss_curve.csv";
  io::write_file(curve_path, curve);
  rec.output(curve_path);
  rec.finish();
  return out;
}

// ---- generation ----------------------------------------------------------

/// Everything needed to turn latents into outputs.
struct GenerationWorld {
  Corpus corpus;
  Encoder encoder;
  denoiser::Denoiser model;
  diffusion::NoiseSchedule schedule;
};

inline GenerationWorld load_generation_world(const RunContext& ctx, RunRecorder* rec) {
  auto corpus = load_corpus(ctx);
  if (rec) record_corpus(*rec, corpus);
  const auto ck_path = ctx.input("generate.checkpoint", "checkpoint.bin");
  const auto codec_path = ctx.input("generate.codec", "codec.bin");
  for (const auto& p : {ck_path, codec_path})
    if (!fs::exists(p)) throw Error(ErrorCode::Io, p.string() + " not found; run `phame train` first");
  const auto codec_bytes = io::read_file(codec_path);
  const auto sidecar = fs::path(ck_path.string() + ".json");
  if (fs::exists(sidecar)) {
    const auto m = json::parse(io::read_file(sidecar), nullptr, false);
    if (!m.is_discarded() && m.contains("codec_checksum") && m["codec_checksum"] != io::checksum(codec_bytes)) {
      throw Error(ErrorCode::ChecksumMismatch, "checkpoint " + ck_path.string() + " was trained with a different codec");
    }
  }
  if (rec) {
    rec->input(ck_path);
    rec->input(codec_path);
  }
  auto enc = load_encoder(ctx, corpus, codec_bytes);
  auto ck = denoiser::Checkpoint::load(ck_path);
  if (ck.shape.latent_dim != enc.dimension()) {
    throw Error(ErrorCode::DimensionMismatch, "checkpoint latent dimension differs from the codec");
  }
  return {std::move(corpus), std::move(enc), ck.inference_model(), make_schedule(ctx.cfg)};
}

struct EditSeed {
  std::string key;
  RealVector z;
  RealVector anchor;
};

inline std::vector<EditSeed> edit_seeds(const RunContext& ctx, const GenerationWorld& w, RunRecorder* rec) {
  std::vector<EditSeed> out;
  if (const auto file = ctx.cfg.raw("generate.seeds"); file && !file->empty()) {
    const auto path = ctx.resolve(*file);
    if (rec) rec->input(path);
    const int width = w.encoder.pca->width(), radius = w.encoder.pca->radius();
    for (const auto& e : chem::read_corpus(path)) {
      if (!chem::is_valid(e.smiles)) {
        throw Error(ErrorCode::Data, path.string() + " line " + std::to_string(e.line) + ": invalid seed molecule");
      }
      const auto mol = chem::parse_smiles(e.smiles);
      const auto fp = chem::morgan_fingerprint(mol, radius, width);
      out.push_back({chem::canonical_form(mol), w.encoder.pca->encode(fp), w.encoder.align->embed(fp)});
    }
    if (out.empty()) throw Error(ErrorCode::EmptyInput, path.string() + " holds no seeds");
    return out;
  }
  // default: the lowest-index corpus items below the pairing threshold
  const double theta = pair_threshold(ctx, w.corpus);
  const auto part = pairing::split_by_threshold(w.corpus.property, theta);
  const auto n = std::min<std::size_t>(part.low.size(), static_cast<std::size_t>(ctx.cfg.integer("generate.seed_count")));
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = part.low[k];
    out.push_back({w.corpus.keys[i], w.encoder.latent(w.corpus, i), w.encoder.anchor(w.corpus, i)});
  }
  if (out.empty()) throw Error(ErrorCode::EmptyInput, "no edit seeds");
  return out;
}

inline std::string decode_output(const GenerationWorld& w, const RealVector& z) {
  if (!all_finite(z)) return {};
  return w.encoder.pca ? w.encoder.pca->decode_label(z) : format_point(z);
}

inline void check_condition(const GenerationWorld& w, const RealVector& c) {
  if (static_cast<int>(c.size()) != w.model.shape().cond_dim) {
    throw Error(ErrorCode::Config, "generate.condition has " + std::to_string(c.size()) + " values but the model expects " +
                                       std::to_string(w.model.shape().cond_dim));
  }
}

/// Edits every seed samples_per_seed times; row r uses rng stream r of `root`.
inline std::vector<eval::GenerationRow> run_edits(const RunContext& ctx, const GenerationWorld& w,
                                                  const std::vector<EditSeed>& seeds, const diffusion::GuidanceConfig& g,
                                                  const diffusion::SamplerConfig& s, std::uint64_t root) {
  const auto c = ctx.cfg.reals("generate.condition");
  check_condition(w, c);
  const auto per = static_cast<std::size_t>(ctx.cfg.integer("generate.samples_per_seed"));
  const std::string label = ctx.cfg.raw("generate.target_label").value_or("");
  std::vector<eval::GenerationRow> rows;
  for (const auto& seed : seeds) {
    for (std::size_t k = 0; k < per; ++k) {
      const std::uint64_t rs = derive_seed(root, "generate", rows.size());
      const auto z = diffusion::edit(w.model, seed.z, ConditionSlot(c), ConditionSlot(seed.anchor), w.schedule, g, s, rs);
      // t* = 0 hands the seed back untouched
      const std::string out = s.edit_t_star == 0 ? seed.key : decode_output(w, z);
      rows.push_back({seed.key, out, c, rs, label});
    }
  }
  return rows;
}

inline std::vector<eval::GenerationRow> run_samples(const RunContext& ctx, const GenerationWorld& w,
                                                    const diffusion::GuidanceConfig& g, const diffusion::SamplerConfig& s,
                                                    std::uint64_t root) {
  const auto c = ctx.cfg.reals("generate.condition");
  check_condition(w, c);
  const std::string label = ctx.cfg.raw("generate.target_label").value_or("");
  std::vector<eval::GenerationRow> rows;
  for (long long r = 0; r < ctx.cfg.integer("generate.count"); ++r) {
    const std::uint64_t rs = derive_seed(root, "generate", static_cast<std::uint64_t>(r));
    const auto z = diffusion::sample(w.model, ConditionSlot(c), ConditionSlot::null(), w.schedule, g, s, rs);
    rows.push_back({"", decode_output(w, z), c, rs, label});
  }
  return rows;
}

inline fs::path write_generations(const RunContext& ctx, const std::vector<eval::GenerationRow>& rows) {
  const auto path = ctx.out_dir / "generations.csv";
  io::write_file(path, eval::generations_csv(rows, ctx.cfg.has("generate.target_label")));
  return path;
}

inline fs::path cmd_generate(const RunContext& ctx) {
  validate(ctx);
  const bool edit = ctx.cfg.str("generate.mode") == "edit";
  RunRecorder rec(ctx, edit ? "edit" : "sample");
  const auto w = load_generation_world(ctx, &rec);
  const auto g = make_guidance(ctx.cfg);
  const auto s = make_sampler(ctx.cfg, edit);
  std::vector<eval::GenerationRow> rows;
  if (edit) rows = run_edits(ctx, w, edit_seeds(ctx, w, &rec), g, s, ctx.seed());
  else rows = run_samples(ctx, w, g, s, ctx.seed());
  const auto path = write_generations(ctx, rows);
  rec.output(path);
  rec.stage({{"stage", edit ? "edit" : "sample"}, {"records", rows.size()}});
  rec.finish();
  return path;
}

inline fs::path cmd_edit(RunContext ctx) {
  ctx.cfg.set("generate.mode", "edit");
  return cmd_generate(ctx);
}

inline fs::path cmd_sample(RunContext ctx) {
  ctx.cfg.set("generate.mode", "sample");
  return cmd_generate(ctx);
}

// ---- evaluation ----------------------------------------------------------

/// Property of a molecule: the surrogate, or the corpus column looked up by
/// canonical form.
inline std::function<double(const std::string&, const chem::Molecule&)> property_oracle(const RunContext& ctx,
                                                                                      const Corpus& c) {
  if (ctx.cfg.integer("corpus.property_column") < 0) {
    return [](const std::string&, const chem::Molecule& m) { return chem::surrogate_property(m); };
  }
  auto table = std::make_shared<std::unordered_map<std::string, double>>();
  for (std::size_t i = 0; i < c.size(); ++i) table->emplace(c.keys[i], c.property[i]);
  return [table](const std::string& canonical, const chem::Molecule&) {
    const auto it = table->find(canonical);
    if (it == table->end()) {
      throw Error(ErrorCode::OracleUnavailable, "no property value for " + canonical + " in the corpus column");
    }
    return it->second;
  };
}

inline eval::TargetRegion evaluation_region(const RunContext& ctx, const Corpus& c) {
  if (auto r = configured_region(ctx.cfg)) return *r;
  return {pair_threshold(ctx, c), std::nullopt};
}

inline void synthetic_metrics(const RunContext& ctx, const Corpus& c, const std::vector<eval::GenerationRow>& rows,
                              eval::MetricsReport& report) {
  const int dim = static_cast<int>(c.points.front().size());
  const eval::CanonicalSet train(c.keys.begin(), c.keys.end());
  std::vector<eval::EditObservation> obs(rows.size());
  eval::CanonicalSet distinct;
  std::size_t valid = 0;
  const auto lambda = ctx.cfg.opt_real("eval.objective_lambda");
  const auto div = ctx.cfg.str("eval.objective_divergence") == "cosine" ? eval::Divergence::Cosine : eval::Divergence::L2;
  double objective = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto z = parse_point(rows[i].generated);
    if (!z || static_cast<int>(z->size()) != dim) continue;
    const auto seed = parse_point(rows[i].seed);
    if (!seed) throw Error(ErrorCode::MissingSeed, "record " + std::to_string(i) + " has no usable seed point");
    ++valid;
    distinct.insert(rows[i].generated);
    const double sim = squared_norm(*z) > 0.0 && squared_norm(*seed) > 0.0 ? cosine(*seed, *z) : 0.0;
    obs[i] = {true, synthetic_property(*z), synthetic_property(*seed), sim, !train.contains(rows[i].generated)};
    if (lambda) objective += eval::objective_value({obs[i].property}, rows[i].condition, sim, div, *lambda);
  }
  report.set("Val", eval::ratio(valid, rows.size(), "over all records"));
  report.set("Uniq", eval::ratio(distinct.size(), valid, "over valid records"));
  eval::edit_metrics_from(obs, evaluation_region(ctx, c)).write(report);
  if (lambda) {
    report.set("Objective", valid ? eval::MetricValue::of(objective / static_cast<double>(valid), valid,
                                                          "mean over valid records, reported only")
                                  : eval::MetricValue::absent(0, "no valid records"));
  }
}

inline void molecule_metrics(const RunContext& ctx, const Corpus& c, const std::vector<eval::GenerationRow>& rows,
                             bool core_only, eval::MetricsReport& report, RunRecorder* rec) {
  const auto gen = eval::to_generation_set(rows);
  const eval::CanonicalSet train(c.keys.begin(), c.keys.end());
  const auto oracle = property_oracle(ctx, c);
  report.set("Val", eval::validity(gen));
  report.set("Uniq", eval::uniqueness(gen));
  const bool edits = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return !r.seed.empty(); });
  if (edits) {
    eval::edit_metrics(gen, [&](const chem::Molecule& m) { return oracle(chem::canonical_form(m), m); },
                       evaluation_region(ctx, c), train)
        .write(report);
  } else {
    report.set("Nov", eval::novelty(gen, train));
  }
  if (core_only) return;

  const auto lambda = ctx.cfg.opt_real("eval.objective_lambda");
  if (lambda && edits) {
    const auto div = ctx.cfg.str("eval.objective_divergence") == "cosine" ? eval::Divergence::Cosine : eval::Divergence::L2;
    const auto per = eval::objective_report(
        gen, [&](const eval::MoleculeView& v) { return std::optional<RealVector>(RealVector{oracle(v.canonical, *v.molecule)}); },
        div, *lambda);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& o : per)
      if (o) sum += *o, ++n;
    report.set("Objective", n ? eval::MetricValue::of(sum / static_cast<double>(n), n, "mean over valid records, reported only")
                              : eval::MetricValue::absent(0, "no valid records"));
  }
  if (const auto thr = ctx.cfg.opt_real("eval.hit_threshold")) {
    const auto h = eval::novel_hit_metrics(gen, [&](const eval::MoleculeView& v) { return oracle(v.canonical, *v.molecule); },
                                           {}, *thr, c.fps, ctx.cfg.real("eval.top_fraction"));
    report.set("NovelTopScore", h.novel_top_score);
    report.set("NovelHitRatio", h.novel_hit_ratio);
  }
  if (const auto b = ctx.cfg.raw("eval.binders"); b && !b->empty()) {
    const auto path = ctx.resolve(*b);
    if (rec) rec->input(path);
    std::vector<chem::Fingerprint> binders;
    for (const auto& e : chem::read_corpus(path)) {
      const auto v = eval::view_molecule(e.smiles);
      if (!v.valid) throw Error(ErrorCode::Data, path.string() + " line " + std::to_string(e.line) + ": invalid binder");
      binders.push_back(*v.fingerprint);
    }
    report.set("MaxSimToBinders", eval::max_sim_to_binders(gen, binders));
  }
  if (const auto r = ctx.cfg.raw("eval.references"); r && !r->empty()) {
    std::vector<eval::EmbeddingTable> tables;
    for (const auto& e : ctx.cfg.strings("eval.embeddings")) {
      const auto path = ctx.resolve(e);
      if (rec) rec->input(path);
      tables.push_back(eval::parse_embedding_file(io::read_file(path)));
    }
    const auto spaces = ctx.cfg.strings("eval.spaces");
    for (const auto& name : spaces) {
      const bool known = name == "ecfp" || std::any_of(tables.begin(), tables.end(),
                                                       [&](const eval::EmbeddingTable& t) { return t.space == name; });
      if (!known) {
        throw Error(ErrorCode::Config, "eval.spaces names '" + name + "' but no file in eval.embeddings provides it");
      }
    }
    const auto ref_path = ctx.resolve(*r);
    if (rec) rec->input(ref_path);
    const auto refs = eval::parse_reference_csv(io::read_file(ref_path), tables);
    const auto queries = eval::retrieval_queries(gen, tables);
    const int n = static_cast<int>(ctx.cfg.integer("eval.retrieval_n"));
    for (const auto& name : spaces) {
      const auto space = name == "ecfp" ? eval::tanimoto_space() : eval::cosine_space(name);
      report.set("Top1[" + name + "]", eval::top1_cluster_accuracy(queries, refs, space));
      for (long long k : ctx.cfg.integers("eval.k")) {
        const int ki = static_cast<int>(k);
        const std::string suffix = "@" + std::to_string(k) + "[" + name + "]";
        if (static_cast<std::size_t>(ki) <= refs.class_count()) {
          report.set("Retrieval" + suffix, eval::moa_retrieval_rate(queries, refs, space, ki, n));
        }
        if (static_cast<std::size_t>(ki) <= refs.pooled_size()) {
          report.set("kNN" + suffix, eval::knn_accuracy(queries, refs, space, ki));
        }
      }
    }
  }
}

/// Metrics for a list of generation rows.
inline eval::MetricsReport evaluate_rows(const RunContext& ctx, const Corpus& c, const std::vector<eval::GenerationRow>& rows,
                                         bool core_only = false, RunRecorder* rec = nullptr) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no generation records to evaluate");
  eval::MetricsReport report;
  if (c.molecules) molecule_metrics(ctx, c, rows, core_only, report, rec);
  else synthetic_metrics(ctx, c, rows, report);
  return report;
}

inline eval::MetricsReport cmd_eval(const RunContext& ctx) {
  validate(ctx);
  RunRecorder rec(ctx, "eval");
  const auto corpus = load_corpus(ctx);
  record_corpus(rec, corpus);
  const auto path = ctx.input("eval.generations", "generations.csv");
  if (!fs::exists(path)) throw Error(ErrorCode::Io, path.string() + " not found; run `phame edit` or `phame sample` first");
  rec.input(path);
  const auto rows = eval::parse_generations_csv(io::read_file(path));
  const auto report = evaluate_rows(ctx, corpus, rows, false, &rec);
  const auto json_path = ctx.out_dir / "metrics.json", text_path = ctx.out_dir / "metrics.txt";
  io::write_file(json_path, report.to_json().dump(2) + "\n");
  io::write_file(text_path, report.to_text());
  rec.output(json_path);
  rec.output(text_path);
  rec.stage({{"stage", "eval"}, {"records", rows.size()}, {"metrics", report.entries().size()}});
  rec.finish();
  return report;
}

// ---- sweep ---------------------------------------------------------------

struct SweepRow {
  double w_c = 0.0, w_a = 0.0;
  int t_star = 0;
  std::uint64_t seed = 0;
  eval::MetricValue tgt, sim, val, nts;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  auto cell = [](const eval::MetricValue& m) { return m.value ? io::format_real(*m.value) : std::string(); };
  std::string out = "w_c,w_a,t_star,seed,Tgt,Sim,Val,NTS\n";
  for (const auto& r : rows) {
    out += io::format_real(r.w_c) + ',' + io::format_real(r.w_a) + ',' + std::to_string(r.t_star) + ',' +
           std::to_string(r.seed) + ',' + cell(r.tgt) + ',' + cell(r.sim) + ',' + cell(r.val) + ',' + cell(r.nts) + '\n';
  }
  return out;
}

/// Grid order: seed, then t*, then w_c, then w_a. Sequential by design.
inline std::vector<SweepRow> cmd_sweep(const RunContext& ctx) {
  validate(ctx);
  if (ctx.cfg.str("guidance.mode") != "compositional") {
    throw Error(ErrorCode::Config, "sweep needs guidance.mode = compositional");
  }
  RunRecorder rec(ctx, "sweep");
  const auto w = load_generation_world(ctx, &rec);
  const auto seeds = edit_seeds(ctx, w, &rec);
  std::vector<SweepRow> rows;
  for (long long sd : ctx.cfg.integers("sweep.seeds")) {
    for (long long t : ctx.cfg.integers("sweep.t_star")) {
      for (double wc : ctx.cfg.reals("sweep.w_c")) {
        for (double wa : ctx.cfg.reals("sweep.w_a")) {
          const auto gen = run_edits(ctx, w, seeds, make_guidance(ctx.cfg, wc, wa),
                                     make_sampler(ctx.cfg, true, static_cast<int>(t)), static_cast<std::uint64_t>(sd));
          const auto rep = evaluate_rows(ctx, w.corpus, gen, true);
          rows.push_back({wc, wa, static_cast<int>(t), static_cast<std::uint64_t>(sd), rep.get("Tgt"), rep.get("Sim"),
                          rep.get("Val"), rep.get("NTS")});
        }
      }
    }
  }
  const auto path = ctx.out_dir / "sweep.csv";
  io::write_file(path, sweep_csv(rows));
  rec.output(path);
  rec.stage({{"stage", "sweep"}, {"grid_points", rows.size()}, {"seeds_per_point", seeds.size()}});
  rec.finish();
  return rows;
}

}  // namespace phame::app
