#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "phame/app/config.hpp"
#include "phame/chem/canonical.hpp"
#include "phame/chem/corpus.hpp"
#include "phame/chem/fingerprint.hpp"
#include "phame/chem/property.hpp"
#include "phame/chem/smiles_parser.hpp"
#include "phame/chem/valence.hpp"
#include "phame/core/error.hpp"
#include "phame/core/io.hpp"
#include "phame/core/random.hpp"
#include "phame/core/vector_ops.hpp"
#include "phame/eval/generation.hpp"
#include "phame/latent/codec.hpp"
#include "phame/pairing/pairing.hpp"

namespace phame::app {

namespace fs = std::filesystem;

inline Schema make_schema() {
  using T = ValueType;
  Schema s;
  s.add("run.world", T::Choice, "synthetic", "molecules or synthetic", {"molecules", "synthetic"})
      .add("run.seed", T::UInt, "1", "root seed for every random stream")

      .add("corpus.path", T::String, std::nullopt, "molecule corpus: SMILES plus optional tab-separated columns")
      .add("corpus.property_column", T::Int, "-1", "numeric column holding the property; -1 uses the surrogate")
      .add("corpus.condition_columns", T::IntList, "", "numeric columns forming the condition vector")

      .add("synthetic.count", T::UInt, "1000", "number of corpus points")
      .add("synthetic.angles", T::UInt, "6", "mixture components per ring")
      .add("synthetic.arc_start_deg", T::Real, "15", "angle of the first component")
      .add("synthetic.arc_end_deg", T::Real, "165", "angle of the last component")
      .add("synthetic.radii", T::RealList, "3,5", "ring radii; the property is the latent norm")
      .add("synthetic.spread", T::Real, "0.4", "isotropic component standard deviation")

      .add("codec.latent_dim", T::UInt, "16", "PCA latent dimension (molecules)")
      .add("codec.fingerprint_width", T::UInt, "2048", "fingerprint bits")
      .add("codec.fingerprint_radius", T::UInt, "2", "fingerprint radius")

      .add("pairs.mode", T::Choice, "threshold", "threshold split or condition-vector mining", {"threshold", "condition"})
      .add("pairs.threshold", T::Real, std::nullopt, "property threshold; overrides the percentile")
      .add("pairs.percentile", T::Real, "0.5", "nearest-rank percentile used when no threshold is given")
      .add("pairs.condition_cutoff", T::Real, "0.5", "condition pairs need cosine below this")
      .add("pairs.max_pairs", T::UInt, "3", "condition pairs kept per seed")

      .add("schedule.steps", T::UInt, "1000", "diffusion steps T")
      .add("schedule.cosine_offset", T::Real, "0.008", "cosine schedule offset s")

      .add("model.hidden", T::UIntList, "128,128,128", "trunk widths")
      .add("model.time_dim", T::UInt, "32", "sinusoidal time embedding width")
      .add("model.psi_hidden", T::UInt, "0", "alignment projector width; 0 means 2D")
      .add("model.cond_proj_dim", T::UInt, "0", "condition projection width; 0 means D")

      .add("train.pairs", T::String, std::nullopt, "pairs CSV; default <out>/pairs.csv")
      .add("train.learning_rate", T::Real, "0.001", "Adam step size")
      .add("train.epochs", T::UInt, "100", "epochs")
      .add("train.batch_size", T::UInt, "64", "minibatch size")
      .add("train.gamma", T::Real, "0.01", "alignment loss weight")
      .add("train.tau", T::Real, "0.8", "alignment cosine margin")
      .add("train.p_uncond", T::Real, "0.1", "per-slot condition dropout probability")
      .add("train.ema_decay", T::Real, std::nullopt, "EMA decay for inference weights")
      .add("train.warmup_epochs", T::UInt, "0", "linear learning-rate warmup")
      .add("train.dropout_rate", T::Real, "0", "hidden-unit dropout")
      .add("train.early_stop_patience", T::UInt, std::nullopt, "stop after this many epochs without improvement")

      .add("curriculum.percentiles", T::RealList, "", "per-stage percentiles, strictly increasing")
      .add("curriculum.thresholds", T::RealList, "", "per-stage thresholds, strictly increasing")
      .add("curriculum.learning_rates", T::RealList, "", "per-stage learning rates")
      .add("curriculum.epochs", T::UIntList, "", "per-stage epochs")

      .add("guidance.mode", T::Choice, "compositional", "standard or compositional", {"standard", "compositional"})
      .add("guidance.w", T::Real, "1", "standard guidance scale")
      .add("guidance.w_c", T::Real, "1", "property guidance scale")
      .add("guidance.w_a", T::Real, "0", "alignment guidance scale")

      .add("sampler.sigma_rule", T::Choice, "ddpm", "posterior or ddim noise", {"ddpm", "ddim"})
      .add("sampler.ddim_eta", T::Real, "0", "eta for the ddim rule")
      .add("sampler.t_star", T::UInt, "900", "edit noise level")

      .add("generate.mode", T::Choice, "edit", "edit seeds or sample de novo", {"edit", "sample"})
      .add("generate.checkpoint", T::String, std::nullopt, "default <out>/checkpoint.bin")
      .add("generate.codec", T::String, std::nullopt, "default <out>/codec.bin")
      .add("generate.seeds", T::String, std::nullopt, "SMILES file of seeds; default: low side of the corpus")
      .add("generate.seed_count", T::UInt, "100", "corpus seeds used when no seed file is given")
      .add("generate.samples_per_seed", T::UInt, "1", "outputs per seed")
      .add("generate.count", T::UInt, "100", "de novo samples")
      .add("generate.condition", T::RealList, "1", "condition vector")
      .add("generate.target_label", T::String, std::nullopt, "class label recorded with every output")

      .add("eval.generations", T::String, std::nullopt, "default <out>/generations.csv")
      .add("eval.target_lower", T::Real, std::nullopt, "target region lower bound; default the pairing threshold")
      .add("eval.target_upper", T::Real, std::nullopt, "target region upper bound")
      .add("eval.references", T::String, std::nullopt, "reference library CSV")
      .add("eval.spaces", T::StringList, "ecfp", "similarity spaces for retrieval")
      .add("eval.embeddings", T::StringList, "", "embedding files")
      .add("eval.k", T::UIntList, "1,3,5", "retrieval and kNN cutoffs")
      .add("eval.retrieval_n", T::UInt, "3", "top-n mean for retrieval")
      .add("eval.binders", T::String, std::nullopt, "SMILES file of known binders")
      .add("eval.hit_threshold", T::Real, std::nullopt, "hit threshold on the property oracle")
      .add("eval.top_fraction", T::Real, "0.05", "fraction averaged by the novel top score")
      .add("eval.objective_lambda", T::Real, std::nullopt, "lambda of the reported objective")
      .add("eval.objective_divergence", T::Choice, "l2", "objective divergence", {"l2", "cosine"})

      .add("sweep.w_c", T::RealList, "0,1,3,6,12", "property guidance axis")
      .add("sweep.w_a", T::RealList, "0,1,3", "alignment guidance axis")
      .add("sweep.t_star", T::UIntList, "900", "edit noise axis")
      .add("sweep.seeds", T::UIntList, "1", "generation seeds");
  return s;
}

inline const Schema& schema() {
  static const Schema s = make_schema();
  return s;
}

struct RunContext {
  Config cfg;
  fs::path base_dir;
  fs::path out_dir;

  std::uint64_t seed() const { return static_cast<std::uint64_t>(cfg.integer("run.seed")); }
  bool molecules() const { return cfg.str("run.world") == "molecules"; }

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }
  /// A configured input path, or a file in the output directory.
  fs::path input(const std::string& key, const std::string& default_name) const {
    const auto v = cfg.raw(key);
    return v && !v->empty() ? resolve(*v) : out_dir / default_name;
  }
};

/// Items the pipeline works on: molecules or synthetic latent points.
struct Corpus {
  bool molecules = false;
  std::vector<std::string> keys;
  std::vector<double> property;
  std::vector<RealVector> conditions;
  std::vector<chem::Fingerprint> fps;
  std::vector<RealVector> points;
  std::vector<fs::path> files;

  std::size_t size() const { return keys.size(); }
};

inline std::string format_point(const RealVector& z) { return eval::format_condition(z); }

inline std::optional<RealVector> parse_point(const std::string& s) {
  try {
    auto v = eval::parse_condition(s);
    if (v.empty() || !all_finite(v)) return std::nullopt;
    return v;
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline latent::GaussianMixtureCodec mixture_codec(const Config& cfg) {
  const auto radii = cfg.reals("synthetic.radii");
  const auto n = cfg.integer("synthetic.angles");
  const double a0 = cfg.real("synthetic.arc_start_deg"), a1 = cfg.real("synthetic.arc_end_deg");
  std::vector<RealVector> centers;
  for (double r : radii) {
    for (long long k = 0; k < n; ++k) {
      const double deg = n == 1 ? a0 : a0 + (a1 - a0) * static_cast<double>(k) / static_cast<double>(n - 1);
      const double rad = deg * std::numbers::pi / 180.0;
      centers.push_back({r * std::cos(rad), r * std::sin(rad)});
    }
  }
  return latent::GaussianMixtureCodec(std::move(centers), cfg.real("synthetic.spread"));
}

inline double synthetic_property(const RealVector& z) { return std::sqrt(squared_norm(z)); }

inline Corpus load_corpus(const RunContext& ctx) {
  Corpus c;
  c.molecules = ctx.molecules();
  if (!c.molecules) {
    const auto codec = mixture_codec(ctx.cfg);
    Rng rng(derive_seed(ctx.seed(), "corpus", 0));
    for (long long i = 0; i < ctx.cfg.integer("synthetic.count"); ++i) {
      auto z = codec.sample(rng).z;
      c.keys.push_back(format_point(z));
      c.property.push_back(synthetic_property(z));
      c.conditions.push_back({c.property.back()});
      c.points.push_back(std::move(z));
    }
    return c;
  }
  const auto path = ctx.resolve(ctx.cfg.str("corpus.path"));
  c.files.push_back(path);
  const auto entries = chem::read_corpus(path);
  const long long pcol = ctx.cfg.integer("corpus.property_column");
  const auto ccols = ctx.cfg.integers("corpus.condition_columns");
  const long long ncols = entries.empty() ? 0 : static_cast<long long>(entries.front().columns.size());
  if (pcol >= ncols) {
    throw Error(ErrorCode::Config, "corpus.property_column = " + std::to_string(pcol) + " but " + path.string() +
                                       " has " + std::to_string(ncols) + " numeric columns");
  }
  for (long long col : ccols) {
    if (col < 0 || col >= ncols) {
      throw Error(ErrorCode::Config, "corpus.condition_columns names column " + std::to_string(col) + " but " +
                                         path.string() + " has " + std::to_string(ncols) + " numeric columns");
    }
  }
  const int width = static_cast<int>(ctx.cfg.integer("codec.fingerprint_width"));
  const int radius = static_cast<int>(ctx.cfg.integer("codec.fingerprint_radius"));
  for (const auto& e : entries) {
    chem::Molecule mol;
    try {
      mol = chem::parse_smiles(e.smiles);
    } catch (const Error& err) {
      throw Error(ErrorCode::Data, path.string() + " line " + std::to_string(e.line) + ": " + err.what());
    }
    if (!mol.connected() || !chem::valences_ok(mol)) {
      throw Error(ErrorCode::Data, path.string() + " line " + std::to_string(e.line) + ": invalid molecule");
    }
    c.keys.push_back(chem::canonical_form(mol));
    c.fps.push_back(chem::morgan_fingerprint(mol, radius, width));
    c.property.push_back(pcol >= 0 ? e.columns[pcol] : chem::surrogate_property(mol));
    RealVector cond;
    for (long long col : ccols) cond.push_back(e.columns[col]);
    c.conditions.push_back(std::move(cond));
  }
  if (c.size() < 2) throw Error(ErrorCode::Data, path.string() + " needs at least two molecules");
  return c;
}

inline double similarity(const Corpus& c, std::size_t a, std::size_t b) {
  return c.molecules ? chem::tanimoto(c.fps[a], c.fps[b]) : cosine(c.points[a], c.points[b]);
}

inline double pair_threshold(const RunContext& ctx, const Corpus& c) {
  if (const auto t = ctx.cfg.opt_real("pairs.threshold")) return *t;
  return pairing::percentile_threshold(c.property, ctx.cfg.real("pairs.percentile"));
}

/// Side indicator used as the condition in threshold mode.
inline RealVector side_condition(double property, double threshold) { return {property >= threshold ? 1.0 : -1.0}; }

inline std::vector<pairing::TrainingPair> threshold_pairs(const Corpus& c, double threshold) {
  const auto part = pairing::split_by_threshold(c.property, threshold);
  auto pairs = c.molecules ? pairing::mine_pairs(part, c.fps, c.keys)
                           : pairing::mine_pairs_by(part, [&](std::size_t a, std::size_t b) { return similarity(c, a, b); },
                                                    &c.keys);
  for (auto& p : pairs) p.condition = side_condition(c.property[p.target_id], threshold);
  return pairs;
}

inline std::vector<pairing::TrainingPair> condition_pairs(const RunContext& ctx, const Corpus& c) {
  if (c.molecules && ctx.cfg.integers("corpus.condition_columns").empty()) {
    throw Error(ErrorCode::Config, "pairs.mode = condition needs corpus.condition_columns");
  }
  const double cutoff = ctx.cfg.real("pairs.condition_cutoff");
  const int max_pairs = static_cast<int>(ctx.cfg.integer("pairs.max_pairs"));
  if (c.molecules) return pairing::mine_condition_pairs(c.conditions, c.fps, c.keys, cutoff, max_pairs);
  return pairing::mine_condition_pairs_by(c.conditions, [&](std::size_t a, std::size_t b) { return similarity(c, a, b); },
                                          cutoff, max_pairs, &c.keys);
}

/// Latent map for a corpus: PCA plus alignment embedder for molecules, the
/// identity for synthetic points.
struct Encoder {
  std::optional<latent::PcaCodec> pca;
  std::optional<latent::AlignEmbedder> align;
  std::optional<latent::GaussianMixtureCodec> mixture;

  int dimension() const { return pca ? pca->dimension() : mixture->dimension(); }

  RealVector latent(const Corpus& c, std::size_t i) const { return pca ? pca->encode(c.fps[i]) : c.points[i]; }
  RealVector anchor(const Corpus& c, std::size_t i) const { return pca ? align->embed(c.fps[i]) : c.points[i]; }
};

inline constexpr char kMixtureMagic[] = "PHAMEM1";

inline std::string serialize_encoder(const Encoder& e) {
  if (e.pca) return e.pca->serialize();
  io::BinaryWriter w;
  w.bytes(std::string_view(kMixtureMagic, 7));
  w.u32(static_cast<std::uint32_t>(e.mixture->centers().size()));
  for (const auto& c : e.mixture->centers()) w.reals(c);
  w.f64(e.mixture->spread());
  return w.buffer();
}

inline Encoder fit_encoder(const RunContext& ctx, const Corpus& c) {
  Encoder e;
  if (!c.molecules) {
    e.mixture = mixture_codec(ctx.cfg);
    return e;
  }
  const int dim = static_cast<int>(ctx.cfg.integer("codec.latent_dim"));
  e.pca = latent::PcaCodec::fit(c.fps, dim);
  e.pca->set_labels(c.keys);
  e.align = latent::AlignEmbedder::fit(c.fps, dim);
  return e;
}

/// Reloads a saved encoder and checks it against the corpus it claims to cover.
inline Encoder load_encoder(const RunContext& ctx, const Corpus& c, const std::string& bytes) {
  Encoder e;
  if (!c.molecules) {
    io::BinaryReader r(bytes);
    if (r.bytes(7) != std::string_view(kMixtureMagic, 7)) throw Error(ErrorCode::Data, "codec file is not a mixture codec");
    std::vector<RealVector> centers(r.u32());
    for (auto& ctr : centers) ctr = r.reals();
    e.mixture.emplace(std::move(centers), r.f64());
    if (serialize_encoder(Encoder{std::nullopt, std::nullopt, mixture_codec(ctx.cfg)}) != bytes) {
      throw Error(ErrorCode::ChecksumMismatch, "codec does not match the [synthetic] configuration");
    }
    return e;
  }
  e.pca = latent::PcaCodec::deserialize(bytes);
  if (e.pca->labels() != c.keys) throw Error(ErrorCode::ChecksumMismatch, "codec was fitted on a different corpus");
  e.align = latent::AlignEmbedder::fit(c.fps, e.pca->dimension());
  return e;
}

}  // namespace phame::app
