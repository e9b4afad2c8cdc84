#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "phame/chem/canonical.hpp"
#include "phame/chem/fingerprint.hpp"
#include "phame/chem/smiles_parser.hpp"
#include "phame/core/error.hpp"
#include "phame/core/io.hpp"
#include "phame/core/random.hpp"
#include "phame/core/vector_ops.hpp"
#include "phame/latent/pca.hpp"

namespace phame::latent {

inline constexpr int kDefaultLatentDim = 16;
inline constexpr char kCodecMagic[] = "PHAMEC1";

inline void require_finite(const RealVector& v, const char* what) {
  if (!all_finite(v)) throw Error(ErrorCode::Data, std::string(what) + " has non-finite components");
}

/// Linear codec over fingerprint bits: centered projection onto the top-D
/// principal directions, decoded by nearest reference latent.
class PcaCodec {
 public:
  static PcaCodec fit(const std::vector<chem::Fingerprint>& corpus, int dim,
                      const PowerIterationOptions& opt = {}) {
    if (dim < 1) throw Error(ErrorCode::InvalidParameters, "latent dimension must be >= 1");
    if (corpus.size() < static_cast<std::size_t>(dim)) {
      throw Error(ErrorCode::InsufficientData, "corpus of " + std::to_string(corpus.size()) +
                                                   " items cannot support dimension " + std::to_string(dim));
    }
    PcaCodec codec;
    codec.width_ = corpus.front().width();
    codec.radius_ = corpus.front().radius();
    codec.seed_ = opt.seed;
    for (const auto& fp : corpus) {
      if (fp.width() != codec.width_) throw Error(ErrorCode::WidthMismatch, "mixed fingerprint widths in corpus");
    }
    codec.mean_.assign(codec.width_, 0.0);
    std::vector<RealVector> rows;
    rows.reserve(corpus.size());
    for (const auto& fp : corpus) {
      rows.push_back(fp.as_reals());
      for (int c = 0; c < codec.width_; ++c) codec.mean_[c] += rows.back()[c];
    }
    for (double& m : codec.mean_) m /= static_cast<double>(corpus.size());
    for (auto& r : rows)
      for (int c = 0; c < codec.width_; ++c) r[c] -= codec.mean_[c];
    auto pc = principal_components(rows, dim, opt);
    codec.components_ = std::move(pc.directions);
    codec.singular_values_ = std::move(pc.singular_values);
    for (const auto& fp : corpus) codec.reference_.push_back(codec.encode(fp));
    return codec;
  }

  int dimension() const { return static_cast<int>(components_.size()); }
  int width() const { return width_; }
  int radius() const { return radius_; }
  std::uint64_t seed() const { return seed_; }
  const RealVector& mean() const { return mean_; }
  const std::vector<RealVector>& components() const { return components_; }
  const std::vector<double>& singular_values() const { return singular_values_; }
  const std::vector<RealVector>& reference_latents() const { return reference_; }

  RealVector encode(const chem::Fingerprint& fp) const {
    if (fp.width() != width_) throw Error(ErrorCode::WidthMismatch, "fingerprint width differs from codec");
    RealVector centered = fp.as_reals();
    for (int c = 0; c < width_; ++c) centered[c] -= mean_[c];
    RealVector z(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) z[k] = dot(components_[k], centered);
    return z;
  }

  /// Index of the nearest reference latent; ties go to the lower index.
  std::size_t decode(const RealVector& z) const {
    if (z.size() != components_.size()) {
      throw Error(ErrorCode::DimensionMismatch, "latent dimension differs from codec");
    }
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < reference_.size(); ++i) {
      const double d = squared_distance(reference_[i], z);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  /// Canonical SMILES of the reference items, when the codec was fit on molecules.
  const std::vector<std::string>& labels() const { return labels_; }
  void set_labels(std::vector<std::string> labels) {
    if (labels.size() != reference_.size()) {
      throw Error(ErrorCode::InvalidParameters, "label count differs from reference set size");
    }
    labels_ = std::move(labels);
  }

  const std::string& decode_label(const RealVector& z) const {
    if (labels_.empty()) throw Error(ErrorCode::InvalidParameters, "codec has no reference labels");
    return labels_[decode(z)];
  }

  std::string corpus_hash() const {
    std::string joined;
    for (const auto& l : labels_) {
      joined += l;
      joined += '\n';
    }
    return io::checksum(joined);
  }

  std::string serialize() const {
    io::BinaryWriter w;
    w.bytes(std::string_view(kCodecMagic, 7));
    w.u32(static_cast<std::uint32_t>(dimension()));
    w.u32(static_cast<std::uint32_t>(width_));
    w.u32(static_cast<std::uint32_t>(radius_));
    w.u64(seed_);
    for (double m : mean_) w.f64(m);
    for (const auto& row : components_)
      for (double x : row) w.f64(x);
    for (double s : singular_values_) w.f64(s);
    w.u32(static_cast<std::uint32_t>(labels_.size()));
    for (const auto& l : labels_) w.str(l);
    return w.buffer();
  }

  /// Rebuilds a codec; reference latents are recomputed from the stored
  /// canonical strings.
  static PcaCodec deserialize(std::string_view bytes) {
    io::BinaryReader r(bytes);
    if (r.bytes(7) != std::string_view(kCodecMagic, 7)) throw Error(ErrorCode::Data, "not a codec file");
    PcaCodec codec;
    const auto dim = r.u32();
    codec.width_ = static_cast<int>(r.u32());
    codec.radius_ = static_cast<int>(r.u32());
    codec.seed_ = r.u64();
    if (dim == 0 || codec.width_ <= 0) throw Error(ErrorCode::Data, "codec header is corrupt");
    codec.mean_.resize(codec.width_);
    for (double& m : codec.mean_) m = r.f64();
    codec.components_.assign(dim, RealVector(codec.width_));
    for (auto& row : codec.components_)
      for (double& x : row) x = r.f64();
    codec.singular_values_.resize(dim);
    for (double& s : codec.singular_values_) s = r.f64();
    const auto n = r.u32();
    for (std::uint32_t i = 0; i < n; ++i) codec.labels_.push_back(r.str());
    if (!r.at_end()) throw Error(ErrorCode::Data, "trailing bytes in codec file");
    for (const auto& l : codec.labels_) {
      codec.reference_.push_back(
          codec.encode(chem::morgan_fingerprint(chem::parse_smiles(l), codec.radius_, codec.width_)));
    }
    return codec;
  }

  nlohmann::json manifest() const {
    return {{"format", kCodecMagic},
            {"dimension", dimension()},
            {"fingerprint_width", width_},
            {"fingerprint_radius", radius_},
            {"corpus_size", labels_.size()},
            {"corpus_hash", corpus_hash()},
            {"seed", seed_}};
  }

  /// Writes the binary codec and a "<path>.json" sidecar.
  void save(const std::filesystem::path& path) const {
    if (labels_.empty()) throw Error(ErrorCode::InvalidParameters, "only labeled codecs can be saved");
    const std::string bytes = serialize();
    io::write_file(path, bytes);
    auto m = manifest();
    m["checksum"] = io::checksum(bytes);
    io::write_file(path.string() + ".json", m.dump(2) + "\n");
  }

  static PcaCodec load(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    const auto sidecar = std::filesystem::path(path.string() + ".json");
    if (std::filesystem::exists(sidecar)) {
      const auto m = nlohmann::json::parse(io::read_file(sidecar), nullptr, false);
      if (m.is_discarded()) throw Error(ErrorCode::Data, "unreadable codec manifest " + sidecar.string());
      if (m.contains("checksum") && m["checksum"] != io::checksum(bytes)) {
        throw Error(ErrorCode::ChecksumMismatch, "codec file does not match its manifest");
      }
    }
    return deserialize(bytes);
  }

 private:
  int width_ = 0;
  int radius_ = 0;
  std::uint64_t seed_ = 0;
  RealVector mean_;
  std::vector<RealVector> components_;
  std::vector<double> singular_values_;
  std::vector<RealVector> reference_;
  std::vector<std::string> labels_;
};

/// Fits a PCA codec on molecules given as SMILES, labeling the reference set
/// with canonical strings.
inline PcaCodec fit_molecule_codec(const std::vector<std::string>& smiles, int dim,
                                   int width = chem::kDefaultFingerprintWidth,
                                   int radius = chem::kDefaultFingerprintRadius,
                                   const PowerIterationOptions& opt = {}) {
  std::vector<chem::Fingerprint> fps;
  std::vector<std::string> labels;
  for (const auto& s : smiles) {
    const auto mol = chem::parse_smiles(s);
    fps.push_back(chem::morgan_fingerprint(mol, radius, width));
    labels.push_back(chem::canonical_form(mol));
  }
  auto codec = PcaCodec::fit(fps, dim, opt);
  codec.set_labels(std::move(labels));
  return codec;
}

/// Synthetic world whose data are latent points: encode and decode are the
/// identity, and a labeled isotropic Gaussian mixture supplies samples.
class GaussianMixtureCodec {
 public:
  struct Draw {
    RealVector z;
    int component = 0;
  };

  GaussianMixtureCodec(std::vector<RealVector> centers, double spread)
      : centers_(std::move(centers)), spread_(spread) {
    if (centers_.empty()) throw Error(ErrorCode::InvalidParameters, "mixture needs at least one center");
    if (!(spread_ >= 0.0) || !std::isfinite(spread_)) {
      throw Error(ErrorCode::InvalidParameters, "mixture spread must be finite and nonnegative");
    }
    for (const auto& c : centers_) {
      if (c.size() != centers_.front().size()) throw Error(ErrorCode::DimensionMismatch, "ragged centers");
      require_finite(c, "mixture center");
    }
  }

  int dimension() const { return static_cast<int>(centers_.front().size()); }
  double spread() const { return spread_; }
  const std::vector<RealVector>& centers() const { return centers_; }

  RealVector encode(const RealVector& x) const {
    check(x);
    return x;
  }
  RealVector decode(const RealVector& z) const {
    check(z);
    return z;
  }

  Draw sample_component(int k, Rng& rng) const {
    if (k < 0 || k >= static_cast<int>(centers_.size())) {
      throw Error(ErrorCode::InvalidParameters, "mixture component out of range");
    }
    Draw d{centers_[k], k};
    for (double& x : d.z) x += spread_ * rng.normal();
    return d;
  }

  /// Uniform over components.
  Draw sample(Rng& rng) const {
    return sample_component(static_cast<int>(rng.below(centers_.size())), rng);
  }

 private:
  void check(const RealVector& v) const {
    if (static_cast<int>(v.size()) != dimension()) throw Error(ErrorCode::DimensionMismatch, "latent size");
  }

  std::vector<RealVector> centers_;
  double spread_;
};

inline constexpr std::uint64_t kAlignSeed = 0x414C49474E303031ULL;

/// Stand-in for a learned molecule embedding: a frozen Gaussian projection of
/// the fingerprint, standardized per coordinate over a corpus.
class AlignEmbedder {
 public:
  static AlignEmbedder fit(const std::vector<chem::Fingerprint>& corpus, int dim,
                           std::uint64_t seed = kAlignSeed) {
    if (corpus.empty()) throw Error(ErrorCode::InsufficientData, "align embedder needs a corpus");
    if (dim < 1) throw Error(ErrorCode::InvalidParameters, "embedding dimension must be >= 1");
    AlignEmbedder e;
    e.width_ = corpus.front().width();
    e.seed_ = seed;
    Rng rng(seed);
    // column-major: projection_[bit] is the dim-vector added when bit is set
    e.projection_.assign(e.width_, RealVector(dim));
    for (auto& col : e.projection_)
      for (double& x : col) x = rng.normal();
    e.mean_.assign(dim, 0.0);
    e.scale_.assign(dim, 1.0);
    std::vector<RealVector> raws;
    for (const auto& fp : corpus) raws.push_back(e.raw(fp));
    const double n = static_cast<double>(raws.size());
    for (const auto& r : raws)
      for (int k = 0; k < dim; ++k) e.mean_[k] += r[k] / n;
    RealVector var(dim, 0.0);
    for (const auto& r : raws)
      for (int k = 0; k < dim; ++k) var[k] += (r[k] - e.mean_[k]) * (r[k] - e.mean_[k]) / n;
    for (int k = 0; k < dim; ++k) e.scale_[k] = var[k] > 0 ? 1.0 / std::sqrt(var[k]) : 1.0;
    return e;
  }

  int dimension() const { return static_cast<int>(mean_.size()); }
  std::uint64_t seed() const { return seed_; }

  RealVector embed(const chem::Fingerprint& fp) const {
    RealVector v = raw(fp);
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = (v[k] - mean_[k]) * scale_[k];
    return v;
  }

 private:
  RealVector raw(const chem::Fingerprint& fp) const {
    if (fp.width() != width_) throw Error(ErrorCode::WidthMismatch, "fingerprint width differs from embedder");
    RealVector v(projection_.front().size(), 0.0);
    for (int b = 0; b < width_; ++b) {
      if (!fp.test(b)) continue;
      for (std::size_t k = 0; k < v.size(); ++k) v[k] += projection_[b][k];
    }
    return v;
  }

  int width_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<RealVector> projection_;
  RealVector mean_;
  RealVector scale_;
};

}  // namespace phame::latent
