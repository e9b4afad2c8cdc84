#pragma once

#include <optional>
#include <string>
#include <vector>

#include "phame/chem/canonical.hpp"
#include "phame/chem/fingerprint.hpp"
#include "phame/chem/smiles_parser.hpp"
#include "phame/chem/valence.hpp"
#include "phame/core/error.hpp"
#include "phame/core/io.hpp"
#include "phame/core/vector_ops.hpp"

namespace phame::eval {

struct GenerationRecord {
  std::optional<std::string> seed;
  std::string generated;
  /// False when the codec could not produce an output at all.
  bool decoded = true;
  RealVector condition;
  /// Intended class for the retrieval metrics.
  std::optional<std::string> target_label;
};

/// Parsed view of one molecule string: validity, canonical form, fingerprint.
struct MoleculeView {
  bool valid = false;
  std::string canonical;
  std::optional<chem::Fingerprint> fingerprint;
  std::optional<chem::Molecule> molecule;
};

inline MoleculeView view_molecule(const std::string& smiles, int width = chem::kDefaultFingerprintWidth,
                                  int radius = chem::kDefaultFingerprintRadius) {
  MoleculeView v;
  if (!chem::is_valid(smiles)) return v;
  auto mol = chem::parse_smiles(smiles);
  v.valid = true;
  v.canonical = chem::canonical_form(mol);
  v.fingerprint = chem::morgan_fingerprint(mol, radius, width);
  v.molecule = std::move(mol);
  return v;
}

/// Generated records with lazily computed, cached molecule views.
class GenerationSet {
 public:
  GenerationSet() = default;
  explicit GenerationSet(std::vector<GenerationRecord> records) : records_(std::move(records)) {
    views_.resize(records_.size());
    seed_views_.resize(records_.size());
  }

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const GenerationRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<GenerationRecord>& records() const { return records_; }

  const MoleculeView& view(std::size_t i) const {
    if (!views_[i]) {
      views_[i] = records_[i].decoded ? view_molecule(records_[i].generated) : MoleculeView{};
    }
    return *views_[i];
  }

  bool valid(std::size_t i) const { return view(i).valid; }

  /// The seed's view; MissingSeed when the record has none.
  const MoleculeView& seed_view(std::size_t i) const {
    if (!records_[i].seed) throw Error(ErrorCode::MissingSeed, "record " + std::to_string(i) + " has no seed");
    if (!seed_views_[i]) seed_views_[i] = view_molecule(*records_[i].seed);
    return *seed_views_[i];
  }

 private:
  std::vector<GenerationRecord> records_;
  mutable std::vector<std::optional<MoleculeView>> views_;
  mutable std::vector<std::optional<MoleculeView>> seed_views_;
};

/// Generations CSV: seed, generated, condition, rng_seed (plus an optional
/// target_label column). Condition components are ';'-separated in one field.
inline std::string format_condition(const RealVector& c) {
  std::string out;
  for (std::size_t k = 0; k < c.size(); ++k) out += (k ? ";" : "") + io::format_real(c[k]);
  return out;
}

inline RealVector parse_condition(const std::string& field) {
  RealVector c;
  if (io::trim(field).empty()) return c;
  for (const auto& part : io::split(field, ';')) {
    const auto v = io::parse_real(part);
    if (!v) throw Error(ErrorCode::Data, "bad condition component '" + part + "'");
    c.push_back(*v);
  }
  return c;
}

struct GenerationRow {
  std::string seed;
  std::string generated;
  RealVector condition;
  std::uint64_t rng_seed = 0;
  std::string target_label;
};

inline std::string generations_csv(const std::vector<GenerationRow>& rows, bool with_labels = false) {
  std::string out = with_labels ? "seed,generated,condition,rng_seed,target_label\n" : "seed,generated,condition,rng_seed\n";
  for (const auto& r : rows) {
    out += r.seed + ',' + r.generated + ',' + format_condition(r.condition) + ',' + std::to_string(r.rng_seed);
    if (with_labels) out += ',' + r.target_label;
    out += '\n';
  }
  return out;
}

inline std::vector<GenerationRow> parse_generations_csv(std::string_view text) {
  const auto rows = io::lines(text);
  if (rows.empty()) throw Error(ErrorCode::Data, "generations file is empty");
  const auto header = io::split(rows[0], ',');
  const bool labels = header.size() == 5 && header[4] == "target_label";
  if (header.size() < 4 || header[0] != "seed" || header[1] != "generated" || header[2] != "condition" ||
      header[3] != "rng_seed" || (header.size() == 5 && !labels) || header.size() > 5) {
    throw Error(ErrorCode::Data, "generations header must be seed,generated,condition,rng_seed[,target_label]");
  }
  std::vector<GenerationRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].empty()) continue;
    const auto f = io::split(rows[i], ',');
    if (f.size() != header.size()) {
      throw Error(ErrorCode::Data, "generations line " + std::to_string(i + 1) + ": expected " +
                                       std::to_string(header.size()) + " fields");
    }
    GenerationRow r;
    r.seed = f[0];
    r.generated = f[1];
    try {
      r.condition = parse_condition(f[2]);
    } catch (const Error& e) {
      throw Error(ErrorCode::Data, "generations line " + std::to_string(i + 1) + ": " + e.what());
    }
    try {
      r.rng_seed = std::stoull(f[3]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Data, "generations line " + std::to_string(i + 1) + ": bad rng_seed");
    }
    if (labels) r.target_label = f[4];
    out.push_back(std::move(r));
  }
  return out;
}

inline GenerationSet to_generation_set(const std::vector<GenerationRow>& rows) {
  std::vector<GenerationRecord> recs;
  for (const auto& r : rows) {
    GenerationRecord g;
    if (!r.seed.empty()) g.seed = r.seed;
    g.generated = r.generated;
    g.decoded = !r.generated.empty();
    g.condition = r.condition;
    if (!r.target_label.empty()) g.target_label = r.target_label;
    recs.push_back(std::move(g));
  }
  return GenerationSet(std::move(recs));
}

}  // namespace phame::eval
