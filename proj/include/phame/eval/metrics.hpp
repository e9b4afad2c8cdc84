#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "phame/chem/fingerprint.hpp"
#include "phame/core/error.hpp"
#include "phame/core/vector_ops.hpp"
#include "phame/eval/generation.hpp"
#include "phame/eval/report.hpp"

namespace phame::eval {

using CanonicalSet = std::unordered_set<std::string>;

inline MetricValue validity(const GenerationSet& gen) {
  if (gen.empty()) return MetricValue::absent(0, "empty generation set");
  std::size_t ok = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) ok += gen.valid(i);
  return ratio(ok, gen.size(), "over all records");
}

inline MetricValue uniqueness(const GenerationSet& gen) {
  CanonicalSet seen;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    if (!gen.valid(i)) continue;
    ++valid;
    seen.insert(gen.view(i).canonical);
  }
  return ratio(seen.size(), valid, "over valid records");
}

inline MetricValue novelty(const GenerationSet& gen, const CanonicalSet& train) {
  std::size_t valid = 0, novel = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    if (!gen.valid(i)) continue;
    ++valid;
    novel += !train.contains(gen.view(i).canonical);
  }
  return ratio(novel, valid, "over valid records");
}

/// Desired property region; either bound may be open.
struct TargetRegion {
  std::optional<double> lower;
  std::optional<double> upper;

  void validate() const {
    if (!lower && !upper) throw Error(ErrorCode::InvalidParameters, "target region needs a bound");
    if (lower && upper && *lower > *upper) throw Error(ErrorCode::InvalidParameters, "target region is empty");
  }
  bool contains(double p) const { return (!lower || p >= *lower) && (!upper || p <= *upper); }
  double distance(double p) const {
    if (lower && p < *lower) return *lower - p;
    if (upper && p > *upper) return p - *upper;
    return 0.0;
  }
  /// Whether going from `from` to `to` heads toward the region.
  bool toward(double from, double to) const {
    if (lower && !upper) return to > from;
    if (upper && !lower) return to < from;
    const double a = distance(from), b = distance(to);
    return b < a || (a == 0.0 && b == 0.0);
  }
};

/// What the editing metrics need to know about one record.
struct EditObservation {
  bool valid = false;
  double property = 0.0;
  double seed_property = 0.0;
  double similarity = 0.0;
  bool novel = false;
};

struct EditMetrics {
  MetricValue nov, tgt, sim, dir, nts;

  void write(MetricsReport& r) const {
    r.set("Nov", nov);
    r.set("Tgt", tgt);
    r.set("Sim", sim);
    r.set("Dir", dir);
    r.set("NTS", nts);
  }
};

inline constexpr char kDirNote[] =
    "interpretation: fraction of valid edits whose property moves toward the target side of the seed";

/// Tgt counts every record in its denominator; Nov, Sim and Dir use valid ones.
inline EditMetrics edit_metrics_from(std::span<const EditObservation> obs, const TargetRegion& region) {
  region.validate();
  std::size_t valid = 0, hit = 0, novel = 0, toward = 0;
  double sim_sum = 0.0;
  for (const auto& o : obs) {
    if (!o.valid) continue;
    ++valid;
    hit += region.contains(o.property);
    novel += o.novel;
    toward += region.toward(o.seed_property, o.property);
    sim_sum += o.similarity;
  }
  EditMetrics m;
  m.nov = ratio(novel, valid, "over valid records");
  m.tgt = ratio(hit, obs.size(), "over all records, invalid count as misses");
  m.sim = valid ? MetricValue::of(sim_sum / static_cast<double>(valid), valid, "mean over valid records")
                : MetricValue::absent(0, "no valid records");
  m.dir = ratio(toward, valid, kDirNote);
  if (m.nov.present() && m.tgt.present() && m.sim.present()) {
    m.nts = MetricValue::of(*m.nov * *m.tgt * *m.sim, obs.size(), "Nov*Tgt*Sim");
  } else {
    m.nts = MetricValue::absent(obs.size(), "a factor is absent");
  }
  return m;
}

using PropertyOracle = std::function<double(const chem::Molecule&)>;

/// Molecule editing metrics; similarity is Tanimoto to the seed.
inline EditMetrics edit_metrics(const GenerationSet& gen, const PropertyOracle& property, const TargetRegion& region,
                                const CanonicalSet& train) {
  std::vector<EditObservation> obs(gen.size());
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const auto& seed = gen.seed_view(i);
    if (!seed.valid) throw Error(ErrorCode::Data, "seed of record " + std::to_string(i) + " is not a valid molecule");
    if (!gen.valid(i)) continue;
    const auto& out = gen.view(i);
    obs[i] = {true, property(*out.molecule), property(*seed.molecule),
              chem::tanimoto(*seed.fingerprint, *out.fingerprint), !train.contains(out.canonical)};
  }
  return edit_metrics_from(obs, region);
}

enum class Divergence { L2, Cosine };

inline double divergence(const RealVector& a, const RealVector& b, Divergence d) {
  if (d == Divergence::L2) return std::sqrt(squared_distance(a, b));
  return 1.0 - cosine(a, b);
}

/// d(phi(m'), c) + lambda * (1 - sim(m, m')).
inline double objective_value(const RealVector& phi, const RealVector& c, double sim, Divergence d, double lambda) {
  return divergence(phi, c, d) + lambda * (1.0 - sim);
}

using ConditionOracle = std::function<std::optional<RealVector>(const MoleculeView&)>;

/// Per-record objective; absent for invalid outputs. Reported, never optimized.
inline std::vector<std::optional<double>> objective_report(const GenerationSet& gen, const ConditionOracle& oracle,
                                                           Divergence d, double lambda) {
  if (!oracle) throw Error(ErrorCode::OracleUnavailable, "no condition oracle supplied");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidParameters, "lambda must be >= 0");
  std::vector<std::optional<double>> out(gen.size());
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const auto& seed = gen.seed_view(i);
    if (!gen.valid(i) || !seed.valid) continue;
    const auto phi = oracle(gen.view(i));
    if (!phi) throw Error(ErrorCode::OracleUnavailable, "oracle has no value for " + gen.view(i).canonical);
    out[i] = objective_value(*phi, gen[i].condition, chem::tanimoto(*seed.fingerprint, *gen.view(i).fingerprint), d,
                             lambda);
  }
  return out;
}

/// ceil(fraction * n), at least 1, with p*n representation error snapped.
inline std::size_t top_count(double fraction, std::size_t n) {
  double r = fraction * static_cast<double>(n);
  if (std::abs(r - std::round(r)) < 1e-9 * static_cast<double>(std::max<std::size_t>(n, 1))) r = std::round(r);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(r)));
}

struct HitMetrics {
  MetricValue novel_top_score;
  MetricValue novel_hit_ratio;
  std::size_t survivors = 0;
};

/// Higher scores are better. The hit ratio divides by every generated record.
inline HitMetrics hit_metrics_from(std::vector<double> survivor_scores, std::size_t total, double hit_threshold,
                                   double top_fraction = 0.05) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) throw Error(ErrorCode::InvalidParameters, "top fraction out of range");
  HitMetrics h;
  h.survivors = survivor_scores.size();
  if (survivor_scores.empty()) {
    h.novel_top_score = MetricValue::absent(0, "no record passed the filters");
    h.novel_hit_ratio = MetricValue::absent(total, "no record passed the filters");
    return h;
  }
  std::sort(survivor_scores.begin(), survivor_scores.end(), std::greater<>());
  const std::size_t k = top_count(top_fraction, survivor_scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += survivor_scores[i];
  h.novel_top_score = MetricValue::of(sum / static_cast<double>(k), k, "mean of the top survivors");
  const auto hits = std::count_if(survivor_scores.begin(), survivor_scores.end(),
                                  [&](double s) { return s >= hit_threshold; });
  h.novel_hit_ratio = ratio(static_cast<std::size_t>(hits), total, "over all generated records");
  return h;
}

inline constexpr double kNoveltyTanimotoCutoff = 0.4;

using ScoreOracle = std::function<double(const MoleculeView&)>;
using RecordFilter = std::function<bool(const MoleculeView&)>;

inline double max_tanimoto(const chem::Fingerprint& fp, std::span<const chem::Fingerprint> others) {
  double best = 0.0;
  for (const auto& o : others) best = std::max(best, chem::tanimoto(fp, o));
  return best;
}

/// Survivors are valid, pass every caller filter, and stay below the
/// Tanimoto-to-train cutoff.
inline HitMetrics novel_hit_metrics(const GenerationSet& gen, const ScoreOracle& score,
                                    const std::vector<RecordFilter>& filters, double hit_threshold,
                                    std::span<const chem::Fingerprint> train_fps, double top_fraction = 0.05) {
  if (!score) throw Error(ErrorCode::OracleUnavailable, "no score oracle supplied");
  std::vector<double> scores;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    if (!gen.valid(i)) continue;
    const auto& v = gen.view(i);
    if (!std::all_of(filters.begin(), filters.end(), [&](const RecordFilter& f) { return f(v); })) continue;
    if (max_tanimoto(*v.fingerprint, train_fps) >= kNoveltyTanimotoCutoff) continue;
    scores.push_back(score(v));
  }
  return hit_metrics_from(std::move(scores), gen.size(), hit_threshold, top_fraction);
}

/// Max Tanimoto over (generated, binder) pairs; absent with no valid generations.
inline MetricValue max_sim_to_binders(const GenerationSet& gen, std::span<const chem::Fingerprint> binders) {
  if (binders.empty()) throw Error(ErrorCode::EmptyBinderSet, "no known binders supplied");
  std::optional<double> best;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    if (!gen.valid(i)) continue;
    ++n;
    const double s = max_tanimoto(*gen.view(i).fingerprint, binders);
    best = best ? std::max(*best, s) : s;
  }
  if (!best) return MetricValue::absent(0, "no valid generated molecules");
  return MetricValue::of(*best, n, "max over generated x binders");
}

}  // namespace phame::eval
