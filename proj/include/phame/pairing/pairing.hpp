#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phame/chem/fingerprint.hpp"
#include "phame/core/error.hpp"
#include "phame/core/io.hpp"
#include "phame/core/vector_ops.hpp"

namespace phame::pairing {

struct TrainingPair {
  std::size_t seed_id = 0;
  std::size_t target_id = 0;
  double structural_sim = 0.0;
  /// Condition attached to the target; may be empty.
  RealVector condition;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

struct Partition {
  std::vector<std::size_t> low;
  std::vector<std::size_t> high;
};

/// low = {i : p_i < theta}, high = {i : p_i >= theta}, ascending ids.
inline Partition split_by_threshold(std::span<const double> values, double theta) {
  Partition p;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::Data, "property value " + std::to_string(i) + " is not finite");
    }
    (values[i] < theta ? p.low : p.high).push_back(i);
  }
  if (p.low.empty() || p.high.empty()) {
    throw Error(ErrorCode::EmptyPartition, std::string("threshold ") + io::format_real(theta) + " leaves the " +
                                               (p.low.empty() ? "low" : "high") + " side empty");
  }
  return p;
}

/// Candidate ordering shared by both miners: higher similarity first, then
/// smaller key string, then smaller id.
struct CandidateOrder {
  const std::vector<std::string>* keys = nullptr;

  bool better(double sa, std::size_t a, double sb, std::size_t b) const {
    if (sa != sb) return sa > sb;
    if (keys && (*keys)[a] != (*keys)[b]) return (*keys)[a] < (*keys)[b];
    return a < b;
  }
};

/// Cross-partition nearest neighbors under an arbitrary similarity sim(i, j).
/// Every member of each side becomes a seed once, low side first.
template <typename Sim>
std::vector<TrainingPair> mine_pairs_by(const Partition& part, Sim&& sim, const std::vector<std::string>* keys = nullptr) {
  if (part.low.empty() || part.high.empty()) throw Error(ErrorCode::EmptyPartition, "pairing needs both sides");
  const CandidateOrder order{keys};
  std::vector<TrainingPair> out;
  out.reserve(part.low.size() + part.high.size());
  auto run = [&](const std::vector<std::size_t>& seeds, const std::vector<std::size_t>& targets) {
    for (std::size_t i : seeds) {
      std::size_t best = targets.front();
      double best_s = sim(i, best);
      for (std::size_t k = 1; k < targets.size(); ++k) {
        const double s = sim(i, targets[k]);
        if (order.better(s, targets[k], best_s, best)) {
          best = targets[k];
          best_s = s;
        }
      }
      out.push_back({i, best, best_s, {}});
    }
  };
  run(part.low, part.high);
  run(part.high, part.low);
  return out;
}

/// Tanimoto nearest neighbors across the threshold; ties by canonical string then id.
inline std::vector<TrainingPair> mine_pairs(const Partition& part, const std::vector<chem::Fingerprint>& fps,
                                            const std::vector<std::string>& canonicals) {
  if (canonicals.size() != fps.size()) throw Error(ErrorCode::DimensionMismatch, "one canonical string per fingerprint");
  return mine_pairs_by(part, [&](std::size_t a, std::size_t b) { return chem::tanimoto(fps[a], fps[b]); }, &canonicals);
}

inline constexpr double kDefaultConditionCutoff = 0.5;
inline constexpr int kDefaultMaxConditionPairs = 3;

/// For each i, up to max_pairs partners j != i with cos(g_i, g_j) < cutoff,
/// highest similarity first. The target's condition vector rides along.
template <typename Sim>
std::vector<TrainingPair> mine_condition_pairs_by(const std::vector<RealVector>& conditions, Sim&& sim,
                                                  double cutoff, int max_pairs,
                                                  const std::vector<std::string>* keys = nullptr) {
  if (max_pairs < 1) throw Error(ErrorCode::InvalidParameters, "max_pairs must be >= 1");
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (squared_norm(conditions[i]) == 0.0) {
      throw Error(ErrorCode::ZeroConditionVector, "condition vector " + std::to_string(i) + " is zero");
    }
  }
  const CandidateOrder order{keys};
  std::vector<TrainingPair> out;
  std::vector<std::pair<double, std::size_t>> cands;
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    cands.clear();
    for (std::size_t j = 0; j < conditions.size(); ++j) {
      if (j == i || !(cosine(conditions[i], conditions[j]) < cutoff)) continue;
      cands.emplace_back(sim(i, j), j);
    }
    const std::size_t take = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(max_pairs));
    std::partial_sort(cands.begin(), cands.begin() + take, cands.end(), [&](const auto& a, const auto& b) {
      return order.better(a.first, a.second, b.first, b.second);
    });
    for (std::size_t k = 0; k < take; ++k) out.push_back({i, cands[k].second, cands[k].first, conditions[cands[k].second]});
  }
  return out;
}

inline std::vector<TrainingPair> mine_condition_pairs(const std::vector<RealVector>& conditions,
                                                      const std::vector<chem::Fingerprint>& fps,
                                                      const std::vector<std::string>& canonicals,
                                                      double cutoff = kDefaultConditionCutoff,
                                                      int max_pairs = kDefaultMaxConditionPairs) {
  if (conditions.size() != fps.size() || canonicals.size() != fps.size()) {
    throw Error(ErrorCode::DimensionMismatch, "conditions, fingerprints and canonical strings must align");
  }
  return mine_condition_pairs_by(
      conditions, [&](std::size_t a, std::size_t b) { return chem::tanimoto(fps[a], fps[b]); }, cutoff, max_pairs,
      &canonicals);
}

/// Nearest-rank percentile: element ceil(p n) - 1 of the ascending sort.
inline double percentile_threshold(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "percentile of an empty sequence");
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidParameters, "percentile must lie in (0, 1)");
  std::vector<double> v(values.begin(), values.end());
  for (double x : v)
    if (!std::isfinite(x)) throw Error(ErrorCode::Data, "non-finite value in percentile input");
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double r = p * n;
  // e.g. 0.07 * 100 evaluates to 7.000000000000001
  if (std::abs(r - std::round(r)) < 1e-9 * n) r = std::round(r);
  const auto rank = static_cast<std::size_t>(std::ceil(r));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

struct StageOverrides {
  std::optional<double> learning_rate;
  std::optional<int> epochs;
};

/// A curriculum stage: either a percentile of the property or a fixed threshold.
struct StageSpec {
  std::optional<double> percentile;
  std::optional<double> threshold;
  StageOverrides overrides;
};

struct CurriculumStage {
  int stage_index = 0;
  std::optional<double> percentile;
  double resolved_threshold = 0.0;
  StageOverrides overrides;
};

struct StagePairs {
  CurriculumStage stage;
  Partition partition;
  std::vector<TrainingPair> pairs;
};

using PairMiner = std::function<std::vector<TrainingPair>(const Partition&)>;

inline std::vector<StagePairs> build_curriculum_by(const std::vector<StageSpec>& stages, std::span<const double> values,
                                                   const PairMiner& mine) {
  if (stages.empty()) throw Error(ErrorCode::InvalidParameters, "curriculum has no stages");
  std::vector<StagePairs> out;
  double prev = -std::numeric_limits<double>::infinity();
  std::optional<double> prev_pct;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const auto& spec = stages[s];
    if (spec.percentile.has_value() == spec.threshold.has_value()) {
      throw Error(ErrorCode::InvalidParameters,
                  "stage " + std::to_string(s + 1) + " needs exactly one of percentile or threshold");
    }
    if (spec.percentile && prev_pct && !(*spec.percentile > *prev_pct)) {
      throw Error(ErrorCode::InvalidParameters, "stage percentiles must strictly increase");
    }
    CurriculumStage st;
    st.stage_index = static_cast<int>(s + 1);
    st.percentile = spec.percentile;
    st.overrides = spec.overrides;
    st.resolved_threshold = spec.percentile ? percentile_threshold(values, *spec.percentile) : *spec.threshold;
    if (spec.threshold && !(st.resolved_threshold > prev)) {
      throw Error(ErrorCode::InvalidParameters, "stage thresholds must strictly increase");
    }
    prev = st.resolved_threshold;
    if (spec.percentile) prev_pct = spec.percentile;
    StagePairs sp;
    sp.stage = st;
    try {
      sp.partition = split_by_threshold(values, st.resolved_threshold);
    } catch (const Error& e) {
      throw Error(e.code(), "stage " + std::to_string(st.stage_index) + ": " + e.what());
    }
    sp.pairs = mine(sp.partition);
    out.push_back(std::move(sp));
  }
  return out;
}

inline std::vector<StagePairs> build_curriculum(const std::vector<StageSpec>& stages, std::span<const double> values,
                                                const std::vector<chem::Fingerprint>& fps,
                                                const std::vector<std::string>& canonicals) {
  return build_curriculum_by(stages, values, [&](const Partition& p) { return mine_pairs(p, fps, canonicals); });
}

/// Pairs CSV: seed_id, target_id, seed_smiles, target_smiles, tanimoto, condition columns.
inline std::string pairs_csv(const std::vector<TrainingPair>& pairs, const std::vector<std::string>& smiles) {
  std::size_t cond = 0;
  for (const auto& p : pairs) cond = std::max(cond, p.condition.size());
  std::string out = "seed_id,target_id,seed_smiles,target_smiles,tanimoto";
  for (std::size_t k = 0; k < cond; ++k) out += ",condition_" + std::to_string(k);
  out += '\n';
  for (const auto& p : pairs) {
    out += std::to_string(p.seed_id) + ',' + std::to_string(p.target_id) + ',' + smiles.at(p.seed_id) + ',' +
           smiles.at(p.target_id) + ',' + io::format_real(p.structural_sim);
    for (std::size_t k = 0; k < cond; ++k) out += ',' + (k < p.condition.size() ? io::format_real(p.condition[k]) : "");
    out += '\n';
  }
  return out;
}

/// Inverse of pairs_csv; smiles columns are returned separately.
struct PairsTable {
  std::vector<TrainingPair> pairs;
  std::vector<std::string> seed_smiles;
  std::vector<std::string> target_smiles;
};

inline PairsTable parse_pairs_csv(std::string_view text) {
  PairsTable t;
  const auto rows = io::lines(text);
  if (rows.empty() || rows[0].rfind("seed_id,target_id,seed_smiles,target_smiles,tanimoto", 0) != 0) {
    throw Error(ErrorCode::Data, "pairs file is missing its header");
  }
  const std::size_t width = io::split(rows[0], ',').size();
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].empty()) continue;
    const auto f = io::split(rows[r], ',');
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::Data, "pairs line " + std::to_string(r + 1) + ": " + why);
    };
    if (f.size() != width) throw fail("expected " + std::to_string(width) + " fields");
    TrainingPair p;
    const auto seed = io::parse_real(f[0]), target = io::parse_real(f[1]), sim = io::parse_real(f[4]);
    if (!seed || !target || !sim || *seed < 0 || *target < 0) throw fail("bad numeric field");
    p.seed_id = static_cast<std::size_t>(*seed);
    p.target_id = static_cast<std::size_t>(*target);
    p.structural_sim = *sim;
    for (std::size_t k = 5; k < f.size(); ++k) {
      const auto v = io::parse_real(f[k]);
      if (!v) throw fail("bad condition value");
      p.condition.push_back(*v);
    }
    t.pairs.push_back(std::move(p));
    t.seed_smiles.push_back(f[2]);
    t.target_smiles.push_back(f[3]);
  }
  return t;
}

}  // namespace phame::pairing
