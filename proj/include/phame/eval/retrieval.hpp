#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phame/chem/fingerprint.hpp"
#include "phame/core/error.hpp"
#include "phame/core/io.hpp"
#include "phame/core/vector_ops.hpp"
#include "phame/eval/generation.hpp"
#include "phame/eval/report.hpp"

namespace phame::eval {

/// Anything a similarity space can compare: a molecule plus named embeddings.
struct RetrievalItem {
  std::string canonical;
  std::optional<chem::Fingerprint> fingerprint;
  std::map<std::string, RealVector> embeddings;
};

struct SimilaritySpace {
  std::string name;
  std::function<double(const RetrievalItem&, const RetrievalItem&)> sim;
};

inline SimilaritySpace tanimoto_space() {
  return {"ecfp", [](const RetrievalItem& a, const RetrievalItem& b) {
            if (!a.fingerprint || !b.fingerprint) throw Error(ErrorCode::Data, "item has no fingerprint");
            return chem::tanimoto(*a.fingerprint, *b.fingerprint);
          }};
}

/// Cosine over supplied vectors, mapped from [-1, 1] to [0, 1].
inline SimilaritySpace cosine_space(const std::string& name) {
  return {name, [name](const RetrievalItem& a, const RetrievalItem& b) {
            auto get = [&](const RetrievalItem& x) -> const RealVector& {
              const auto it = x.embeddings.find(name);
              if (it == x.embeddings.end()) {
                throw Error(ErrorCode::Data, "no '" + name + "' embedding for " + x.canonical);
              }
              return it->second;
            };
            return 0.5 * (1.0 + cosine(get(a), get(b)));
          }};
}

/// Disjoint labelled classes of reference items, labels in ascending order.
class ReferenceLibrary {
 public:
  void add(const std::string& label, RetrievalItem item) {
    auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    const auto pos = static_cast<std::size_t>(it - labels_.begin());
    if (it == labels_.end() || *it != label) {
      labels_.insert(it, label);
      classes_.insert(classes_.begin() + static_cast<std::ptrdiff_t>(pos), std::vector<RetrievalItem>{});
    }
    for (std::size_t c = 0; c < classes_.size(); ++c) {
      if (c == pos) continue;
      for (const auto& other : classes_[c]) {
        if (!item.canonical.empty() && other.canonical == item.canonical) {
          throw Error(ErrorCode::Data, item.canonical + " appears in classes " + labels_[c] + " and " + label);
        }
      }
    }
    classes_[pos].push_back(std::move(item));
  }

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t class_count() const { return labels_.size(); }
  const std::vector<RetrievalItem>& members(std::size_t c) const { return classes_[c]; }

  std::size_t class_index(const std::string& label) const {
    const auto it = std::lower_bound(labels_.begin(), labels_.end(), label);
    if (it == labels_.end() || *it != label) throw Error(ErrorCode::UnknownClassLabel, "unknown class '" + label + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }

  std::size_t smallest_class() const {
    std::size_t m = classes_.empty() ? 0 : classes_[0].size();
    for (const auto& c : classes_) m = std::min(m, c.size());
    return m;
  }

  std::size_t pooled_size() const {
    std::size_t n = 0;
    for (const auto& c : classes_) n += c.size();
    return n;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<RetrievalItem>> classes_;
};

/// Embedding file: first line names the space, then "canonical,v1,v2,..." rows.
struct EmbeddingTable {
  std::string space;
  std::map<std::string, RealVector> vectors;
};

inline EmbeddingTable parse_embedding_file(std::string_view text) {
  const auto rows = io::lines(text);
  if (rows.empty() || io::trim(rows[0]).empty()) throw Error(ErrorCode::Data, "embedding file has no space name");
  EmbeddingTable t;
  t.space = io::trim(rows[0]);
  std::size_t width = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (io::trim(rows[i]).empty()) continue;
    const auto f = io::split(rows[i], ',');
    RealVector v;
    for (std::size_t k = 1; k < f.size(); ++k) {
      const auto x = io::parse_real(f[k]);
      if (!x) throw Error(ErrorCode::Data, "embedding line " + std::to_string(i + 1) + ": bad value");
      v.push_back(*x);
    }
    if (v.empty() || (width && v.size() != width)) {
      throw Error(ErrorCode::Data, "embedding line " + std::to_string(i + 1) + ": inconsistent width");
    }
    width = v.size();
    t.vectors[io::trim(f[0])] = std::move(v);
  }
  return t;
}

/// Builds a retrieval item from a SMILES string; embeddings come from the
/// tables keyed by canonical form. Invalid molecules yield nullopt.
inline std::optional<RetrievalItem> make_item(const std::string& smiles, std::span<const EmbeddingTable> tables) {
  auto v = view_molecule(smiles);
  if (!v.valid) return std::nullopt;
  RetrievalItem item{v.canonical, std::move(v.fingerprint), {}};
  for (const auto& t : tables) {
    const auto it = t.vectors.find(item.canonical);
    if (it != t.vectors.end()) item.embeddings[t.space] = it->second;
  }
  return item;
}

/// Reference CSV: label,smiles then optional "<space>_<k>" embedding columns.
inline ReferenceLibrary parse_reference_csv(std::string_view text, std::span<const EmbeddingTable> tables = {}) {
  const auto rows = io::lines(text);
  if (rows.empty()) throw Error(ErrorCode::Data, "reference file is empty");
  const auto header = io::split(rows[0], ',');
  if (header.size() < 2 || header[0] != "label" || header[1] != "smiles") {
    throw Error(ErrorCode::Data, "reference header must start with label,smiles");
  }
  std::vector<std::string> space_of(header.size());
  for (std::size_t k = 2; k < header.size(); ++k) {
    const auto us = header[k].rfind('_');
    if (us == std::string::npos || us == 0) throw Error(ErrorCode::Data, "embedding column '" + header[k] + "' needs <space>_<k>");
    space_of[k] = header[k].substr(0, us);
  }
  ReferenceLibrary lib;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (io::trim(rows[i]).empty()) continue;
    const auto f = io::split(rows[i], ',');
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::Data, "reference line " + std::to_string(i + 1) + ": " + why);
    };
    if (f.size() != header.size()) throw fail("expected " + std::to_string(header.size()) + " fields");
    auto item = make_item(f[1], tables);
    if (!item) throw fail("invalid molecule '" + f[1] + "'");
    for (std::size_t k = 2; k < f.size(); ++k) {
      const auto x = io::parse_real(f[k]);
      if (!x) throw fail("bad embedding value");
      item->embeddings[space_of[k]].push_back(*x);
    }
    lib.add(io::trim(f[0]), std::move(*item));
  }
  if (lib.class_count() == 0) throw Error(ErrorCode::Data, "reference file has no rows");
  return lib;
}

/// Similarities of one generated item to every reference, grouped by class.
/// An item that could not be embedded has no similarities and always fails.
struct ClassSimilarities {
  std::size_t target = 0;
  std::optional<std::vector<std::vector<double>>> per_class;
};

struct RetrievalQuery {
  std::optional<RetrievalItem> item;
  std::string target_label;
};

inline std::vector<ClassSimilarities> score_queries(std::span<const RetrievalQuery> queries,
                                                    const ReferenceLibrary& refs, const SimilaritySpace& space) {
  std::vector<ClassSimilarities> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    ClassSimilarities cs;
    cs.target = refs.class_index(q.target_label);
    if (q.item) {
      cs.per_class.emplace();
      for (std::size_t c = 0; c < refs.class_count(); ++c) {
        auto& row = cs.per_class->emplace_back();
        for (const auto& r : refs.members(c)) row.push_back(space.sim(*q.item, r));
      }
    }
    out.push_back(std::move(cs));
  }
  return out;
}

/// Mean of the n largest values, summed in descending order.
inline double top_n_mean(std::vector<double> v, std::size_t n) {
  std::sort(v.begin(), v.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i];
  return s / static_cast<double>(n);
}

/// Pessimistic rank of the target: 1 + classes scoring at least as high.
inline std::size_t target_rank(const std::vector<double>& scores, std::size_t target) {
  std::size_t rank = 1;
  for (std::size_t c = 0; c < scores.size(); ++c)
    if (c != target && scores[c] >= scores[target]) ++rank;
  return rank;
}

/// Top-n mean per class; n = 0 means the whole class.
inline std::vector<double> class_scores(const std::vector<std::vector<double>>& per_class, std::size_t n) {
  std::vector<double> s;
  for (const auto& row : per_class) s.push_back(top_n_mean(row, n == 0 ? row.size() : n));
  return s;
}

inline MetricValue top1_from(std::span<const ClassSimilarities> qs) {
  std::size_t ok = 0;
  for (const auto& q : qs) {
    if (q.per_class) ok += target_rank(class_scores(*q.per_class, 0), q.target) == 1;
  }
  return ratio(ok, qs.size(), "argmax of class-mean similarity; ties count as incorrect");
}

inline MetricValue retrieval_from(std::span<const ClassSimilarities> qs, std::size_t classes, int k, int n,
                                  std::size_t smallest_class) {
  if (k < 1 || static_cast<std::size_t>(k) > classes) {
    throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " outside [1, " + std::to_string(classes) + "]");
  }
  if (n < 1 || static_cast<std::size_t>(n) > smallest_class) {
    throw Error(ErrorCode::InvalidParameters, "n = " + std::to_string(n) + " exceeds the smallest class");
  }
  std::size_t ok = 0;
  for (const auto& q : qs) {
    if (q.per_class) ok += target_rank(class_scores(*q.per_class, static_cast<std::size_t>(n)), q.target) <= static_cast<std::size_t>(k);
  }
  return ratio(ok, qs.size(), "top-" + std::to_string(n) + " mean; ties take the worst rank");
}

/// Majority vote over the k most similar pooled references. Neighbor ties at
/// the cut go to the lower class index, then the lower member index.
inline std::size_t knn_predict(const std::vector<std::vector<double>>& per_class, int k) {
  struct N {
    double s;
    std::size_t c, m;
  };
  std::vector<N> pool;
  for (std::size_t c = 0; c < per_class.size(); ++c)
    for (std::size_t m = 0; m < per_class[c].size(); ++m) pool.push_back({per_class[c][m], c, m});
  std::sort(pool.begin(), pool.end(), [](const N& a, const N& b) {
    if (a.s != b.s) return a.s > b.s;
    if (a.c != b.c) return a.c < b.c;
    return a.m < b.m;
  });
  std::vector<int> votes(per_class.size(), 0);
  std::vector<double> sums(per_class.size(), 0.0);
  for (int i = 0; i < k; ++i) {
    ++votes[pool[i].c];
    sums[pool[i].c] += pool[i].s;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c) {
    if (votes[c] > votes[best]) {
      best = c;
    } else if (votes[c] == votes[best] && votes[c] > 0 && sums[c] / votes[c] > sums[best] / votes[best]) {
      best = c;
    }
  }
  return best;
}

inline MetricValue knn_from(std::span<const ClassSimilarities> qs, std::size_t pooled, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > pooled) {
    throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " outside [1, " + std::to_string(pooled) + "]");
  }
  std::size_t ok = 0;
  for (const auto& q : qs) {
    if (q.per_class) ok += knn_predict(*q.per_class, k) == q.target;
  }
  return ratio(ok, qs.size(), "majority of " + std::to_string(k) + " nearest references");
}

inline MetricValue top1_cluster_accuracy(std::span<const RetrievalQuery> gen, const ReferenceLibrary& refs,
                                         const SimilaritySpace& space) {
  return top1_from(score_queries(gen, refs, space));
}

inline MetricValue moa_retrieval_rate(std::span<const RetrievalQuery> gen, const ReferenceLibrary& refs,
                                      const SimilaritySpace& space, int k, int n = 3) {
  if (k < 1 || static_cast<std::size_t>(k) > refs.class_count()) {
    throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " outside [1, " + std::to_string(refs.class_count()) + "]");
  }
  return retrieval_from(score_queries(gen, refs, space), refs.class_count(), k, n, refs.smallest_class());
}

inline MetricValue knn_accuracy(std::span<const RetrievalQuery> gen, const ReferenceLibrary& refs,
                                const SimilaritySpace& space, int k) {
  if (k < 1 || static_cast<std::size_t>(k) > refs.pooled_size()) {
    throw Error(ErrorCode::InvalidK, "k = " + std::to_string(k) + " outside [1, " + std::to_string(refs.pooled_size()) + "]");
  }
  return knn_from(score_queries(gen, refs, space), refs.pooled_size(), k);
}

/// Queries for the records of a generation set; records need a target label.
inline std::vector<RetrievalQuery> retrieval_queries(const GenerationSet& gen, std::span<const EmbeddingTable> tables) {
  std::vector<RetrievalQuery> out;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    if (!gen[i].target_label) {
      throw Error(ErrorCode::UnknownClassLabel, "record " + std::to_string(i) + " has no target label");
    }
    out.push_back({gen[i].decoded ? make_item(gen[i].generated, tables) : std::nullopt, *gen[i].target_label});
  }
  return out;
}

}  // namespace phame::eval
