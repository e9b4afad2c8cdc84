#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "phame/chem/property.hpp"
#include "phame/core/random.hpp"
#include "phame/eval/metrics.hpp"
#include "phame/eval/report.hpp"
#include "phame/eval/retrieval.hpp"

using namespace phame;
using namespace phame::eval;

namespace {

GenerationSet gen_of(const std::vector<std::string>& outs, const std::vector<std::string>& seeds = {}) {
  std::vector<GenerationRecord> recs;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    GenerationRecord r;
    r.generated = outs[i];
    if (i < seeds.size()) r.seed = seeds[i];
    recs.push_back(r);
  }
  return GenerationSet(recs);
}

std::string canon(const std::string& s) { return view_molecule(s).canonical; }

double logp(const chem::Molecule& m) { return chem::surrogate_property(m); }

// Similarity looked up from a planted table keyed by item names.
struct PlantedSpace {
  std::map<std::pair<std::string, std::string>, double> table;

  SimilaritySpace space() const {
    return {"planted", [this](const RetrievalItem& a, const RetrievalItem& b) {
              return table.at({a.canonical, b.canonical});
            }};
  }
};

RetrievalItem named(const std::string& n) { return RetrievalItem{n, std::nullopt, {}}; }

std::string ref_name(std::size_t c, std::size_t m) { return "r" + std::to_string(c) + "_" + std::to_string(m); }

struct Toy {
  ReferenceLibrary lib;
  PlantedSpace planted;
  std::vector<RetrievalQuery> queries;
};

Toy random_toy(Rng& rng, std::size_t classes, std::size_t per_class, std::size_t records, int levels = 0) {
  Toy t;
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t m = 0; m < per_class; ++m) t.lib.add("class" + std::to_string(c), named(ref_name(c, m)));
  for (std::size_t g = 0; g < records; ++g) {
    const std::string gname = "g" + std::to_string(g);
    t.queries.push_back({named(gname), t.lib.labels()[rng.below(classes)]});
    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t m = 0; m < per_class; ++m) {
        // levels > 0 quantizes similarities so ties occur
        double s = rng.uniform();
        if (levels > 0) s = std::floor(s * levels) / levels;
        t.planted.table[{gname, t.lib.members(c)[m].canonical}] = s;
      }
  }
  return t;
}

}  // namespace

TEST(Quality, Validity) {
  EXPECT_DOUBLE_EQ(*validity(gen_of({"CCO", "c1ccccc1", "CC(=O)O"})), 1.0);
  const auto empty = validity(GenerationSet{});
  EXPECT_FALSE(empty.present());
  EXPECT_FALSE(empty.note.empty());
  const auto seven = validity(gen_of({"CCO", "CCN", "CCC", "C1CC", "CCCC", "X", "CCOC", "C(", "CCCl", "CCBr"}));
  EXPECT_DOUBLE_EQ(*seven, 0.7);
  EXPECT_EQ(seven.count, 10u);
}

TEST(Quality, UniquenessAndNovelty) {
  const auto g = gen_of({"CCO", "OCC", "c1ccccc1", "C1CC"});
  const CanonicalSet train{canon("c1ccccc1")};
  EXPECT_DOUBLE_EQ(*uniqueness(g), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(*novelty(g, train), 2.0 / 3.0);
  EXPECT_EQ(novelty(g, train).count, 3u);
  const auto copied = gen_of({"CCO", "CCN"});
  EXPECT_DOUBLE_EQ(*novelty(copied, {canon("CCO"), canon("CCN")}), 0.0);
  EXPECT_DOUBLE_EQ(*uniqueness(copied), 1.0);
}

TEST(Edit, IdentityEdit) {
  const std::vector<std::string> s{"CCO", "c1ccccc1O", "CCN"};
  const CanonicalSet train{canon("CCO"), canon("c1ccccc1O"), canon("CCN")};
  const auto m = edit_metrics(gen_of(s, s), logp, {1.0, std::nullopt}, train);
  EXPECT_DOUBLE_EQ(*m.sim, 1.0);
  EXPECT_DOUBLE_EQ(*m.nov, 0.0);
  EXPECT_DOUBLE_EQ(*m.nts, 0.0);
}

TEST(Edit, SingleUpwardCrossing) {
  // CCO = 0.3, CCCCCC = 3.0 under the surrogate
  const auto m = edit_metrics(gen_of({"CCCCCC"}, {"CCO"}), logp, {2.0, std::nullopt}, {});
  EXPECT_DOUBLE_EQ(*m.tgt, 1.0);
  EXPECT_DOUBLE_EQ(*m.dir, 1.0);
  EXPECT_NE(m.dir.note.find("interpretation"), std::string::npos);
}

TEST(Edit, InvalidCountsInTgtDenominatorOnly) {
  const auto m = edit_metrics(gen_of({"CCCCCC", "C1CC"}, {"CCO", "CCO"}), logp, {2.0, std::nullopt}, {});
  EXPECT_DOUBLE_EQ(*m.tgt, 0.5);
  EXPECT_EQ(m.tgt.count, 2u);
  EXPECT_EQ(m.sim.count, 1u);
  EXPECT_DOUBLE_EQ(*m.nov, 1.0);
}

TEST(Edit, DownwardAndTwoSidedRegions) {
  const TargetRegion down{std::nullopt, 0.0};
  EXPECT_TRUE(down.toward(1.0, 0.5));
  EXPECT_FALSE(down.toward(1.0, 1.5));
  const TargetRegion band{1.0, 2.0};
  EXPECT_TRUE(band.toward(5.0, 3.0));
  EXPECT_TRUE(band.toward(1.5, 1.2));
  EXPECT_FALSE(band.toward(1.5, 2.5));
  EXPECT_THROW((TargetRegion{std::nullopt, std::nullopt}.validate()), Error);
  EXPECT_THROW((TargetRegion{2.0, 1.0}.validate()), Error);
}

TEST(Edit, MissingSeed) {
  try {
    edit_metrics(gen_of({"CCO"}), logp, {1.0, std::nullopt}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingSeed);
  }
}

TEST(Edit, NtsIsTheProduct) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EditObservation> obs(1 + rng.below(30));
    for (auto& o : obs) o = {rng.bernoulli(0.8), rng.uniform(-2, 4), rng.uniform(-2, 4), rng.uniform(), rng.bernoulli(0.9)};
    const auto m = edit_metrics_from(obs, {1.0, std::nullopt});
    if (!m.nts.present()) continue;
    EXPECT_NEAR(*m.nts, *m.nov * *m.tgt * *m.sim, 1e-12);
  }
}

TEST(Edit, ReportedAggregateRoundsToPaperValue) {
  EXPECT_EQ(std::round(0.99 * 0.78 * 0.39 * 100.0) / 100.0, 0.30);
}

TEST(Edit, RecordOrderInvariance) {
  const std::vector<std::string> outs{"CCCCCC", "CCO", "c1ccccc1CC", "C1CC", "CCCl"};
  const std::vector<std::string> seeds{"CCO", "CCN", "c1ccccc1", "CCO", "CCC"};
  const auto a = edit_metrics(gen_of(outs, seeds), logp, {1.0, std::nullopt}, {canon("CCO")});
  std::vector<std::size_t> perm{3, 0, 4, 2, 1};
  std::vector<std::string> o2, s2;
  for (auto p : perm) {
    o2.push_back(outs[p]);
    s2.push_back(seeds[p]);
  }
  const auto b = edit_metrics(gen_of(o2, s2), logp, {1.0, std::nullopt}, {canon("CCO")});
  EXPECT_EQ(*a.tgt, *b.tgt);
  EXPECT_EQ(*a.nov, *b.nov);
  EXPECT_EQ(*a.dir, *b.dir);
  EXPECT_NEAR(*a.sim, *b.sim, 1e-12);
}

TEST(Objective, Formula) {
  EXPECT_NEAR(objective_value({0.2}, {0.0}, 0.6, Divergence::L2, 1.0), 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(objective_value({3.0, 4.0}, {0.0, 0.0}, 0.1, Divergence::L2, 0.0), 5.0);
  EXPECT_DOUBLE_EQ(objective_value({1.0, 0.0}, {0.0, 2.0}, 1.0, Divergence::Cosine, 7.0), 1.0);
}

TEST(Objective, PerfectEditIsZero) {
  auto g = gen_of({"CCO", "C1CC"}, {"CCO", "CCO"});
  std::vector<GenerationRecord> recs = g.records();
  recs[0].condition = {0.3};
  g = GenerationSet(recs);
  const ConditionOracle oracle = [](const MoleculeView& v) { return RealVector{logp(*v.molecule)}; };
  for (double lambda : {0.0, 1.0, 5.0}) {
    const auto r = objective_report(g, oracle, Divergence::L2, lambda);
    ASSERT_TRUE(r[0].has_value());
    EXPECT_NEAR(*r[0], 0.0, 1e-12);
    EXPECT_FALSE(r[1].has_value());
  }
  const ConditionOracle none = [](const MoleculeView&) { return std::optional<RealVector>{}; };
  try {
    objective_report(g, none, Divergence::L2, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OracleUnavailable);
  }
  EXPECT_THROW(objective_report(g, ConditionOracle{}, Divergence::L2, 1.0), Error);
}

TEST(Hits, CountsAgainstFullDenominator) {
  std::vector<double> s(100, 5.0);
  std::fill(s.begin(), s.begin() + 30, 11.0);
  const auto h = hit_metrics_from(s, 1000, 10.0);
  EXPECT_DOUBLE_EQ(*h.novel_hit_ratio, 0.03);
  EXPECT_EQ(h.novel_hit_ratio.count, 1000u);
  EXPECT_DOUBLE_EQ(*h.novel_top_score, 11.0);
  EXPECT_EQ(h.novel_top_score.count, 5u);
}

TEST(Hits, TopCountAndAbsence) {
  std::vector<double> s;
  for (int i = 0; i < 20; ++i) s.push_back(i * 0.5);
  const auto h = hit_metrics_from(s, 20, 100.0);
  EXPECT_EQ(h.novel_top_score.count, 1u);
  EXPECT_DOUBLE_EQ(*h.novel_top_score, 9.5);
  EXPECT_EQ(top_count(0.05, 21), 2u);
  EXPECT_EQ(top_count(0.05, 3), 1u);
  const auto none = hit_metrics_from({}, 50, 1.0);
  EXPECT_FALSE(none.novel_top_score.present());
  EXPECT_FALSE(none.novel_hit_ratio.present());
}

TEST(Hits, NoveltyFilterAgainstTraining) {
  const auto g = gen_of({"c1ccccc1CCO", "CCCCCCCCN", "C1CC", "OCCO"});
  const std::vector<chem::Fingerprint> train{*view_molecule("c1ccccc1CCO").fingerprint};
  const ScoreOracle score = [](const MoleculeView& v) { return static_cast<double>(v.molecule->atom_count()); };
  const RecordFilter small = [](const MoleculeView& v) { return v.molecule->atom_count() > 4; };
  const auto h = novel_hit_metrics(g, score, {small}, 9.0, train);
  EXPECT_EQ(h.survivors, 1u);
  EXPECT_DOUBLE_EQ(*h.novel_top_score, 9.0);
  EXPECT_DOUBLE_EQ(*h.novel_hit_ratio, 0.25);
}

TEST(Binders, MaxSimilarity) {
  const std::vector<std::string> bs{"CCO", "c1ccccc1N", "CC(=O)O"};
  std::vector<chem::Fingerprint> binders;
  for (const auto& b : bs) binders.push_back(*view_molecule(b).fingerprint);
  EXPECT_DOUBLE_EQ(*max_sim_to_binders(gen_of({"CCN", "OCC"}), binders), 1.0);
  EXPECT_FALSE(max_sim_to_binders(GenerationSet{}, binders).present());
  try {
    max_sim_to_binders(gen_of({"CCO"}), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyBinderSet);
  }
  const std::vector<std::string> gs{"CCCN", "c1ccccc1C", "CC(=O)OC"};
  double brute = 0.0;
  for (const auto& g : gs)
    for (const auto& b : binders) brute = std::max(brute, chem::tanimoto(*view_molecule(g).fingerprint, b));
  EXPECT_EQ(*max_sim_to_binders(gen_of(gs), binders), brute);
}

TEST(Retrieval, IdentitySpaceIsCorrect) {
  ReferenceLibrary lib;
  for (std::string c : {"a", "b", "c"})
    for (int m = 0; m < 4; ++m) lib.add(c, named(c + std::to_string(m)));
  const SimilaritySpace same{"same", [](const RetrievalItem& x, const RetrievalItem& y) {
                               return x.canonical == y.canonical ? 1.0 : 0.0;
                             }};
  const std::vector<RetrievalQuery> q{{named("b2"), "b"}, {named("a0"), "a"}};
  EXPECT_DOUBLE_EQ(*top1_cluster_accuracy(q, lib, same), 1.0);
  EXPECT_DOUBLE_EQ(*moa_retrieval_rate(q, lib, same, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(*knn_accuracy(q, lib, same, 1), 1.0);
}

TEST(Retrieval, OneOfThreeCorrectAndTiesIncorrect) {
  ReferenceLibrary lib;
  lib.add("x", named("x0"));
  lib.add("y", named("y0"));
  PlantedSpace p;
  p.table = {{{"g0", "x0"}, 0.9}, {{"g0", "y0"}, 0.1}, {{"g1", "x0"}, 0.2},
             {{"g1", "y0"}, 0.8}, {{"g2", "x0"}, 0.5}, {{"g2", "y0"}, 0.5}};
  const std::vector<RetrievalQuery> q{{named("g0"), "x"}, {named("g1"), "x"}, {named("g2"), "x"}};
  EXPECT_DOUBLE_EQ(*top1_cluster_accuracy(q, lib, p.space()), 1.0 / 3.0);
  const std::vector<RetrievalQuery> bad{{named("g0"), "z"}};
  try {
    top1_cluster_accuracy(bad, lib, p.space());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownClassLabel);
  }
}

TEST(Retrieval, ChanceTop1OverBalancedClasses) {
  Rng rng(77);
  const auto t = random_toy(rng, 7, 8, 10000);
  const double acc = *top1_cluster_accuracy(t.queries, t.lib, t.planted.space());
  EXPECT_GE(acc, 1.0 / 7.0 - 0.01);
  EXPECT_LE(acc, 1.0 / 7.0 + 0.01);
}

TEST(Retrieval, RateIdentities) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = random_toy(rng, 7, 8, 40, trial % 2 ? 4 : 0);
    const auto space = t.planted.space();
    double prev = -1.0;
    for (int k = 1; k <= 7; ++k) {
      const double r = *moa_retrieval_rate(t.queries, t.lib, space, k, 3);
      EXPECT_GE(r, prev);
      prev = r;
    }
    EXPECT_DOUBLE_EQ(prev, 1.0);
    EXPECT_EQ(*moa_retrieval_rate(t.queries, t.lib, space, 1, 8), *top1_cluster_accuracy(t.queries, t.lib, space));
  }
}

TEST(Retrieval, RateMatchesExhaustiveRanking) {
  Rng rng(19);
  const auto t = random_toy(rng, 4, 5, 5, 3);
  const auto space = t.planted.space();
  for (int n = 1; n <= 5; ++n) {
    for (int k = 1; k <= 4; ++k) {
      std::size_t ok = 0;
      for (const auto& q : t.queries) {
        // Every ordering of classes consistent with the scores; the target's
        // worst position among them is its rank.
        std::vector<double> rho;
        for (std::size_t c = 0; c < 4; ++c) {
          std::vector<double> s;
          for (const auto& r : t.lib.members(c)) s.push_back(space.sim(*q.item, r));
          std::sort(s.rbegin(), s.rend());
          rho.push_back(std::accumulate(s.begin(), s.begin() + n, 0.0) / n);
        }
        const std::size_t target = t.lib.class_index(q.target_label);
        std::vector<std::size_t> order{0, 1, 2, 3};
        std::size_t worst = 0;
        do {
          bool sorted = true;
          for (std::size_t i = 1; i < 4; ++i) sorted = sorted && rho[order[i - 1]] >= rho[order[i]];
          if (!sorted) continue;
          worst = std::max<std::size_t>(worst, std::find(order.begin(), order.end(), target) - order.begin() + 1);
        } while (std::next_permutation(order.begin(), order.end()));
        ok += worst <= static_cast<std::size_t>(k);
      }
      EXPECT_DOUBLE_EQ(*moa_retrieval_rate(t.queries, t.lib, space, k, n), ok / 5.0) << "n=" << n << " k=" << k;
    }
  }
}

TEST(Retrieval, InvalidK) {
  Rng rng(1);
  const auto t = random_toy(rng, 3, 2, 2);
  for (int k : {0, 4}) {
    try {
      moa_retrieval_rate(t.queries, t.lib, t.planted.space(), k, 1);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidK);
    }
  }
  EXPECT_THROW(knn_accuracy(t.queries, t.lib, t.planted.space(), 7), Error);
  EXPECT_THROW(moa_retrieval_rate(t.queries, t.lib, t.planted.space(), 1, 3), Error);
}

TEST(Knn, NearestNeighborAndFullPoolTie) {
  ReferenceLibrary lib;
  for (std::string c : {"a", "b"})
    for (int m = 0; m < 2; ++m) lib.add(c, named(c + std::to_string(m)));
  PlantedSpace p;
  p.table = {{{"g", "a0"}, 0.3}, {{"g", "a1"}, 0.3}, {{"g", "b0"}, 0.9}, {{"g", "b1"}, 0.0}};
  const std::vector<RetrievalQuery> qb{{named("g"), "b"}};
  EXPECT_DOUBLE_EQ(*knn_accuracy(qb, lib, p.space(), 1), 1.0);
  // k = 4: two votes each; b's mean 0.45 beats a's 0.3
  EXPECT_DOUBLE_EQ(*knn_accuracy(qb, lib, p.space(), 4), 1.0);
  // k = 3: a has two votes against one
  EXPECT_DOUBLE_EQ(*knn_accuracy(qb, lib, p.space(), 3), 0.0);
  p.table[{"g", "b0"}] = 0.6;
  // equal means: lexicographic label wins
  EXPECT_DOUBLE_EQ(*knn_accuracy(qb, lib, p.space(), 4), 0.0);
}

TEST(Knn, MatchesExhaustiveVote) {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = random_toy(rng, 7, 8, 30, 5);
    const auto space = t.planted.space();
    for (int k : {1, 3, 5}) {
      std::size_t ok = 0;
      for (const auto& q : t.queries) {
        std::vector<std::tuple<double, std::size_t, std::size_t>> all;
        for (std::size_t c = 0; c < 7; ++c)
          for (std::size_t m = 0; m < 8; ++m) all.emplace_back(-space.sim(*q.item, t.lib.members(c)[m]), c, m);
        std::sort(all.begin(), all.end());
        std::map<std::string, std::pair<int, double>> tally;
        for (int i = 0; i < k; ++i) {
          auto& e = tally[t.lib.labels()[std::get<1>(all[i])]];
          ++e.first;
          e.second -= std::get<0>(all[i]);
        }
        std::string best;
        int votes = -1;
        double mean = -1.0;
        for (const auto& [label, e] : tally) {
          const double m = e.second / e.first;
          if (e.first > votes || (e.first == votes && m > mean)) {
            best = label;
            votes = e.first;
            mean = m;
          }
        }
        ok += best == q.target_label;
      }
      EXPECT_DOUBLE_EQ(*knn_accuracy(t.queries, t.lib, space, k), ok / 30.0);
    }
  }
}

TEST(Retrieval, UnembeddableRecordsFail) {
  ReferenceLibrary lib;
  lib.add("a", named("a0"));
  lib.add("b", named("b0"));
  PlantedSpace p;
  p.table = {{{"g", "a0"}, 1.0}, {{"g", "b0"}, 0.0}};
  const std::vector<RetrievalQuery> q{{named("g"), "a"}, {std::nullopt, "a"}};
  const auto r = top1_cluster_accuracy(q, lib, p.space());
  EXPECT_DOUBLE_EQ(*r, 0.5);
  EXPECT_EQ(r.count, 2u);
}

TEST(Library, CsvEmbeddingsAndSpaces) {
  const std::string csv =
      "label,smiles,sig_0,sig_1\n"
      "kinase,CCO,1,0\n"
      "kinase,CCN,0.9,0.1\n"
      "tubulin,c1ccccc1,0,1\n";
  const auto lib = parse_reference_csv(csv);
  EXPECT_EQ(lib.labels(), (std::vector<std::string>{"kinase", "tubulin"}));
  EXPECT_EQ(lib.members(0)[1].embeddings.at("sig"), (RealVector{0.9, 0.1}));
  EXPECT_THROW(parse_reference_csv("label,smiles\na,CCO\nb,OCC\n"), Error);
  EXPECT_THROW(parse_reference_csv("name,smiles\n"), Error);

  const auto table = parse_embedding_file("sig\n" + canon("CCC") + ",1,0.05\n");
  const std::vector<EmbeddingTable> tables{table};
  const std::vector<RetrievalQuery> q{{make_item("CCC", tables), "kinase"}};
  EXPECT_DOUBLE_EQ(*top1_cluster_accuracy(q, lib, cosine_space("sig")), 1.0);
  EXPECT_THROW(top1_cluster_accuracy(q, lib, cosine_space("other")), Error);
  EXPECT_DOUBLE_EQ(*top1_cluster_accuracy(q, lib, tanimoto_space()), 1.0);
}

TEST(Report, JsonRoundTripAndText) {
  MetricsReport r;
  r.set("Val", MetricValue::of(0.1 + 0.2, 10, "over all records"));
  r.set("Sim", MetricValue::absent(0, "no valid records"));
  r.set("NTS", MetricValue::of(1.0 / 3.0, 7));
  const auto text = r.to_json().dump();
  const auto back = MetricsReport::from_json(nlohmann::json::parse(text));
  EXPECT_EQ(back, r);
  const auto t = r.to_text();
  EXPECT_NE(t.find("absent"), std::string::npos);
  EXPECT_EQ(io::lines(t).size(), 4u);
  EXPECT_THROW(MetricsReport::from_json(nlohmann::json::parse("{\"metrics\": [{}]}")), Error);
}

TEST(GenerationsCsv, RoundTrip) {
  const std::vector<GenerationRow> rows{{"CCO", "CCN", {1.0, -0.5}, 42, ""}, {"", "c1ccccc1", {}, 7, ""}};
  const auto back = parse_generations_csv(generations_csv(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].condition, rows[0].condition);
  EXPECT_EQ(back[1].rng_seed, 7u);
  const auto g = to_generation_set(back);
  EXPECT_FALSE(g[1].seed.has_value());
  EXPECT_THROW(parse_generations_csv("a,b\n"), Error);
}
