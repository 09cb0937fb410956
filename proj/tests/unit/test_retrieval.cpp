#include "test_support.hpp"

#include "intopt/error.hpp"
#include "intopt/knowledge_base.hpp"
#include "intopt/retrieval.hpp"
#include "intopt/strategy.hpp"

#include "retrieval_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace intopt;
using namespace intopt::retrieval;
using Docs = std::vector<std::pair<std::string, std::string>>;

TEST_CASE("words and n-grams") {
  CHECK(words("Loop-Invariant Code  Motion (LICM)!") ==
        std::vector<std::string>{"loop", "invariant", "code", "motion", "licm"});
  CHECK(ngrams("a b c", 1, 3) == std::vector<std::string>{"a", "b", "c", "a b", "b c", "a b c"});
  CHECK(ngrams("a", 2, 3).empty());
}

TEST_CASE("idf follows the smoothed formula") {
  auto index = TfIdfIndex::build(Docs{{"A", "loop unroll"}, {"B", "loop vectorize"}, {"C", "dead code"}});
  const auto& vocab = index.vocabulary();
  CHECK(index.idf()[vocab.at("loop")] == doctest::Approx(std::log(4.0 / 3.0) + 1.0).epsilon(1e-12));
  CHECK(index.idf()[vocab.at("dead")] == doctest::Approx(std::log(4.0 / 2.0) + 1.0).epsilon(1e-12));
  CHECK(vocab.contains("loop unroll"));
  CHECK_FALSE(vocab.contains("unroll loop"));
}

TEST_CASE("retrieve ranks by cosine, breaks ties by id, flags zero scores") {
  auto index = TfIdfIndex::build(
      Docs{{"LoopUnrollPass", "unroll loops"}, {"GVNPass", "value numbering"}, {"DCEPass", "dead code"}});
  auto hits = retrieve(index, "please unroll the loops", 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].pass_id == "LoopUnrollPass");
  CHECK(hits[0].rank == 1);
  CHECK_FALSE(hits[0].zero_score);
  CHECK(hits[1].pass_id == "DCEPass");  // tie at 0 -> ascending id
  CHECK(hits[2].pass_id == "GVNPass");
  CHECK(hits[1].zero_score);
  CHECK(hits[2].score == 0.0);
  CHECK(retrieve(index, "completely unrelated", 3).empty());
  CHECK_THROWS_AS(retrieve(index, "unroll", 0), Error);
  CHECK_THROWS_AS(TfIdfIndex::build(Docs{}), Error);
}

TEST_CASE("cosine edge cases") {
  SparseVector a{{0, 3.0}, {2, 4.0}};
  SparseVector b{{0, 6.0}, {2, 8.0}};
  CHECK(cosine(a, a) == 1.0);
  CHECK(cosine(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cosine(a, {}) == 0.0);
  CHECK(cosine(a, {{1, 1.0}}) == 0.0);
}

TEST_CASE("resolve_analysis_set unions deps of each action's top-m passes") {
  kb::KnowledgeBase kb;
  kb.entries["LoopUnrollPass"] = {"LoopUnrollPass", "unroll loops", {"LoopAnalysis", "ScalarEvolutionAnalysis"}, {}};
  kb.entries["PromotePass"] = {"PromotePass", "promote memory to register", {"DominatorTreeAnalysis"}, {}};
  kb.entries["DCEPass"] = {"DCEPass", "dead code elimination", {"TargetLibraryAnalysis"}, {}};
  auto index = TfIdfIndex::build(kb);
  OptimizationStrategy s;
  s.actions = {{"Unroll", "unroll the inner loops", ""}, {"mem2reg", "promote memory to register", ""}};
  auto res = resolve_analysis_set(s, index, kb, 1);
  CHECK(res.analyses ==
        std::set<std::string>{"DominatorTreeAnalysis", "LoopAnalysis", "ScalarEvolutionAnalysis"});
  REQUIRE(res.per_action.size() == 2);
  CHECK(res.per_action[0].hits[0].pass_id == "LoopUnrollPass");
  CHECK_THROWS_AS(resolve_analysis_set(OptimizationStrategy{}, index, kb, 1), Error);
}

TEST_CASE("retrieval properties over 1000 randomized corpora, checked against a brute-force oracle") {
  std::mt19937 rng(20240611);
  const std::vector<std::string> lexicon = {"loop",   "unroll", "vector", "dead",  "code",   "value", "number",
                                            "memory", "promote", "hoist", "invariant", "branch", "fold", "constant",
                                            "inline", "call",   "tail",   "scalar", "phi",   "merge"};
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto sentence = [&](int lo, int hi, bool allow_oov) {
    std::string s;
    int n = pick(lo, hi);
    for (int i = 0; i < n; ++i) {
      if (i) s += pick(0, 4) == 0 ? ", " : " ";
      if (allow_oov && pick(0, 5) == 0) s += "zzz" + std::to_string(pick(0, 3));
      else s += lexicon[static_cast<size_t>(pick(0, static_cast<int>(lexicon.size()) - 1))];
    }
    return s;
  };

  int checked_scores = 0;
  for (int c = 0; c < 1000; ++c) {
    int n_docs = pick(1, 10);
    std::vector<std::pair<std::string, std::string>> docs;
    for (int d = 0; d < n_docs; ++d) docs.emplace_back("P" + std::to_string(d), sentence(1, 12, false));
    std::string query = sentence(1, 8, true);
    auto index = TfIdfIndex::build(docs);
    oracle::BruteForce brute(docs);

    auto all = retrieve(index, query, n_docs);
    auto expected = brute.scores(query);
    if (all.empty()) {
      for (const auto& [id, s] : expected) CHECK(s == 0.0);
    }
    for (const auto& hit : all) {
      CHECK(hit.score >= 0.0);
      CHECK(hit.score <= 1.0);
      CHECK(std::abs(hit.score - expected.at(hit.pass_id)) <= 1e-9);
      ++checked_scores;
    }
    for (size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].score >= all[i].score);

    // top-(m+1) extends top-m
    for (int m = 1; m < n_docs; ++m) {
      auto a = retrieve(index, query, m);
      auto b = retrieve(index, query, m + 1);
      REQUIRE(b.size() >= a.size());
      for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].pass_id == b[i].pass_id);
    }

    // Self-query similarity is exactly 1.
    int d = pick(0, n_docs - 1);
    auto self = retrieve(index, docs[static_cast<size_t>(d)].second, n_docs);
    bool found = false;
    for (const auto& hit : self)
      if (hit.pass_id == docs[static_cast<size_t>(d)].first) {
        CHECK(hit.score == 1.0);
        found = true;
      }
    CHECK(found);

    // Positive scaling of the query vector leaves the ranking unchanged (up to 1e-9 ties).
    auto qv = index.vectorize(query);
    if (!qv.empty()) {
      double k = std::exp(std::uniform_real_distribution<double>(-7.0, 7.0)(rng));
      SparseVector scaled = qv;
      for (auto& [_, w] : scaled) w *= k;
      auto base = retrieve(index, qv, n_docs);
      auto after = retrieve(index, scaled, n_docs);
      REQUIRE(base.size() == after.size());
      for (size_t i = 0; i < base.size(); ++i) {
        CHECK(std::abs(base[i].score - after[i].score) <= 1e-9);
        if (base[i].pass_id != after[i].pass_id)
          CHECK(std::abs(base[i].score - expected.at(after[i].pass_id)) <= 1e-9);
      }
    }
  }
  CHECK(checked_scores > 1000);
}
