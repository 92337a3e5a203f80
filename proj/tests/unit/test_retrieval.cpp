#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "expect_error.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

#include "iqpp/retrieval.hpp"

using namespace iqpp;

namespace {

// One query whose ranking reads `pattern` from the top; extra relevant docs
// sit outside the ranking.
struct PatternCase {
  EmbeddingStore collection;
  Qrels qrels;
  RankedList ranked;
};

PatternCase from_pattern(const std::vector<int>& pattern, std::size_t extra_relevant = 0) {
  std::vector<std::string> ids;
  std::vector<float> values;
  Qrels::Judgments judged;
  const auto n = pattern.size() + extra_relevant;
  for (std::size_t i = 0; i < n; ++i) {
    ids.push_back(iqpp::testing::padded_id("d", i));
    values.push_back(static_cast<float>(i));
    const bool rel = i < pattern.size() ? pattern[i] != 0 : true;
    if (rel) judged[ids.back()] = Label::kRelevant;
  }
  PatternCase c;
  c.collection = EmbeddingStore::create(ids, 1, values);
  c.qrels = Qrels::create({{"q", judged}}, c.collection);
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    c.ranked.entries.push_back({i, ids[i], static_cast<double>(n - i)});
  }
  c.ranked.query_id = "q";
  return c;
}

}  // namespace

TEST(Rank, OrthogonalCosine) {
  auto store = EmbeddingStore::create({"a", "b"}, 2, {1, 0, 0, 1});
  const std::vector<float> q{1, 0};
  const auto r = rank(q, store, {Similarity::kCosine, 2});
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.entries[0].id, "a");
  EXPECT_DOUBLE_EQ(r.entries[0].score, 1.0);
  EXPECT_EQ(r.entries[1].id, "b");
  EXPECT_DOUBLE_EQ(r.entries[1].score, 0.0);
}

TEST(Rank, IgnoredDocsTakeNoRank) {
  auto store = EmbeddingStore::create({"a", "b"}, 2, {1, 0, 0, 1});
  const std::vector<float> q{1, 0};
  const auto r = rank(q, store, {Similarity::kCosine, 2}, {true, false});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r.entries[0].id, "b");
  EXPECT_DOUBLE_EQ(r.entries[0].score, 0.0);
}

TEST(Rank, TiesBreakByAscendingId) {
  auto store = EmbeddingStore::create({"z", "m", "a"}, 1, {1, 1, 1});
  const std::vector<float> q{1};
  const auto r = rank(q, store, {Similarity::kNegEuclidean, 3});
  EXPECT_EQ(r.entries[0].id, "a");
  EXPECT_EQ(r.entries[1].id, "m");
  EXPECT_EQ(r.entries[2].id, "z");
}

TEST(Rank, DimensionMismatch) {
  auto store = EmbeddingStore::create({"a"}, 2, {1, 0});
  const std::vector<float> q{1, 0, 0};
  EXPECT_IQPP_ERROR(ErrorCode::kDimensionMismatch, rank(q, store, {}));
}

TEST(Rank, MatchesFullSortOracle) {
  std::mt19937_64 rng(17);
  for (auto sim : {Similarity::kCosine, Similarity::kNegEuclidean}) {
    auto store = prepare_store(iqpp::testing::random_store(50, 8, rng), sim);
    for (int t = 0; t < 20; ++t) {
      std::vector<float> q(8);
      std::normal_distribution<float> g;
      for (auto& v : q) v = g(rng);
      const auto got = rank(q, store, {sim, 10});
      std::vector<double> qn(q.begin(), q.end());
      if (sim == Similarity::kCosine) {
        double n = 0;
        for (double v : qn) n += v * v;
        for (double& v : qn) v /= std::sqrt(n);
      }
      const auto expect = oracle::full_sort(store.size(), store.ids(), [&](std::size_t r) {
        const auto v = store.row(r);
        double acc = 0;
        for (std::size_t d = 0; d < 8; ++d) {
          acc += sim == Similarity::kCosine ? qn[d] * v[d] : (qn[d] - v[d]) * (qn[d] - v[d]);
        }
        return sim == Similarity::kCosine ? acc : -std::sqrt(acc);
      });
      ASSERT_EQ(got.size(), 10u);
      for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_EQ(got.entries[i].id, expect[i].id);
        EXPECT_EQ(got.entries[i].score, expect[i].score);
      }
    }
  }
}

TEST(Rank, IndependentOfStorageOrder) {
  std::mt19937_64 rng(4);
  const auto store = iqpp::testing::random_store(60, 5, rng);
  std::vector<std::size_t> perm(store.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::string> ids;
  std::vector<float> values;
  for (auto p : perm) {
    ids.push_back(store.id(p));
    values.insert(values.end(), store.row(p).begin(), store.row(p).end());
  }
  const auto shuffled = EmbeddingStore::create(ids, store.dim(), values);
  const std::vector<float> q{0.1f, -0.3f, 0.2f, 0.9f, 0.0f};
  const auto a = rank(q, store, {Similarity::kNegEuclidean, 15});
  const auto b = rank(q, shuffled, {Similarity::kNegEuclidean, 15});
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.entries[i].id, b.entries[i].id);
    EXPECT_EQ(a.entries[i].score, b.entries[i].score);
  }
}

TEST(AveragePrecision, HandPatterns) {
  EXPECT_DOUBLE_EQ(average_precision(from_pattern({1, 1, 0}).ranked, from_pattern({1, 1, 0}).qrels), 1.0);
  const auto c = from_pattern({1, 0, 1});
  EXPECT_NEAR(average_precision(c.ranked, c.qrels), 0.8333333333333334, 1e-15);
  EXPECT_NEAR(oracle::average_precision({1, 0, 1}, 2), 0.8333333333333334, 1e-15);
  const auto d = from_pattern({0, 0, 1});
  EXPECT_NEAR(average_precision(d.ranked, d.qrels), 1.0 / 3.0, 1e-15);
}

TEST(PrecisionAtK, DividesByK) {
  std::vector<int> p(100, 0);
  for (int i = 0; i < 40; ++i) p[i * 2] = 1;
  const auto c = from_pattern(p);
  EXPECT_DOUBLE_EQ(precision_at_k(c.ranked, c.qrels, 100), 0.40);
  const auto small = from_pattern(std::vector<int>(50, 1));
  EXPECT_DOUBLE_EQ(precision_at_k(small.ranked, small.qrels, 100), 0.50);
  EXPECT_DOUBLE_EQ(oracle::precision_at_k(std::vector<int>(50, 1), 100), 0.50);
  const auto none = from_pattern(std::vector<int>(100, 0), 1);
  EXPECT_DOUBLE_EQ(precision_at_k(none.ranked, none.qrels, 100), 0.0);
}

TEST(Effectiveness, BoundsAndPerfectRanking) {
  std::mt19937_64 rng(8);
  std::bernoulli_distribution coin(0.3);
  for (int t = 0; t < 100; ++t) {
    std::vector<int> pattern(40);
    for (auto& v : pattern) v = coin(rng);
    pattern[rng() % pattern.size()] = 1;
    const auto c = from_pattern(pattern);
    const auto ap = average_precision(c.ranked, c.qrels);
    const auto p = precision_at_k(c.ranked, c.qrels, 10);
    const std::size_t rel = std::count(pattern.begin(), pattern.end(), 1);
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap, 1.0);
    EXPECT_LE(p, std::min<double>(rel, 10) / 10.0 + 1e-15);
    const bool perfect = std::is_sorted(pattern.rbegin(), pattern.rend());
    EXPECT_EQ(ap == 1.0, perfect);
  }
}

TEST(Effectiveness, InvariantUnderMonotoneScoreTransform) {
  std::mt19937_64 rng(21);
  auto store = iqpp::testing::random_store(80, 4, rng);
  Qrels::Judgments judged;
  for (std::size_t i = 0; i < 80; i += 7) judged[store.id(i)] = Label::kRelevant;
  auto qrels = Qrels::create({{"q", judged}}, store);
  const std::vector<float> q{0.5f, 0.5f, -0.2f, 0.1f};
  auto ranked = rank(q, store, {Similarity::kNegEuclidean, 80});
  ranked.query_id = "q";
  auto transformed = ranked;
  for (auto& e : transformed.entries) e.score = std::exp(3.0 * e.score) + 7.0;
  EXPECT_EQ(average_precision(ranked, qrels), average_precision(transformed, qrels));
  EXPECT_EQ(precision_at_k(ranked, qrels, 20), precision_at_k(transformed, qrels, 20));
}

TEST(SimilarityMatrix, Cases) {
  auto same = EmbeddingStore::create({"a", "b"}, 2, {1, 0, 1, 0});
  RankedList r{"q", {{0, "a", 1}, {1, "b", 1}}};
  auto m = similarity_matrix(r, same, Similarity::kCosine);
  EXPECT_EQ(m.values, (std::vector<double>{1, 1, 1, 1}));
  auto ortho = EmbeddingStore::create({"a", "b"}, 2, {1, 0, 0, 1});
  m = similarity_matrix(r, ortho, Similarity::kCosine);
  EXPECT_EQ(m.values, (std::vector<double>{1, 0, 0, 1}));
}

TEST(SimilarityMatrix, MatchesPairwiseDotProducts) {
  std::mt19937_64 rng(12);
  auto store = prepare_store(iqpp::testing::random_store(5, 6, rng), Similarity::kCosine);
  RankedList r{"q", {}};
  for (std::size_t i = 0; i < 5; ++i) r.entries.push_back({i, store.id(i), 0.0});
  const auto m = similarity_matrix(r, store, Similarity::kCosine);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double dot = 0;
      for (std::size_t d = 0; d < 6; ++d) dot += double(store.row(i)[d]) * store.row(j)[d];
      EXPECT_NEAR(m.at(i, j), dot, 1e-12);
      EXPECT_NEAR(m.at(i, j), m.at(j, i), 1e-12);
    }
  }
}

TEST(RankAll, SkipsIgnoredDocsPerQuery) {
  auto store = EmbeddingStore::create({"a", "b", "c"}, 1, {1, 2, 3});
  auto queries = EmbeddingStore::create({"q1", "q2"}, 1, {1, 3});
  auto qrels = Qrels::create({{"q1", {{"a", Label::kIgnore}, {"b", Label::kRelevant}}},
                              {"q2", {{"c", Label::kRelevant}}}},
                             store);
  const auto lists = rank_all(queries, store, qrels, Similarity::kNegEuclidean, 0, 2);
  ASSERT_EQ(lists.size(), 2u);
  EXPECT_EQ(lists[0].size(), 2u);
  EXPECT_EQ(lists[0].entries[0].id, "b");
  EXPECT_EQ(lists[1].size(), 3u);
  EXPECT_EQ(lists[1].entries[0].id, "c");
}
