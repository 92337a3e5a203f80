#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "expect_error.hpp"
#include "iqpp/core.hpp"

using namespace iqpp;

namespace {

bool has(const ValidationResult& r, ErrorCode c) {
  for (const auto& v : r.violations) {
    if (v.code == c) return true;
  }
  return false;
}

}  // namespace

TEST(ValidateStore, WellFormed) {
  std::vector<float> v(12, 0.5f);
  EXPECT_TRUE(validate_store({"a", "b", "c"}, 4, v).ok());
}

TEST(ValidateStore, RowCountMismatch) {
  std::vector<float> v(8, 0.5f);
  const auto r = validate_store({"a", "b", "c"}, 4, v);
  EXPECT_TRUE(has(r, ErrorCode::kDimensionMismatch));
}

TEST(ValidateStore, NonFinite) {
  std::vector<float> v(12, 0.5f);
  v[5] = std::numeric_limits<float>::quiet_NaN();
  v[9] = std::numeric_limits<float>::infinity();
  EXPECT_TRUE(has(validate_store({"a", "b", "c"}, 4, v), ErrorCode::kNonFiniteValue));
}

TEST(ValidateStore, DuplicateIds) {
  std::vector<float> v(4, 1.0f);
  EXPECT_TRUE(has(validate_store({"a", "a"}, 2, v), ErrorCode::kDuplicateId));
}

TEST(ValidateStore, ReportsEveryViolationWithoutThrowing) {
  std::vector<float> v{1.0f, std::numeric_limits<float>::quiet_NaN(), 2.0f};
  ValidationResult r;
  EXPECT_NO_THROW(r = validate_store({"a", "a"}, 2, v));
  EXPECT_TRUE(has(r, ErrorCode::kDimensionMismatch));
  EXPECT_TRUE(has(r, ErrorCode::kDuplicateId));
  EXPECT_TRUE(has(r, ErrorCode::kNonFiniteValue));
  EXPECT_NO_THROW(validate_store({}, 0, {}));
  EXPECT_FALSE(validate_store({}, 0, {}).ok());
}

TEST(EmbeddingStore, CreateThrowsOnViolation) {
  EXPECT_IQPP_ERROR(ErrorCode::kDimensionMismatch, EmbeddingStore::create({"a", "b", "c"}, 4, std::vector<float>(8)));
  EXPECT_IQPP_ERROR(ErrorCode::kDuplicateId, EmbeddingStore::create({"a", "a"}, 1, {1.0f, 2.0f}));
}

TEST(EmbeddingStore, NormalizedFlagAndLookup) {
  auto s = EmbeddingStore::create({"x", "y"}, 2, {1.0f, 0.0f, 0.0f, 1.0f});
  EXPECT_TRUE(s.normalized());
  EXPECT_EQ(s.find("y"), 1u);
  EXPECT_EQ(s.find("z"), EmbeddingStore::npos);
  auto t = EmbeddingStore::create({"x"}, 2, {3.0f, 4.0f});
  EXPECT_FALSE(t.normalized());
  const auto n = t.l2_normalized();
  EXPECT_TRUE(n.normalized());
  EXPECT_NEAR(n.row(0)[0], 0.6, 1e-7);
  EXPECT_NEAR(n.row(0)[1], 0.8, 1e-7);
}

TEST(EmbeddingStore, ZeroRowCannotBeNormalized) {
  auto s = EmbeddingStore::create({"x", "z"}, 2, {1.0f, 0.0f, 0.0f, 0.0f});
  EXPECT_IQPP_ERROR(ErrorCode::kZeroVector, s.l2_normalized());
}

TEST(Qrels, DefaultsAndMasks) {
  auto store = EmbeddingStore::create({"d1", "d2", "d3"}, 1, {1.0f, 2.0f, 3.0f});
  auto q = Qrels::create({{"q1", {{"d1", Label::kRelevant}, {"d3", Label::kIgnore}}}}, store);
  EXPECT_EQ(q.label("q1", "d2"), Label::kNonRelevant);
  EXPECT_EQ(q.label("q1", "d3"), Label::kIgnore);
  EXPECT_EQ(q.relevant_count("q1"), 1u);
  EXPECT_EQ(q.ignore_mask("q1", store), (std::vector<bool>{false, false, true}));
  EXPECT_EQ(q.relevant_mask("q1", store), (std::vector<bool>{true, false, false}));
  EXPECT_IQPP_ERROR(ErrorCode::kUnknownQueryId, q.judgments("q9"));
}

TEST(Qrels, RejectsUnknownDocsAndEmptyRelevantSets) {
  auto store = EmbeddingStore::create({"d1"}, 1, {1.0f});
  EXPECT_IQPP_ERROR(ErrorCode::kUnknownDocId, Qrels::create({{"q1", {{"dx", Label::kRelevant}}}}, store));
  EXPECT_IQPP_ERROR(ErrorCode::kEmptyRelevantSet, Qrels::create({{"q1", {{"d1", Label::kNonRelevant}}}}, store));
}

TEST(Measures, ParseAndName) {
  EXPECT_EQ(parse_measure("ap").name(), "AP");
  const auto p = parse_measure("P@100");
  EXPECT_EQ(p.measure, Measure::kPrecisionAtK);
  EXPECT_EQ(p.k, 100u);
  EXPECT_EQ(p.name(), "P@100");
  EXPECT_IQPP_ERROR(ErrorCode::kInvalidArgument, parse_measure("ndcg"));
  EXPECT_IQPP_ERROR(ErrorCode::kInvalidArgument, parse_measure("p@0"));
}

TEST(Enums, RoundTripNames) {
  EXPECT_EQ(similarity_from_string(to_string(Similarity::kCosine)), Similarity::kCosine);
  EXPECT_EQ(similarity_from_string(to_string(Similarity::kNegEuclidean)), Similarity::kNegEuclidean);
  EXPECT_EQ(orientation_from_string("HIGHER_IS_HARDER"), Orientation::kHigherIsHarder);
  EXPECT_EQ(to_string(Orientation::kHigherIsBetter), "HIGHER_IS_BETTER");
  EXPECT_EQ(to_string(ErrorCode::kEmptyRelevantSet), "EMPTY_RELEVANT_SET");
}

TEST(Defaults, RetrievalCutoff) {
  EXPECT_EQ(kDefaultCutoff, 100u);
  EXPECT_EQ(RetrievalConfig{}.k, 100u);
}
