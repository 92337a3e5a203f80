#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iqpp/error.hpp"

namespace iqpp {

// Row-per-id matrix of float32 embeddings. Immutable after construction
// through the factory; all statistics on top of it accumulate in double.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  // Validates and builds. Throws Error on any invariant violation.
  static EmbeddingStore create(std::vector<std::string> ids, std::size_t dim,
                               std::vector<float> values);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  bool normalized() const noexcept { return normalized_; }

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::string& id(std::size_t row) const { return ids_.at(row); }
  std::span<const float> row(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }
  std::span<const float> values() const noexcept { return values_; }

  // Row index for an id, or npos.
  std::size_t find(std::string_view id) const;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // Copy with every row scaled to unit L2 norm. Zero rows are rejected.
  EmbeddingStore l2_normalized() const;

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<float> values_;
  bool normalized_ = false;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Violation {
  ErrorCode code;
  std::string detail;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const noexcept { return violations.empty(); }
};

// Total: never throws, reports every broken invariant it finds.
ValidationResult validate_store(const std::vector<std::string>& ids,
                                std::size_t dim,
                                std::span<const float> values);
ValidationResult validate_store(const EmbeddingStore& store);

// True when every row has L2 norm within 1e-5 of one.
bool rows_unit_norm(std::size_t dim, std::span<const float> values);

enum class Label { kRelevant, kNonRelevant, kIgnore };

// Per-query relevance labels. Unlisted documents are non-relevant.
class Qrels {
 public:
  using Judgments = std::map<std::string, Label>;

  // Throws kUnknownDocId when a judged doc is absent from the collection,
  // kEmptyRelevantSet when a query has no relevant document.
  static Qrels create(std::map<std::string, Judgments> judgments,
                      const EmbeddingStore& collection);

  const std::map<std::string, Judgments>& queries() const noexcept {
    return judgments_;
  }
  bool contains(std::string_view query) const;
  const Judgments& judgments(std::string_view query) const;
  Label label(std::string_view query, std::string_view doc) const;
  std::size_t relevant_count(std::string_view query) const;

  // Collection-row mask of IGNORE documents for one query.
  std::vector<bool> ignore_mask(std::string_view query,
                                const EmbeddingStore& collection) const;
  // Collection-row mask of RELEVANT documents for one query.
  std::vector<bool> relevant_mask(std::string_view query,
                                  const EmbeddingStore& collection) const;

 private:
  std::map<std::string, Judgments> judgments_;
};

enum class Similarity { kCosine, kNegEuclidean };

std::string_view to_string(Similarity s);
Similarity similarity_from_string(std::string_view s);

inline constexpr std::size_t kDefaultCutoff = 100;

struct RetrievalConfig {
  Similarity similarity = Similarity::kCosine;
  std::size_t k = kDefaultCutoff;
};

struct RankedEntry {
  std::size_t row = 0;  // row in the collection store
  std::string id;
  double score = 0.0;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
  // First n entries (or all of them).
  RankedList prefix(std::size_t n) const;
};

enum class Orientation { kHigherIsBetter, kHigherIsHarder };

std::string_view to_string(Orientation o);
Orientation orientation_from_string(std::string_view s);

// Scores of one predictor, keyed by query id (ordered for stable output).
struct PredictorOutput {
  std::string name;
  Orientation orientation = Orientation::kHigherIsBetter;
  std::map<std::string, double> scores;
};

enum class Measure { kAveragePrecision, kPrecisionAtK };

// "AP" or "P@<k>".
std::string measure_name(Measure m, std::size_t k);

struct EffectivenessTable {
  Measure measure = Measure::kAveragePrecision;
  std::size_t k = kDefaultCutoff;  // only meaningful for P@k
  std::map<std::string, double> values;

  std::string name() const { return measure_name(measure, k); }
};

// Parses "ap", "AP", "p@100", "P@10"...
EffectivenessTable parse_measure(std::string_view text);

}  // namespace iqpp
