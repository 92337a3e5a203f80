#include "iqpp/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iqpp/parallel.hpp"

namespace iqpp {

namespace {

template <typename A>
double similarity_impl(std::span<const A> a, std::span<const float> b, Similarity sim) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "vectors of different dimension");
  }
  double acc = 0.0;
  if (sim == Similarity::kCosine) {
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
    return acc;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return -std::sqrt(acc);
}

}  // namespace

double similarity(std::span<const float> a, std::span<const float> b, Similarity sim) {
  return similarity_impl(a, b, sim);
}

double similarity(std::span<const double> a, std::span<const float> b, Similarity sim) {
  return similarity_impl(a, b, sim);
}

RankedList rank(std::span<const float> query, const EmbeddingStore& collection,
                const RetrievalConfig& cfg, const std::vector<bool>& ignore) {
  if (query.size() != collection.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query dimension differs from collection");
  }
  if (!ignore.empty() && ignore.size() != collection.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "ignore mask size differs from collection");
  }
  std::vector<double> q(query.begin(), query.end());
  if (cfg.similarity == Similarity::kCosine) {
    double norm = 0.0;
    for (double v : q) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw Error(ErrorCode::kZeroVector, "zero query vector under cosine");
    for (double& v : q) v /= norm;
  }

  struct Candidate {
    double score;
    std::size_t row;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(collection.size());
  for (std::size_t r = 0; r < collection.size(); ++r) {
    if (!ignore.empty() && ignore[r]) continue;
    candidates.push_back(
        {similarity(std::span<const double>(q), collection.row(r), cfg.similarity), r});
  }
  const auto keep = std::min(cfg.k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), [&](const Candidate& a, const Candidate& b) {
                      if (a.score != b.score) return a.score > b.score;
                      return collection.id(a.row) < collection.id(b.row);
                    });
  std::vector<RankedEntry> entries;
  entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    entries.push_back(RankedEntry{candidates[i].row, collection.id(candidates[i].row),
                                  candidates[i].score});
  }
  return RankedList{{}, std::move(entries)};
}

std::vector<RankedList> rank_all(const EmbeddingStore& queries, const EmbeddingStore& collection,
                                 const Qrels& qrels, Similarity sim, std::size_t cutoff,
                                 std::size_t threads) {
  std::vector<std::string> ids;
  for (const auto& [query, docs] : qrels.queries()) {
    if (queries.find(query) == EmbeddingStore::npos) {
      throw Error(ErrorCode::kUnknownQueryId, "qrels query '" + query + "' has no embedding");
    }
    ids.push_back(query);
  }
  std::vector<RankedList> lists(ids.size());
  const RetrievalConfig cfg{sim, cutoff == 0 ? collection.size() : cutoff};
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    lists[i] = rank(queries.row(queries.find(ids[i])), collection, cfg,
                    qrels.ignore_mask(ids[i], collection));
    lists[i].query_id = ids[i];
  });
  return lists;
}

EmbeddingStore prepare_store(const EmbeddingStore& store, Similarity sim) {
  if (sim == Similarity::kCosine && !store.normalized()) return store.l2_normalized();
  return store;
}

double average_precision(const RankedList& ranked, const Qrels& qrels) {
  const auto total_relevant = qrels.relevant_count(ranked.query_id);
  if (total_relevant == 0) {
    throw Error(ErrorCode::kEmptyRelevantSet, "query '" + ranked.query_id + "' has no relevant doc");
  }
  const auto& docs = qrels.judgments(ranked.query_id);
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.entries.size(); ++i) {
    auto it = docs.find(ranked.entries[i].id);
    if (it != docs.end() && it->second == Label::kRelevant) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(total_relevant);
}

double precision_at_k(const RankedList& ranked, const Qrels& qrels, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "precision cutoff must be positive");
  if (qrels.relevant_count(ranked.query_id) == 0) {
    throw Error(ErrorCode::kEmptyRelevantSet, "query '" + ranked.query_id + "' has no relevant doc");
  }
  const auto& docs = qrels.judgments(ranked.query_id);
  const auto depth = std::min(k, ranked.entries.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    auto it = docs.find(ranked.entries[i].id);
    if (it != docs.end() && it->second == Label::kRelevant) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(k);
}

EffectivenessTable effectiveness(const std::vector<RankedList>& full_rankings, const Qrels& qrels,
                                 Measure measure, std::size_t k) {
  EffectivenessTable table;
  table.measure = measure;
  table.k = k;
  for (const auto& list : full_rankings) {
    table.values[list.query_id] = measure == Measure::kAveragePrecision
                                      ? average_precision(list, qrels)
                                      : precision_at_k(list, qrels, k);
  }
  return table;
}

SimilarityMatrix similarity_matrix(const RankedList& ranked, const EmbeddingStore& collection,
                                   Similarity sim) {
  SimilarityMatrix m;
  m.query_id = ranked.query_id;
  m.size = ranked.size();
  m.values.assign(m.size * m.size, 0.0);
  std::vector<std::size_t> rows;
  rows.reserve(m.size);
  for (const auto& e : ranked.entries) {
    const auto row = collection.find(e.id);
    if (row == EmbeddingStore::npos) {
      throw Error(ErrorCode::kUnknownDocId, "ranked doc '" + e.id + "' not in collection");
    }
    rows.push_back(row);
  }
  for (std::size_t i = 0; i < m.size; ++i) {
    for (std::size_t j = i; j < m.size; ++j) {
      const double s = similarity(collection.row(rows[i]), collection.row(rows[j]), sim);
      m.values[i * m.size + j] = s;
      m.values[j * m.size + i] = s;
    }
  }
  return m;
}

}  // namespace iqpp
