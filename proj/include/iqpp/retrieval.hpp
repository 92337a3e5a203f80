#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "iqpp/core.hpp"
#include "iqpp/corpus_io.hpp"

namespace iqpp {

// Similarity of two vectors under `sim`, accumulated in double. COSINE
// assumes both inputs are already unit length (it is a plain dot product).
double similarity(std::span<const float> a, std::span<const float> b, Similarity sim);
double similarity(std::span<const double> a, std::span<const float> b, Similarity sim);

// Exact top-k search. Collection rows flagged in `ignore` never appear.
// Entries are ordered by (score desc, id asc); the list holds
// min(k, non-ignored rows) entries. For COSINE the collection must be
// L2-normalized and the query is normalized here.
RankedList rank(std::span<const float> query, const EmbeddingStore& collection,
                const RetrievalConfig& cfg, const std::vector<bool>& ignore = {});

// Ranks every row of `queries` that is judged in `qrels`, skipping that
// query's IGNORE documents. Lists come back in qrels query order.
// cutoff 0 ranks the whole collection.
std::vector<RankedList> rank_all(const EmbeddingStore& queries, const EmbeddingStore& collection,
                                 const Qrels& qrels, Similarity sim, std::size_t cutoff,
                                 std::size_t threads = 0);

// Copy of `store` ready for `sim`: L2-normalized for COSINE (zero rows are
// rejected with kZeroVector), unchanged otherwise.
EmbeddingStore prepare_store(const EmbeddingStore& store, Similarity sim);

// AP over the given ranking: (1/R) * sum over relevant ranks i of
// (relevant in top i) / i, with R the number of RELEVANT judgments.
double average_precision(const RankedList& ranked, const Qrels& qrels);

// |relevant in top k| / k, dividing by k even for shorter lists.
double precision_at_k(const RankedList& ranked, const Qrels& qrels, std::size_t k = kDefaultCutoff);

// Per-query effectiveness for full-collection rankings.
EffectivenessTable effectiveness(const std::vector<RankedList>& full_rankings, const Qrels& qrels,
                                 Measure measure, std::size_t k = kDefaultCutoff);

// Pairwise similarities between the retrieved items.
SimilarityMatrix similarity_matrix(const RankedList& ranked, const EmbeddingStore& collection,
                                   Similarity sim);

}  // namespace iqpp
