#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "iqpp/core.hpp"

namespace iqpp {

inline constexpr std::size_t kDefaultRemovedPerIteration = 50;
inline constexpr std::size_t kDefaultRemovalIterations = 15;

// Population variance of the similarity scores in the list.
double score_variance(const RankedList& ranked);

// Mean squared Euclidean deviation of the retrieved embeddings from their
// mean (trace of the population covariance).
double embedding_variance(const RankedList& ranked, const EmbeddingStore& store);

// Row (in `store`) of the retrieved item closest to the mean retrieved
// embedding: smallest Euclidean distance, or largest cosine under COSINE.
// Ties resolve to the smallest id.
std::size_t median_image(const RankedList& ranked, const EmbeddingStore& store, Similarity sim);

// |A intersect B| / |A union B| over document ids; two empty lists give 1.
double list_iou(const RankedList& a, const RankedList& b);

// Re-queries with the median image and returns the IoU of both top-k lists.
// `ignore` is the original query's IGNORE mask.
double adapted_query_feedback(const RankedList& ranked, const EmbeddingStore& collection,
                              const RetrievalConfig& cfg, const std::vector<bool>& ignore = {});

struct FeatureRemovalOptions {
  std::size_t removed_per_iteration = kDefaultRemovedPerIteration;  // m
  std::size_t iterations = kDefaultRemovalIterations;               // l
};

struct FeatureRemovalResult {
  double score = 1.0;              // |intersection of all lists| / |union|
  std::size_t iterations_run = 0;  // removal rounds actually performed
  bool exhausted = false;          // stopped early: too few dimensions left
  std::vector<std::size_t> intersection_sizes;  // after each list, non-increasing
  std::vector<std::vector<std::size_t>> removed;  // dimensions zeroed per round
};

// Repeatedly zeroes the m dimensions with the largest summed Hadamard
// product between the query and its current top-k, then re-ranks.
// Stops early (exhausted) once no more than m dimensions remain.
FeatureRemovalResult iterative_feature_removal(std::span<const float> query,
                                               const EmbeddingStore& collection,
                                               const RetrievalConfig& cfg,
                                               const FeatureRemovalOptions& options = {},
                                               const std::vector<bool>& ignore = {});

}  // namespace iqpp
