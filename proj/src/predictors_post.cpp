#include "iqpp/predictors_post.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "iqpp/retrieval.hpp"

namespace iqpp {

namespace {

void require_nonempty(const RankedList& ranked) {
  if (ranked.empty()) {
    throw Error(ErrorCode::kEmptyList, "empty ranked list for query '" + ranked.query_id + "'");
  }
}

std::vector<std::size_t> resolve_rows(const RankedList& ranked, const EmbeddingStore& store) {
  std::vector<std::size_t> rows;
  rows.reserve(ranked.size());
  for (const auto& e : ranked.entries) {
    auto row = e.row < store.size() && store.id(e.row) == e.id ? e.row : store.find(e.id);
    if (row == EmbeddingStore::npos) {
      throw Error(ErrorCode::kUnknownDocId, "ranked doc '" + e.id + "' not in store");
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> mean_embedding(const std::vector<std::size_t>& rows,
                                   const EmbeddingStore& store) {
  std::vector<double> mean(store.dim(), 0.0);
  for (auto r : rows) {
    const auto v = store.row(r);
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += v[d];
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());
  return mean;
}

}  // namespace

double score_variance(const RankedList& ranked) {
  require_nonempty(ranked);
  const double n = static_cast<double>(ranked.size());
  double mean = 0.0;
  for (const auto& e : ranked.entries) mean += e.score;
  mean /= n;
  double acc = 0.0;
  for (const auto& e : ranked.entries) acc += (e.score - mean) * (e.score - mean);
  return acc / n;
}

double embedding_variance(const RankedList& ranked, const EmbeddingStore& store) {
  require_nonempty(ranked);
  const auto rows = resolve_rows(ranked, store);
  const auto mean = mean_embedding(rows, store);
  double acc = 0.0;
  for (auto r : rows) {
    const auto v = store.row(r);
    for (std::size_t d = 0; d < mean.size(); ++d) {
      const double diff = v[d] - mean[d];
      acc += diff * diff;
    }
  }
  return acc / static_cast<double>(rows.size());
}

std::size_t median_image(const RankedList& ranked, const EmbeddingStore& store, Similarity sim) {
  require_nonempty(ranked);
  const auto rows = resolve_rows(ranked, store);
  const auto mean = mean_embedding(rows, store);
  double mean_norm = 0.0;
  for (double m : mean) mean_norm += m * m;
  mean_norm = std::sqrt(mean_norm);

  // Larger closeness is better for both modes.
  auto closeness = [&](std::size_t row) {
    const auto v = store.row(row);
    if (sim == Similarity::kNegEuclidean) {
      double acc = 0.0;
      for (std::size_t d = 0; d < mean.size(); ++d) {
        const double diff = v[d] - mean[d];
        acc += diff * diff;
      }
      return -std::sqrt(acc);
    }
    double dot = 0.0;
    double norm = 0.0;
    for (std::size_t d = 0; d < mean.size(); ++d) {
      dot += v[d] * mean[d];
      norm += static_cast<double>(v[d]) * v[d];
    }
    if (mean_norm == 0.0 || norm == 0.0) return 0.0;
    return dot / (std::sqrt(norm) * mean_norm);
  };

  std::size_t best = rows.front();
  double best_score = closeness(best);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double s = closeness(rows[i]);
    if (s > best_score || (s == best_score && store.id(rows[i]) < store.id(best))) {
      best = rows[i];
      best_score = s;
    }
  }
  return best;
}

double list_iou(const RankedList& a, const RankedList& b) {
  std::unordered_set<std::string> left;
  for (const auto& e : a.entries) left.insert(e.id);
  std::unordered_set<std::string> all = left;
  std::size_t shared = 0;
  for (const auto& e : b.entries) {
    if (left.count(e.id)) ++shared;
    all.insert(e.id);
  }
  if (all.empty()) return 1.0;
  return static_cast<double>(shared) / static_cast<double>(all.size());
}

double adapted_query_feedback(const RankedList& ranked, const EmbeddingStore& collection,
                              const RetrievalConfig& cfg, const std::vector<bool>& ignore) {
  const auto median = median_image(ranked, collection, cfg.similarity);
  auto expanded = rank(collection.row(median), collection, cfg, ignore);
  expanded.query_id = ranked.query_id;
  return list_iou(ranked, expanded);
}

namespace {

// Top-k over the dimensions still flagged in `keep`. Under COSINE both
// sides are re-normalized on the kept dimensions; a vector with nothing
// left gets -inf and is never returned.
std::vector<std::size_t> masked_top_k(std::span<const float> query,
                                      const EmbeddingStore& collection, const RetrievalConfig& cfg,
                                      const std::vector<bool>& ignore,
                                      const std::vector<std::size_t>& kept) {
  constexpr double kExcluded = -std::numeric_limits<double>::infinity();
  double q_norm = 0.0;
  for (auto d : kept) q_norm += static_cast<double>(query[d]) * query[d];
  q_norm = std::sqrt(q_norm);

  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(collection.size());
  for (std::size_t r = 0; r < collection.size(); ++r) {
    if (!ignore.empty() && ignore[r]) continue;
    const auto v = collection.row(r);
    double s = 0.0;
    if (cfg.similarity == Similarity::kCosine) {
      double dot = 0.0;
      double v_norm = 0.0;
      for (auto d : kept) {
        dot += static_cast<double>(query[d]) * v[d];
        v_norm += static_cast<double>(v[d]) * v[d];
      }
      s = (q_norm == 0.0 || v_norm == 0.0) ? kExcluded : dot / (q_norm * std::sqrt(v_norm));
    } else {
      double acc = 0.0;
      for (auto d : kept) {
        const double diff = static_cast<double>(query[d]) - v[d];
        acc += diff * diff;
      }
      s = -std::sqrt(acc);
    }
    if (s != kExcluded) scored.emplace_back(s, r);
  }
  const auto keep = std::min(cfg.k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    [&](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return collection.id(a.second) < collection.id(b.second);
                    });
  std::vector<std::size_t> rows(keep);
  for (std::size_t i = 0; i < keep; ++i) rows[i] = scored[i].second;
  return rows;
}

}  // namespace

FeatureRemovalResult iterative_feature_removal(std::span<const float> query,
                                               const EmbeddingStore& collection,
                                               const RetrievalConfig& cfg,
                                               const FeatureRemovalOptions& options,
                                               const std::vector<bool>& ignore) {
  const auto dim = collection.dim();
  if (query.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch, "query dimension differs from collection");
  }
  if (options.removed_per_iteration == 0) {
    throw Error(ErrorCode::kInvalidArgument, "must remove at least one dimension per round");
  }

  std::vector<bool> removed(dim, false);
  std::vector<std::size_t> kept(dim);
  std::iota(kept.begin(), kept.end(), 0);

  FeatureRemovalResult result;
  auto current = masked_top_k(query, collection, cfg, ignore, kept);
  std::vector<bool> in_all(collection.size(), false);
  std::vector<bool> in_any(collection.size(), false);
  for (auto r : current) in_all[r] = in_any[r] = true;
  std::size_t intersection = current.size();
  std::size_t union_size = current.size();
  result.intersection_sizes.push_back(intersection);

  for (std::size_t round = 0; round < options.iterations; ++round) {
    if (kept.size() <= options.removed_per_iteration) {
      result.exhausted = true;
      break;
    }
    std::vector<std::pair<double, std::size_t>> correlation;
    correlation.reserve(kept.size());
    for (auto d : kept) {
      double acc = 0.0;
      for (auto r : current) acc += static_cast<double>(query[d]) * collection.row(r)[d];
      correlation.emplace_back(acc, d);
    }
    const auto m = options.removed_per_iteration;
    std::partial_sort(correlation.begin(), correlation.begin() + static_cast<std::ptrdiff_t>(m),
                      correlation.end(), [](const auto& a, const auto& b) {
                        if (a.first != b.first) return a.first > b.first;
                        return a.second < b.second;
                      });
    std::vector<std::size_t> dropped;
    for (std::size_t i = 0; i < m; ++i) {
      removed[correlation[i].second] = true;
      dropped.push_back(correlation[i].second);
    }
    std::sort(dropped.begin(), dropped.end());
    result.removed.push_back(std::move(dropped));
    kept.erase(std::remove_if(kept.begin(), kept.end(), [&](auto d) { return removed[d]; }),
               kept.end());

    current = masked_top_k(query, collection, cfg, ignore, kept);
    std::vector<bool> now(collection.size(), false);
    for (auto r : current) {
      now[r] = true;
      if (!in_any[r]) {
        in_any[r] = true;
        ++union_size;
      }
    }
    for (std::size_t r = 0; r < collection.size(); ++r) {
      if (in_all[r] && !now[r]) {
        in_all[r] = false;
        --intersection;
      }
    }
    assert(intersection <= result.intersection_sizes.back());
    result.intersection_sizes.push_back(intersection);
    ++result.iterations_run;
  }

  result.score = union_size == 0 ? 1.0
                                 : static_cast<double>(intersection) / static_cast<double>(union_size);
  return result;
}

}  // namespace iqpp
