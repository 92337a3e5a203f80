#include "iqpp/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include <fmt/format.h>

namespace iqpp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kNonFiniteValue: return "NON_FINITE_VALUE";
    case ErrorCode::kDuplicateId: return "DUPLICATE_ID";
    case ErrorCode::kFormatError: return "FORMAT_ERROR";
    case ErrorCode::kUnknownLabel: return "UNKNOWN_LABEL";
    case ErrorCode::kUnknownDocId: return "UNKNOWN_DOC_ID";
    case ErrorCode::kUnknownQueryId: return "UNKNOWN_QUERY_ID";
    case ErrorCode::kEmptyRelevantSet: return "EMPTY_RELEVANT_SET";
    case ErrorCode::kMissingDetections: return "MISSING_DETECTIONS";
    case ErrorCode::kKTooLarge: return "K_TOO_LARGE";
    case ErrorCode::kDegenerateLabels: return "DEGENERATE_LABELS";
    case ErrorCode::kEmptyList: return "EMPTY_LIST";
    case ErrorCode::kZeroVector: return "ZERO_VECTOR";
    case ErrorCode::kLengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::kNormalizationMismatch: return "NORMALIZATION_MISMATCH";
    case ErrorCode::kTooFewQueries: return "TOO_FEW_QUERIES";
    case ErrorCode::kTooFewRows: return "TOO_FEW_ROWS";
    case ErrorCode::kMissingScores: return "MISSING_SCORES";
    case ErrorCode::kInvalidRange: return "INVALID_RANGE";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kIoError: return "IO_ERROR";
    case ErrorCode::kConfigError: return "CONFIG_ERROR";
  }
  return "UNKNOWN";
}

namespace {

double row_norm(std::span<const float> row) {
  double sum = 0.0;
  for (float v : row) sum += static_cast<double>(v) * v;
  return std::sqrt(sum);
}

}  // namespace

bool rows_unit_norm(std::size_t dim, std::span<const float> values) {
  if (dim == 0) return false;
  for (std::size_t off = 0; off + dim <= values.size(); off += dim) {
    if (std::abs(row_norm(values.subspan(off, dim)) - 1.0) > 1e-5) return false;
  }
  return true;
}

ValidationResult validate_store(const std::vector<std::string>& ids,
                                std::size_t dim,
                                std::span<const float> values) {
  ValidationResult result;
  auto add = [&](ErrorCode code, std::string detail) {
    result.violations.push_back({code, std::move(detail)});
  };
  if (ids.empty()) add(ErrorCode::kDimensionMismatch, "store has no ids");
  if (dim == 0) add(ErrorCode::kDimensionMismatch, "dimension must be positive");
  if (dim > 0 && values.size() % dim != 0) {
    add(ErrorCode::kDimensionMismatch,
        fmt::format("{} values is not a multiple of dim {}", values.size(), dim));
  } else if (dim > 0 && values.size() / dim != ids.size()) {
    add(ErrorCode::kDimensionMismatch,
        fmt::format("{} ids but {} rows", ids.size(), values.size() / dim));
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids) {
    if (id.empty()) add(ErrorCode::kDuplicateId, "empty id");
    if (!seen.insert(id).second) add(ErrorCode::kDuplicateId, "duplicate id '" + id + "'");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      const std::size_t row = dim > 0 ? i / dim : 0;
      add(ErrorCode::kNonFiniteValue,
          fmt::format("non-finite value in row {} column {}", row, dim > 0 ? i % dim : 0));
    }
  }
  return result;
}

ValidationResult validate_store(const EmbeddingStore& store) {
  return validate_store(store.ids(), store.dim(), store.values());
}

EmbeddingStore EmbeddingStore::create(std::vector<std::string> ids, std::size_t dim,
                                      std::vector<float> values) {
  auto check = validate_store(ids, dim, values);
  if (!check.ok()) {
    const auto& first = check.violations.front();
    throw Error(first.code, first.detail);
  }
  EmbeddingStore store;
  store.ids_ = std::move(ids);
  store.dim_ = dim;
  store.values_ = std::move(values);
  store.normalized_ = rows_unit_norm(dim, store.values_);
  store.index_.reserve(store.ids_.size());
  for (std::size_t i = 0; i < store.ids_.size(); ++i) store.index_.emplace(store.ids_[i], i);
  return store;
}

std::size_t EmbeddingStore::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? npos : it->second;
}

EmbeddingStore EmbeddingStore::l2_normalized() const {
  std::vector<float> scaled(values_.size());
  for (std::size_t r = 0; r < size(); ++r) {
    const auto src = row(r);
    const double norm = row_norm(src);
    if (norm == 0.0) {
      throw Error(ErrorCode::kZeroVector, "cannot L2-normalize zero row '" + ids_[r] + "'");
    }
    for (std::size_t c = 0; c < dim_; ++c) {
      scaled[r * dim_ + c] = static_cast<float>(src[c] / norm);
    }
  }
  return create(ids_, dim_, std::move(scaled));
}

Qrels Qrels::create(std::map<std::string, Judgments> judgments,
                    const EmbeddingStore& collection) {
  for (const auto& [query, docs] : judgments) {
    std::size_t relevant = 0;
    for (const auto& [doc, label] : docs) {
      if (collection.find(doc) == EmbeddingStore::npos) {
        throw Error(ErrorCode::kUnknownDocId,
                    "query '" + query + "' judges unknown doc '" + doc + "'");
      }
      if (label == Label::kRelevant) ++relevant;
    }
    if (relevant == 0) {
      throw Error(ErrorCode::kEmptyRelevantSet, "query '" + query + "' has no relevant doc");
    }
  }
  Qrels qrels;
  qrels.judgments_ = std::move(judgments);
  return qrels;
}

bool Qrels::contains(std::string_view query) const {
  return judgments_.count(std::string(query)) > 0;
}

const Qrels::Judgments& Qrels::judgments(std::string_view query) const {
  auto it = judgments_.find(std::string(query));
  if (it == judgments_.end()) {
    throw Error(ErrorCode::kUnknownQueryId, "no judgments for query '" + std::string(query) + "'");
  }
  return it->second;
}

Label Qrels::label(std::string_view query, std::string_view doc) const {
  const auto& docs = judgments(query);
  auto it = docs.find(std::string(doc));
  return it == docs.end() ? Label::kNonRelevant : it->second;
}

std::size_t Qrels::relevant_count(std::string_view query) const {
  const auto& docs = judgments(query);
  return static_cast<std::size_t>(std::count_if(
      docs.begin(), docs.end(), [](const auto& kv) { return kv.second == Label::kRelevant; }));
}

namespace {

std::vector<bool> label_mask(const Qrels::Judgments& docs, const EmbeddingStore& collection,
                             Label wanted) {
  std::vector<bool> mask(collection.size(), false);
  for (const auto& [doc, label] : docs) {
    if (label != wanted) continue;
    const auto row = collection.find(doc);
    if (row == EmbeddingStore::npos) {
      throw Error(ErrorCode::kUnknownDocId, "unknown doc '" + doc + "'");
    }
    mask[row] = true;
  }
  return mask;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::vector<bool> Qrels::ignore_mask(std::string_view query,
                                     const EmbeddingStore& collection) const {
  return label_mask(judgments(query), collection, Label::kIgnore);
}

std::vector<bool> Qrels::relevant_mask(std::string_view query,
                                       const EmbeddingStore& collection) const {
  return label_mask(judgments(query), collection, Label::kRelevant);
}

std::string_view to_string(Similarity s) {
  return s == Similarity::kCosine ? "cosine" : "neg_euclidean";
}

Similarity similarity_from_string(std::string_view s) {
  const auto l = lower(s);
  if (l == "cosine") return Similarity::kCosine;
  if (l == "neg_euclidean" || l == "euclidean") return Similarity::kNegEuclidean;
  throw Error(ErrorCode::kInvalidArgument, "unknown similarity '" + std::string(s) + "'");
}

RankedList RankedList::prefix(std::size_t n) const {
  RankedList out;
  out.query_id = query_id;
  const auto count = std::min(n, entries.size());
  out.entries.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

std::string_view to_string(Orientation o) {
  return o == Orientation::kHigherIsBetter ? "HIGHER_IS_BETTER" : "HIGHER_IS_HARDER";
}

Orientation orientation_from_string(std::string_view s) {
  if (s == "HIGHER_IS_BETTER") return Orientation::kHigherIsBetter;
  if (s == "HIGHER_IS_HARDER") return Orientation::kHigherIsHarder;
  throw Error(ErrorCode::kFormatError, "unknown orientation '" + std::string(s) + "'");
}

std::string measure_name(Measure m, std::size_t k) {
  return m == Measure::kAveragePrecision ? "AP" : fmt::format("P@{}", k);
}

EffectivenessTable parse_measure(std::string_view text) {
  const auto l = lower(text);
  EffectivenessTable table;
  if (l == "ap") {
    table.measure = Measure::kAveragePrecision;
    return table;
  }
  if (l.size() > 2 && l[0] == 'p' && l[1] == '@') {
    std::size_t k = 0;
    const auto* first = l.data() + 2;
    const auto* last = l.data() + l.size();
    auto [ptr, ec] = std::from_chars(first, last, k);
    if (ec == std::errc() && ptr == last && k > 0) {
      table.measure = Measure::kPrecisionAtK;
      table.k = k;
      return table;
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown measure '" + std::string(text) + "'");
}

}  // namespace iqpp
