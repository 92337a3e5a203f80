#include "iqpp/meta_regressor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "iqpp/detail/binary_io.hpp"
#include "iqpp/parallel.hpp"

namespace iqpp {

std::size_t FeatureTable::find_row(const std::string& query_id) const {
  auto it = std::find(query_ids.begin(), query_ids.end(), query_id);
  if (it == query_ids.end()) {
    throw Error(ErrorCode::kUnknownQueryId, "no feature row for query '" + query_id + "'");
  }
  return static_cast<std::size_t>(it - query_ids.begin());
}

FeatureTable FeatureTable::from_predictors(const std::vector<PredictorOutput>& outputs,
                                           const std::vector<std::string>& query_ids) {
  FeatureTable table;
  table.query_ids = query_ids;
  for (const auto& o : outputs) table.columns.push_back(o.name);
  table.values.reserve(query_ids.size() * outputs.size());
  for (const auto& q : query_ids) {
    for (const auto& o : outputs) {
      auto it = o.scores.find(q);
      if (it == o.scores.end()) {
        throw Error(ErrorCode::kMissingScores,
                    "predictor '" + o.name + "' has no score for query '" + q + "'");
      }
      table.values.push_back(it->second);
    }
  }
  return table;
}

std::vector<double> Normalizer::apply(std::span<const double> row) const {
  if (row.size() != min.size()) {
    throw Error(ErrorCode::kNormalizationMismatch,
                fmt::format("row has {} columns, normalizer {}", row.size(), min.size()));
  }
  std::vector<double> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) {
    const double span = max[c] - min[c];
    out[c] = span > 0.0 ? std::clamp((row[c] - min[c]) / span, 0.0, 1.0) : 0.5;
  }
  return out;
}

NormalizedTable minmax_normalize(const FeatureTable& table,
                                 const std::vector<std::string>& train_ids) {
  if (train_ids.empty()) throw Error(ErrorCode::kTooFewRows, "normalization needs training rows");
  NormalizedTable result;
  auto& norm = result.normalizer;
  norm.columns = table.columns;
  norm.min.assign(table.cols(), std::numeric_limits<double>::infinity());
  norm.max.assign(table.cols(), -std::numeric_limits<double>::infinity());
  for (const auto& id : train_ids) {
    const auto row = table.row(table.find_row(id));
    for (std::size_t c = 0; c < row.size(); ++c) {
      norm.min[c] = std::min(norm.min[c], row[c]);
      norm.max[c] = std::max(norm.max[c], row[c]);
    }
  }
  result.table.columns = table.columns;
  result.table.query_ids = table.query_ids;
  result.table.values.reserve(table.values.size());
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto mapped = norm.apply(table.row(r));
    result.table.values.insert(result.table.values.end(), mapped.begin(), mapped.end());
  }
  return result;
}

std::vector<GridPoint> expand_grid(const SvrGrid& grid) {
  std::vector<GridPoint> points;
  for (auto kernel : grid.kernels) {
    for (double c : grid.C) {
      for (double nu : grid.nu) points.push_back(GridPoint{kernel, c, nu});
    }
  }
  return points;
}

namespace {

// Seeded balanced partition of [0, n): shuffled position i goes to fold i % folds.
std::vector<std::size_t> partition(std::size_t n, std::size_t folds, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t i = 0; i < n; ++i) fold_of[order[i]] = i % folds;
  return fold_of;
}

struct Split {
  std::vector<double> x;
  std::vector<double> y;
};

Split select_rows(std::span<const double> x, std::size_t features, std::span<const double> y,
                  const std::vector<std::size_t>& rows) {
  Split s;
  for (auto r : rows) {
    s.x.insert(s.x.end(), x.begin() + static_cast<std::ptrdiff_t>(r * features),
               x.begin() + static_cast<std::ptrdiff_t>((r + 1) * features));
    s.y.push_back(y[r]);
  }
  return s;
}

}  // namespace

SvrModel train_svr(std::span<const double> x, std::size_t features,
                   std::span<const double> targets, const SvrGrid& grid, std::uint64_t seed,
                   std::size_t threads) {
  const auto n = targets.size();
  if (features == 0 || x.size() != n * features) {
    throw Error(ErrorCode::kLengthMismatch, "feature matrix does not match target count");
  }
  const auto points = expand_grid(grid);
  if (points.empty()) throw Error(ErrorCode::kInvalidArgument, "empty SVR grid");
  if (grid.inner_folds < 2 || n < 2 * grid.inner_folds) {
    throw Error(ErrorCode::kTooFewRows,
                fmt::format("{} rows is too few for {}-fold model selection", n, grid.inner_folds));
  }

  const auto [lo, hi] = std::minmax_element(targets.begin(), targets.end());
  if (*lo == *hi) {
    SvrModel constant = fit_nu_svr(x, features, targets, SvrParams{});
    return constant;
  }

  const auto fold_of = partition(n, grid.inner_folds, seed);
  std::vector<Split> train(grid.inner_folds);
  std::vector<Split> test(grid.inner_folds);
  for (std::size_t f = 0; f < grid.inner_folds; ++f) {
    std::vector<std::size_t> in;
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < n; ++r) (fold_of[r] == f ? out : in).push_back(r);
    train[f] = select_rows(x, features, targets, in);
    test[f] = select_rows(x, features, targets, out);
  }

  std::vector<double> mse(points.size(), 0.0);
  parallel_for(points.size(), threads, [&](std::size_t p) {
    SvrParams params;
    params.kernel = points[p].kernel;
    params.C = points[p].C;
    params.nu = points[p].nu;
    double squared = 0.0;
    for (std::size_t f = 0; f < grid.inner_folds; ++f) {
      const auto model = fit_nu_svr(train[f].x, features, train[f].y, params);
      for (std::size_t i = 0; i < test[f].y.size(); ++i) {
        const double err =
            predict(model, std::span<const double>(test[f].x).subspan(i * features, features)) -
            test[f].y[i];
        squared += err * err;
      }
    }
    mse[p] = squared / static_cast<double>(n);
  });

  std::size_t best = 0;
  for (std::size_t p = 1; p < points.size(); ++p) {
    if (mse[p] < mse[best]) best = p;
  }
  SvrParams chosen;
  chosen.kernel = points[best].kernel;
  chosen.C = points[best].C;
  chosen.nu = points[best].nu;
  auto model = fit_nu_svr(x, features, targets, chosen);
  model.cv_mse = mse[best];
  return model;
}

std::map<std::string, std::size_t> make_folds(const std::vector<std::string>& query_ids,
                                              std::size_t folds, std::uint64_t seed) {
  if (folds == 0) throw Error(ErrorCode::kInvalidArgument, "fold count must be positive");
  std::vector<std::string> sorted = query_ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::kDuplicateId, "duplicate query id in fold assignment");
  }
  if (sorted.size() < folds) {
    throw Error(ErrorCode::kTooFewQueries,
                fmt::format("{} queries cannot fill {} folds", sorted.size(), folds));
  }
  const auto fold_of = partition(sorted.size(), folds, seed);
  std::map<std::string, std::size_t> assignment;
  for (std::size_t i = 0; i < sorted.size(); ++i) assignment.emplace(sorted[i], fold_of[i]);
  return assignment;
}

double MetaModel::predict_named(const std::map<std::string, double>& raw) const {
  if (raw.size() != normalizer.columns.size()) {
    throw Error(ErrorCode::kNormalizationMismatch,
                fmt::format("{} features given, model expects {}", raw.size(),
                            normalizer.columns.size()));
  }
  std::vector<double> row;
  row.reserve(raw.size());
  for (const auto& name : normalizer.columns) {
    auto it = raw.find(name);
    if (it == raw.end()) {
      throw Error(ErrorCode::kNormalizationMismatch, "missing feature '" + name + "'");
    }
    row.push_back(it->second);
  }
  return predict(svr, normalizer.apply(row));
}

MetaCrossValidation cross_validate_meta(const FeatureTable& table,
                                        const std::map<std::string, double>& targets,
                                        const std::map<std::string, std::size_t>& folds,
                                        const SvrGrid& grid, std::uint64_t seed,
                                        std::size_t threads) {
  std::set<std::size_t> fold_ids;
  for (const auto& q : table.query_ids) {
    auto f = folds.find(q);
    if (f == folds.end()) throw Error(ErrorCode::kMissingScores, "no fold for query '" + q + "'");
    if (!targets.count(q)) throw Error(ErrorCode::kMissingScores, "no target for query '" + q + "'");
    fold_ids.insert(f->second);
  }

  MetaCrossValidation cv;
  for (auto fold : fold_ids) {
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    for (const auto& q : table.query_ids) {
      (folds.at(q) == fold ? test_ids : train_ids).push_back(q);
    }
    if (train_ids.empty()) {
      throw Error(ErrorCode::kTooFewQueries, "cross-validation needs at least two folds");
    }
    auto normalized = minmax_normalize(table, train_ids);
    std::vector<double> x;
    std::vector<double> y;
    for (const auto& q : train_ids) {
      const auto row = normalized.table.row(normalized.table.find_row(q));
      x.insert(x.end(), row.begin(), row.end());
      y.push_back(targets.at(q));
    }
    MetaFold result;
    result.fold = fold;
    result.model.normalizer = std::move(normalized.normalizer);
    result.model.svr = train_svr(x, table.cols(), y, grid, seed + fold, threads);
    for (const auto& q : test_ids) {
      cv.predictions[q] = predict(result.model.svr, normalized.table.row(normalized.table.find_row(q)));
    }
    result.test_ids = std::move(test_ids);
    cv.folds.push_back(std::move(result));
  }
  return cv;
}

namespace {

constexpr char kMetaMagic[] = "IQPPSVR1";
constexpr std::uint32_t kMetaVersion = 1;

}  // namespace

void save_meta_model(const MetaModel& model, const std::filesystem::path& path) {
  detail::BinaryWriter out(path);
  out.magic(kMetaMagic);
  out.u32(kMetaVersion);
  const auto& n = model.normalizer;
  out.u64(n.columns.size());
  for (std::size_t c = 0; c < n.columns.size(); ++c) {
    out.short_string(n.columns[c]);
    out.f64(n.min[c]);
    out.f64(n.max[c]);
  }
  const auto& s = model.svr;
  out.u32(s.params.kernel == KernelType::kLinear ? 0 : 1);
  out.f64(s.params.C);
  out.f64(s.params.nu);
  out.f64(s.params.gamma);
  out.f64(s.params.tolerance);
  out.u64(s.params.max_iterations);
  out.u64(s.features);
  out.f64(s.bias);
  out.f64(s.epsilon);
  out.u64(s.iterations);
  out.u32(s.converged ? 1 : 0);
  out.u32(s.degenerate_targets ? 1 : 0);
  out.f64(s.cv_mse);
  out.u64(s.coefficients.size());
  for (double c : s.coefficients) out.f64(c);
  for (double v : s.support_vectors) out.f64(v);
  out.finish();
}

MetaModel load_meta_model(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kMetaMagic);
  if (const auto v = in.u32(); v != kMetaVersion) {
    throw Error(ErrorCode::kFormatError, fmt::format("unsupported model version {}", v));
  }
  MetaModel model;
  auto& n = model.normalizer;
  const auto cols = in.u64();
  in.require(cols, 18);
  for (std::uint64_t c = 0; c < cols; ++c) {
    n.columns.push_back(in.short_string());
    n.min.push_back(in.f64());
    n.max.push_back(in.f64());
  }
  auto& s = model.svr;
  const auto kernel = in.u32();
  if (kernel > 1) throw Error(ErrorCode::kFormatError, "unknown kernel tag");
  s.params.kernel = kernel == 0 ? KernelType::kLinear : KernelType::kRbf;
  s.params.C = in.f64();
  s.params.nu = in.f64();
  s.params.gamma = in.f64();
  s.params.tolerance = in.f64();
  s.params.max_iterations = in.u64();
  s.features = in.u64();
  s.bias = in.f64();
  s.epsilon = in.f64();
  s.iterations = in.u64();
  s.converged = in.u32() != 0;
  s.degenerate_targets = in.u32() != 0;
  s.cv_mse = in.f64();
  const auto count = in.u64();
  in.require(count, 8 * (1 + s.features));
  s.coefficients.resize(count);
  for (auto& c : s.coefficients) c = in.f64();
  s.support_vectors.resize(count * s.features);
  for (auto& v : s.support_vectors) v = in.f64();
  in.expect_end();
  return model;
}

}  // namespace iqpp
