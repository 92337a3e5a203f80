#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "iqpp/core.hpp"

namespace iqpp {

// Predictor scores as regression features: one row per query, one column
// per predictor.
struct FeatureTable {
  std::vector<std::string> columns;
  std::vector<std::string> query_ids;
  std::vector<double> values;  // query_ids.size() x columns.size(), row-major

  std::size_t rows() const noexcept { return query_ids.size(); }
  std::size_t cols() const noexcept { return columns.size(); }
  std::span<const double> row(std::size_t r) const {
    return {values.data() + r * cols(), cols()};
  }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  std::size_t find_row(const std::string& query_id) const;

  // Columns from predictor outputs; every output must score every query
  // (kMissingScores otherwise).
  static FeatureTable from_predictors(const std::vector<PredictorOutput>& outputs,
                                      const std::vector<std::string>& query_ids);
};

// Per-column min-max parameters learned from training rows.
struct Normalizer {
  std::vector<std::string> columns;
  std::vector<double> min;
  std::vector<double> max;

  // (x - min) / (max - min) clipped to [0,1]; constant columns map to 0.5.
  std::vector<double> apply(std::span<const double> row) const;
};

struct NormalizedTable {
  FeatureTable table;
  Normalizer normalizer;
};

// Fits min/max on `train_ids` only and maps every row of `table`.
NormalizedTable minmax_normalize(const FeatureTable& table,
                                 const std::vector<std::string>& train_ids);

enum class KernelType { kLinear, kRbf };

std::string_view to_string(KernelType k);

struct SvrParams {
  KernelType kernel = KernelType::kRbf;
  double C = 100.0;
  double nu = 0.25;
  double gamma = 0.0;  // RBF only; 0 -> 1 / (features * feature variance)
  double tolerance = 1e-3;
  std::size_t max_iterations = 100000;
};

// nu-SVR in the libsvm parameterization: dual box [0, C] per multiplier
// and sum(alpha + alpha*) = C * nu * n.
struct SvrModel {
  SvrParams params;
  std::size_t features = 0;
  std::vector<double> support_vectors;  // support x features, row-major
  std::vector<double> coefficients;     // alpha - alpha*, one per support vector
  double bias = 0.0;
  double epsilon = 0.0;  // tube half-width found by the solver
  std::size_t iterations = 0;
  bool converged = true;
  bool degenerate_targets = false;  // constant model
  double cv_mse = 0.0;              // inner-CV score of the selected grid point

  std::size_t support_count() const noexcept { return coefficients.size(); }
};

// Prediction for a row already normalized with the model's parameters.
// Throws kNormalizationMismatch when the row width differs.
double predict(const SvrModel& model, std::span<const double> row);

// Solves one nu-SVR problem (rows of `x` have `features` entries).
SvrModel fit_nu_svr(std::span<const double> x, std::size_t features,
                    std::span<const double> targets, const SvrParams& params);

struct SvrGrid {
  std::vector<double> C{0.1, 1.0, 10.0, 100.0};
  std::vector<double> nu{0.1, 0.25, 0.5, 0.75};
  std::vector<KernelType> kernels{KernelType::kLinear, KernelType::kRbf};
  std::size_t inner_folds = 3;
};

struct GridPoint {
  KernelType kernel;
  double C;
  double nu;
};

std::vector<GridPoint> expand_grid(const SvrGrid& grid);

// Grid search by inner-CV mean squared error (ties: first grid point),
// then a final fit on all rows. All-equal targets yield a constant model
// flagged degenerate_targets.
SvrModel train_svr(std::span<const double> x, std::size_t features,
                   std::span<const double> targets, const SvrGrid& grid = {},
                   std::uint64_t seed = 0, std::size_t threads = 1);

// Deterministic seeded partition into near-equal folds (sizes differ by at
// most one, lower fold indices take the remainder).
std::map<std::string, std::size_t> make_folds(const std::vector<std::string>& query_ids,
                                              std::size_t folds = 5, std::uint64_t seed = 0);

struct MetaModel {
  Normalizer normalizer;
  SvrModel svr;

  // Reorders a named raw row to the training schema, normalizes, predicts.
  double predict_named(const std::map<std::string, double>& raw) const;
};

struct MetaFold {
  std::size_t fold = 0;
  MetaModel model;
  std::vector<std::string> test_ids;
};

struct MetaCrossValidation {
  std::map<std::string, double> predictions;  // out-of-fold, every query
  std::vector<MetaFold> folds;
};

// For every fold: normalize on the other folds, grid-search + fit an SVR
// there, predict the held-out fold.
MetaCrossValidation cross_validate_meta(const FeatureTable& table,
                                        const std::map<std::string, double>& targets,
                                        const std::map<std::string, std::size_t>& folds,
                                        const SvrGrid& grid = {}, std::uint64_t seed = 0,
                                        std::size_t threads = 1);

void save_meta_model(const MetaModel& model, const std::filesystem::path& path);
MetaModel load_meta_model(const std::filesystem::path& path);

}  // namespace iqpp
