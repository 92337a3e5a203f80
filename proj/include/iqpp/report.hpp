#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "iqpp/core.hpp"

namespace iqpp {

struct FoldCorrelation {
  std::size_t fold = 0;
  std::size_t n = 0;
  double pearson = 0.0;
  double kendall = 0.0;
};

// One predictor x system x measure cell of the benchmark tables.
// Undefined correlations (constant input) are stored as NaN.
struct ReportRow {
  std::string predictor;
  std::string system;
  std::string measure;
  Orientation orientation = Orientation::kHigherIsBetter;
  bool supervised = false;
  std::size_t n = 0;
  double pearson = 0.0;
  double pearson_t = 0.0;
  bool pearson_significant = false;
  double kendall = 0.0;
  double kendall_t = 0.0;
  bool kendall_significant = false;
  // Supervised rows only: one correlation over pooled out-of-fold predictions.
  double pooled_pearson = 0.0;
  double pooled_kendall = 0.0;
  std::vector<FoldCorrelation> folds;
};

struct EvaluationReport {
  std::string config_hash;
  std::uint64_t seed = 0;
  double alpha = 0.01;
  std::vector<ReportRow> rows;
};

// Pairs of (ground truth, predicted) behind one report row.
struct PlotSeries {
  std::string predictor;
  std::string system;
  std::string measure;
  std::vector<std::string> query_ids;
  std::vector<double> ground_truth;
  std::vector<double> predicted;
};

}  // namespace iqpp
