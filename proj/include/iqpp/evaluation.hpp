#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iqpp/core.hpp"
#include "iqpp/report.hpp"

namespace iqpp {

// A correlation coefficient; `defined` is false (and value NaN) when one
// side is constant or there are fewer than three points.
struct Correlation {
  double value = 0.0;
  bool defined = false;
};

// Sample Pearson correlation. Throws kLengthMismatch on unequal lengths.
Correlation pearson(std::span<const double> x, std::span<const double> y);

// Kendall tau-b in O(n log n) via merge-sort inversion counting.
Correlation kendall_tau(std::span<const double> x, std::span<const double> y);

struct Significance {
  double t = 0.0;
  double critical = 0.0;  // two-sided critical |t| at alpha with n-2 dof
  bool significant = false;
  bool degenerate = false;  // |r| == 1: significant by convention
};

// Two-sided t-test of a correlation r over n points: t = r*sqrt((n-2)/(1-r^2)).
Significance significance(double r, std::size_t n, double alpha = 0.01);

// Two-sided Student-t critical value for `dof` degrees of freedom.
double t_critical(double alpha, double dof);

// A predictor's scores within one system, plus how to evaluate them.
struct ScoredPredictor {
  PredictorOutput output;
  bool supervised = false;
  // When set, the scores are only compared against this measure name.
  std::optional<std::string> target_measure;
};

struct SystemResults {
  std::string system;
  std::vector<EffectivenessTable> effectiveness;
  std::vector<ScoredPredictor> predictors;
};

struct ReportOptions {
  double alpha = 0.01;
  std::string config_hash;
  std::uint64_t seed = 0;
};

struct ReportBundle {
  EvaluationReport report;
  std::vector<PlotSeries> plots;
};

// Every predictor against every measure of every system. Supervised rows
// average per-fold correlations (folds: query id -> fold) and also carry
// the pooled correlation. Throws kMissingScores when a predictor lacks an
// evaluated query.
ReportBundle build_report(const std::vector<SystemResults>& systems,
                          const std::map<std::string, std::size_t>& folds,
                          const ReportOptions& options);

}  // namespace iqpp
