#include "iqpp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

namespace iqpp {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_same_length(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kLengthMismatch, "correlation inputs differ in length");
  }
}

Correlation undefined() { return {kNaN, false}; }

// Pairs tied within sorted runs: sum of t*(t-1)/2.
template <typename Eq>
std::int64_t tied_pairs(std::size_t n, Eq same) {
  std::int64_t total = 0;
  std::int64_t run = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i < n && same(i - 1, i)) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Stable merge sort of `v`, returning the number of strict inversions.
std::int64_t sort_counting_inversions(std::vector<double>& v, std::vector<double>& scratch,
                                      std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = sort_counting_inversions(v, scratch, lo, mid) +
                       sort_counting_inversions(v, scratch, mid, hi);
  std::size_t i = lo;
  std::size_t j = mid;
  std::size_t out = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      scratch[out++] = v[j++];
    } else {
      scratch[out++] = v[i++];
    }
  }
  while (i < mid) scratch[out++] = v[i++];
  while (j < hi) scratch[out++] = v[j++];
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
            scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

}  // namespace

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  const auto n = x.size();
  if (n < 3) return undefined();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return undefined();
  const double r = sxy / std::sqrt(sxx * syy);
  return {std::clamp(r, -1.0, 1.0), true};
}

Correlation kendall_tau(std::span<const double> x, std::span<const double> y) {
  require_same_length(x, y);
  const auto n = x.size();
  if (n < 3) return undefined();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return y[a] < y[b];
  });

  const auto total = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  const auto x_ties = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return x[order[a]] == x[order[b]];
  });
  const auto joint_ties = tied_pairs(n, [&](std::size_t a, std::size_t b) {
    return x[order[a]] == x[order[b]] && y[order[a]] == y[order[b]];
  });

  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  std::vector<double> scratch(n);
  const auto discordant = sort_counting_inversions(ys, scratch, 0, n);
  const auto y_ties = tied_pairs(n, [&](std::size_t a, std::size_t b) { return ys[a] == ys[b]; });

  if (total == x_ties || total == y_ties) return undefined();
  const std::int64_t concordant_minus_discordant =
      total - x_ties - y_ties + joint_ties - 2 * discordant;
  const double tau = static_cast<double>(concordant_minus_discordant) /
                     std::sqrt(static_cast<double>(total - x_ties) *
                               static_cast<double>(total - y_ties));
  return {tau, true};
}

double t_critical(double alpha, double dof) {
  if (!(alpha > 0.0 && alpha < 1.0) || !(dof > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "t_critical needs alpha in (0,1) and dof > 0");
  }
  const boost::math::students_t dist(dof);
  return boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
}

Significance significance(double r, std::size_t n, double alpha) {
  if (n < 3) throw Error(ErrorCode::kInvalidArgument, "significance needs n >= 3");
  Significance s;
  s.critical = t_critical(alpha, static_cast<double>(n - 2));
  if (std::isnan(r)) {
    s.t = kNaN;
    return s;
  }
  if (std::abs(r) >= 1.0) {
    s.degenerate = true;
    s.significant = true;
    s.t = std::copysign(std::numeric_limits<double>::infinity(), r);
    return s;
  }
  s.t = r * std::sqrt(static_cast<double>(n - 2) / (1.0 - r * r));
  s.significant = std::abs(s.t) > s.critical;
  return s;
}

namespace {

double mean_defined(const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : values) {
    if (!std::isnan(v)) {
      sum += v;
      ++count;
    }
  }
  return count == 0 ? kNaN : sum / static_cast<double>(count);
}

}  // namespace

ReportBundle build_report(const std::vector<SystemResults>& systems,
                          const std::map<std::string, std::size_t>& folds,
                          const ReportOptions& options) {
  ReportBundle bundle;
  bundle.report.config_hash = options.config_hash;
  bundle.report.seed = options.seed;
  bundle.report.alpha = options.alpha;

  for (const auto& system : systems) {
    for (const auto& predictor : system.predictors) {
      for (const auto& table : system.effectiveness) {
        const auto measure = table.name();
        if (predictor.target_measure && *predictor.target_measure != measure) continue;

        PlotSeries plot{predictor.output.name, system.system, measure, {}, {}, {}};
        for (const auto& [query, truth] : table.values) {
          auto it = predictor.output.scores.find(query);
          if (it == predictor.output.scores.end()) {
            throw Error(ErrorCode::kMissingScores, "predictor '" + predictor.output.name +
                                                       "' has no score for query '" + query + "'");
          }
          plot.query_ids.push_back(query);
          plot.ground_truth.push_back(truth);
          plot.predicted.push_back(it->second);
        }

        ReportRow row;
        row.predictor = predictor.output.name;
        row.system = system.system;
        row.measure = measure;
        row.orientation = predictor.output.orientation;
        row.supervised = predictor.supervised;
        row.n = plot.query_ids.size();

        const auto pooled_p = pearson(plot.predicted, plot.ground_truth);
        const auto pooled_k = kendall_tau(plot.predicted, plot.ground_truth);
        row.pearson = pooled_p.value;
        row.kendall = pooled_k.value;
        row.pooled_pearson = kNaN;
        row.pooled_kendall = kNaN;

        if (predictor.supervised) {
          std::map<std::size_t, std::vector<std::size_t>> members;
          for (std::size_t i = 0; i < plot.query_ids.size(); ++i) {
            auto f = folds.find(plot.query_ids[i]);
            if (f == folds.end()) {
              throw Error(ErrorCode::kMissingScores,
                          "no fold assignment for query '" + plot.query_ids[i] + "'");
            }
            members[f->second].push_back(i);
          }
          std::vector<double> fold_p;
          std::vector<double> fold_k;
          for (const auto& [fold, idx] : members) {
            std::vector<double> xs;
            std::vector<double> ys;
            for (auto i : idx) {
              xs.push_back(plot.predicted[i]);
              ys.push_back(plot.ground_truth[i]);
            }
            const auto p = pearson(xs, ys);
            const auto k = kendall_tau(xs, ys);
            row.folds.push_back(FoldCorrelation{fold, idx.size(), p.value, k.value});
            fold_p.push_back(p.value);
            fold_k.push_back(k.value);
          }
          row.pooled_pearson = pooled_p.value;
          row.pooled_kendall = pooled_k.value;
          row.pearson = mean_defined(fold_p);
          row.kendall = mean_defined(fold_k);
        }

        if (row.n >= 3) {
          const auto sp = significance(row.pearson, row.n, options.alpha);
          const auto sk = significance(row.kendall, row.n, options.alpha);
          row.pearson_t = sp.t;
          row.pearson_significant = sp.significant;
          row.kendall_t = sk.t;
          row.kendall_significant = sk.significant;
        } else {
          row.pearson_t = row.kendall_t = kNaN;
        }
        bundle.report.rows.push_back(std::move(row));
        bundle.plots.push_back(std::move(plot));
      }
    }
  }
  return bundle;
}

}  // namespace iqpp
