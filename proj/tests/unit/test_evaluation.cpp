#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "expect_error.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

#include "iqpp/corpus_io.hpp"
#include "iqpp/evaluation.hpp"

using namespace iqpp;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, int levels = 0) {
  std::vector<double> v(n);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> u(0, std::max(levels - 1, 0));
  for (auto& x : v) x = levels > 0 ? u(rng) : g(rng);
  return v;
}

SystemResults one_system(const std::vector<double>& truth, const std::vector<double>& scores,
                         bool supervised = false) {
  SystemResults s;
  s.system = "sys";
  EffectivenessTable t;
  PredictorOutput p{"pred", Orientation::kHigherIsBetter, {}};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto id = "q" + std::to_string(1000 + i);
    t.values[id] = truth[i];
    p.scores[id] = scores[i];
  }
  s.effectiveness.push_back(t);
  s.predictors.push_back({p, supervised, std::nullopt});
  return s;
}

}  // namespace

TEST(Pearson, AffineAndNegation) {
  const std::vector<double> x{1, 2, 3, 5, 8};
  std::vector<double> y, z;
  for (double v : x) {
    y.push_back(2 * v + 1);
    z.push_back(-v);
  }
  EXPECT_NEAR(pearson(x, y).value, 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, z).value, -1.0, 1e-15);
}

TEST(Pearson, MatchesDefinitionOracle) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto x = random_vector(rng, 100);
    const auto y = random_vector(rng, 100);
    const auto r = pearson(x, y);
    ASSERT_TRUE(r.defined);
    EXPECT_NEAR(r.value, oracle::pearson(x, y), 1e-12);
  }
}

TEST(Pearson, UndefinedAndErrors) {
  const std::vector<double> c{2, 2, 2, 2};
  const std::vector<double> x{1, 2, 3, 4};
  EXPECT_FALSE(pearson(c, x).defined);
  EXPECT_TRUE(std::isnan(pearson(c, x).value));
  EXPECT_IQPP_ERROR(ErrorCode::kLengthMismatch, pearson(x, std::vector<double>{1, 2, 3}));
}

TEST(Pearson, AffineInvariance) {
  std::mt19937_64 rng(2);
  const auto x = random_vector(rng, 60);
  const auto y = random_vector(rng, 60);
  std::vector<double> xa;
  for (double v : x) xa.push_back(3.5 * v - 2);
  EXPECT_NEAR(pearson(x, y).value, pearson(xa, y).value, 1e-12);
}

TEST(Kendall, HandAndSymmetry) {
  const std::vector<double> x{1, 2, 3}, y{3, 1, 2};
  EXPECT_EQ(kendall_tau(x, y).value, -1.0 / 3.0);
  EXPECT_EQ(oracle::kendall_tau_b(x, y), -1.0 / 3.0);
  EXPECT_EQ(kendall_tau(x, x).value, 1.0);
  std::mt19937_64 rng(3);
  const auto a = random_vector(rng, 50), b = random_vector(rng, 50);
  std::vector<double> neg;
  for (double v : b) neg.push_back(-v);
  EXPECT_NEAR(kendall_tau(a, neg).value, -kendall_tau(a, b).value, 1e-15);
}

TEST(Kendall, MatchesPairCountingWithTies) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto x = random_vector(rng, 200, 7);
    const auto y = random_vector(rng, 200, 5);
    EXPECT_EQ(kendall_tau(x, y).value, oracle::kendall_tau_b(x, y));
  }
}

TEST(Kendall, DependsOnlyOnRanks) {
  std::mt19937_64 rng(5);
  const auto x = random_vector(rng, 80), y = random_vector(rng, 80, 6);
  std::vector<double> tx;
  for (double v : x) tx.push_back(std::exp(2 * v) + 1);
  EXPECT_EQ(kendall_tau(x, y).value, kendall_tau(tx, y).value);
  EXPECT_FALSE(kendall_tau(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}).defined);
  EXPECT_IQPP_ERROR(ErrorCode::kLengthMismatch, kendall_tau(x, std::vector<double>{1}));
}

TEST(Significance, ClosedForm) {
  const auto s = significance(0.5, 102);
  EXPECT_NEAR(s.t, 5.7735, 1e-4);
  EXPECT_NEAR(s.t, 0.5 * std::sqrt(100 / 0.75), 1e-12);
  EXPECT_TRUE(s.significant);
  const auto z = significance(0.0, 50);
  EXPECT_EQ(z.t, 0.0);
  EXPECT_FALSE(z.significant);
  const auto d = significance(-1.0, 10);
  EXPECT_TRUE(d.degenerate);
  EXPECT_TRUE(d.significant);
  EXPECT_TRUE(std::isinf(d.t) && d.t < 0);
}

TEST(Significance, CriticalValuesMatchNumericalIntegration) {
  for (double dof : {10.0, 68.0, 698.0}) {
    EXPECT_NEAR(t_critical(0.01, dof), oracle::t_critical(0.01, dof), 1e-4) << dof;
  }
}

TEST(BuildReport, PerfectPredictor) {
  std::mt19937_64 rng(6);
  const auto truth = random_vector(rng, 40);
  const auto bundle = build_report({one_system(truth, truth)}, {}, {});
  ASSERT_EQ(bundle.report.rows.size(), 1u);
  const auto& row = bundle.report.rows[0];
  EXPECT_NEAR(row.pearson, 1.0, 1e-12);
  EXPECT_EQ(row.kendall, 1.0);
  EXPECT_TRUE(row.pearson_significant);
  EXPECT_TRUE(row.kendall_significant);
  EXPECT_EQ(row.n, 40u);
  ASSERT_EQ(bundle.plots.size(), 1u);
  EXPECT_EQ(bundle.plots[0].ground_truth, bundle.plots[0].predicted);
}

TEST(BuildReport, MissingScores) {
  auto s = one_system({0.1, 0.2, 0.3}, {1, 2, 3});
  s.predictors[0].output.scores.erase(s.predictors[0].output.scores.begin());
  EXPECT_IQPP_ERROR(ErrorCode::kMissingScores, build_report({s}, {}, {}));
}

TEST(BuildReport, SupervisedRowsAverageFolds) {
  std::mt19937_64 rng(7);
  const auto truth = random_vector(rng, 30);
  auto scores = truth;
  for (auto& v : scores) v += 0.5 * std::normal_distribution<double>()(rng);
  const auto s = one_system(truth, scores, true);
  std::map<std::string, std::size_t> folds;
  std::size_t i = 0;
  for (const auto& [q, v] : s.effectiveness[0].values) folds[q] = i++ % 3;
  const auto bundle = build_report({s}, folds, {});
  const auto& row = bundle.report.rows[0];
  ASSERT_EQ(row.folds.size(), 3u);
  double mean_p = 0, mean_k = 0;
  for (std::size_t f = 0; f < 3; ++f) {
    std::vector<double> x, y;
    std::size_t j = 0;
    for (const auto& [q, v] : s.effectiveness[0].values) {
      if (j++ % 3 == f) {
        x.push_back(s.predictors[0].output.scores.at(q));
        y.push_back(v);
      }
    }
    mean_p += oracle::pearson(x, y) / 3;
    mean_k += oracle::kendall_tau_b(x, y) / 3;
  }
  EXPECT_NEAR(row.pearson, mean_p, 1e-12);
  EXPECT_NEAR(row.kendall, mean_k, 1e-12);
  EXPECT_NEAR(row.pooled_pearson, oracle::pearson(bundle.plots[0].predicted, bundle.plots[0].ground_truth), 1e-12);
}

TEST(BuildReport, RandomPredictorIsNearZero) {
  std::mt19937_64 rng(8);
  int inside = 0;
  const int trials = 50000;
  for (int t = 0; t < trials; ++t) {
    const auto x = random_vector(rng, 700), y = random_vector(rng, 700);
    inside += std::abs(pearson(x, y).value) < 0.1;
  }
  const double rate = static_cast<double>(inside) / trials;
  EXPECT_GE(rate, 0.99);
  // Exact null: |r| < 0.1 iff |t| < 0.1 * sqrt(698 / 0.99).
  const double exact = 1.0 - oracle::two_sided_tail(0.1 * std::sqrt(698 / 0.99), 698);
  EXPECT_NEAR(rate, exact, 0.002);
}

TEST(BuildReport, RoundTripsThroughWriters) {
  iqpp::testing::TempDir tmp;
  std::mt19937_64 rng(9);
  const auto truth = random_vector(rng, 25);
  const auto scores = random_vector(rng, 25);
  auto bundle = build_report({one_system(truth, scores)}, {}, {0.01, "abc", 3});
  write_report(bundle.report, tmp.path());
  const auto r = load_report(tmp / "report.json");
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.config_hash, "abc");
  EXPECT_EQ(r.rows[0].pearson, bundle.report.rows[0].pearson);
  EXPECT_EQ(r.rows[0].kendall, bundle.report.rows[0].kendall);
  EXPECT_EQ(r.rows[0].pearson_significant, bundle.report.rows[0].pearson_significant);
}
