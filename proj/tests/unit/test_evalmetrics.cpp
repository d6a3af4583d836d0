#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ivt/error.hpp"
#include "ivt/metrics.hpp"
#include "ivt/rng.hpp"

namespace ivt {
namespace {

AccuracyMatrix from_overall(std::vector<double> overall) {
  AccuracyMatrix m;
  for (std::size_t t = 0; t < overall.size(); ++t) m.a.push_back(std::vector<double>(t + 1, overall[t]));
  m.overall = std::move(overall);
  return m;
}

AccuracyMatrix random_matrix(Rng& rng, std::size_t T) {
  AccuracyMatrix m;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> row(t + 1);
    for (auto& v : row) v = rng.below(3) == 0 ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform();
    m.a.push_back(row);
    m.overall.push_back(rng.uniform());
  }
  return m;
}

MetricsReport report(double aa, double la, std::optional<double> fm) {
  MetricsReport r;
  r.aa = aa;
  r.la = la;
  r.fm = fm;
  return r;
}

TEST(Average, Examples) {
  EXPECT_DOUBLE_EQ(average_accuracy(from_overall({0.6, 0.5, 0.4})), 0.5);
  const auto single = from_overall({0.73});
  EXPECT_EQ(average_accuracy(single), last_accuracy(single));
  EXPECT_EQ(average_accuracy(from_overall({0.25, 0.25, 0.25, 0.25})), 0.25);
  EXPECT_THROW(average_accuracy(AccuracyMatrix{}), PreconditionError);
}

TEST(Last, Examples) {
  EXPECT_EQ(last_accuracy(from_overall({0.6, 0.5, 0.4})), 0.4);
  EXPECT_EQ(last_accuracy(from_overall({0.9})), 0.9);
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const auto m = random_matrix(rng, 1 + rng.below(6));
    EXPECT_LE(last_accuracy(m), *std::max_element(m.overall.begin(), m.overall.end()));
  }
}

TEST(Forgetting, TwoTaskHandExample) {
  AccuracyMatrix m;
  m.a = {{0.8}, {0.7, 0.9}};
  m.overall = {0.8, 0.8};
  EXPECT_NEAR(forgetting_measure(m), 0.1, 1e-15);
}

TEST(Forgetting, ConstantColumnsHaveNone) {
  AccuracyMatrix m;
  m.a = {{0.9}, {0.9, 0.6}, {0.9, 0.6, 0.7}};
  m.overall = {0.9, 0.75, 0.73};
  EXPECT_EQ(forgetting_measure(m), 0.0);
}

TEST(Forgetting, MidSequencePeakUsesTheRange) {
  AccuracyMatrix m;
  m.a = {{0.5}, {0.9, 0.8}, {0.4, 0.6, 0.7}};
  m.overall = {0.5, 0.85, 0.57};
  // Column 1 peaks at t=2 (0.9), column 2 at t=2 (0.8).
  EXPECT_NEAR(forgetting_measure(m), ((0.9 - 0.4) + (0.8 - 0.6)) / 2.0, 1e-15);
  EXPECT_NEAR(forgetting_measure(m, ForgettingWindow::endpoints),
              ((0.9 - 0.4) + (0.8 - 0.6)) / 2.0, 1e-15);
  m.a = {{0.5}, {0.9, 0.8}, {0.7, 0.9, 0.6}, {0.4, 0.5, 0.5, 0.6}};
  m.overall = {0.5, 0.85, 0.73, 0.5};
  EXPECT_NEAR(forgetting_measure(m), ((0.9 - 0.4) + (0.9 - 0.5) + (0.6 - 0.5)) / 3.0, 1e-15);
  EXPECT_NEAR(forgetting_measure(m, ForgettingWindow::endpoints),
              ((0.7 - 0.4) + (0.9 - 0.5) + (0.6 - 0.5)) / 3.0, 1e-15);
}

TEST(Forgetting, NeedsTwoTasks) {
  EXPECT_THROW(forgetting_measure(from_overall({0.5})), PreconditionError);
  EXPECT_FALSE(compute_metrics(from_overall({0.5})).fm.has_value());
}

TEST(Forgetting, NonIncreasingColumnsAreNonNegative) {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const std::size_t T = 2 + rng.below(6);
    AccuracyMatrix m;
    std::vector<double> col_top(T);
    for (auto& v : col_top) v = rng.uniform();
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> row(t + 1);
      for (std::size_t i = 0; i <= t; ++i) row[i] = col_top[i] * std::pow(0.9, static_cast<double>(t - i));
      m.a.push_back(row);
      m.overall.push_back(0.5);
    }
    EXPECT_GE(forgetting_measure(m), 0.0);
  }
}

TEST(Metrics, MatchBruteForceOnRandomMatrices) {
  Rng rng(2024);
  for (int k = 0; k < 200; ++k) {
    const std::size_t T = 1 + rng.below(8);
    const auto m = random_matrix(rng, T);

    double aa = 0.0;
    for (std::size_t t = 0; t < T; ++t) aa += m.overall[t];
    aa /= static_cast<double>(T);
    EXPECT_EQ(average_accuracy(m), aa);
    EXPECT_EQ(last_accuracy(m), m.overall[T - 1]);

    if (T < 2) continue;
    double fm = 0.0;
    for (std::size_t i = 0; i + 1 < T; ++i) {
      double best = -2.0;
      for (std::size_t t = i; t + 1 < T; ++t) best = std::max(best, m.a[t][i] - m.a[T - 1][i]);
      fm += best;
    }
    fm /= static_cast<double>(T - 1);
    EXPECT_EQ(forgetting_measure(m), fm);
    const auto r = compute_metrics(m);
    EXPECT_EQ(r.aa, aa);
    EXPECT_EQ(*r.fm, fm);
    EXPECT_EQ(r.per_task_forgetting.size(), T - 1);
  }
}

TEST(Metrics, ValidateRejectsMalformedMatrices) {
  AccuracyMatrix m;
  m.a = {{0.5}, {0.5}};
  m.overall = {0.5, 0.5};
  EXPECT_THROW(average_accuracy(m), ShapeError);
  m.a = {{1.5}};
  m.overall = {0.5};
  EXPECT_THROW(average_accuracy(m), PreconditionError);
}

TEST(Metrics, PerTaskMeanAlternative) {
  AccuracyMatrix m;
  m.a = {{0.8}, {0.6, 1.0}};
  m.overall = {0.8, 0.75};
  const auto mean = per_task_mean_overall(m);
  EXPECT_EQ(mean[0], 0.8);
  EXPECT_EQ(mean[1], 0.8);
}

TEST(Improvement, Examples) {
  const std::vector<MetricsReport> before{report(0.60, 0.5, 0.2), report(0.50, 0.4, 0.3)};
  EXPECT_EQ(avg_improvement(before, before).aa, 0.0);
  EXPECT_EQ(avg_improvement(before, before).fm, 0.0);

  const std::vector<MetricsReport> b{report(60.0, 0, 0.0), report(50.0, 0, 0.0)};
  const std::vector<MetricsReport> a{report(61.16, 0, 0.0), report(51.16, 0, 0.0)};
  EXPECT_NEAR(avg_improvement(b, a).aa, 1.16, 1e-12);

  const std::vector<MetricsReport> one_b{report(0.5, 0.4, 0.3)};
  const std::vector<MetricsReport> one_a{report(0.6, 0.35, 0.1)};
  const auto d = avg_improvement(one_b, one_a);
  EXPECT_EQ(d.aa, 0.6 - 0.5);
  EXPECT_EQ(d.la, 0.35 - 0.4);
  EXPECT_EQ(d.fm, 0.1 - 0.3);
  EXPECT_THROW(avg_improvement(before, one_a), PreconditionError);
}

TEST(Aggregate, PopulationStd) {
  const std::vector<MetricsReport> runs{report(0.5, 0.4, 0.1), report(0.7, 0.6, 0.3)};
  const auto agg = aggregate(runs);
  EXPECT_EQ(agg.runs, 2u);
  EXPECT_NEAR(agg.aa.mean, 0.6, 1e-15);
  EXPECT_NEAR(agg.aa.stddev, 0.1, 1e-15);
  EXPECT_NEAR(agg.fm.stddev, 0.1, 1e-15);
}

TEST(Serialization, JsonRoundTrip) {
  Rng rng(6);
  const auto m = random_matrix(rng, 4);
  const auto back = accuracy_matrix_from_json(to_json(m));
  EXPECT_EQ(back.a, m.a);
  EXPECT_EQ(back.overall, m.overall);
  const auto r = compute_metrics(m);
  const auto rb = metrics_report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(rb.aa, r.aa);
  EXPECT_EQ(*rb.fm, *r.fm);
  const auto j = to_json(r);
  EXPECT_TRUE(j.contains("AA"));
  EXPECT_TRUE(j.contains("LA"));
  EXPECT_TRUE(j.contains("FM"));
}

TEST(Table, FixedColumnsAndFormatting) {
  AggregatedMetrics one;
  one.aa = {0.6543, 0.0};
  one.la = {0.5, 0.0};
  one.fm = {0.125, 0.0};
  one.runs = 1;
  AggregatedMetrics three = one;
  three.runs = 3;
  three.aa.stddev = 0.01;
  const auto text = metrics_table({{"naive", one}, {"quad_reg+ivt", three}},
                                  {{"Avg. Imp.", MetricDelta{0.0116, -0.002, -0.03}}});
  std::istringstream in(text);
  std::string header, r1, r2, r3;
  std::getline(in, header);
  std::getline(in, r1);
  std::getline(in, r2);
  std::getline(in, r3);
  const auto aa = header.find("AA");
  const auto la = header.find("LA");
  const auto fm = header.find("FM");
  EXPECT_LT(aa, la);
  EXPECT_LT(la, fm);
  EXPECT_NE(r1.find("65.43"), std::string::npos);
  EXPECT_EQ(r1.find('('), std::string::npos);
  EXPECT_NE(r2.find("65.43 (1.00)"), std::string::npos);
  EXPECT_NE(r3.find("+1.16"), std::string::npos);
  EXPECT_NE(r3.find("-3.00"), std::string::npos);
}

}  // namespace
}  // namespace ivt
