#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ivt {

/// Lower-triangular accuracy record of a class-incremental run.
///
/// a[t][i] (0-based here) is the accuracy on task i's test set after training
/// task t, for i <= t. overall[t] is the accuracy over every class seen up to
/// task t.
struct AccuracyMatrix {
  std::vector<std::vector<double>> a;
  std::vector<double> overall;

  std::size_t tasks() const { return overall.size(); }
  void validate() const;
};

// Mean of a[t][0..t] per row; the alternative to pooled overall accuracy.
std::vector<double> per_task_mean_overall(const AccuracyMatrix& matrix);

double average_accuracy(const AccuracyMatrix& matrix);
double last_accuracy(const AccuracyMatrix& matrix);

// `range` maximizes over t in i..T-1 (the usual definition); `endpoints`
// only compares t = i and t = T-1.
enum class ForgettingWindow { range, endpoints };

double forgetting_measure(const AccuracyMatrix& matrix,
                          ForgettingWindow window = ForgettingWindow::range);

struct MetricsReport {
  double aa = 0.0;
  double la = 0.0;
  std::optional<double> fm;  // undefined for a single task
  std::vector<double> overall;
  std::vector<double> per_task_forgetting;
};

MetricsReport compute_metrics(const AccuracyMatrix& matrix,
                              ForgettingWindow window = ForgettingWindow::range);

struct MetricDelta {
  double aa = 0.0;
  double la = 0.0;
  double fm = 0.0;
};

/// Mean of (after - before) per metric over paired reports. FM deltas are
/// raw, so a negative value means less forgetting.
MetricDelta avg_improvement(std::span<const MetricsReport> before,
                            std::span<const MetricsReport> after);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population std over runs
};

struct AggregatedMetrics {
  MetricSummary aa, la, fm;
  std::size_t runs = 0;
};

AggregatedMetrics aggregate(std::span<const MetricsReport> runs);

nlohmann::json to_json(const AccuracyMatrix& matrix);
AccuracyMatrix accuracy_matrix_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AggregatedMetrics& agg);

struct TableRow {
  std::string label;
  std::vector<std::string> cells;
};

/// Aligned text table with the fixed column order AA, LA, FM. Values are
/// percentages; mean (std) when the row aggregates several runs.
std::string metrics_table(const std::vector<std::pair<std::string, AggregatedMetrics>>& rows,
                          const std::vector<std::pair<std::string, MetricDelta>>& improvements = {});

}  // namespace ivt
