#include "ivt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "ivt/error.hpp"

namespace ivt {

void AccuracyMatrix::validate() const {
  if (a.size() != overall.size()) throw ShapeError("accuracy matrix: row count differs from overall");
  auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  for (std::size_t t = 0; t < a.size(); ++t) {
    if (a[t].size() != t + 1) throw ShapeError("accuracy matrix is not lower triangular");
    if (!std::all_of(a[t].begin(), a[t].end(), in_unit) || !in_unit(overall[t])) {
      throw PreconditionError("accuracy entries must lie in [0, 1]");
    }
  }
}

std::vector<double> per_task_mean_overall(const AccuracyMatrix& matrix) {
  matrix.validate();
  std::vector<double> out;
  for (const auto& row : matrix.a) {
    double s = 0.0;
    for (double v : row) s += v;
    out.push_back(s / static_cast<double>(row.size()));
  }
  return out;
}

double average_accuracy(const AccuracyMatrix& matrix) {
  matrix.validate();
  if (matrix.tasks() == 0) throw PreconditionError("average accuracy of an empty matrix");
  double s = 0.0;
  for (double v : matrix.overall) s += v;
  return s / static_cast<double>(matrix.tasks());
}

double last_accuracy(const AccuracyMatrix& matrix) {
  matrix.validate();
  if (matrix.tasks() == 0) throw PreconditionError("last accuracy of an empty matrix");
  return matrix.overall.back();
}

namespace {

std::vector<double> column_forgetting(const AccuracyMatrix& matrix, ForgettingWindow window) {
  matrix.validate();
  const std::size_t T = matrix.tasks();
  if (T < 2) throw PreconditionError("forgetting needs at least two tasks");
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < T; ++i) {
    double best;
    if (window == ForgettingWindow::range) {
      best = matrix.a[i][i];
      for (std::size_t t = i + 1; t + 1 < T; ++t) best = std::max(best, matrix.a[t][i]);
    } else {
      best = std::max(matrix.a[i][i], matrix.a[T - 2][i]);
    }
    out.push_back(best - matrix.a[T - 1][i]);
  }
  return out;
}

}  // namespace

double forgetting_measure(const AccuracyMatrix& matrix, ForgettingWindow window) {
  const auto cols = column_forgetting(matrix, window);
  double s = 0.0;
  for (double v : cols) s += v;
  return s / static_cast<double>(cols.size());
}

MetricsReport compute_metrics(const AccuracyMatrix& matrix, ForgettingWindow window) {
  MetricsReport r;
  r.aa = average_accuracy(matrix);
  r.la = last_accuracy(matrix);
  r.overall = matrix.overall;
  if (matrix.tasks() >= 2) {
    r.per_task_forgetting = column_forgetting(matrix, window);
    r.fm = forgetting_measure(matrix, window);
  }
  return r;
}

MetricDelta avg_improvement(std::span<const MetricsReport> before,
                            std::span<const MetricsReport> after) {
  if (before.size() != after.size()) throw PreconditionError("avg_improvement: unpaired lists");
  if (before.empty()) throw PreconditionError("avg_improvement: no pairs");
  MetricDelta d;
  std::size_t fm_pairs = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    d.aa += after[i].aa - before[i].aa;
    d.la += after[i].la - before[i].la;
    if (before[i].fm.has_value() != after[i].fm.has_value()) {
      throw PreconditionError("avg_improvement: paired reports disagree on task count");
    }
    if (before[i].fm) {
      d.fm += *after[i].fm - *before[i].fm;
      ++fm_pairs;
    }
  }
  const double n = static_cast<double>(before.size());
  d.aa /= n;
  d.la /= n;
  if (fm_pairs > 0) d.fm /= static_cast<double>(fm_pairs);
  return d;
}

namespace {

MetricSummary summarize(const std::vector<double>& v) {
  MetricSummary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - s.mean) * (x - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(v.size()));
  return s;
}

}  // namespace

AggregatedMetrics aggregate(std::span<const MetricsReport> runs) {
  if (runs.empty()) throw PreconditionError("aggregate: no runs");
  std::vector<double> aa, la, fm;
  for (const auto& r : runs) {
    aa.push_back(r.aa);
    la.push_back(r.la);
    if (r.fm) fm.push_back(*r.fm);
  }
  return {summarize(aa), summarize(la), summarize(fm), runs.size()};
}

nlohmann::json to_json(const AccuracyMatrix& matrix) {
  return {{"a", matrix.a}, {"overall", matrix.overall}};
}

AccuracyMatrix accuracy_matrix_from_json(const nlohmann::json& j) {
  AccuracyMatrix m;
  try {
    m.a = j.at("a").get<std::vector<std::vector<double>>>();
    m.overall = j.at("overall").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("accuracy matrix JSON: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json j = {{"AA", report.aa},
                      {"LA", report.la},
                      {"FM", nullptr},
                      {"overall", report.overall},
                      {"per_task_forgetting", report.per_task_forgetting}};
  if (report.fm) j["FM"] = *report.fm;
  return j;
}

MetricsReport metrics_report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  try {
    r.aa = j.at("AA").get<double>();
    r.la = j.at("LA").get<double>();
    if (!j.at("FM").is_null()) r.fm = j.at("FM").get<double>();
    r.overall = j.value("overall", std::vector<double>{});
    r.per_task_forgetting = j.value("per_task_forgetting", std::vector<double>{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics JSON: ") + e.what());
  }
  return r;
}

nlohmann::json to_json(const AggregatedMetrics& agg) {
  auto s = [](const MetricSummary& m) { return nlohmann::json{{"mean", m.mean}, {"std", m.stddev}}; };
  return {{"AA", s(agg.aa)}, {"LA", s(agg.la)}, {"FM", s(agg.fm)}, {"runs", agg.runs}};
}

namespace {

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

std::string cell(const MetricSummary& m, std::size_t runs) {
  if (runs > 1) return fmt("%.2f (%.2f)", 100.0 * m.mean, 100.0 * m.stddev);
  return fmt("%.2f", 100.0 * m.mean);
}

}  // namespace

std::string metrics_table(const std::vector<std::pair<std::string, AggregatedMetrics>>& rows,
                          const std::vector<std::pair<std::string, MetricDelta>>& improvements) {
  std::vector<TableRow> table;
  table.push_back({"method", {"AA↑", "LA↑", "FM↓"}});
  for (const auto& [label, agg] : rows) {
    table.push_back({label, {cell(agg.aa, agg.runs), cell(agg.la, agg.runs), cell(agg.fm, agg.runs)}});
  }
  for (const auto& [label, d] : improvements) {
    table.push_back({label, {fmt("%+.2f", 100.0 * d.aa), fmt("%+.2f", 100.0 * d.la),
                             fmt("%+.2f", 100.0 * d.fm)}});
  }
  // Width in code points so the arrows do not skew alignment.
  auto width = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char ch : s) n += (ch & 0xC0) != 0x80;
    return n;
  };
  std::vector<std::size_t> w(4, 0);
  for (const auto& r : table) {
    w[0] = std::max(w[0], width(r.label));
    for (std::size_t c = 0; c < 3; ++c) w[c + 1] = std::max(w[c + 1], width(r.cells[c]));
  }
  std::ostringstream out;
  for (const auto& r : table) {
    out << r.label << std::string(w[0] - width(r.label), ' ');
    for (std::size_t c = 0; c < 3; ++c) {
      out << "  " << std::string(w[c + 1] - width(r.cells[c]), ' ') << r.cells[c];
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace ivt
