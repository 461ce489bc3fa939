#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mdgp {

/// Mann-Whitney AUC via rank sums, ties counted 1/2.
/// Throws std::invalid_argument when only one class is present.
double auc(const std::vector<double>& labels,
           const std::vector<double>& scores);

/// Mean squared difference between probabilities and 0/1 labels.
double brier(const std::vector<double>& labels,
             const std::vector<double>& probs);

double rmse(const std::vector<double>& truth,
            const std::vector<double>& pred);

/// Closed-interval empirical coverage and mean width.
std::pair<double, double> coverage_and_width(const std::vector<double>& truth,
                                             const std::vector<double>& lo,
                                             const std::vector<double>& hi);

/// One scalar metric value for one (method, outcome) pair in one replicate.
struct MetricValue {
  std::string method;
  std::string outcome;   // outcome name, or "" for run-level metrics
  std::string metric;    // auc | brier | rmse | coverage | width | seconds
  double value = 0.0;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample sd (divisor n-1); zero for a single replicate
  std::size_t n = 0;
};

/// Replicate-level aggregation keyed by (method, outcome, metric).
struct MetricReport {
  std::map<std::string, MeanSd> entries;  // key = method|outcome|metric
  static std::string key(const std::string& method, const std::string& outcome,
                         const std::string& metric);
  const MeanSd* find(const std::string& method, const std::string& outcome,
                     const std::string& metric) const;
};

MetricReport aggregate(const std::vector<std::vector<MetricValue>>& replicates);

/// Report CSV mirroring the benchmark tables: rows = (outcome, metric),
/// columns = methods, cells = "mean (sd)". Timing rows ("seconds") are
/// written separately by the bench driver because they are nondeterministic.
void write_csv_metric_report(const MetricReport& report,
                             const std::vector<std::string>& methods,
                             const std::string& path,
                             const std::string& header_comment = "",
                             bool include_seconds = false);

}  // namespace mdgp
