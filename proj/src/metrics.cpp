#include "mdgp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace mdgp {

double auc(const std::vector<double>& labels,
           const std::vector<double>& scores) {
  const std::size_t n = labels.size();
  if (scores.size() != n || n == 0) {
    throw std::invalid_argument("auc: labels/scores misaligned");
  }
  std::size_t n_pos = 0;
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) {
      throw std::invalid_argument("auc: labels must be 0/1");
    }
    if (y == 1.0) ++n_pos;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("auc: both classes required");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Average ranks over tied score groups; ties then contribute 1/2 a pair.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) +
                             static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1.0) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

double brier(const std::vector<double>& labels,
             const std::vector<double>& probs) {
  const std::size_t n = labels.size();
  if (probs.size() != n || n == 0) {
    throw std::invalid_argument("brier: labels/probs misaligned");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) {
      throw std::invalid_argument("brier: probability outside [0,1]");
    }
    const double d = labels[i] - probs[i];
    total += d * d;
  }
  return total / static_cast<double>(n);
}

double rmse(const std::vector<double>& truth,
            const std::vector<double>& pred) {
  const std::size_t n = truth.size();
  if (pred.size() != n || n == 0) {
    throw std::invalid_argument("rmse: length mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = truth[i] - pred[i];
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(n));
}

std::pair<double, double> coverage_and_width(const std::vector<double>& truth,
                                             const std::vector<double>& lo,
                                             const std::vector<double>& hi) {
  const std::size_t n = truth.size();
  if (lo.size() != n || hi.size() != n || n == 0) {
    throw std::invalid_argument("coverage_and_width: length mismatch");
  }
  double covered = 0.0;
  double width = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lo[i] > hi[i]) {
      throw std::invalid_argument("coverage_and_width: crossed endpoints");
    }
    if (lo[i] <= truth[i] && truth[i] <= hi[i]) covered += 1.0;
    width += hi[i] - lo[i];
  }
  return {covered / static_cast<double>(n), width / static_cast<double>(n)};
}

std::string MetricReport::key(const std::string& method,
                              const std::string& outcome,
                              const std::string& metric) {
  return method + "|" + outcome + "|" + metric;
}

const MeanSd* MetricReport::find(const std::string& method,
                                 const std::string& outcome,
                                 const std::string& metric) const {
  const auto it = entries.find(key(method, outcome, metric));
  return it == entries.end() ? nullptr : &it->second;
}

MetricReport aggregate(
    const std::vector<std::vector<MetricValue>>& replicates) {
  if (replicates.empty()) {
    throw std::invalid_argument("aggregate: no replicates");
  }
  std::map<std::string, std::vector<double>> grouped;
  for (const auto& rep : replicates) {
    for (const auto& mv : rep) {
      grouped[MetricReport::key(mv.method, mv.outcome, mv.metric)].push_back(
          mv.value);
    }
  }
  MetricReport report;
  for (const auto& [k, values] : grouped) {
    MeanSd ms;
    ms.n = values.size();
    for (double v : values) ms.mean += v;
    ms.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
      double sq = 0.0;
      for (double v : values) sq += (v - ms.mean) * (v - ms.mean);
      ms.sd = std::sqrt(sq / static_cast<double>(values.size() - 1));
    }
    report.entries[k] = ms;
  }
  return report;
}

void write_csv_metric_report(const MetricReport& report,
                             const std::vector<std::string>& methods,
                             const std::string& path,
                             const std::string& header_comment,
                             bool include_seconds) {
  // Collect (outcome, metric) row labels in a stable order.
  std::set<std::pair<std::string, std::string>> rows;
  for (const auto& [k, ms] : report.entries) {
    const auto p1 = k.find('|');
    const auto p2 = k.find('|', p1 + 1);
    const std::string outcome = k.substr(p1 + 1, p2 - p1 - 1);
    const std::string metric = k.substr(p2 + 1);
    if (!include_seconds && metric == "seconds") continue;
    rows.insert({outcome, metric});
  }

  std::string out;
  if (!header_comment.empty()) out += "# " + header_comment + "\n";
  out += "outcome,metric";
  for (const auto& m : methods) out += "," + m;
  out += "\n";
  char buf[80];
  for (const auto& [outcome, metric] : rows) {
    out += outcome + "," + metric;
    for (const auto& method : methods) {
      const MeanSd* ms = report.find(method, outcome, metric);
      if (ms == nullptr) {
        out += ",";
      } else {
        std::snprintf(buf, sizeof(buf), ",%.4f (%.4f)", ms->mean, ms->sd);
        out += buf;
      }
    }
    out += "\n";
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << out;
}

}  // namespace mdgp
