#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pdac::metrics {

struct EmptyInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientRunsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfusionCounts {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }
  static ConfusionCounts from_pairs(const std::vector<int>& predictions,
                                    const std::vector<int>& labels);
};

/// Matthews correlation coefficient; any zero denominator factor yields 0.
double mcc(const ConfusionCounts& c);

double accuracy(const ConfusionCounts& c);

/// Mann-Whitney formulation: P(score_pos > score_neg) + 0.5 * P(tie).
/// Throws UndefinedMetricError unless both label values occur.
double auc_roc(const std::vector<double>& scores,
               const std::vector<int>& labels);

struct RunSummary {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n-1)
};

RunSummary summarize_runs(const std::vector<double>& values);

}  // namespace pdac::metrics
