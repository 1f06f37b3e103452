#include "pdac/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pdac::metrics {

ConfusionCounts ConfusionCounts::from_pairs(const std::vector<int>& predictions,
                                            const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw EmptyInputError("confusion: prediction/label length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      (predictions[i] == 1 ? c.tp : c.fn)++;
    else
      (predictions[i] == 1 ? c.fp : c.tn)++;
  }
  return c;
}

double mcc(const ConfusionCounts& c) {
  if (c.total() == 0) throw EmptyInputError("mcc: empty confusion counts");
  const double tp = double(c.tp), fp = double(c.fp), fn = double(c.fn),
               tn = double(c.tn);
  const double denom2 = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom2 == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom2);
}

double accuracy(const ConfusionCounts& c) {
  if (c.total() == 0) throw EmptyInputError("accuracy: empty confusion counts");
  return double(c.tp + c.tn) / double(c.total());
}

double auc_roc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw UndefinedMetricError("auc_roc: score/label length mismatch");
  std::int64_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l == 1 ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw UndefinedMetricError("auc_roc: both classes must be present");

  // midrank formulation of the Mann-Whitney statistic
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * double(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += midrank;
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * double(n_pos) * double(n_pos + 1);
  return u / (double(n_pos) * double(n_neg));
}

RunSummary summarize_runs(const std::vector<double>& values) {
  if (values.size() < 2)
    throw InsufficientRunsError("summarize_runs: need at least 2 values");
  RunSummary s;
  s.values = values;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
           double(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / double(values.size() - 1));
  return s;
}

}  // namespace pdac::metrics
