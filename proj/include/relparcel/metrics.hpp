#ifndef RELPARCEL_METRICS_HPP
#define RELPARCEL_METRICS_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace relparcel {

/// Length-L presence vector, entries 0 or 1.
using MultiHotLabel = std::vector<int>;

struct ExampleCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  bool operator==(const ExampleCounts&) const = default;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

ExampleCounts example_counts(const MultiHotLabel& pred, const MultiHotLabel& gt);

/// (1 + b^2) p r / (b^2 p + r); 0 when the denominator vanishes.
double f_beta(double precision, double recall, double beta);

/// Per-example precision/recall. An empty denominator gives 1 when the
/// matching side is empty too (nothing predicted and nothing to predict),
/// otherwise 0.
PrecisionRecall example_pr(const MultiHotLabel& pred, const MultiHotLabel& gt);

struct LabelCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision() const;
  double recall() const;
};

struct MetricsReport {
  double mean_f1 = 0.0;
  double mean_f2 = 0.0;
  double mean_pe = 0.0;
  double mean_re = 0.0;
  double mean_pl = 0.0;
  double mean_rl = 0.0;
  std::vector<LabelCounts> per_label;
};

/// Example-based means over the dataset, label-based means over labels that
/// are positive in the ground truth at least once.
MetricsReport dataset_metrics(const std::vector<MultiHotLabel>& preds, const std::vector<MultiHotLabel>& gts);

/// Six means with 4 decimals followed by the per-label table.
std::string format_report(const MetricsReport& report, const std::vector<std::string>& label_names);

}  // namespace relparcel

#endif  // RELPARCEL_METRICS_HPP
