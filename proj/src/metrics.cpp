#include "relparcel/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "relparcel/errors.hpp"

namespace relparcel {

namespace {

double ratio_or_convention(std::size_t num, std::size_t den, bool other_side_empty) {
  if (den == 0) return other_side_empty ? 1.0 : 0.0;
  return static_cast<double>(num) / static_cast<double>(den);
}

void check_lengths(const MultiHotLabel& pred, const MultiHotLabel& gt) {
  if (pred.size() != gt.size()) {
    throw DimensionError("prediction has " + std::to_string(pred.size()) + " labels, ground truth " +
                         std::to_string(gt.size()));
  }
}

}  // namespace

ExampleCounts example_counts(const MultiHotLabel& pred, const MultiHotLabel& gt) {
  check_lengths(pred, gt);
  ExampleCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    c.tp += p && g;
    c.fp += p && !g;
    c.fn += !p && g;
  }
  return c;
}

double f_beta(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  if (den <= 0.0) return 0.0;
  return (1.0 + b2) * precision * recall / den;
}

PrecisionRecall example_pr(const MultiHotLabel& pred, const MultiHotLabel& gt) {
  const ExampleCounts c = example_counts(pred, gt);
  const bool gt_empty = c.tp + c.fn == 0;
  const bool pred_empty = c.tp + c.fp == 0;
  return {ratio_or_convention(c.tp, c.tp + c.fp, gt_empty), ratio_or_convention(c.tp, c.tp + c.fn, pred_empty)};
}

double LabelCounts::precision() const { return ratio_or_convention(tp, tp + fp, tp + fn == 0); }

double LabelCounts::recall() const { return ratio_or_convention(tp, tp + fn, tp + fp == 0); }

MetricsReport dataset_metrics(const std::vector<MultiHotLabel>& preds, const std::vector<MultiHotLabel>& gts) {
  if (preds.empty()) throw ContractError("dataset_metrics on an empty dataset");
  if (preds.size() != gts.size()) {
    throw DimensionError(std::to_string(preds.size()) + " predictions for " + std::to_string(gts.size()) +
                         " ground-truth rows");
  }
  const std::size_t num_labels = gts.front().size();
  MetricsReport r;
  r.per_label.assign(num_labels, {});
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (gts[i].size() != num_labels) throw DimensionError("ground-truth rows have differing label counts");
    const PrecisionRecall pr = example_pr(preds[i], gts[i]);
    r.mean_pe += pr.precision;
    r.mean_re += pr.recall;
    r.mean_f1 += f_beta(pr.precision, pr.recall, 1.0);
    r.mean_f2 += f_beta(pr.precision, pr.recall, 2.0);
    for (std::size_t l = 0; l < num_labels; ++l) {
      const bool p = preds[i][l] != 0, g = gts[i][l] != 0;
      r.per_label[l].tp += p && g;
      r.per_label[l].fp += p && !g;
      r.per_label[l].fn += !p && g;
    }
  }
  const auto n = static_cast<double>(preds.size());
  r.mean_pe /= n;
  r.mean_re /= n;
  r.mean_f1 /= n;
  r.mean_f2 /= n;

  std::size_t present = 0;
  for (const auto& c : r.per_label) {
    if (c.tp + c.fn == 0) continue;
    ++present;
    r.mean_pl += c.precision();
    r.mean_rl += c.recall();
  }
  if (present > 0) {
    r.mean_pl /= static_cast<double>(present);
    r.mean_rl /= static_cast<double>(present);
  }
  return r;
}

std::string format_report(const MetricsReport& report, const std::vector<std::string>& label_names) {
  std::string out;
  char buf[256];
  const std::pair<const char*, double> means[] = {
      {"mean_f1", report.mean_f1}, {"mean_f2", report.mean_f2}, {"mean_pe", report.mean_pe},
      {"mean_re", report.mean_re}, {"mean_pl", report.mean_pl}, {"mean_rl", report.mean_rl}};
  for (const auto& [name, value] : means) {
    std::snprintf(buf, sizeof buf, "%s = %.4f\n", name, value);
    out += buf;
  }
  out += "\nlabel,tp,fp,fn,p_l,r_l\n";
  for (std::size_t l = 0; l < report.per_label.size(); ++l) {
    const auto& c = report.per_label[l];
    const std::string name = l < label_names.size() ? label_names[l] : "label_" + std::to_string(l);
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%.4f,%.4f\n", name.c_str(), c.tp, c.fp, c.fn, c.precision(),
                  c.recall());
    out += buf;
  }
  return out;
}

}  // namespace relparcel
