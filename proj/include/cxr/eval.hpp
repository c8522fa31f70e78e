#pragma once

#include <string>
#include <vector>

namespace cxr {

struct ConfusionMatrix {
  int n_classes = 0;
  // counts[actual][predicted]
  std::vector<std::vector<long>> counts;

  long total() const;
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int n_classes);

// Per-fold metrics. Macro values are unweighted means over classes. A class
// whose precision, recall or F1 denominator is zero scores 0 for that metric
// and is flagged in `degenerate` so reports can call it out.
struct FoldReport {
  std::vector<double> class_precision, class_recall, class_f1;
  std::vector<bool> degenerate;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double f1 = 0.0;         // macro
  double accuracy = 0.0;
  double balanced_accuracy = 0.0;
  double auc = 0.0;  // filled by the caller for binary tasks, see roc_auc
};

FoldReport metrics(const ConfusionMatrix& cm);

// Mann-Whitney statistic: the fraction of (positive, negative) pairs ranked
// correctly by score, ties counting one half. labels are 0/1.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricStat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, divisor k-1
};

struct AggregateReport {
  MetricStat precision, recall, f1, accuracy, balanced_accuracy, auc;
};

AggregateReport aggregate(const std::vector<FoldReport>& folds);

// {"folds":[{...}], "aggregate":{"accuracy":{"mean":..,"std":..}, ...}}
std::string report_to_json(const std::vector<FoldReport>& folds, const AggregateReport& agg);

}  // namespace cxr
