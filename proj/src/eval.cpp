#include "cxr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace cxr {

long ConfusionMatrix::total() const {
  long t = 0;
  for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels,
                          int n_classes) {
  if (n_classes < 1) throw std::invalid_argument("confusion: need at least one class");
  if (preds.size() != labels.size())
    throw std::invalid_argument("confusion: prediction and label counts differ");
  ConfusionMatrix cm;
  cm.n_classes = n_classes;
  cm.counts.assign(n_classes, std::vector<long>(n_classes, 0));
  for (size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes || preds[i] < 0 || preds[i] >= n_classes)
      throw std::invalid_argument("confusion: class index out of range");
    ++cm.counts[labels[i]][preds[i]];
  }
  return cm;
}

FoldReport metrics(const ConfusionMatrix& cm) {
  const int C = cm.n_classes;
  if (C < 1 || cm.total() == 0) throw std::invalid_argument("metrics: empty confusion matrix");

  FoldReport r;
  r.class_precision.resize(C);
  r.class_recall.resize(C);
  r.class_f1.resize(C);
  r.degenerate.assign(C, false);

  long trace = 0;
  std::vector<long> actual(C, 0), predicted(C, 0);
  for (int a = 0; a < C; ++a)
    for (int p = 0; p < C; ++p) {
      if (cm.counts[a][p] < 0) throw std::invalid_argument("metrics: negative count");
      actual[a] += cm.counts[a][p];
      predicted[p] += cm.counts[a][p];
      if (a == p) trace += cm.counts[a][p];
    }

  for (int c = 0; c < C; ++c) {
    const double tp = static_cast<double>(cm.counts[c][c]);
    const bool no_pred = predicted[c] == 0, no_actual = actual[c] == 0;
    const double prec = no_pred ? 0.0 : tp / static_cast<double>(predicted[c]);
    const double rec = no_actual ? 0.0 : tp / static_cast<double>(actual[c]);
    const bool no_f1 = prec + rec == 0.0;
    r.class_precision[c] = prec;
    r.class_recall[c] = rec;
    r.class_f1[c] = no_f1 ? 0.0 : 2.0 * prec * rec / (prec + rec);
    r.degenerate[c] = no_pred || no_actual || no_f1;
    r.precision += prec;
    r.recall += rec;
    r.f1 += r.class_f1[c];
  }
  r.precision /= C;
  r.recall /= C;
  r.f1 /= C;

  const double total = static_cast<double>(cm.total());
  r.accuracy = static_cast<double>(trace) / total;

  // Balanced accuracy is the unweighted mean of per-class recalls, i.e. the
  // macro recall. With equal class counts that collapses algebraically to
  // trace/total; routing it through that single division keeps the two
  // numbers identical instead of a rounding hair apart.
  const bool uniform = std::all_of(actual.begin(), actual.end(),
                                   [&](long n) { return n == actual[0]; });
  r.balanced_accuracy = uniform ? r.accuracy : r.recall;
  return r;
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc_auc: score and label counts differ");
  const size_t n = scores.size();
  long np = 0, nn = 0;
  for (int l : labels) {
    if (l == 1)
      ++np;
    else if (l == 0)
      ++nn;
    else
      throw std::invalid_argument("roc_auc: labels must be 0 or 1");
  }
  if (np == 0 || nn == 0) throw std::invalid_argument("roc_auc: need both classes present");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // average ranks over tie groups; rank sums of halves stay exact in doubles,
  // so this matches the pairwise count bit for bit
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum_pos += rank;
    i = j + 1;
  }
  const double offset = static_cast<double>(np) * (static_cast<double>(np) + 1.0) / 2.0;
  return (rank_sum_pos - offset) / (static_cast<double>(np) * static_cast<double>(nn));
}

AggregateReport aggregate(const std::vector<FoldReport>& folds) {
  if (folds.size() < 2) throw std::invalid_argument("aggregate: need at least 2 folds");
  const auto stat = [&](double FoldReport::*field) {
    MetricStat s;
    for (const auto& f : folds) s.mean += f.*field;
    s.mean /= static_cast<double>(folds.size());
    double ss = 0.0;
    for (const auto& f : folds) {
      const double d = f.*field - s.mean;
      ss += d * d;
    }
    s.std = std::sqrt(ss / static_cast<double>(folds.size() - 1));
    return s;
  };
  AggregateReport agg;
  agg.precision = stat(&FoldReport::precision);
  agg.recall = stat(&FoldReport::recall);
  agg.f1 = stat(&FoldReport::f1);
  agg.accuracy = stat(&FoldReport::accuracy);
  agg.balanced_accuracy = stat(&FoldReport::balanced_accuracy);
  agg.auc = stat(&FoldReport::auc);
  return agg;
}

std::string report_to_json(const std::vector<FoldReport>& folds, const AggregateReport& agg) {
  nlohmann::ordered_json j;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : folds) {
    nlohmann::ordered_json jf;
    jf["precision"] = f.precision;
    jf["recall"] = f.recall;
    jf["f1"] = f.f1;
    jf["accuracy"] = f.accuracy;
    jf["balanced_accuracy"] = f.balanced_accuracy;
    jf["auc"] = f.auc;
    std::vector<int> degen;
    for (size_t c = 0; c < f.degenerate.size(); ++c)
      if (f.degenerate[c]) degen.push_back(static_cast<int>(c));
    jf["degenerate_classes"] = degen;
    j["folds"].push_back(std::move(jf));
  }
  const auto stat_json = [](const MetricStat& s) {
    nlohmann::ordered_json js;
    js["mean"] = s.mean;
    js["std"] = s.std;
    return js;
  };
  j["aggregate"]["precision"] = stat_json(agg.precision);
  j["aggregate"]["recall"] = stat_json(agg.recall);
  j["aggregate"]["f1"] = stat_json(agg.f1);
  j["aggregate"]["accuracy"] = stat_json(agg.accuracy);
  j["aggregate"]["balanced_accuracy"] = stat_json(agg.balanced_accuracy);
  j["aggregate"]["auc"] = stat_json(agg.auc);
  return j.dump(2);
}

}  // namespace cxr
