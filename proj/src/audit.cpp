#include "cxr/audit.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "cxr/rng.hpp"
#include "cxr/synth.hpp"
#include "cxr/trainer.hpp"

namespace cxr {

namespace {

constexpr int kAuditSide = 64;  // render size; the model sees 28 anyway

TrainConfig audit_config(std::uint64_t train_seed) {
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 15;
  cfg.batch_size = 8;
  cfg.patience = 5;
  cfg.seed = train_seed;
  cfg.input_side = 28;
  return cfg;
}

LabeledImages to_labeled(SynthDataset&& data, const std::vector<std::string>& classes) {
  LabeledImages out;
  out.class_names = classes;
  out.images = std::move(data.images);
  out.labels.reserve(data.manifest.records.size());
  for (const auto& rec : data.manifest.records) {
    const auto it = std::find(classes.begin(), classes.end(), rec.label);
    if (it == classes.end()) throw std::logic_error("audit: record label missing from class list");
    out.labels.push_back(static_cast<int>(it - classes.begin()));
  }
  return out;
}

SplitPlan as_split(const FoldPlan::Fold& fold, std::uint64_t seed) {
  SplitPlan plan;
  plan.seed = seed;
  plan.train = fold.train;
  plan.val = fold.val;
  plan.test = fold.test;
  return plan;
}

double test_accuracy(const TrainResult& model, const LabeledImages& data,
                     const std::vector<int>& test_idx, int side) {
  std::vector<int> preds, labels;
  preds.reserve(test_idx.size());
  for (int i : test_idx) {
    preds.push_back(argmax_class(predict(model.params, prepare_input(data.images[i], side))));
    labels.push_back(data.labels[i]);
  }
  return metrics(confusion(preds, labels, static_cast<int>(data.class_names.size()))).accuracy;
}

// one train-and-score pass over an already generated dataset
double run_arm(SynthDataset&& data, const SplitPlan& plan, std::uint64_t train_seed) {
  const PartitionIndices idx = flatten_split(plan);
  LabeledImages labeled = to_labeled(std::move(data), idx.classes);
  TrainConfig cfg = audit_config(train_seed);
  const TrainResult model = train(labeled, idx.train, idx.val, cfg);
  return test_accuracy(model, labeled, idx.test, cfg.input_side);
}

void finish(ArmOutcome& arm) {
  arm.mean = std::accumulate(arm.accuracy.begin(), arm.accuracy.end(), 0.0) /
             static_cast<double>(arm.accuracy.size());
}

}  // namespace

PopulationAudit run_population_audit(std::uint64_t seed, int n_seeds, int n_per_class) {
  if (n_seeds < 1 || n_per_class < 10)
    throw std::invalid_argument("run_population_audit: need n_seeds >= 1, n_per_class >= 10");

  PopulationAudit audit;
  audit.n_per_class = n_per_class;
  SynthTask task;
  task.side = kAuditSide;
  for (int k = 0; k < n_seeds; ++k) {
    const std::uint64_t data_seed = mix_seed(seed, 1, static_cast<std::uint64_t>(k));
    const std::uint64_t train_seed = mix_seed(seed, 2, static_cast<std::uint64_t>(k));
    for (const SynthMode mode : {SynthMode::confounded, SynthMode::deconfounded}) {
      SynthDataset data = generate_dataset(n_per_class, mode, task, data_seed);
      const SplitPlan plan = stratified_split(data.manifest, 0.72, 0.08, 0.2, data_seed);
      const double acc = run_arm(std::move(data), plan, train_seed);
      (mode == SynthMode::confounded ? audit.confounded : audit.deconfounded)
          .accuracy.push_back(acc);
    }
  }
  finish(audit.confounded);
  finish(audit.deconfounded);
  audit.gap = audit.confounded.mean - audit.deconfounded.mean;
  return audit;
}

std::string population_audit_to_json(const PopulationAudit& audit) {
  nlohmann::ordered_json j;
  j["experiment"] = "population";
  j["n_per_class"] = audit.n_per_class;
  const auto arm_json = [](const ArmOutcome& arm) {
    nlohmann::ordered_json a;
    a["accuracy"] = arm.accuracy;
    a["mean"] = arm.mean;
    return a;
  };
  j["confounded"] = arm_json(audit.confounded);
  j["deconfounded"] = arm_json(audit.deconfounded);
  j["gap"] = audit.gap;
  return j.dump(2);
}

SeverityAudit run_severity_audit(std::uint64_t seed, int n_seeds, int scale) {
  if (n_seeds < 1 || scale < 1)
    throw std::invalid_argument("run_severity_audit: need n_seeds >= 1, scale >= 1");

  SeverityAudit audit;
  audit.scale = scale;
  const Severity tiers[] = {Severity::normal_pcr_plus, Severity::mild, Severity::moderate,
                            Severity::severe};
  for (const Severity tier : tiers) {
    SeverityTierOutcome out;
    out.tier = tier;
    const int per_class = severity_split_counts(tier, scale).total();
    for (int k = 0; k < n_seeds; ++k) {
      const std::uint64_t data_seed = mix_seed(seed, 3, static_cast<std::uint64_t>(tier),
                                               static_cast<std::uint64_t>(k));
      const std::uint64_t train_seed = mix_seed(seed, 4, static_cast<std::uint64_t>(tier),
                                                static_cast<std::uint64_t>(k));
      SynthTask task;
      task.side = kAuditSide;
      task.covid_severity = tier;
      SynthDataset data = generate_dataset(per_class, SynthMode::deconfounded, task, data_seed);
      const SplitPlan plan = severity_split(data.manifest, tier, data_seed, scale);
      out.outcome.accuracy.push_back(run_arm(std::move(data), plan, train_seed));
    }
    finish(out.outcome);
    audit.tiers.push_back(std::move(out));
  }
  return audit;
}

std::string severity_audit_to_json(const SeverityAudit& audit) {
  nlohmann::ordered_json j;
  j["experiment"] = "severity";
  j["scale"] = audit.scale;
  j["tiers"] = nlohmann::ordered_json::array();
  for (const auto& tier : audit.tiers) {
    nlohmann::ordered_json t;
    t["tier"] = to_string(tier.tier);
    t["accuracy"] = tier.outcome.accuracy;
    t["mean"] = tier.outcome.mean;
    j["tiers"].push_back(std::move(t));
  }
  return j.dump(2);
}

BinaryAudit run_binary_audit(std::uint64_t seed, int k, int n_per_class) {
  if (k < 2 || n_per_class < k)
    throw std::invalid_argument("run_binary_audit: need k >= 2 and n_per_class >= k");

  SynthTask task;
  task.side = kAuditSide;
  SynthDataset data =
      generate_dataset(n_per_class, SynthMode::deconfounded, task, mix_seed(seed, 5));
  const FoldPlan folds = kfold_plan(data.manifest, k, 0.1, mix_seed(seed, 6));

  const PartitionIndices shape = flatten_split(as_split(folds.folds[0], 0));
  LabeledImages labeled = to_labeled(std::move(data), shape.classes);
  const int covid_class = static_cast<int>(
      std::find(shape.classes.begin(), shape.classes.end(), kCovidLabel) - shape.classes.begin());

  BinaryAudit audit;
  for (int f = 0; f < k; ++f) {
    const PartitionIndices idx = flatten_split(as_split(folds.folds[f], 0));
    TrainConfig cfg = audit_config(mix_seed(seed, 7, static_cast<std::uint64_t>(f)));
    const TrainResult model = train(labeled, idx.train, idx.val, cfg);

    std::vector<int> preds, labels;
    std::vector<double> scores;
    for (int i : idx.test) {
      const Eigen::VectorXd probs =
          predict(model.params, prepare_input(labeled.images[i], cfg.input_side));
      preds.push_back(argmax_class(probs));
      labels.push_back(labeled.labels[i]);
      scores.push_back(probs(covid_class));
    }
    FoldReport report = metrics(confusion(preds, labels, 2));
    std::vector<int> binary(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) binary[i] = labels[i] == covid_class ? 1 : 0;
    report.auc = roc_auc(scores, binary);
    audit.folds.push_back(std::move(report));
  }
  audit.aggregate = aggregate(audit.folds);
  return audit;
}

}  // namespace cxr
