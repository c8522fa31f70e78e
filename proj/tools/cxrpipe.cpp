#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cxr/audit.hpp"
#include "cxr/dataset.hpp"
#include "cxr/enhance.hpp"
#include "cxr/eval.hpp"
#include "cxr/image.hpp"
#include "cxr/image_io.hpp"
#include "cxr/inpaint.hpp"
#include "cxr/markers.hpp"
#include "cxr/rng.hpp"
#include "cxr/synth.hpp"
#include "cxr/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace cxr;

namespace {

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
}

// reproducibility record: every run drops its effective configuration here.
// the timestamp makes this the one artifact allowed to differ between
// otherwise identical runs
void write_run_json(const fs::path& out_dir, const std::string& command, ordered_json config) {
  ordered_json j;
  j["command"] = command;
  j["config"] = std::move(config);
  j["timestamp"] = iso_timestamp();
  write_text(out_dir / "run.json", j.dump(2) + "\n");
}

fs::path ensure_dir(const std::string& out) {
  const fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

// record paths are taken relative to the manifest's own directory, so a
// generated dataset stays valid wherever the tree is consumed from
DatasetManifest resolve_records(DatasetManifest m, const std::string& manifest_path) {
  const fs::path base = fs::path(manifest_path).parent_path();
  if (!base.empty())
    for (auto& rec : m.records)
      if (!fs::path(rec.path).is_absolute()) rec.path = (base / rec.path).string();
  return m;
}

DatasetManifest read_manifest_resolved(const std::string& manifest_path) {
  return resolve_records(parse_manifest(manifest_path), manifest_path);
}

LabeledImages load_labeled(const DatasetManifest& manifest) {
  LabeledImages data;
  for (const auto& rec : manifest.records)
    if (std::find(data.class_names.begin(), data.class_names.end(), rec.label) ==
        data.class_names.end())
      data.class_names.push_back(rec.label);
  std::sort(data.class_names.begin(), data.class_names.end());
  for (const auto& rec : manifest.records) {
    data.images.push_back(load_image(rec.path));
    data.labels.push_back(static_cast<int>(
        std::find(data.class_names.begin(), data.class_names.end(), rec.label) -
        data.class_names.begin()));
  }
  return data;
}

// collision-proof deterministic output name for the i-th record
std::string numbered_stem(size_t index, const std::string& path) {
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%04zu_", index);
  return prefix + fs::path(path).stem().string();
}

// positive class for scoring: the covid label when present, otherwise the
// lexicographically second class
int positive_class(const std::vector<std::string>& classes) {
  const auto it = std::find(classes.begin(), classes.end(), kCovidLabel);
  if (it != classes.end()) return static_cast<int>(it - classes.begin());
  return static_cast<int>(classes.size()) - 1;
}

FoldReport score_partition(const ModelParams& model, const LabeledImages& data,
                           const std::vector<int>& test_idx, int side) {
  std::vector<int> preds, labels;
  std::vector<double> scores;
  const int pos = positive_class(data.class_names);
  for (int i : test_idx) {
    const Eigen::VectorXd probs = predict(model, prepare_input(data.images[i], side));
    preds.push_back(argmax_class(probs));
    labels.push_back(data.labels[i]);
    scores.push_back(probs(pos));
  }
  FoldReport report = metrics(confusion(preds, labels, static_cast<int>(data.class_names.size())));
  if (data.class_names.size() == 2) {
    std::vector<int> binary(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) binary[i] = labels[i] == pos ? 1 : 0;
    report.auc = roc_auc(scores, binary);
  }
  return report;
}

struct PreprocessArgs {
  std::string manifest, out;
  int tiles = 8;
  double clip = 2.0;
  double radius = 3.0;
  bool skip_normalize = false, skip_clahe = false, skip_markers = false;
};

int run_preprocess(const PreprocessArgs& a) {
  const fs::path out = ensure_dir(a.out);
  DatasetManifest manifest = read_manifest_resolved(a.manifest);
  DatasetManifest processed = manifest;
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    ImageBuffer img = load_image(manifest.records[i].path);
    if (!a.skip_normalize) img = normalize_intensity(img);
    if (!a.skip_clahe) img = equalize_clahe(img, a.tiles, a.tiles, a.clip, 256);
    std::vector<Box> boxes;
    if (!a.skip_markers) {
      MarkerRemoval removed = remove_markers(img, MarkerParams{}, a.radius);
      img = std::move(removed.image);
      boxes = std::move(removed.markers.boxes);
    }
    const std::string stem = numbered_stem(i, manifest.records[i].path);
    save_png((out / (stem + ".png")).string(), img);
    write_text(out / (stem + ".boxes.json"), boxes_to_json(boxes) + "\n");
    processed.records[i].path = stem + ".png";
  }
  write_manifest((out / "manifest.csv").string(), processed);

  ordered_json cfg;
  cfg["manifest"] = a.manifest;
  cfg["out"] = a.out;
  cfg["tiles"] = a.tiles;
  cfg["clip"] = a.clip;
  cfg["radius"] = a.radius;
  cfg["skip_normalize"] = a.skip_normalize;
  cfg["skip_clahe"] = a.skip_clahe;
  cfg["skip_markers"] = a.skip_markers;
  write_run_json(out, "preprocess", std::move(cfg));
  return 0;
}

int run_detect_markers(const std::string& manifest_path, const std::string& out_str) {
  const fs::path out = ensure_dir(out_str);
  DatasetManifest manifest = read_manifest_resolved(manifest_path);
  for (size_t i = 0; i < manifest.records.size(); ++i) {
    const MarkerMask found = detect_markers(load_image(manifest.records[i].path));
    const std::string stem = numbered_stem(i, manifest.records[i].path);
    write_text(out / (stem + ".boxes.json"), boxes_to_json(found.boxes) + "\n");
  }
  ordered_json cfg;
  cfg["manifest"] = manifest_path;
  cfg["out"] = out_str;
  write_run_json(out, "detect-markers", std::move(cfg));
  return 0;
}

int run_curate(const std::string& manifest_path, const std::string& out_str) {
  const fs::path out = ensure_dir(out_str);
  DatasetManifest raw = parse_manifest(manifest_path);
  const DedupReport report = dedup(resolve_records(raw, manifest_path));

  // the kept manifest re-uses the caller's own record paths; dedup only
  // needed the resolved ones to read pixels. kept records are a subsequence
  // of the input, recovered here by order-preserving matching
  const auto key = [](const SampleRecord& r) {
    return r.path + '\n' + r.label + '\n' + r.source + '\n' + to_string(r.severity) + '\n' +
           to_string(r.population) + '\n' + r.patient_id;
  };
  const DatasetManifest resolved = resolve_records(raw, manifest_path);
  DatasetManifest kept;
  size_t next = 0;
  for (size_t i = 0; i < resolved.records.size() && next < report.kept.records.size(); ++i)
    if (key(resolved.records[i]) == key(report.kept.records[next])) {
      kept.records.push_back(raw.records[i]);
      ++next;
    }
  write_manifest((out / "manifest.csv").string(), kept);

  ordered_json j;
  j["kept"] = report.kept.records.size();
  j["dropped"] = report.dropped;
  j["sources"] = ordered_json::array();
  for (const auto& row : reconcile_sources(report.kept)) {
    ordered_json r;
    r["source"] = row.source;
    r["expected"] = row.expected;
    r["found"] = row.found;
    j["sources"].push_back(std::move(r));
  }
  write_text(out / "curate_report.json", j.dump(2) + "\n");

  ordered_json cfg;
  cfg["manifest"] = manifest_path;
  cfg["out"] = out_str;
  write_run_json(out, "curate", std::move(cfg));
  return 0;
}

struct SplitArgs {
  std::string manifest, out;
  std::uint64_t seed = 0;
  double f_train = 0.7, f_val = 0.1, f_test = 0.2;
};

int run_split(const SplitArgs& a) {
  const fs::path out = ensure_dir(a.out);
  DatasetManifest manifest = parse_manifest(a.manifest);
  const SplitPlan plan = stratified_split(manifest, a.f_train, a.f_val, a.f_test, a.seed);
  write_text(out / "split.json", split_plan_to_json(plan, manifest) + "\n");

  ordered_json cfg;
  cfg["manifest"] = a.manifest;
  cfg["out"] = a.out;
  cfg["seed"] = a.seed;
  cfg["train"] = a.f_train;
  cfg["val"] = a.f_val;
  cfg["test"] = a.f_test;
  write_run_json(out, "split", std::move(cfg));
  return 0;
}

int run_kfold(const std::string& manifest_path, const std::string& out_str, int folds,
              double val_frac, std::uint64_t seed) {
  const fs::path out = ensure_dir(out_str);
  DatasetManifest manifest = parse_manifest(manifest_path);
  const FoldPlan plan = kfold_plan(manifest, folds, val_frac, seed);
  write_text(out / "folds.json", fold_plan_to_json(plan, manifest) + "\n");

  ordered_json cfg;
  cfg["manifest"] = manifest_path;
  cfg["out"] = out_str;
  cfg["folds"] = folds;
  cfg["val"] = val_frac;
  cfg["seed"] = seed;
  write_run_json(out, "kfold", std::move(cfg));
  return 0;
}

struct TrainArgs {
  std::string manifest, out;
  std::uint64_t seed = 0;
  double lr = 1e-3;
  int epochs = 30, batch = 8, patience = 3, input_side = 28;
  double f_train = 0.7, f_val = 0.1, f_test = 0.2;
  bool weighted = false;
};

int run_train(const TrainArgs& a) {
  const fs::path out = ensure_dir(a.out);
  // the plan is built and serialised against the manifest's own paths so the
  // written artifacts do not depend on where the tree happens to live
  DatasetManifest manifest = parse_manifest(a.manifest);
  const SplitPlan plan = stratified_split(manifest, a.f_train, a.f_val, a.f_test, a.seed);
  const PartitionIndices idx = flatten_split(plan);
  LabeledImages data = load_labeled(resolve_records(manifest, a.manifest));
  data.class_names = idx.classes;

  TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.patience = a.patience;
  cfg.seed = a.seed;
  cfg.input_side = a.input_side;
  if (a.weighted) {
    std::vector<long> counts(idx.classes.size(), 0);
    for (int i : idx.train) ++counts[static_cast<size_t>(data.labels[i])];
    cfg.weights = compute_class_weights(counts);
  }
  const TrainResult result = train(data, idx.train, idx.val, cfg);

  write_text(out / "model.json", model_to_json(result.params) + "\n");
  write_text(out / "history.json", history_to_json(result.history) + "\n");
  write_text(out / "split.json", split_plan_to_json(plan, manifest) + "\n");

  ordered_json jcfg;
  jcfg["manifest"] = a.manifest;
  jcfg["out"] = a.out;
  jcfg["seed"] = a.seed;
  jcfg["lr"] = a.lr;
  jcfg["epochs"] = a.epochs;
  jcfg["batch"] = a.batch;
  jcfg["patience"] = a.patience;
  jcfg["input_side"] = a.input_side;
  jcfg["train"] = a.f_train;
  jcfg["val"] = a.f_val;
  jcfg["test"] = a.f_test;
  jcfg["weighted"] = a.weighted;
  write_run_json(out, "train", std::move(jcfg));
  return 0;
}

struct EvaluateArgs {
  std::string manifest, out;
  std::uint64_t seed = 0;
  int folds = 5;
  double val_frac = 0.1;
  double lr = 1e-3;
  int epochs = 30, batch = 8, patience = 3, input_side = 28;
};

int run_evaluate(const EvaluateArgs& a) {
  const fs::path out = ensure_dir(a.out);
  DatasetManifest manifest = read_manifest_resolved(a.manifest);
  const FoldPlan plan = kfold_plan(manifest, a.folds, a.val_frac, a.seed);
  LabeledImages data = load_labeled(manifest);

  std::vector<FoldReport> folds;
  for (int f = 0; f < a.folds; ++f) {
    SplitPlan split;
    split.train = plan.folds[f].train;
    split.val = plan.folds[f].val;
    split.test = plan.folds[f].test;
    const PartitionIndices idx = flatten_split(split);

    TrainConfig cfg;
    cfg.learning_rate = a.lr;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch;
    cfg.patience = a.patience;
    cfg.seed = mix_seed(a.seed, static_cast<std::uint64_t>(f));
    cfg.input_side = a.input_side;
    const TrainResult model = train(data, idx.train, idx.val, cfg);
    folds.push_back(score_partition(model.params, data, idx.test, cfg.input_side));
  }
  write_text(out / "report.json", report_to_json(folds, aggregate(folds)) + "\n");

  ordered_json cfg;
  cfg["manifest"] = a.manifest;
  cfg["out"] = a.out;
  cfg["seed"] = a.seed;
  cfg["folds"] = a.folds;
  cfg["val"] = a.val_frac;
  cfg["lr"] = a.lr;
  cfg["epochs"] = a.epochs;
  cfg["batch"] = a.batch;
  cfg["patience"] = a.patience;
  cfg["input_side"] = a.input_side;
  write_run_json(out, "evaluate", std::move(cfg));
  return 0;
}

int run_audit(const std::string& experiment, const std::string& out_str, std::uint64_t seed) {
  const fs::path out = ensure_dir(out_str);
  std::string report;
  if (experiment == "population") {
    report = population_audit_to_json(run_population_audit(seed));
  } else if (experiment == "severity") {
    report = severity_audit_to_json(run_severity_audit(seed));
  } else if (experiment == "binary") {
    const BinaryAudit audit = run_binary_audit(seed);
    report = report_to_json(audit.folds, audit.aggregate);
  } else {
    throw std::invalid_argument("audit: unknown experiment \"" + experiment + "\"");
  }
  write_text(out / "report.json", report + "\n");

  ordered_json cfg;
  cfg["experiment"] = experiment;
  cfg["out"] = out_str;
  cfg["seed"] = seed;
  write_run_json(out, "audit", std::move(cfg));
  return 0;
}

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0;
  int count = 100;
  std::string mode = "deconfounded";
  std::string severity = "mixed";
  int side = 128;
  bool markers = false;
};

int run_synth(const SynthArgs& a) {
  const fs::path out = ensure_dir(a.out);
  fs::create_directories(out / "images");

  SynthTask task;
  task.side = a.side;
  task.markers = a.markers;
  if (a.severity != "mixed") task.covid_severity = severity_from_string(a.severity);
  const SynthMode mode =
      a.mode == "confounded" ? SynthMode::confounded : SynthMode::deconfounded;
  if (a.mode != "confounded" && a.mode != "deconfounded")
    throw std::invalid_argument("synth: mode must be confounded or deconfounded");

  SynthDataset data = generate_dataset(a.count, mode, task, a.seed);
  for (size_t i = 0; i < data.images.size(); ++i) {
    const std::string name = fs::path(data.manifest.records[i].path).filename().string();
    save_png((out / "images" / name).string(), data.images[i]);
    data.manifest.records[i].path = "images/" + name;
  }
  write_manifest((out / "manifest.csv").string(), data.manifest);

  ordered_json cfg;
  cfg["out"] = a.out;
  cfg["seed"] = a.seed;
  cfg["count"] = a.count;
  cfg["mode"] = a.mode;
  cfg["severity"] = a.severity;
  cfg["side"] = a.side;
  cfg["markers"] = a.markers;
  write_run_json(out, "synth", std::move(cfg));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chest x-ray screening pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file supplying any flag; flags override it");

  PreprocessArgs pre;
  auto* cmd_pre = app.add_subcommand("preprocess", "normalize, equalize and remove markers");
  cmd_pre->add_option("--manifest", pre.manifest, "input manifest csv")->required();
  cmd_pre->add_option("--out", pre.out, "output directory")->required();
  cmd_pre->add_option("--tiles", pre.tiles, "clahe tile grid per axis");
  cmd_pre->add_option("--clip", pre.clip, "clahe clip limit");
  cmd_pre->add_option("--radius", pre.radius, "inpainting neighbourhood radius");
  cmd_pre->add_flag("--skip-normalize", pre.skip_normalize, "keep raw intensities");
  cmd_pre->add_flag("--skip-clahe", pre.skip_clahe, "skip contrast equalization");
  cmd_pre->add_flag("--skip-markers", pre.skip_markers, "skip marker removal");

  std::string dm_manifest, dm_out;
  auto* cmd_detect = app.add_subcommand("detect-markers", "write marker boxes per image");
  cmd_detect->add_option("--manifest", dm_manifest, "input manifest csv")->required();
  cmd_detect->add_option("--out", dm_out, "output directory")->required();

  std::string cu_manifest, cu_out;
  auto* cmd_curate = app.add_subcommand("curate", "deduplicate and reconcile source counts");
  cmd_curate->add_option("--manifest", cu_manifest, "input manifest csv")->required();
  cmd_curate->add_option("--out", cu_out, "output directory")->required();

  SplitArgs sp;
  auto* cmd_split = app.add_subcommand("split", "stratified train/val/test plan");
  cmd_split->add_option("--manifest", sp.manifest, "input manifest csv")->required();
  cmd_split->add_option("--out", sp.out, "output directory")->required();
  cmd_split->add_option("--seed", sp.seed, "shuffle seed");
  cmd_split->add_option("--train", sp.f_train, "train fraction");
  cmd_split->add_option("--val", sp.f_val, "validation fraction");
  cmd_split->add_option("--test", sp.f_test, "test fraction");

  std::string kf_manifest, kf_out;
  int kf_folds = 5;
  double kf_val = 0.1;
  std::uint64_t kf_seed = 0;
  auto* cmd_kfold = app.add_subcommand("kfold", "cross-validation fold plan");
  cmd_kfold->add_option("--manifest", kf_manifest, "input manifest csv")->required();
  cmd_kfold->add_option("--out", kf_out, "output directory")->required();
  cmd_kfold->add_option("--folds", kf_folds, "fold count");
  cmd_kfold->add_option("--val", kf_val, "validation fraction");
  cmd_kfold->add_option("--seed", kf_seed, "shuffle seed");

  TrainArgs tr;
  auto* cmd_train = app.add_subcommand("train", "fit the softmax screening model");
  cmd_train->add_option("--manifest", tr.manifest, "input manifest csv")->required();
  cmd_train->add_option("--out", tr.out, "output directory")->required();
  cmd_train->add_option("--seed", tr.seed, "split, init and shuffle seed");
  cmd_train->add_option("--lr", tr.lr, "learning rate");
  cmd_train->add_option("--epochs", tr.epochs, "epoch budget");
  cmd_train->add_option("--batch", tr.batch, "batch size");
  cmd_train->add_option("--patience", tr.patience, "early-stopping patience");
  cmd_train->add_option("--input-side", tr.input_side, "model input resolution");
  cmd_train->add_option("--train", tr.f_train, "train fraction");
  cmd_train->add_option("--val", tr.f_val, "validation fraction");
  cmd_train->add_option("--test", tr.f_test, "test fraction");
  cmd_train->add_flag("--weighted", tr.weighted, "frequency-balanced class weights");

  EvaluateArgs ev;
  auto* cmd_eval = app.add_subcommand("evaluate", "k-fold cross-validated report");
  cmd_eval->add_option("--manifest", ev.manifest, "input manifest csv")->required();
  cmd_eval->add_option("--out", ev.out, "output directory")->required();
  cmd_eval->add_option("--folds", ev.folds, "fold count");
  cmd_eval->add_option("--val", ev.val_frac, "validation fraction per fold");
  cmd_eval->add_option("--seed", ev.seed, "plan and training seed");
  cmd_eval->add_option("--lr", ev.lr, "learning rate");
  cmd_eval->add_option("--epochs", ev.epochs, "epoch budget");
  cmd_eval->add_option("--batch", ev.batch, "batch size");
  cmd_eval->add_option("--patience", ev.patience, "early-stopping patience");
  cmd_eval->add_option("--input-side", ev.input_side, "model input resolution");

  std::string au_experiment, au_out;
  std::uint64_t au_seed = 0;
  auto* cmd_audit = app.add_subcommand("audit", "run a synthetic bias experiment");
  cmd_audit->add_option("--experiment", au_experiment, "population, severity or binary")
      ->required();
  cmd_audit->add_option("--out", au_out, "output directory")->required();
  cmd_audit->add_option("--seed", au_seed, "experiment seed");

  SynthArgs sy;
  auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  cmd_synth->add_option("--out", sy.out, "output directory")->required();
  cmd_synth->add_option("--seed", sy.seed, "generation seed");
  cmd_synth->add_option("--count", sy.count, "records per class");
  cmd_synth->add_option("--mode", sy.mode, "confounded or deconfounded");
  cmd_synth->add_option("--severity", sy.severity, "covid arm grade, or mixed");
  cmd_synth->add_option("--side", sy.side, "image side length");
  cmd_synth->add_flag("--markers", sy.markers, "burn an annotation block into each image");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    ordered_json err;
    err["error"]["type"] = "usage";
    err["error"]["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return e.get_exit_code();
  }

  try {
    if (cmd_pre->parsed()) return run_preprocess(pre);
    if (cmd_detect->parsed()) return run_detect_markers(dm_manifest, dm_out);
    if (cmd_curate->parsed()) return run_curate(cu_manifest, cu_out);
    if (cmd_split->parsed()) return run_split(sp);
    if (cmd_kfold->parsed()) return run_kfold(kf_manifest, kf_out, kf_folds, kf_val, kf_seed);
    if (cmd_train->parsed()) return run_train(tr);
    if (cmd_eval->parsed()) return run_evaluate(ev);
    if (cmd_audit->parsed()) return run_audit(au_experiment, au_out, au_seed);
    if (cmd_synth->parsed()) return run_synth(sy);
  } catch (const IoError& e) {
    ordered_json err;
    err["error"]["type"] = "io";
    err["error"]["message"] = e.what();
    err["error"]["path"] = e.path();
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    ordered_json err;
    err["error"]["type"] = "invalid_argument";
    err["error"]["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    ordered_json err;
    err["error"]["type"] = "internal";
    err["error"]["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
