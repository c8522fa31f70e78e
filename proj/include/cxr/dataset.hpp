#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cxr {

enum class Severity { none, normal_pcr_plus, mild, moderate, severe };
enum class Population { adult, paediatric };

std::string to_string(Severity s);
std::string to_string(Population p);
Severity severity_from_string(const std::string& s);
Population population_from_string(const std::string& s);

// Canonical class labels used by the subset builders and the generator.
inline const std::string kCovidLabel = "covid";
inline const std::string kNormalLabel = "normal";

struct SampleRecord {
  std::string path;
  std::string label;
  std::string source;
  Severity severity = Severity::none;
  Population population = Population::adult;
  std::string patient_id;  // empty means absent
};

struct DatasetManifest {
  std::vector<SampleRecord> records;
};

// csv with header `path,label,source,severity,population,patient_id`; no
// quoting, fields must not contain commas. Enumeration errors report the
// offending line number.
DatasetManifest parse_manifest(const std::string& csv_path);
void write_manifest(const std::string& csv_path, const DatasetManifest& manifest);

// The published per-source positive-case counts; totals sum to 4454.
struct SourceCount {
  std::string key;
  long expected = 0;
};
const std::vector<SourceCount>& source_registry();

struct ReconcileRow {
  std::string source;
  long expected = 0;
  long found = 0;
};
// Compares per-source counts of `label` records in the manifest against the
// registry. One row per registry source, in registry order.
std::vector<ReconcileRow> reconcile_sources(const DatasetManifest& manifest,
                                            const std::string& label = kCovidLabel);

struct DedupReport {
  DatasetManifest kept;
  std::vector<std::string> dropped;  // paths of removed records, manifest order
};
// Removes records whose decoded pixel content repeats an earlier record,
// keeping the first occurrence. Content is compared by hashing the decoded
// image quantised to 16 bits, so re-encoding an 8-bit file at 16 bits
// collides (same content) while a lossy 8-bit copy of a 16-bit original
// does not.
DedupReport dedup(const DatasetManifest& manifest);

// Named experimental subsets:
//   binary       covid vs normal, equalised counts
//   severity:1   normal vs normal_pcr_plus
//   severity:2   normal vs mild
//   severity:3   normal vs moderate
//   severity:4   normal vs severe
//   population   paediatric normal vs adult normal, relabelled by population
//   mixed-normal adult covid vs paediatric normal
// Counts are equalised by keeping the first records in manifest order.
DatasetManifest build_subset(const DatasetManifest& manifest, const std::string& spec);

struct ClassWeights {
  int N = 0;
  std::vector<long> n_c;
  std::vector<double> C_c;
  std::vector<double> w;  // w[c] = C_c[c] * sum(n_c) / (N * n_c[c])
};
// C_c defaults to 1.0 for every class when empty.
ClassWeights compute_class_weights(const std::vector<long>& n_c,
                                   const std::vector<double>& C_c = {});

struct SplitPlan {
  std::uint64_t seed = 0;
  // class label -> record indices into the subset manifest
  std::map<std::string, std::vector<int>> train, val, test;
};

// Per class: seeded shuffle, then val = floor(n*f_val) and
// test = floor(n*f_test) records taken in that order, remainder to train.
// Records sharing a patient_id move as one unit (filled greedily val, test,
// then train), which can shift counts off the floor rule when ids repeat.
SplitPlan stratified_split(const DatasetManifest& subset, double f_train, double f_val,
                           double f_test, std::uint64_t seed);

struct SplitCounts {
  int train = 0, val = 0, test = 0;
  int total() const { return train + val + test; }
};
// Published severity-study split sizes per class (both classes use the same
// triple). These are fixed tables, not derived from the fractions above:
// two of the published triples disagree with the floor rule.
SplitCounts severity_split_counts(Severity tier, int scale = 1);

// Split for the severity study: draws exactly severity_split_counts(tier)
// records per class from a seeded shuffle; surplus records stay unused.
SplitPlan severity_split(const DatasetManifest& subset, Severity tier, std::uint64_t seed,
                         int scale = 1);

struct FoldPlan {
  std::uint64_t seed = 0;
  int k = 0;
  struct Fold {
    std::map<std::string, std::vector<int>> train, val, test;
  };
  std::vector<Fold> folds;
};

// Per class: seeded shuffle, fold membership round-robin (shuffled position
// i tests in fold i mod k). Validation per fold takes floor(val_frac * pool)
// records from the head of the remaining shuffled order. Patient units move
// whole, as in stratified_split.
FoldPlan kfold_plan(const DatasetManifest& subset, int k, double val_frac, std::uint64_t seed);

// Partitions serialised as record paths per class.
std::string split_plan_to_json(const SplitPlan& plan, const DatasetManifest& subset);
std::string fold_plan_to_json(const FoldPlan& plan, const DatasetManifest& subset);

}  // namespace cxr
