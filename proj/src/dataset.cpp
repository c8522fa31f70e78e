#include "cxr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>

#include <json.hpp>

#include "cxr/image_io.hpp"
#include "cxr/rng.hpp"

namespace cxr {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// class label -> record indices, classes in sorted label order
std::map<std::string, std::vector<int>> by_class(const DatasetManifest& m) {
  std::map<std::string, std::vector<int>> out;
  for (int i = 0; i < static_cast<int>(m.records.size()); ++i)
    out[m.records[i].label].push_back(i);
  return out;
}

// records sharing a patient_id move together; blank ids stay singletons.
// Units keep first-occurrence order, records within a unit keep index order.
std::vector<std::vector<int>> patient_units(const DatasetManifest& m, const std::vector<int>& idx) {
  std::vector<std::vector<int>> units;
  std::map<std::string, size_t> seen;
  for (int i : idx) {
    const std::string& pid = m.records[i].patient_id;
    if (pid.empty()) {
      units.push_back({i});
      continue;
    }
    auto it = seen.find(pid);
    if (it == seen.end()) {
      seen[pid] = units.size();
      units.push_back({i});
    } else {
      units[it->second].push_back(i);
    }
  }
  return units;
}

nlohmann::ordered_json paths_by_class(const std::map<std::string, std::vector<int>>& part,
                                      const DatasetManifest& subset) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (const auto& [label, idx] : part) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (int i : idx) arr.push_back(subset.records[i].path);
    out[label] = std::move(arr);
  }
  return out;
}

}  // namespace

std::string to_string(Severity s) {
  switch (s) {
    case Severity::none: return "none";
    case Severity::normal_pcr_plus: return "normal_pcr_plus";
    case Severity::mild: return "mild";
    case Severity::moderate: return "moderate";
    case Severity::severe: return "severe";
  }
  throw std::invalid_argument("to_string: bad severity value");
}

std::string to_string(Population p) {
  switch (p) {
    case Population::adult: return "adult";
    case Population::paediatric: return "paediatric";
  }
  throw std::invalid_argument("to_string: bad population value");
}

Severity severity_from_string(const std::string& s) {
  if (s == "none") return Severity::none;
  if (s == "normal_pcr_plus") return Severity::normal_pcr_plus;
  if (s == "mild") return Severity::mild;
  if (s == "moderate") return Severity::moderate;
  if (s == "severe") return Severity::severe;
  throw std::invalid_argument("unknown severity \"" + s + "\"");
}

Population population_from_string(const std::string& s) {
  if (s == "adult") return Population::adult;
  if (s == "paediatric") return Population::paediatric;
  throw std::invalid_argument("unknown population \"" + s + "\"");
}

DatasetManifest parse_manifest(const std::string& csv_path) {
  std::ifstream f(csv_path);
  if (!f) throw FileMissingError(csv_path);
  std::string line;
  if (!std::getline(f, line)) throw TruncatedDataError(csv_path, "missing header");
  static const std::vector<std::string> expected = {"path",     "label",      "source",
                                                    "severity", "population", "patient_id"};
  if (split_fields(line) != expected)
    throw std::invalid_argument(csv_path + ": header must be path,label,source,severity,population,patient_id");

  DatasetManifest out;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != expected.size())
      throw std::invalid_argument(csv_path + ":" + std::to_string(lineno) + ": expected 6 fields, got " +
                                  std::to_string(fields.size()));
    SampleRecord r;
    r.path = fields[0];
    r.label = fields[1];
    r.source = fields[2];
    try {
      r.severity = severity_from_string(fields[3]);
      r.population = population_from_string(fields[4]);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(csv_path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    r.patient_id = fields[5];
    if (r.label.empty())
      throw std::invalid_argument(csv_path + ":" + std::to_string(lineno) + ": empty label");
    out.records.push_back(std::move(r));
  }
  return out;
}

void write_manifest(const std::string& csv_path, const DatasetManifest& manifest) {
  std::ofstream f(csv_path, std::ios::trunc);
  if (!f) throw IoError(csv_path, "cannot open for writing");
  f << "path,label,source,severity,population,patient_id\n";
  for (const SampleRecord& r : manifest.records)
    f << r.path << ',' << r.label << ',' << r.source << ',' << to_string(r.severity) << ','
      << to_string(r.population) << ',' << r.patient_id << '\n';
  if (!f) throw IoError(csv_path, "write failed");
}

const std::vector<SourceCount>& source_registry() {
  static const std::vector<SourceCount> registry = {
      {"ieee8023", 196},   {"figure1", 35},      {"actualmed", 58}, {"twitter", 132},
      {"sirm", 38},        {"radiopedia", 28},   {"covidgr", 426},  {"hannover", 243},
      {"eurorad", 258},    {"publications", 166}, {"bimcv", 2474},  {"cxr_repository", 400},
  };
  return registry;
}

std::vector<ReconcileRow> reconcile_sources(const DatasetManifest& manifest,
                                            const std::string& label) {
  std::map<std::string, long> found;
  for (const SampleRecord& r : manifest.records)
    if (r.label == label) ++found[r.source];
  std::vector<ReconcileRow> rows;
  for (const SourceCount& s : source_registry()) {
    auto it = found.find(s.key);
    rows.push_back({s.key, s.expected, it == found.end() ? 0 : it->second});
  }
  return rows;
}

DedupReport dedup(const DatasetManifest& manifest) {
  DedupReport out;
  std::map<std::uint64_t, int> seen;
  for (const SampleRecord& r : manifest.records) {
    const ImageBuffer img = load_image(r.path);
    // fnv-1a over dimensions and the 16-bit quantisation of every pixel
    std::uint64_t h = 14695981039346656037ull;
    const auto feed = [&h](unsigned char byte) {
      h ^= byte;
      h *= 1099511628211ull;
    };
    for (int shift = 0; shift < 32; shift += 8) feed(static_cast<unsigned char>(img.rows() >> shift));
    for (int shift = 0; shift < 32; shift += 8) feed(static_cast<unsigned char>(img.cols() >> shift));
    for (Eigen::Index i = 0; i < img.size(); ++i) {
      const float v = std::min(1.0f, std::max(0.0f, img.data()[i]));
      const unsigned q = static_cast<unsigned>(std::lround(v * 65535.0));
      feed(static_cast<unsigned char>(q >> 8));
      feed(static_cast<unsigned char>(q & 0xff));
    }
    if (seen.emplace(h, 1).second)
      out.kept.records.push_back(r);
    else
      out.dropped.push_back(r.path);
  }
  return out;
}

DatasetManifest build_subset(const DatasetManifest& manifest, const std::string& spec) {
  std::string relabel_a, relabel_b;
  // predicates for the two sides of the experiment
  std::function<bool(const SampleRecord&)> pick_a, pick_b;

  if (spec == "binary") {
    pick_a = [](const SampleRecord& r) { return r.label == kCovidLabel; };
    pick_b = [](const SampleRecord& r) { return r.label == kNormalLabel; };
  } else if (spec.rfind("severity:", 0) == 0) {
    const std::string n = spec.substr(9);
    Severity tier;
    if (n == "1")
      tier = Severity::normal_pcr_plus;
    else if (n == "2")
      tier = Severity::mild;
    else if (n == "3")
      tier = Severity::moderate;
    else if (n == "4")
      tier = Severity::severe;
    else
      throw std::invalid_argument("build_subset: severity setting must be 1..4, got \"" + n + "\"");
    pick_a = [tier](const SampleRecord& r) { return r.label == kCovidLabel && r.severity == tier; };
    pick_b = [](const SampleRecord& r) { return r.label == kNormalLabel; };
  } else if (spec == "population") {
    pick_a = [](const SampleRecord& r) {
      return r.label == kNormalLabel && r.population == Population::paediatric;
    };
    pick_b = [](const SampleRecord& r) {
      return r.label == kNormalLabel && r.population == Population::adult;
    };
    relabel_a = "paediatric";
    relabel_b = "adult";
  } else if (spec == "mixed-normal") {
    pick_a = [](const SampleRecord& r) {
      return r.label == kCovidLabel && r.population == Population::adult;
    };
    pick_b = [](const SampleRecord& r) {
      return r.label == kNormalLabel && r.population == Population::paediatric;
    };
  } else {
    throw std::invalid_argument("build_subset: unknown spec \"" + spec + "\"");
  }

  std::vector<int> a, b;
  for (int i = 0; i < static_cast<int>(manifest.records.size()); ++i) {
    if (pick_a(manifest.records[i])) a.push_back(i);
    else if (pick_b(manifest.records[i])) b.push_back(i);
  }
  if (a.empty() || b.empty()) {
    const char* which = a.empty() ? "first" : "second";
    throw std::invalid_argument("build_subset: " + spec + ": no records for the " + which +
                                " class (need at least 1)");
  }
  const size_t m = std::min(a.size(), b.size());
  a.resize(m);
  b.resize(m);

  std::vector<std::pair<int, bool>> chosen;  // (index, is side a)
  for (int i : a) chosen.push_back({i, true});
  for (int i : b) chosen.push_back({i, false});
  std::sort(chosen.begin(), chosen.end());

  DatasetManifest out;
  for (auto [i, is_a] : chosen) {
    SampleRecord r = manifest.records[i];
    if (is_a && !relabel_a.empty()) r.label = relabel_a;
    if (!is_a && !relabel_b.empty()) r.label = relabel_b;
    out.records.push_back(std::move(r));
  }
  return out;
}

ClassWeights compute_class_weights(const std::vector<long>& n_c, const std::vector<double>& C_c) {
  if (n_c.empty()) throw std::invalid_argument("compute_class_weights: no classes");
  if (!C_c.empty() && C_c.size() != n_c.size())
    throw std::invalid_argument("compute_class_weights: C_c size mismatch");
  ClassWeights out;
  out.N = static_cast<int>(n_c.size());
  out.n_c = n_c;
  out.C_c = C_c.empty() ? std::vector<double>(n_c.size(), 1.0) : C_c;
  long total = 0;
  for (size_t c = 0; c < n_c.size(); ++c) {
    if (n_c[c] < 1)
      throw std::invalid_argument("compute_class_weights: class " + std::to_string(c) +
                                  " has zero count");
    total += n_c[c];
  }
  out.w.resize(n_c.size());
  for (size_t c = 0; c < n_c.size(); ++c)
    out.w[c] = out.C_c[c] * static_cast<double>(total) / (static_cast<double>(out.N) * n_c[c]);
  return out;
}

SplitPlan stratified_split(const DatasetManifest& subset, double f_train, double f_val,
                           double f_test, std::uint64_t seed) {
  if (f_train < 0 || f_val < 0 || f_test < 0 || std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
    throw std::invalid_argument("stratified_split: fractions must be non-negative and sum to 1");

  SplitPlan plan;
  plan.seed = seed;
  int class_index = 0;
  for (const auto& [label, idx] : by_class(subset)) {
    const long n = static_cast<long>(idx.size());
    if (n < 3)
      throw std::invalid_argument("stratified_split: class \"" + label + "\" has " +
                                  std::to_string(n) + " records, need at least 3");
    auto units = patient_units(subset, idx);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(class_index)));
    rng.shuffle(units);

    const long val_quota = static_cast<long>(std::floor(n * f_val));
    const long test_quota = static_cast<long>(std::floor(n * f_test));
    auto& train = plan.train[label];
    auto& val = plan.val[label];
    auto& test = plan.test[label];
    for (const auto& unit : units) {
      auto& dst = static_cast<long>(val.size()) < val_quota    ? val
                  : static_cast<long>(test.size()) < test_quota ? test
                                                                : train;
      dst.insert(dst.end(), unit.begin(), unit.end());
    }
    ++class_index;
  }
  return plan;
}

SplitCounts severity_split_counts(Severity tier, int scale) {
  if (scale < 1) throw std::invalid_argument("severity_split_counts: scale must be >= 1");
  SplitCounts c;
  switch (tier) {
    case Severity::normal_pcr_plus: c = {55, 7, 14}; break;
    case Severity::mild: c = {70, 10, 20}; break;
    case Severity::moderate: c = {120, 17, 34}; break;
    case Severity::severe: c = {56, 7, 16}; break;
    default:
      throw std::invalid_argument("severity_split_counts: tier must be a positive severity");
  }
  return {c.train * scale, c.val * scale, c.test * scale};
}

SplitPlan severity_split(const DatasetManifest& subset, Severity tier, std::uint64_t seed,
                         int scale) {
  const SplitCounts counts = severity_split_counts(tier, scale);
  SplitPlan plan;
  plan.seed = seed;
  int class_index = 0;
  for (const auto& [label, idx] : by_class(subset)) {
    const long n = static_cast<long>(idx.size());
    if (n < counts.total())
      throw std::invalid_argument("severity_split: class \"" + label + "\" has " +
                                  std::to_string(n) + " records, needs " +
                                  std::to_string(counts.total()) + " (short " +
                                  std::to_string(counts.total() - n) + ")");
    // record-level draw: the published sizes must be hit exactly, which
    // patient units cannot guarantee
    std::vector<int> order = idx;
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(class_index)));
    rng.shuffle(order);
    auto take = [&order](int from, int count) {
      return std::vector<int>(order.begin() + from, order.begin() + from + count);
    };
    plan.train[label] = take(0, counts.train);
    plan.val[label] = take(counts.train, counts.val);
    plan.test[label] = take(counts.train + counts.val, counts.test);
    ++class_index;
  }
  return plan;
}

FoldPlan kfold_plan(const DatasetManifest& subset, int k, double val_frac, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_plan: k must be >= 2");
  if (val_frac < 0.0 || val_frac >= 1.0)
    throw std::invalid_argument("kfold_plan: val_frac must be in [0,1)");

  FoldPlan plan;
  plan.seed = seed;
  plan.k = k;
  plan.folds.resize(k);

  int class_index = 0;
  for (const auto& [label, idx] : by_class(subset)) {
    auto units = patient_units(subset, idx);
    if (static_cast<int>(units.size()) < k)
      throw std::invalid_argument("kfold_plan: class \"" + label + "\" has " +
                                  std::to_string(units.size()) + " separable units, need >= " +
                                  std::to_string(k));
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(class_index)));
    rng.shuffle(units);

    for (int f = 0; f < k; ++f) {
      auto& fold = plan.folds[f];
      auto& test = fold.test[label];
      long pool_records = 0;
      for (size_t u = 0; u < units.size(); ++u) {
        if (static_cast<int>(u % k) == f)
          test.insert(test.end(), units[u].begin(), units[u].end());
        else
          pool_records += static_cast<long>(units[u].size());
      }
      const long val_quota = static_cast<long>(std::floor(val_frac * pool_records));
      auto& val = fold.val[label];
      auto& train = fold.train[label];
      for (size_t u = 0; u < units.size(); ++u) {
        if (static_cast<int>(u % k) == f) continue;
        auto& dst = static_cast<long>(val.size()) < val_quota ? val : train;
        dst.insert(dst.end(), units[u].begin(), units[u].end());
      }
    }
    ++class_index;
  }
  return plan;
}

std::string split_plan_to_json(const SplitPlan& plan, const DatasetManifest& subset) {
  nlohmann::ordered_json j;
  j["seed"] = plan.seed;
  j["train"] = paths_by_class(plan.train, subset);
  j["val"] = paths_by_class(plan.val, subset);
  j["test"] = paths_by_class(plan.test, subset);
  return j.dump(2);
}

std::string fold_plan_to_json(const FoldPlan& plan, const DatasetManifest& subset) {
  nlohmann::ordered_json j;
  j["seed"] = plan.seed;
  j["k"] = plan.k;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& fold : plan.folds) {
    nlohmann::ordered_json f;
    f["train"] = paths_by_class(fold.train, subset);
    f["val"] = paths_by_class(fold.val, subset);
    f["test"] = paths_by_class(fold.test, subset);
    j["folds"].push_back(std::move(f));
  }
  return j.dump(2);
}

}  // namespace cxr
