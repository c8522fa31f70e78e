#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "cxr/dataset.hpp"
#include "cxr/image_io.hpp"
#include "cxr/rng.hpp"

using namespace cxr;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

SampleRecord rec(const std::string& label, Severity sev = Severity::none,
                 Population pop = Population::adult, const std::string& pid = "") {
  static int counter = 0;
  SampleRecord r;
  r.path = "img_" + std::to_string(counter++) + ".png";
  r.label = label;
  r.source = "external";
  r.severity = sev;
  r.population = pop;
  r.patient_id = pid;
  return r;
}

DatasetManifest two_class(int n_covid, int n_normal) {
  DatasetManifest m;
  for (int i = 0; i < n_covid; ++i) m.records.push_back(rec(kCovidLabel, Severity::moderate));
  for (int i = 0; i < n_normal; ++i) m.records.push_back(rec(kNormalLabel));
  return m;
}

std::set<int> as_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("manifest csv round trips and rejects bad rows") {
  const std::string p = temp_path("cxr_manifest.csv");
  DatasetManifest m;
  m.records.push_back(rec(kCovidLabel, Severity::mild, Population::adult, "p1"));
  m.records.push_back(rec(kNormalLabel, Severity::none, Population::paediatric));
  m.records.push_back(rec(kCovidLabel, Severity::severe, Population::adult, "p2"));
  write_manifest(p, m);
  DatasetManifest back = parse_manifest(p);
  REQUIRE(back.records.size() == 3);
  CHECK(back.records[0].label == kCovidLabel);
  CHECK(back.records[0].severity == Severity::mild);
  CHECK(back.records[0].patient_id == "p1");
  CHECK(back.records[1].population == Population::paediatric);
  CHECK(back.records[1].patient_id.empty());
  std::filesystem::remove(p);

  const std::string bad = temp_path("cxr_bad.csv");
  {
    std::ofstream f(bad);
    f << "path,label,source,severity,population,patient_id\n";
    f << "a.png,covid,external,mild,adult,\n";
    f << "b.png,covid,external,acute,adult,\n";
  }
  CHECK_THROWS_WITH_AS(parse_manifest(bad), doctest::Contains(":3:"), std::invalid_argument);
  std::filesystem::remove(bad);

  const std::string nohdr = temp_path("cxr_nohdr.csv");
  {
    std::ofstream f(nohdr);
    f << "path,label\n";
  }
  CHECK_THROWS_AS(parse_manifest(nohdr), std::invalid_argument);
  std::filesystem::remove(nohdr);

  CHECK_THROWS_AS(parse_manifest(temp_path("cxr_missing_zz.csv")), FileMissingError);
}

TEST_CASE("source registry carries the published totals") {
  const auto& reg = source_registry();
  CHECK(reg.size() == 12);
  long total = 0;
  for (const auto& s : reg) total += s.expected;
  CHECK(total == 4454);

  DatasetManifest m;
  for (int i = 0; i < 3; ++i) {
    auto r = rec(kCovidLabel);
    r.source = "covidgr";
    m.records.push_back(r);
  }
  auto rows = reconcile_sources(m);
  REQUIRE(rows.size() == 12);
  for (const auto& row : rows) {
    if (row.source == "covidgr") {
      CHECK(row.expected == 426);
      CHECK(row.found == 3);
    } else {
      CHECK(row.found == 0);
    }
  }
}

TEST_CASE("class weights follow the inverse-frequency rule exactly") {
  auto balanced = compute_class_weights({3119, 3119});
  CHECK(balanced.w[0] == 1.0);
  CHECK(balanced.w[1] == 1.0);

  auto skewed = compute_class_weights({100, 300});
  CHECK(skewed.w[0] == 2.0);
  CHECK(skewed.w[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  auto zeroed = compute_class_weights({10, 10}, {0.0, 1.0});
  CHECK(zeroed.w[0] == 0.0);
  CHECK(zeroed.w[1] == 1.0);

  // sum(w*n) = C * sum(n) when every class constant is the same C
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const int N = 2 + static_cast<int>(rng.below(5));
    std::vector<long> counts;
    long total = 0;
    for (int c = 0; c < N; ++c) {
      counts.push_back(1 + static_cast<long>(rng.below(500)));
      total += counts.back();
    }
    auto cw = compute_class_weights(counts);
    double weighted = 0.0;
    for (int c = 0; c < N; ++c) weighted += cw.w[c] * counts[c];
    CHECK(weighted == doctest::Approx(static_cast<double>(total)).epsilon(1e-12));
  }

  CHECK_THROWS_AS(compute_class_weights({5, 0}), std::invalid_argument);
  CHECK_THROWS_AS(compute_class_weights({}), std::invalid_argument);
}

TEST_CASE("stratified split reproduces the published count triples") {
  auto counts_of = [](const SplitPlan& plan, const std::string& label) {
    return std::array<long, 3>{static_cast<long>(plan.train.at(label).size()),
                               static_cast<long>(plan.val.at(label).size()),
                               static_cast<long>(plan.test.at(label).size())};
  };

  SplitPlan big = stratified_split(two_class(4454, 4454), 0.7, 0.1, 0.2, 7);
  CHECK(counts_of(big, kCovidLabel) == std::array<long, 3>{3119, 445, 890});
  CHECK(counts_of(big, kNormalLabel) == std::array<long, 3>{3119, 445, 890});

  SplitPlan mid = stratified_split(two_class(1580, 1580), 0.7, 0.1, 0.2, 7);
  CHECK(counts_of(mid, kCovidLabel) == std::array<long, 3>{1106, 158, 316});

  SplitPlan small = stratified_split(two_class(10, 10), 0.7, 0.1, 0.2, 7);
  CHECK(counts_of(small, kNormalLabel) == std::array<long, 3>{7, 1, 2});
}

TEST_CASE("stratified split partitions each class and responds to the seed") {
  DatasetManifest m = two_class(40, 40);
  SplitPlan a = stratified_split(m, 0.7, 0.1, 0.2, 1);
  SplitPlan b = stratified_split(m, 0.7, 0.1, 0.2, 1);
  SplitPlan c = stratified_split(m, 0.7, 0.1, 0.2, 2);

  for (const std::string& label : {kCovidLabel, kNormalLabel}) {
    auto tr = as_set(a.train.at(label)), va = as_set(a.val.at(label)), te = as_set(a.test.at(label));
    CHECK(tr.size() + va.size() + te.size() == 40);
    std::set<int> all;
    all.insert(tr.begin(), tr.end());
    all.insert(va.begin(), va.end());
    all.insert(te.begin(), te.end());
    CHECK(all.size() == 40);  // disjoint and exhaustive

    CHECK(a.train.at(label) == b.train.at(label));
    CHECK(a.val.at(label) == b.val.at(label));
    CHECK(a.test.at(label) != c.test.at(label));  // new seed moves membership
    CHECK(c.train.at(label).size() == 28);
    CHECK(c.val.at(label).size() == 4);
    CHECK(c.test.at(label).size() == 8);
  }

  CHECK_THROWS_AS(stratified_split(two_class(2, 10), 0.7, 0.1, 0.2, 1), std::invalid_argument);
  CHECK_THROWS_AS(stratified_split(m, 0.8, 0.1, 0.2, 1), std::invalid_argument);
}

TEST_CASE("patients never straddle split partitions") {
  DatasetManifest m;
  for (int p = 0; p < 12; ++p)
    for (int shot = 0; shot < 3; ++shot)
      m.records.push_back(rec(kCovidLabel, Severity::mild, Population::adult, "pat" + std::to_string(p)));
  for (int i = 0; i < 36; ++i) m.records.push_back(rec(kNormalLabel));

  SplitPlan plan = stratified_split(m, 0.7, 0.1, 0.2, 5);
  std::map<std::string, std::string> where;  // patient -> partition
  auto scan = [&](const std::vector<int>& idx, const std::string& part) {
    for (int i : idx) {
      const std::string& pid = m.records[i].patient_id;
      if (pid.empty()) continue;
      auto [it, fresh] = where.emplace(pid, part);
      if (!fresh) CHECK(it->second == part);
    }
  };
  scan(plan.train.at(kCovidLabel), "train");
  scan(plan.val.at(kCovidLabel), "val");
  scan(plan.test.at(kCovidLabel), "test");
  CHECK(where.size() == 12);
}

TEST_CASE("severity split uses the published fixed triples") {
  CHECK(severity_split_counts(Severity::normal_pcr_plus).train == 55);
  CHECK(severity_split_counts(Severity::normal_pcr_plus).val == 7);
  CHECK(severity_split_counts(Severity::normal_pcr_plus).test == 14);
  CHECK(severity_split_counts(Severity::mild).total() == 100);
  CHECK(severity_split_counts(Severity::moderate).total() == 171);
  CHECK(severity_split_counts(Severity::severe).total() == 79);
  CHECK(severity_split_counts(Severity::severe, 2).test == 32);
  CHECK_THROWS_AS(severity_split_counts(Severity::none), std::invalid_argument);

  // covidgr-shaped manifest: 76 pcr+ cases and enough normals
  DatasetManifest m;
  for (int i = 0; i < 76; ++i) m.records.push_back(rec(kCovidLabel, Severity::normal_pcr_plus));
  for (int i = 0; i < 90; ++i) m.records.push_back(rec(kNormalLabel));
  DatasetManifest subset = build_subset(m, "severity:1");
  CHECK(subset.records.size() == 152);

  SplitPlan plan = severity_split(subset, Severity::normal_pcr_plus, 3);
  for (const std::string& label : {kCovidLabel, kNormalLabel}) {
    CHECK(plan.train.at(label).size() == 55);
    CHECK(plan.val.at(label).size() == 7);
    CHECK(plan.test.at(label).size() == 14);
  }

  DatasetManifest thin;
  for (int i = 0; i < 60; ++i) thin.records.push_back(rec(kCovidLabel, Severity::normal_pcr_plus));
  for (int i = 0; i < 76; ++i) thin.records.push_back(rec(kNormalLabel));
  CHECK_THROWS_WITH_AS(severity_split(thin, Severity::normal_pcr_plus, 3),
                       doctest::Contains("short 16"), std::invalid_argument);
}

TEST_CASE("subset builder reproduces the experiment compositions") {
  DatasetManifest m = two_class(4454, 4454);
  CHECK(build_subset(m, "binary").records.size() == 8908);

  // equalisation trims the larger class
  DatasetManifest uneven = two_class(30, 100);
  DatasetManifest bal = build_subset(uneven, "binary");
  CHECK(bal.records.size() == 60);
  long covid = 0;
  for (const auto& r : bal.records) covid += r.label == kCovidLabel ? 1 : 0;
  CHECK(covid == 30);

  DatasetManifest pop;
  for (int i = 0; i < 20; ++i) pop.records.push_back(rec(kNormalLabel, Severity::none, Population::paediatric));
  for (int i = 0; i < 25; ++i) pop.records.push_back(rec(kNormalLabel, Severity::none, Population::adult));
  DatasetManifest popset = build_subset(pop, "population");
  CHECK(popset.records.size() == 40);
  long paed = 0, adult = 0;
  for (const auto& r : popset.records) {
    if (r.label == "paediatric") ++paed;
    if (r.label == "adult") ++adult;
  }
  CHECK(paed == 20);
  CHECK(adult == 20);

  DatasetManifest mixed;
  for (int i = 0; i < 15; ++i) mixed.records.push_back(rec(kCovidLabel, Severity::moderate, Population::adult));
  for (int i = 0; i < 15; ++i) mixed.records.push_back(rec(kNormalLabel, Severity::none, Population::paediatric));
  for (int i = 0; i < 5; ++i) mixed.records.push_back(rec(kNormalLabel, Severity::none, Population::adult));
  DatasetManifest mix = build_subset(mixed, "mixed-normal");
  CHECK(mix.records.size() == 30);
  for (const auto& r : mix.records) {
    if (r.label == kCovidLabel) CHECK(r.population == Population::adult);
    if (r.label == kNormalLabel) CHECK(r.population == Population::paediatric);
  }

  CHECK_THROWS_AS(build_subset(DatasetManifest{}, "binary"), std::invalid_argument);
  CHECK_THROWS_AS(build_subset(m, "severity:9"), std::invalid_argument);
  CHECK_THROWS_AS(build_subset(m, "nonsense"), std::invalid_argument);
}

TEST_CASE("kfold plan distributes fold sizes round robin") {
  DatasetManifest m = two_class(103, 103);
  FoldPlan plan = kfold_plan(m, 5, 0.1, 11);
  REQUIRE(plan.folds.size() == 5);
  std::multiset<size_t> sizes;
  for (const auto& fold : plan.folds) sizes.insert(fold.test.at(kCovidLabel).size());
  CHECK(sizes == std::multiset<size_t>{20, 20, 21, 21, 21});

  // union of test sets is the whole class, disjoint
  std::set<int> all;
  size_t total = 0;
  for (const auto& fold : plan.folds) {
    const auto& t = fold.test.at(kCovidLabel);
    all.insert(t.begin(), t.end());
    total += t.size();
  }
  CHECK(all.size() == 103);
  CHECK(total == 103);

  // validation is a tenth of each fold's pool, floor
  for (const auto& fold : plan.folds) {
    const size_t pool = 103 - fold.test.at(kCovidLabel).size();
    CHECK(fold.val.at(kCovidLabel).size() == pool / 10);
    CHECK(fold.train.at(kCovidLabel).size() == pool - pool / 10);
  }

  DatasetManifest tiny = two_class(5, 5);
  FoldPlan each = kfold_plan(tiny, 5, 0.1, 1);
  for (const auto& fold : each.folds) CHECK(fold.test.at(kNormalLabel).size() == 1);

  FoldPlan again = kfold_plan(m, 5, 0.1, 11);
  for (int f = 0; f < 5; ++f) CHECK(plan.folds[f].test.at(kCovidLabel) == again.folds[f].test.at(kCovidLabel));

  CHECK_THROWS_AS(kfold_plan(two_class(4, 9), 5, 0.1, 1), std::invalid_argument);
  CHECK_THROWS_AS(kfold_plan(m, 1, 0.1, 1), std::invalid_argument);
}

TEST_CASE("plans serialize paths per partition") {
  DatasetManifest m = two_class(5, 5);
  SplitPlan plan = stratified_split(m, 0.7, 0.1, 0.2, 9);
  auto j = nlohmann::json::parse(split_plan_to_json(plan, m));
  CHECK(j["seed"] == 9);
  size_t n = 0;
  for (const auto& part : {"train", "val", "test"})
    for (const auto& [label, arr] : j[part].items()) n += arr.size();
  CHECK(n == 10);
  CHECK(j["train"][kCovidLabel][0].get<std::string>().find(".png") != std::string::npos);

  FoldPlan folds = kfold_plan(m, 2, 0.0, 9);
  auto fj = nlohmann::json::parse(fold_plan_to_json(folds, m));
  CHECK(fj["k"] == 2);
  CHECK(fj["folds"].size() == 2);
}

TEST_CASE("dedup drops repeated pixel content but keeps distinct precision") {
  const std::string dir = temp_path("cxr_dedup");
  std::filesystem::create_directories(dir);
  ImageBuffer img(6, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 6; ++x) img(y, x) = (y * 6 + x) / 35.0f + 0.001f * ((y * 6 + x) % 3);

  const std::string a = dir + "/a.png";
  const std::string b = dir + "/b.png";    // byte-identical copy of a
  const std::string c8 = dir + "/c8.png";  // same pixels, lossy 8-bit encode
  save_png(a, img, 16);
  std::filesystem::copy_file(a, b, std::filesystem::copy_options::overwrite_existing);
  save_png(c8, img, 8);

  DatasetManifest m;
  for (const std::string& p : {a, b, c8}) {
    auto r = rec(kCovidLabel);
    r.path = p;
    m.records.push_back(r);
  }
  DedupReport rep = dedup(m);
  REQUIRE(rep.dropped.size() == 1);
  CHECK(rep.dropped[0] == b);
  REQUIRE(rep.kept.records.size() == 2);
  CHECK(rep.kept.records[0].path == a);
  CHECK(rep.kept.records[1].path == c8);

  // fully distinct images are untouched
  ImageBuffer other = ImageBuffer::Constant(6, 6, 0.123f);
  const std::string d = dir + "/d.png";
  save_png(d, other, 16);
  auto r = rec(kNormalLabel);
  r.path = d;
  m.records.push_back(r);
  CHECK(dedup(m).kept.records.size() == 3);

  auto missing = rec(kNormalLabel);
  missing.path = dir + "/nothere.png";
  m.records.push_back(missing);
  CHECK_THROWS_AS(dedup(m), FileMissingError);
  std::filesystem::remove_all(dir);
}
