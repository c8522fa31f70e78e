#include <doctest.h>

#include <json.hpp>

#include "cxr/audit.hpp"

using namespace cxr;
using nlohmann::json;

TEST_CASE("population audit json carries both arms and the gap") {
  PopulationAudit audit;
  audit.n_per_class = 40;
  audit.confounded.accuracy = {0.9, 1.0};
  audit.confounded.mean = 0.95;
  audit.deconfounded.accuracy = {0.7, 0.8};
  audit.deconfounded.mean = 0.75;
  audit.gap = 0.2;

  const json j = json::parse(population_audit_to_json(audit));
  CHECK(j["n_per_class"] == 40);
  CHECK(j["confounded"]["accuracy"].size() == 2);
  CHECK(j["confounded"]["mean"] == doctest::Approx(0.95));
  CHECK(j["deconfounded"]["mean"] == doctest::Approx(0.75));
  CHECK(j["gap"] == doctest::Approx(0.2));
}

TEST_CASE("severity audit json lists tiers in grade order") {
  SeverityAudit audit;
  audit.scale = 2;
  for (Severity s : {Severity::normal_pcr_plus, Severity::mild, Severity::moderate,
                     Severity::severe}) {
    SeverityTierOutcome t;
    t.tier = s;
    t.outcome.accuracy = {0.5};
    t.outcome.mean = 0.5;
    audit.tiers.push_back(t);
  }

  const json j = json::parse(severity_audit_to_json(audit));
  CHECK(j["scale"] == 2);
  REQUIRE(j["tiers"].size() == 4);
  CHECK(j["tiers"][0]["tier"] == "normal_pcr_plus");
  CHECK(j["tiers"][3]["tier"] == "severe");
  CHECK(j["tiers"][1]["mean"] == doctest::Approx(0.5));
}

TEST_CASE("population audit runs end to end on a small cohort") {
  const PopulationAudit audit = run_population_audit(5, 1, 15);
  CHECK(audit.n_per_class == 15);
  REQUIRE(audit.confounded.accuracy.size() == 1);
  REQUIRE(audit.deconfounded.accuracy.size() == 1);
  CHECK(audit.confounded.mean >= 0.0);
  CHECK(audit.confounded.mean <= 1.0);
  CHECK(audit.gap == doctest::Approx(audit.confounded.mean - audit.deconfounded.mean));

  CHECK_THROWS_AS(run_population_audit(5, 0, 15), std::invalid_argument);
  CHECK_THROWS_AS(run_population_audit(5, 1, 4), std::invalid_argument);
}

TEST_CASE("binary audit reports one fold per split with auc filled in") {
  const BinaryAudit audit = run_binary_audit(3, 3, 20);
  REQUIRE(audit.folds.size() == 3);
  for (const auto& fold : audit.folds) {
    CHECK(fold.accuracy >= 0.0);
    CHECK(fold.accuracy <= 1.0);
    CHECK(fold.auc > 0.0);  // filled, not the default
    CHECK(fold.auc <= 1.0);
  }
  CHECK(audit.aggregate.auc.mean > 0.0);
  const std::string text = report_to_json(audit.folds, audit.aggregate);
  CHECK(json::parse(text)["folds"].size() == 3);
}
