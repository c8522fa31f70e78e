#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cxr/dataset.hpp"
#include "cxr/eval.hpp"

namespace cxr {

// Experiment drivers shared by the command line and the acceptance checks.
// Each one builds synthetic datasets, trains the reference softmax
// classifier with a fixed recipe, and reports held-out accuracy.

struct ArmOutcome {
  std::vector<double> accuracy;  // one entry per seed
  double mean = 0.0;
};

// Population-confound experiment: a dataset whose normal arm is paediatric
// and whose covid arm is adult (confounded) against one drawn entirely from
// adults (deconfounded). A large accuracy gap shows the model exploiting
// anatomy rather than opacities.
struct PopulationAudit {
  int n_per_class = 0;
  ArmOutcome confounded;
  ArmOutcome deconfounded;
  double gap = 0.0;  // confounded mean - deconfounded mean
};
PopulationAudit run_population_audit(std::uint64_t seed, int n_seeds = 5, int n_per_class = 250);
std::string population_audit_to_json(const PopulationAudit& audit);

// Severity-tier experiment: normal vs one severity grade per tier, sized by
// the published study tables (scaled). The PCR-positive-without-findings
// tier carries no visual signal, so its accuracy should hover at chance.
struct SeverityTierOutcome {
  Severity tier = Severity::none;
  ArmOutcome outcome;
};
struct SeverityAudit {
  int scale = 1;
  std::vector<SeverityTierOutcome> tiers;  // pcr+, mild, moderate, severe
};
SeverityAudit run_severity_audit(std::uint64_t seed, int n_seeds = 5, int scale = 2);
std::string severity_audit_to_json(const SeverityAudit& audit);

// Plain binary screening run: adult-only covid vs normal with k-fold cross
// validation, reported in the per-fold plus mean-and-std layout.
struct BinaryAudit {
  std::vector<FoldReport> folds;
  AggregateReport aggregate;
};
BinaryAudit run_binary_audit(std::uint64_t seed, int k = 5, int n_per_class = 150);

}  // namespace cxr
