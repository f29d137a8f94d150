#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowlens/faac.hpp"
#include "flowlens/flow.hpp"
#include "flowlens/model.hpp"
#include "flowlens/ocsvm.hpp"
#include "flowlens/synth.hpp"

namespace flowlens {

// A plan describes one experiment matrix: a flow source, a list of dataset
// variants (merge policy, training range, feature edits) and a list of
// detectors. Running it emits, per variant x detector cell, the fitted model,
// test scores, ROC points and AUC summary, all deterministic given the plan.

struct DetectorSpec {
  std::string name;  // "msnm" | "ocsvm"
  // msnm
  double tau = 0.95;
  size_t fixed_components = 0;  // 0 keeps the variance-fraction rule
  double limit_percentile = 99.0;
  // ocsvm
  OcsvmParams ocsvm;
};

struct UnionSpec {
  std::string of_a;
  std::string of_b;
  std::string prefix_a = "uni_";
  std::string prefix_b = "bid_";
};

struct VariantSpec {
  std::string id;
  std::optional<MergePolicy> merge;
  std::optional<std::pair<int64_t, int64_t>> train_range;
  std::optional<std::pair<int64_t, int64_t>> test_range;
  std::vector<std::string> flow_exclude_json;       // conjunctive predicates, applied in order
  std::vector<std::string> drop;                    // feature names
  std::vector<int64_t> exclude_observations;        // window starts, removed from training
  std::optional<UnionSpec> union_of;
  std::optional<std::string> feature_config_file;   // relative to the plan file
};

struct ExperimentPlan {
  uint64_t seed = 0;  // nonzero overrides the scenario seed
  std::optional<std::string> scenario_preset;
  std::optional<std::string> scenario_file;
  std::optional<std::string> flows_file;
  std::optional<std::pair<int64_t, int64_t>> train_range;  // variant defaults
  std::optional<std::pair<int64_t, int64_t>> test_range;
  std::vector<VariantSpec> variants;
  std::vector<DetectorSpec> detectors;

  static ExperimentPlan from_json(const std::string& json_text);
  void validate() const;
};

ExperimentPlan read_plan(const std::string& path);

struct CellResult {
  std::string variant;
  std::string detector;
  bool ok = false;
  std::string error;
  double auc_all = 0.0;
  std::vector<std::pair<AttackType, double>> auc_per_attack;
};

struct RunReport {
  bool ok = true;
  std::vector<std::string> variant_errors;
  std::vector<CellResult> cells;
};

// base_dir resolves relative paths inside the plan (scenario/flows/feature
// config files); outputs land in out_dir, which must not already exist.
RunReport run_plan(const ExperimentPlan& plan, const std::string& base_dir,
                   const std::string& out_dir, size_t workers = 1);

}  // namespace flowlens
