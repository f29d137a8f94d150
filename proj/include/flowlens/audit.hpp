#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowlens/diagnosis.hpp"
#include "flowlens/faac.hpp"
#include "flowlens/scaling.hpp"
#include "flowlens/stats.hpp"

namespace flowlens {

// Test-label audit: background (normal-labelled) windows that score far above
// the rest are grouped into consecutive periods and each period is diagnosed
// against the calibration reference, with per-feature one-sided t-tests
// versus the remaining background windows. High-magnitude features plus small
// p-values point at unlabelled attack activity.

struct ThresholdRule {
  enum class Kind { percentile, absolute };
  Kind kind = Kind::percentile;
  double value = 99.9;  // percentile of all background scores, or absolute score

  static ThresholdRule percentile(double p) { return {Kind::percentile, p}; }
  static ThresholdRule absolute(double t) { return {Kind::absolute, t}; }
};

// Indices (into scores/labels) of normal windows scoring above the threshold,
// ascending. Throws config_error when there is no background window.
std::vector<size_t> flag_background(const std::vector<double>& scores,
                                    const std::vector<WindowLabel>& labels,
                                    const ThresholdRule& rule);

struct FeatureTest {
  std::string name;
  double accumulated = 0.0;
  bool tested = false;  // false for single-window periods
  TTestResult ttest;
};

struct SuspiciousPeriod {
  std::vector<size_t> window_rows;     // row indices in the scored matrix
  std::vector<int64_t> window_starts;
  double peak_score = 0.0;
  DiagnosisReport diagnosis;
  std::vector<FeatureTest> feature_tests;
  std::string verdict;  // left empty for the analyst
};

// Maximal runs of flagged ids at most max_gap windows apart (1 = strictly
// consecutive). Gaps are measured on window indices, not row positions.
std::vector<SuspiciousPeriod> group_periods(const std::vector<size_t>& flagged,
                                            const ObservationMatrix& m, size_t max_gap = 1);

// Fills in diagnosis and the one-sided t-tests (period vs all other
// background windows) for the top_k ranked features.
void diagnose_period(SuspiciousPeriod& period, const ObservationMatrix& m,
                     const std::vector<double>& scores, const AutoscaleParams& reference,
                     size_t top_k = 5);

struct AuditReport {
  std::vector<SuspiciousPeriod> periods;
  double threshold = 0.0;
  std::string threshold_rule;
  size_t background_windows = 0;
  size_t flagged_windows = 0;
};

AuditReport run_audit(const std::vector<double>& scores, const ObservationMatrix& m,
                      const AutoscaleParams& reference, const ThresholdRule& rule,
                      size_t max_gap = 1, size_t top_k = 5);

std::string audit_to_json(const AuditReport& report);
void write_audit_report(const AuditReport& report, const std::string& path);

}  // namespace flowlens
