#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowlens/faac.hpp"

namespace flowlens {

double mean(const std::vector<double>& v);
// Sample variance, divisor n-1.
double sample_variance(const std::vector<double>& v);

// Percentile in [0, 100] by linear interpolation between closest ranks
// (h = (n-1)*p/100). This is the one quartile/limit rule used everywhere:
// detector control limits, score-flagging thresholds and boxplot quartiles.
double percentile_linear(std::vector<double> values, double p);

struct RocCurve {
  std::vector<double> thresholds;  // thresholds[0] is +inf (nothing predicted positive)
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;                // trapezoidal over the stored points
  double auc_mann_whitney = 0.0;   // pairwise win fraction, ties counted 1/2
};

// Higher score means more anomalous. Equal scores are grouped into a single
// step (diagonal segment). Throws config_error if only one class is present.
RocCurve roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

// Per attack type: positives are windows containing that type, negatives the
// normal windows; windows containing only other attacks are left out. Types
// with no windows are omitted.
std::map<AttackType, double> auc_per_attack(const std::vector<double>& scores,
                                            const std::vector<WindowLabel>& labels);

enum class Alternative { two_sided, greater };

struct TTestResult {
  double t_stat = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  Alternative alternative = Alternative::two_sided;
  bool degenerate = false;  // both variances zero
};

// Welch's unequal-variance t statistic with Welch-Satterthwaite degrees of
// freedom. Alternative::greater tests mean(a) > mean(b).
TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b,
                        Alternative alternative);

struct BoxplotStats {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;   // most extreme values within 1.5*IQR of the quartiles
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

BoxplotStats boxplot_stats(std::vector<double> values);

void write_roc_csv(const RocCurve& roc, const std::string& path);

// One `variant,detector,attack,auc` row per entry; "all" denotes the pooled
// curve over every anomalous window.
struct AucRow {
  std::string variant;
  std::string detector;
  std::string attack;
  double auc = 0.0;
};
void write_auc_csv(const std::vector<AucRow>& rows, const std::string& path);

void export_timeseries(const ObservationMatrix& m, const std::vector<std::string>& names,
                       std::optional<std::pair<int64_t, int64_t>> range, const std::string& path);

}  // namespace flowlens
