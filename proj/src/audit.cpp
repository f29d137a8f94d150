#include "flowlens/audit.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "flowlens/error.hpp"
#include "flowlens/textio.hpp"
#include "flowlens/timeutil.hpp"

namespace flowlens {

std::vector<size_t> flag_background(const std::vector<double>& scores,
                                    const std::vector<WindowLabel>& labels,
                                    const ThresholdRule& rule) {
  if (scores.size() != labels.size()) {
    throw config_error("flag_background: scores and labels differ in length");
  }
  std::vector<double> background_scores;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i].anomalous()) background_scores.push_back(scores[i]);
  }
  if (background_scores.empty()) throw config_error("flag_background: no background windows");
  double threshold = rule.value;
  if (rule.kind == ThresholdRule::Kind::percentile) {
    threshold = percentile_linear(background_scores, rule.value);
  }
  std::vector<size_t> flagged;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i].anomalous() && scores[i] > threshold) flagged.push_back(i);
  }
  return flagged;
}

std::vector<SuspiciousPeriod> group_periods(const std::vector<size_t>& flagged,
                                            const ObservationMatrix& m, size_t max_gap) {
  for (size_t i = 1; i < flagged.size(); ++i) {
    if (flagged[i] <= flagged[i - 1]) throw config_error("group_periods: ids must be sorted");
  }
  std::vector<SuspiciousPeriod> periods;
  const int64_t w = m.window_s;
  for (const size_t id : flagged) {
    if (id >= m.rows()) throw config_error("group_periods: id out of range");
    const int64_t start = m.window_starts[id];
    if (!periods.empty()) {
      const int64_t prev = periods.back().window_starts.back();
      const int64_t gap_windows = (start - prev) / w;
      if (gap_windows <= static_cast<int64_t>(max_gap)) {
        periods.back().window_rows.push_back(id);
        periods.back().window_starts.push_back(start);
        continue;
      }
    }
    SuspiciousPeriod p;
    p.window_rows.push_back(id);
    p.window_starts.push_back(start);
    periods.push_back(std::move(p));
  }
  return periods;
}

void diagnose_period(SuspiciousPeriod& period, const ObservationMatrix& m,
                     const std::vector<double>& scores, const AutoscaleParams& reference,
                     size_t top_k) {
  if (period.window_rows.empty()) throw config_error("diagnose_period: empty period");
  if (scores.size() != m.rows()) {
    throw config_error("diagnose_period: scores and matrix differ in length");
  }
  period.peak_score = scores[period.window_rows.front()];
  for (const size_t r : period.window_rows) period.peak_score = std::max(period.peak_score, scores[r]);

  period.diagnosis = u_squared(m, period.window_rows, reference, "calibration");

  std::vector<char> in_period(m.rows(), 0);
  for (const size_t r : period.window_rows) in_period[r] = 1;

  period.feature_tests.clear();
  for (const auto& rf : rank_features(period.diagnosis, top_k)) {
    const size_t col = m.feature_index(rf.name);
    std::vector<double> period_vals, rest_vals;
    for (size_t r = 0; r < m.rows(); ++r) {
      if (m.labels[r].anomalous()) continue;  // only background participates
      if (in_period[r]) {
        period_vals.push_back(m.at(r, col));
      } else {
        rest_vals.push_back(m.at(r, col));
      }
    }
    FeatureTest ft;
    ft.name = rf.name;
    ft.accumulated = rf.accumulated;
    if (period_vals.size() >= 2 && rest_vals.size() >= 2) {
      ft.ttest = welch_ttest(period_vals, rest_vals, Alternative::greater);
      ft.tested = true;
    } else {
      ft.ttest.alternative = Alternative::greater;  // single-window periods carry no test
    }
    period.feature_tests.push_back(std::move(ft));
  }
}

AuditReport run_audit(const std::vector<double>& scores, const ObservationMatrix& m,
                      const AutoscaleParams& reference, const ThresholdRule& rule,
                      size_t max_gap, size_t top_k) {
  AuditReport report;
  const auto flagged = flag_background(scores, m.labels, rule);
  report.flagged_windows = flagged.size();
  for (const auto& l : m.labels) report.background_windows += l.anomalous() ? 0 : 1;
  std::vector<double> background_scores;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!m.labels[i].anomalous()) background_scores.push_back(scores[i]);
  }
  if (rule.kind == ThresholdRule::Kind::percentile) {
    report.threshold = percentile_linear(background_scores, rule.value);
    report.threshold_rule = "percentile " + format_double(rule.value);
  } else {
    report.threshold = rule.value;
    report.threshold_rule = "absolute";
  }
  report.periods = group_periods(flagged, m, max_gap);
  for (auto& p : report.periods) diagnose_period(p, m, scores, reference, top_k);
  return report;
}

std::string audit_to_json(const AuditReport& report) {
  nlohmann::ordered_json j;
  j["threshold"] = report.threshold;
  j["threshold_rule"] = report.threshold_rule;
  j["background_windows"] = report.background_windows;
  j["flagged_windows"] = report.flagged_windows;
  auto& arr = j["periods"] = nlohmann::ordered_json::array();
  for (const auto& p : report.periods) {
    nlohmann::ordered_json jp;
    jp["start"] = format_timestamp(p.window_starts.front());
    jp["end"] = format_timestamp(p.window_starts.back());
    jp["n_windows"] = p.window_starts.size();
    std::vector<std::string> stamps;
    for (const int64_t t : p.window_starts) stamps.push_back(format_timestamp(t));
    jp["window_starts"] = stamps;
    jp["peak_score"] = p.peak_score;
    auto& feats = jp["top_features"] = nlohmann::ordered_json::array();
    for (const auto& ft : p.feature_tests) {
      nlohmann::ordered_json jf;
      jf["name"] = ft.name;
      jf["accumulated"] = ft.accumulated;
      if (ft.tested) {
        jf["t_stat"] = std::isfinite(ft.ttest.t_stat) ? nlohmann::ordered_json(ft.ttest.t_stat)
                                                      : nlohmann::ordered_json(nullptr);
        jf["dof"] = ft.ttest.dof;
        jf["p_value"] = ft.ttest.p_value;
      }
      feats.push_back(std::move(jf));
    }
    jp["verdict"] = p.verdict;
    arr.push_back(std::move(jp));
  }
  return j.dump(2) + "\n";
}

void write_audit_report(const AuditReport& report, const std::string& path) {
  write_text_file(path, audit_to_json(report));
}

}  // namespace flowlens
