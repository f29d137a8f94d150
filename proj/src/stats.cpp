#include "flowlens/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "flowlens/error.hpp"
#include "flowlens/textio.hpp"
#include "flowlens/timeutil.hpp"

namespace flowlens {

double mean(const std::vector<double>& v) {
  if (v.empty()) throw config_error("mean of empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) throw config_error("sample variance needs at least 2 values");
  const double m = mean(v);
  double acc = 0.0;
  for (const double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

double percentile_linear(std::vector<double> values, double p) {
  if (values.empty()) throw config_error("percentile of empty sample");
  if (p < 0.0 || p > 100.0) throw config_error("percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

RocCurve roc_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) {
    throw config_error("roc: scores and labels differ in length");
  }
  size_t n_pos = 0;
  for (const bool b : positive) n_pos += b ? 1 : 0;
  const size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw config_error("roc needs both classes present (got " + std::to_string(n_pos) +
                       " positive, " + std::to_string(n_neg) + " negative)");
  }

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.thresholds.push_back(std::numeric_limits<double>::infinity());
  roc.fpr.push_back(0.0);
  roc.tpr.push_back(0.0);
  size_t tp = 0, fp = 0;
  size_t i = 0;
  double mw_wins = 0.0;  // defeated negatives per positive, ties as 1/2
  while (i < order.size()) {
    size_t j = i;
    size_t tie_pos = 0, tie_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (positive[order[j]]) {
        ++tie_pos;
      } else {
        ++tie_neg;
      }
      ++j;
    }
    // Negatives with strictly lower score are those not yet consumed.
    mw_wins += static_cast<double>(tie_pos) *
               (static_cast<double>(n_neg - fp - tie_neg) + 0.5 * static_cast<double>(tie_neg));
    tp += tie_pos;
    fp += tie_neg;
    roc.thresholds.push_back(scores[order[i]]);
    roc.fpr.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
    roc.tpr.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
    i = j;
  }
  double area = 0.0;
  for (size_t k = 1; k < roc.fpr.size(); ++k) {
    area += (roc.fpr[k] - roc.fpr[k - 1]) * (roc.tpr[k] + roc.tpr[k - 1]) * 0.5;
  }
  roc.auc = area;
  roc.auc_mann_whitney = mw_wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  if (std::abs(roc.auc - roc.auc_mann_whitney) > 1e-9) {
    throw numeric_error("roc self-check failed: trapezoidal and rank AUC disagree");
  }
  return roc;
}

std::map<AttackType, double> auc_per_attack(const std::vector<double>& scores,
                                            const std::vector<WindowLabel>& labels) {
  if (scores.size() != labels.size()) {
    throw config_error("auc_per_attack: scores and labels differ in length");
  }
  std::map<AttackType, double> out;
  static constexpr AttackType kTypes[] = {AttackType::dos, AttackType::scan11, AttackType::scan44,
                                          AttackType::nerisbotnet, AttackType::other};
  for (const AttackType type : kTypes) {
    std::vector<double> sub_scores;
    std::vector<bool> sub_pos;
    size_t positives = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (labels[i].attacks.count(type)) {
        sub_scores.push_back(scores[i]);
        sub_pos.push_back(true);
        ++positives;
      } else if (!labels[i].anomalous()) {
        sub_scores.push_back(scores[i]);
        sub_pos.push_back(false);
      }
    }
    if (positives == 0 || positives == sub_scores.size()) continue;
    out[type] = roc_auc(sub_scores, sub_pos).auc;
  }
  return out;
}

TTestResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b,
                        Alternative alternative) {
  if (a.size() < 2 || b.size() < 2) {
    throw config_error("welch_ttest needs at least 2 values per sample");
  }
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a);
  const double mb = mean(b);
  const double va = sample_variance(a);
  const double vb = sample_variance(b);

  TTestResult res;
  res.alternative = alternative;
  const double se2 = va / na + vb / nb;
  if (se2 <= 0.0) {
    res.degenerate = true;
    if (ma == mb) {
      res.t_stat = 0.0;
      res.dof = na + nb - 2.0;
      res.p_value = 1.0;
    } else {
      res.t_stat = ma > mb ? std::numeric_limits<double>::infinity()
                           : -std::numeric_limits<double>::infinity();
      res.dof = na + nb - 2.0;
      if (alternative == Alternative::two_sided) {
        res.p_value = 0.0;
      } else {
        res.p_value = ma > mb ? 0.0 : 1.0;
      }
    }
    return res;
  }
  res.t_stat = (ma - mb) / std::sqrt(se2);
  const double ra = va / na;
  const double rb = vb / nb;
  res.dof = se2 * se2 / (ra * ra / (na - 1.0) + rb * rb / (nb - 1.0));
  const boost::math::students_t dist(res.dof);
  if (alternative == Alternative::two_sided) {
    res.p_value = 2.0 * boost::math::cdf(dist, -std::abs(res.t_stat));
  } else {
    res.p_value = boost::math::cdf(dist, -res.t_stat);
  }
  return res;
}

BoxplotStats boxplot_stats(std::vector<double> values) {
  if (values.empty()) throw config_error("boxplot of empty sample");
  std::sort(values.begin(), values.end());
  BoxplotStats s;
  auto pct = [&values](double p) {
    const double h = (static_cast<double>(values.size()) - 1.0) * p / 100.0;
    const size_t lo = static_cast<size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
  };
  s.q1 = pct(25.0);
  s.median = pct(50.0);
  s.q3 = pct(75.0);
  const double iqr = s.q3 - s.q1;
  const double lo_fence = s.q1 - 1.5 * iqr;
  const double hi_fence = s.q3 + 1.5 * iqr;
  s.whisker_low = s.q3;
  s.whisker_high = s.q1;
  bool any_in = false;
  for (const double v : values) {
    if (v < lo_fence || v > hi_fence) {
      s.outliers.push_back(v);
    } else {
      if (!any_in) {
        s.whisker_low = v;
        any_in = true;
      }
      s.whisker_high = v;
    }
  }
  if (!any_in) {
    // Quartiles are interpolated, so at least the median is always inside.
    s.whisker_low = s.whisker_high = s.median;
  }
  return s;
}

void write_roc_csv(const RocCurve& roc, const std::string& path) {
  std::string buf = "threshold,fpr,tpr\n";
  for (size_t i = 0; i < roc.thresholds.size(); ++i) {
    buf += std::isinf(roc.thresholds[i]) ? "inf" : format_double(roc.thresholds[i]);
    buf += ',';
    buf += format_double(roc.fpr[i]);
    buf += ',';
    buf += format_double(roc.tpr[i]);
    buf += '\n';
  }
  write_text_file(path, buf);
}

void write_auc_csv(const std::vector<AucRow>& rows, const std::string& path) {
  std::string buf = "variant,detector,attack,auc\n";
  for (const auto& r : rows) {
    buf += r.variant;
    buf += ',';
    buf += r.detector;
    buf += ',';
    buf += r.attack;
    buf += ',';
    buf += format_double(r.auc);
    buf += '\n';
  }
  write_text_file(path, buf);
}

void export_timeseries(const ObservationMatrix& m, const std::vector<std::string>& names,
                       std::optional<std::pair<int64_t, int64_t>> range, const std::string& path) {
  std::vector<size_t> cols;
  for (const auto& n : names) cols.push_back(m.feature_index(n));
  std::string buf = "window_start";
  for (const auto& n : names) {
    buf += ',';
    buf += n;
  }
  buf += '\n';
  for (size_t r = 0; r < m.rows(); ++r) {
    if (range && (m.window_starts[r] < range->first || m.window_starts[r] >= range->second)) {
      continue;
    }
    buf += format_timestamp(m.window_starts[r]);
    for (const size_t c : cols) {
      buf += ',';
      buf += format_double(m.at(r, c));
    }
    buf += '\n';
  }
  write_text_file(path, buf);
}

}  // namespace flowlens
