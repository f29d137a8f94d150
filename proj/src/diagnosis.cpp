#include "flowlens/diagnosis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "flowlens/error.hpp"
#include "flowlens/textio.hpp"

namespace flowlens {

DiagnosisReport u_squared(const ObservationMatrix& m, const std::vector<size_t>& rows,
                          const AutoscaleParams& reference, const std::string& reference_id) {
  if (rows.empty()) throw config_error("u_squared: empty observation selection");
  reference.check_alignment(m.feature_names);
  for (const size_t r : rows) {
    if (r >= m.rows()) {
      throw config_error("u_squared: row index " + std::to_string(r) + " out of range");
    }
  }
  const size_t d = m.cols();
  DiagnosisReport rep;
  rep.feature_names = m.feature_names;
  rep.reference_id = reference_id;
  rep.zero_sigma_features = reference.zero_sigma_features;
  rep.per_observation.resize(rows.size() * d);
  rep.accumulated.assign(d, 0.0);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t c = 0; c < d; ++c) {
      const double z = reference.scale_value(c, m.at(rows[i], c));
      const double contrib = z * std::abs(z);
      rep.per_observation[i * d + c] = contrib;
      rep.accumulated[c] += contrib;
    }
  }
  rep.ranking.resize(d);
  std::iota(rep.ranking.begin(), rep.ranking.end(), 0);
  std::stable_sort(rep.ranking.begin(), rep.ranking.end(), [&rep](size_t a, size_t b) {
    return std::abs(rep.accumulated[a]) > std::abs(rep.accumulated[b]);
  });
  return rep;
}

DiagnosisReport u_squared(const ObservationMatrix& m, const AutoscaleParams& reference,
                          const std::string& reference_id) {
  std::vector<size_t> rows(m.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return u_squared(m, rows, reference, reference_id);
}

std::vector<RankedFeature> rank_features(const DiagnosisReport& report, size_t top_k) {
  if (top_k < 1) throw config_error("rank_features: top_k must be >= 1");
  std::vector<RankedFeature> out;
  const size_t k = std::min(top_k, report.ranking.size());
  out.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    const size_t idx = report.ranking[i];
    const double v = report.accumulated[idx];
    out.push_back({report.feature_names[idx], v, v > 0.0 ? 1 : (v < 0.0 ? -1 : 0)});
  }
  return out;
}

void export_bars(const DiagnosisReport& report, const std::string& path) {
  std::string buf = "feature,accumulated\n";
  for (size_t c = 0; c < report.feature_names.size(); ++c) {
    buf += report.feature_names[c];
    buf += ',';
    buf += format_double(report.accumulated[c]);
    buf += '\n';
  }
  write_text_file(path, buf);
}

std::string report_to_json(const DiagnosisReport& report, bool include_per_observation) {
  nlohmann::ordered_json j;
  j["reference_id"] = report.reference_id;
  j["n_observations"] = report.n_observations();
  j["features"] = report.feature_names;
  j["accumulated"] = report.accumulated;
  j["ranking"] = report.ranking;
  j["zero_sigma_features"] = report.zero_sigma_features;
  if (include_per_observation) j["per_observation"] = report.per_observation;
  return j.dump(2) + "\n";
}

}  // namespace flowlens
