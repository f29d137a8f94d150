#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowlens/faac.hpp"
#include "flowlens/scaling.hpp"

namespace flowlens {

// Signed squared z-score diagnosis: for observation row x and reference
// (mu, sigma), each feature contributes z*|z| with z = (x - mu)/sigma.
// Accumulating over an anomalous observation set yields one signed value per
// feature; large-magnitude entries are the features that set the anomaly
// apart from the reference, with the sign giving the direction.

struct DiagnosisReport {
  std::vector<std::string> feature_names;
  std::vector<double> per_observation;  // row-major n_obs x features
  std::vector<double> accumulated;      // column sums, fixed ascending-row order
  std::vector<size_t> ranking;          // feature indices by |accumulated| desc
  std::string reference_id;
  std::vector<std::string> zero_sigma_features;

  size_t n_observations() const {
    return feature_names.empty() ? 0 : per_observation.size() / feature_names.size();
  }
};

// Rows selected from a matrix by index. Zero-variance reference features
// contribute exactly 0, matching the scaling convention.
DiagnosisReport u_squared(const ObservationMatrix& m, const std::vector<size_t>& rows,
                          const AutoscaleParams& reference, const std::string& reference_id);

// All rows of m.
DiagnosisReport u_squared(const ObservationMatrix& m, const AutoscaleParams& reference,
                          const std::string& reference_id);

struct RankedFeature {
  std::string name;
  double accumulated = 0.0;
  int sign = 0;
};

// Top features by |accumulated|, ties broken by column order.
std::vector<RankedFeature> rank_features(const DiagnosisReport& report, size_t top_k);

// CSV `feature,accumulated` in feature (column) order.
void export_bars(const DiagnosisReport& report, const std::string& path);

// Full report as JSON; per-observation values included on request.
std::string report_to_json(const DiagnosisReport& report, bool include_per_observation);

}  // namespace flowlens
