#include "flowlens/scaling.hpp"

#include <cmath>

#include "flowlens/error.hpp"

namespace flowlens {

void AutoscaleParams::check_alignment(const std::vector<std::string>& names) const {
  if (names == feature_names) return;
  if (names.size() != feature_names.size()) {
    throw config_error("feature mismatch: expected " + std::to_string(feature_names.size()) +
                       " features, got " + std::to_string(names.size()));
  }
  for (size_t i = 0; i < names.size(); ++i) {
    if (names[i] != feature_names[i]) {
      throw config_error("feature mismatch at column " + std::to_string(i) + ": expected '" +
                         feature_names[i] + "', got '" + names[i] + "'");
    }
  }
}

AutoscaleParams fit_autoscale(const ObservationMatrix& calibration) {
  const size_t n = calibration.rows();
  const size_t d = calibration.cols();
  if (n < 2) throw config_error("autoscale needs at least 2 calibration rows");
  AutoscaleParams p;
  p.feature_names = calibration.feature_names;
  p.mu.resize(d);
  p.sigma.resize(d);
  for (size_t c = 0; c < d; ++c) {
    double acc = 0.0;
    for (size_t r = 0; r < n; ++r) acc += calibration.at(r, c);
    p.mu[c] = acc / static_cast<double>(n);
    double ss = 0.0;
    for (size_t r = 0; r < n; ++r) {
      const double dlt = calibration.at(r, c) - p.mu[c];
      ss += dlt * dlt;
    }
    p.sigma[c] = std::sqrt(ss / static_cast<double>(n - 1));
    if (p.sigma[c] <= 0.0) {
      p.sigma[c] = 0.0;
      p.zero_sigma_features.push_back(calibration.feature_names[c]);
    }
  }
  return p;
}

std::vector<double> scale_row(const AutoscaleParams& s, const ObservationMatrix& m, size_t row) {
  std::vector<double> z(s.size());
  for (size_t c = 0; c < s.size(); ++c) z[c] = s.scale_value(c, m.at(row, c));
  return z;
}

}  // namespace flowlens
