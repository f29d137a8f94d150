#pragma once

#include <string>
#include <vector>

#include "flowlens/faac.hpp"

namespace flowlens {

// Per-feature means and sample standard deviations of a reference
// (calibration) matrix. Zero-variance features are kept in place and their
// scaled value is defined as 0, so column indices stay stable.
struct AutoscaleParams {
  std::vector<std::string> feature_names;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<std::string> zero_sigma_features;

  size_t size() const { return feature_names.size(); }

  double scale_value(size_t col, double x) const {
    return sigma[col] > 0.0 ? (x - mu[col]) / sigma[col] : 0.0;
  }

  // Throws config_error unless names match this scaling exactly (same order).
  void check_alignment(const std::vector<std::string>& names) const;
};

// Column means and sample standard deviations (divisor n-1); needs >= 2 rows.
AutoscaleParams fit_autoscale(const ObservationMatrix& calibration);

// One scaled row of m (feature alignment already checked by the caller).
std::vector<double> scale_row(const AutoscaleParams& s, const ObservationMatrix& m, size_t row);

}  // namespace flowlens
