#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowlens/faac.hpp"
#include "flowlens/scaling.hpp"

namespace flowlens {

// Linear multivariate detector: principal-component model of the autoscaled
// calibration matrix with the within-model distance (D, score distances
// normalized by the component variances) and the residual distance (Q,
// squared reconstruction error). Control limits are calibration percentiles
// and the combined score is d/ucl_d + q/ucl_q.

struct ComponentRule {
  enum class Kind { fixed, variance_fraction };
  Kind kind = Kind::variance_fraction;
  size_t fixed = 1;
  double tau = 0.95;  // smallest A with cumulative eigenvalue fraction >= tau

  static ComponentRule fixed_components(size_t a) { return {Kind::fixed, a, 0.0}; }
  static ComponentRule variance(double tau) { return {Kind::variance_fraction, 1, tau}; }
};

struct MsnmModel {
  AutoscaleParams scaling;
  size_t n_components = 1;
  std::vector<double> loadings;     // row-major, features x n_components, orthonormal columns
  std::vector<double> eigenvalues;  // score variances, non-increasing
  double ucl_d = 1.0;
  double ucl_q = 1.0;
  double limit_percentile = 99.0;
  size_t calibration_size = 0;

  size_t n_features() const { return scaling.size(); }
  double loading(size_t feature, size_t comp) const {
    return loadings[feature * n_components + comp];
  }
};

struct MsnmScore {
  double d_stat = 0.0;
  double q_stat = 0.0;
  double score = 0.0;
};

MsnmModel fit_msnm(const ObservationMatrix& calibration, const ComponentRule& rule,
                   double limit_percentile = 99.0);

std::vector<MsnmScore> score_msnm(const MsnmModel& model, const ObservationMatrix& m);

std::string msnm_to_json(const MsnmModel& model);
MsnmModel msnm_from_json(const std::string& json_text);

}  // namespace flowlens
