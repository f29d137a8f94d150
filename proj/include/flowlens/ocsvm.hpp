#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowlens/faac.hpp"
#include "flowlens/scaling.hpp"

namespace flowlens {

// One-class SVM with RBF kernel on autoscaled data, solved in the dual
//   min 1/2 a'Ka   s.t.  0 <= a_i <= 1/(nu*N),  sum a = 1
// by most-violating-pair coordinate updates. score(x) = rho - sum a_i k(sv_i, x),
// so positive values flag anomalies, aligned with the linear detector.

double rbf_kernel(const std::vector<double>& x, const std::vector<double>& y, double gamma);

struct OcsvmParams {
  double nu = 0.02;
  double gamma = 0.0;        // <= 0 selects the median heuristic
  double tol = 1e-4;         // maximal KKT violation at convergence
  size_t max_iter = 0;       // 0 means 10 * N pair updates
  size_t subsample_cap = 5000;  // uniform-stride row cap before fitting
};

struct OcsvmModel {
  AutoscaleParams scaling;
  std::vector<double> support_vectors;  // row-major n_sv x features, scaled space
  std::vector<double> alphas;
  double rho = 0.0;
  double gamma = 1.0;
  double nu = 0.02;
  size_t calibration_size = 0;  // rows actually used by the solver
  bool converged = true;
  double kkt_residual = 0.0;

  size_t n_sv() const { return alphas.size(); }
  size_t n_features() const { return scaling.size(); }
};

OcsvmModel fit_ocsvm(const ObservationMatrix& calibration, const OcsvmParams& params);

std::vector<double> score_ocsvm(const OcsvmModel& model, const ObservationMatrix& m);

std::string ocsvm_to_json(const OcsvmModel& model);
OcsvmModel ocsvm_from_json(const std::string& json_text);

}  // namespace flowlens
