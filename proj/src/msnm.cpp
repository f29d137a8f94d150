#include "flowlens/msnm.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "flowlens/error.hpp"
#include "flowlens/stats.hpp"

namespace flowlens {

namespace {

Eigen::MatrixXd scaled_matrix(const AutoscaleParams& scaling, const ObservationMatrix& m) {
  Eigen::MatrixXd z(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
  for (size_t r = 0; r < m.rows(); ++r) {
    for (size_t c = 0; c < m.cols(); ++c) {
      z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          scaling.scale_value(c, m.at(r, c));
    }
  }
  return z;
}

MsnmScore score_row(const MsnmModel& model, const Eigen::Map<const Eigen::MatrixXd>& loadings,
                    const Eigen::VectorXd& z) {
  const Eigen::VectorXd t = loadings.transpose() * z;
  MsnmScore s;
  for (Eigen::Index a = 0; a < t.size(); ++a) {
    s.d_stat += t(a) * t(a) / model.eigenvalues[static_cast<size_t>(a)];
  }
  const Eigen::VectorXd residual = z - loadings * t;
  s.q_stat = residual.squaredNorm();
  s.score = s.d_stat / model.ucl_d + s.q_stat / model.ucl_q;
  return s;
}

}  // namespace

MsnmModel fit_msnm(const ObservationMatrix& calibration, const ComponentRule& rule,
                   double limit_percentile) {
  const size_t n = calibration.rows();
  const size_t d = calibration.cols();
  if (n < 3) throw config_error("msnm fit needs at least 3 calibration rows");
  if (limit_percentile <= 0.0 || limit_percentile > 100.0) {
    throw config_error("limit percentile must lie in (0, 100]");
  }

  MsnmModel model;
  model.scaling = fit_autoscale(calibration);
  model.limit_percentile = limit_percentile;
  model.calibration_size = n;
  if (d - model.scaling.zero_sigma_features.size() < 2) {
    throw numeric_error("msnm fit needs at least 2 non-constant features");
  }

  const Eigen::MatrixXd z = scaled_matrix(model.scaling, calibration);
  const Eigen::MatrixXd cov = (z.transpose() * z) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw numeric_error("eigendecomposition of the calibration covariance failed");
  }

  // Eigen returns ascending order; flip to non-increasing.
  const Eigen::VectorXd evals = solver.eigenvalues().reverse();
  Eigen::MatrixXd evecs = solver.eigenvectors().rowwise().reverse();

  const double lambda_max = std::max(evals(0), 0.0);
  if (lambda_max <= 0.0) {
    throw numeric_error("calibration data is constant; covariance has no positive eigenvalue");
  }
  const double rank_tol = lambda_max * 1e-12;
  size_t positive = 0;
  while (positive < static_cast<size_t>(evals.size()) &&
         evals(static_cast<Eigen::Index>(positive)) > rank_tol) {
    ++positive;
  }
  const size_t a_max = std::min({positive, d, n - 1});
  if (a_max == 0) throw numeric_error("degenerate covariance, no usable components");

  size_t a = 1;
  if (rule.kind == ComponentRule::Kind::fixed) {
    if (rule.fixed < 1) throw config_error("fixed component count must be >= 1");
    a = std::min(rule.fixed, a_max);
  } else {
    if (rule.tau <= 0.0 || rule.tau > 1.0) {
      throw config_error("variance fraction must lie in (0, 1]");
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < evals.size(); ++i) total += std::max(evals(i), 0.0);
    double cum = 0.0;
    a = a_max;
    for (size_t i = 0; i < a_max; ++i) {
      cum += evals(static_cast<Eigen::Index>(i));
      if (cum / total >= rule.tau) {
        a = i + 1;
        break;
      }
    }
  }

  // Deterministic eigenvector sign: largest-magnitude loading entry positive.
  for (size_t comp = 0; comp < a; ++comp) {
    Eigen::Index best = 0;
    evecs.col(static_cast<Eigen::Index>(comp)).cwiseAbs().maxCoeff(&best);
    if (evecs(best, static_cast<Eigen::Index>(comp)) < 0.0) {
      evecs.col(static_cast<Eigen::Index>(comp)) *= -1.0;
    }
  }

  model.n_components = a;
  model.eigenvalues.resize(a);
  for (size_t i = 0; i < a; ++i) model.eigenvalues[i] = evals(static_cast<Eigen::Index>(i));
  model.loadings.resize(d * a);
  for (size_t f = 0; f < d; ++f) {
    for (size_t comp = 0; comp < a; ++comp) {
      model.loadings[f * a + comp] =
          evecs(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(comp));
    }
  }

  // Control limits from the calibration distribution of each statistic.
  Eigen::Map<const Eigen::MatrixXd> loadings(model.loadings.data(),
                                             static_cast<Eigen::Index>(d),
                                             static_cast<Eigen::Index>(a));
  std::vector<double> d_vals(n), q_vals(n);
  model.ucl_d = model.ucl_q = 1.0;  // placeholders while scoring calibration
  for (size_t r = 0; r < n; ++r) {
    const Eigen::VectorXd zr = z.row(static_cast<Eigen::Index>(r)).transpose();
    const MsnmScore s = score_row(model, loadings, zr);
    d_vals[r] = s.d_stat;
    q_vals[r] = s.q_stat;
  }
  // Floor keeps the combined score finite for full-rank models where every
  // calibration residual is ~0.
  model.ucl_d = std::max(percentile_linear(d_vals, limit_percentile), 1e-12);
  model.ucl_q = std::max(percentile_linear(q_vals, limit_percentile), 1e-12);
  return model;
}

std::vector<MsnmScore> score_msnm(const MsnmModel& model, const ObservationMatrix& m) {
  model.scaling.check_alignment(m.feature_names);
  Eigen::Map<const Eigen::MatrixXd> loadings(model.loadings.data(),
                                             static_cast<Eigen::Index>(model.n_features()),
                                             static_cast<Eigen::Index>(model.n_components));
  std::vector<MsnmScore> out(m.rows());
  for (size_t r = 0; r < m.rows(); ++r) {
    Eigen::VectorXd z(static_cast<Eigen::Index>(m.cols()));
    for (size_t c = 0; c < m.cols(); ++c) {
      z(static_cast<Eigen::Index>(c)) = model.scaling.scale_value(c, m.at(r, c));
    }
    out[r] = score_row(model, loadings, z);
  }
  return out;
}

std::string msnm_to_json(const MsnmModel& model) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["detector"] = "msnm";
  j["features"] = model.scaling.feature_names;
  j["mu"] = model.scaling.mu;
  j["sigma"] = model.scaling.sigma;
  j["zero_sigma_features"] = model.scaling.zero_sigma_features;
  j["n_components"] = model.n_components;
  j["eigenvalues"] = model.eigenvalues;
  j["loadings"] = model.loadings;  // row-major features x n_components
  j["ucl_d"] = model.ucl_d;
  j["ucl_q"] = model.ucl_q;
  j["limit_percentile"] = model.limit_percentile;
  j["calibration_size"] = model.calibration_size;
  return j.dump(2) + "\n";
}

MsnmModel msnm_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad msnm model JSON: ") + e.what());
  }
  MsnmModel m;
  try {
    if (j.at("detector").get<std::string>() != "msnm") {
      throw config_error("model file is not an msnm model");
    }
    if (j.at("format_version").get<int>() != 1) {
      throw config_error("unsupported msnm model format version");
    }
    m.scaling.feature_names = j.at("features").get<std::vector<std::string>>();
    m.scaling.mu = j.at("mu").get<std::vector<double>>();
    m.scaling.sigma = j.at("sigma").get<std::vector<double>>();
    m.scaling.zero_sigma_features =
        j.at("zero_sigma_features").get<std::vector<std::string>>();
    m.n_components = j.at("n_components").get<size_t>();
    m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
    m.loadings = j.at("loadings").get<std::vector<double>>();
    m.ucl_d = j.at("ucl_d").get<double>();
    m.ucl_q = j.at("ucl_q").get<double>();
    m.limit_percentile = j.at("limit_percentile").get<double>();
    m.calibration_size = j.at("calibration_size").get<size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad msnm model: ") + e.what());
  }
  const size_t d = m.scaling.feature_names.size();
  if (m.scaling.mu.size() != d || m.scaling.sigma.size() != d ||
      m.eigenvalues.size() != m.n_components || m.loadings.size() != d * m.n_components) {
    throw config_error("msnm model fields have inconsistent sizes");
  }
  return m;
}

}  // namespace flowlens
