#include "flowlens/ocsvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "flowlens/error.hpp"
#include "flowlens/stats.hpp"

namespace flowlens {

double rbf_kernel(const std::vector<double>& x, const std::vector<double>& y, double gamma) {
  if (x.size() != y.size()) throw config_error("rbf kernel: dimension mismatch");
  if (gamma <= 0.0) throw config_error("rbf kernel: gamma must be positive");
  double d2 = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

namespace {

double squared_distance(const double* a, const double* b, size_t d) {
  double acc = 0.0;
  for (size_t i = 0; i < d; ++i) {
    const double delta = a[i] - b[i];
    acc += delta * delta;
  }
  return acc;
}

// gamma = 1 / (2 * median^2) of pairwise distances over the first
// min(1000, N) rows. Deterministic by construction.
double median_heuristic_gamma(const std::vector<double>& rows, size_t n, size_t d) {
  const size_t m = std::min<size_t>(n, 1000);
  std::vector<double> dists;
  dists.reserve(m * (m - 1) / 2);
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = i + 1; j < m; ++j) {
      dists.push_back(std::sqrt(squared_distance(&rows[i * d], &rows[j * d], d)));
    }
  }
  if (dists.empty()) return 1.0;
  const double med = percentile_linear(dists, 50.0);
  if (med > 1e-12) return 1.0 / (2.0 * med * med);
  double acc = 0.0;
  for (const double v : dists) acc += v * v;
  const double msd = acc / static_cast<double>(dists.size());
  return msd > 1e-12 ? 1.0 / (2.0 * msd) : 1.0;
}

// LRU cache of kernel matrix rows; the solver's active set is small so a
// few hundred rows cover virtually all lookups.
class KernelCache {
 public:
  KernelCache(const std::vector<double>& rows, size_t n, size_t d, double gamma)
      : rows_(rows), n_(n), d_(d), gamma_(gamma) {
    const size_t budget_doubles = (256u << 20) / sizeof(double);
    capacity_ = std::max<size_t>(16, std::min(n_, budget_doubles / std::max<size_t>(n_, 1)));
  }

  const std::vector<double>& row(size_t i) {
    auto it = map_.find(i);
    if (it != map_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.second);
      return it->second.first;
    }
    if (map_.size() >= capacity_) {
      map_.erase(lru_.back());
      lru_.pop_back();
    }
    std::vector<double> k(n_);
    const double* xi = &rows_[i * d_];
    for (size_t j = 0; j < n_; ++j) {
      k[j] = std::exp(-gamma_ * squared_distance(xi, &rows_[j * d_], d_));
    }
    lru_.push_front(i);
    auto [pos, inserted] = map_.emplace(i, std::make_pair(std::move(k), lru_.begin()));
    return pos->second.first;
  }

 private:
  const std::vector<double>& rows_;
  size_t n_, d_;
  double gamma_;
  size_t capacity_;
  std::list<size_t> lru_;
  std::unordered_map<size_t, std::pair<std::vector<double>, std::list<size_t>::iterator>> map_;
};

}  // namespace

OcsvmModel fit_ocsvm(const ObservationMatrix& calibration, const OcsvmParams& params) {
  if (params.nu <= 0.0 || params.nu > 1.0) throw config_error("nu must lie in (0, 1]");
  if (params.tol <= 0.0) throw config_error("tol must be positive");
  if (calibration.rows() < 2) throw config_error("ocsvm fit needs at least 2 calibration rows");

  OcsvmModel model;
  model.scaling = fit_autoscale(calibration);
  model.nu = params.nu;

  // Uniform-stride subsample for kernel tractability.
  const size_t total = calibration.rows();
  const size_t cap = std::max<size_t>(params.subsample_cap, 2);
  const size_t stride = (total + cap - 1) / cap;
  std::vector<size_t> picked;
  for (size_t r = 0; r < total; r += stride) picked.push_back(r);
  const size_t n = picked.size();
  const size_t d = calibration.cols();

  std::vector<double> rows(n * d);
  for (size_t i = 0; i < n; ++i) {
    for (size_t c = 0; c < d; ++c) {
      rows[i * d + c] = model.scaling.scale_value(c, calibration.at(picked[i], c));
    }
  }
  model.calibration_size = n;

  const double nu_n = params.nu * static_cast<double>(n);
  if (nu_n < 1.0) {
    throw config_error("infeasible box: nu * N must be >= 1 (nu=" + std::to_string(params.nu) +
                       ", N=" + std::to_string(n) + ")");
  }
  const double c_bound = 1.0 / nu_n;

  model.gamma = params.gamma > 0.0 ? params.gamma : median_heuristic_gamma(rows, n, d);

  // Feasible start: fill the box from the front until the mass reaches 1.
  std::vector<double> alpha(n, 0.0);
  {
    double remaining = 1.0;
    for (size_t i = 0; i < n && remaining > 0.0; ++i) {
      const double a = std::min(c_bound, remaining);
      alpha[i] = a;
      remaining -= a;
    }
  }

  KernelCache cache(rows, n, d, model.gamma);

  // Gradient of the dual objective: g = K alpha.
  std::vector<double> g(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    if (alpha[i] <= 0.0) continue;
    const auto& k = cache.row(i);
    for (size_t j = 0; j < n; ++j) g[j] += alpha[i] * k[j];
  }

  const double eps_a = c_bound * 1e-12;
  const size_t max_iter = params.max_iter > 0 ? params.max_iter : 10 * n;
  double violation = 0.0;
  bool converged = false;
  for (size_t iter = 0; iter < max_iter; ++iter) {
    // Most violating pair: highest gradient among lowerable alphas vs
    // lowest gradient among raisable ones.
    size_t up = n, down = n;
    double g_up = std::numeric_limits<double>::infinity();
    double g_down = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
      if (alpha[i] > eps_a && g[i] > g_down) {
        g_down = g[i];
        down = i;
      }
      if (alpha[i] < c_bound - eps_a && g[i] < g_up) {
        g_up = g[i];
        up = i;
      }
    }
    if (up == n || down == n) {
      converged = true;
      violation = 0.0;
      break;
    }
    violation = g_down - g_up;
    if (violation <= params.tol) {
      converged = true;
      break;
    }
    const auto& k_up = cache.row(up);
    const auto& k_down = cache.row(down);
    double curvature = 2.0 - 2.0 * k_up[down];  // k(x,x) = 1 for RBF
    if (curvature < 1e-12) curvature = 1e-12;
    double delta = violation / curvature;
    delta = std::min(delta, alpha[down]);
    delta = std::min(delta, c_bound - alpha[up]);
    alpha[down] -= delta;
    alpha[up] += delta;
    for (size_t j = 0; j < n; ++j) g[j] += delta * (k_up[j] - k_down[j]);
  }
  model.converged = converged;
  model.kkt_residual = converged ? std::min(violation, params.tol) : violation;

  // Offset: average gradient over free support vectors, falling back to the
  // midpoint of the KKT bounds when every alpha sits on the box.
  const double eps_free = c_bound * 1e-8;
  double rho_acc = 0.0;
  size_t rho_count = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < n; ++i) {
    if (alpha[i] > eps_free && alpha[i] < c_bound - eps_free) {
      rho_acc += g[i];
      ++rho_count;
    } else if (alpha[i] >= c_bound - eps_free) {
      lower = std::max(lower, g[i]);
    } else {
      upper = std::min(upper, g[i]);
    }
  }
  if (rho_count > 0) {
    model.rho = rho_acc / static_cast<double>(rho_count);
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    model.rho = 0.5 * (lower + upper);
  } else if (std::isfinite(lower)) {
    model.rho = lower;
  } else {
    model.rho = upper;
  }

  for (size_t i = 0; i < n; ++i) {
    if (alpha[i] > eps_a) {
      model.alphas.push_back(alpha[i]);
      model.support_vectors.insert(model.support_vectors.end(), rows.begin() + static_cast<ptrdiff_t>(i * d),
                                   rows.begin() + static_cast<ptrdiff_t>((i + 1) * d));
    }
  }
  return model;
}

std::vector<double> score_ocsvm(const OcsvmModel& model, const ObservationMatrix& m) {
  model.scaling.check_alignment(m.feature_names);
  const size_t d = model.n_features();
  std::vector<double> out(m.rows());
  std::vector<double> z(d);
  for (size_t r = 0; r < m.rows(); ++r) {
    for (size_t c = 0; c < d; ++c) z[c] = model.scaling.scale_value(c, m.at(r, c));
    double acc = 0.0;
    for (size_t s = 0; s < model.n_sv(); ++s) {
      acc += model.alphas[s] *
             std::exp(-model.gamma * squared_distance(z.data(), &model.support_vectors[s * d], d));
    }
    out[r] = model.rho - acc;
  }
  return out;
}

std::string ocsvm_to_json(const OcsvmModel& model) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["detector"] = "ocsvm";
  j["features"] = model.scaling.feature_names;
  j["mu"] = model.scaling.mu;
  j["sigma"] = model.scaling.sigma;
  j["zero_sigma_features"] = model.scaling.zero_sigma_features;
  j["nu"] = model.nu;
  j["gamma"] = model.gamma;
  j["rho"] = model.rho;
  j["alphas"] = model.alphas;
  j["support_vectors"] = model.support_vectors;  // row-major n_sv x features
  j["calibration_size"] = model.calibration_size;
  j["converged"] = model.converged;
  j["kkt_residual"] = model.kkt_residual;
  return j.dump(2) + "\n";
}

OcsvmModel ocsvm_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad ocsvm model JSON: ") + e.what());
  }
  OcsvmModel m;
  try {
    if (j.at("detector").get<std::string>() != "ocsvm") {
      throw config_error("model file is not an ocsvm model");
    }
    if (j.at("format_version").get<int>() != 1) {
      throw config_error("unsupported ocsvm model format version");
    }
    m.scaling.feature_names = j.at("features").get<std::vector<std::string>>();
    m.scaling.mu = j.at("mu").get<std::vector<double>>();
    m.scaling.sigma = j.at("sigma").get<std::vector<double>>();
    m.scaling.zero_sigma_features =
        j.at("zero_sigma_features").get<std::vector<std::string>>();
    m.nu = j.at("nu").get<double>();
    m.gamma = j.at("gamma").get<double>();
    m.rho = j.at("rho").get<double>();
    m.alphas = j.at("alphas").get<std::vector<double>>();
    m.support_vectors = j.at("support_vectors").get<std::vector<double>>();
    m.calibration_size = j.at("calibration_size").get<size_t>();
    m.converged = j.at("converged").get<bool>();
    m.kkt_residual = j.at("kkt_residual").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad ocsvm model: ") + e.what());
  }
  const size_t dims = m.scaling.feature_names.size();
  if (m.scaling.mu.size() != dims || m.scaling.sigma.size() != dims ||
      m.support_vectors.size() != m.alphas.size() * dims) {
    throw config_error("ocsvm model fields have inconsistent sizes");
  }
  return m;
}

}  // namespace flowlens
