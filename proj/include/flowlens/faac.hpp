#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowlens/flow.hpp"

namespace flowlens {

// Feature-as-a-counter: each feature counts (or sums a field over) the flows
// of a window that satisfy a matcher on one flow field.

enum class FlowField : uint8_t { src_port, dst_port, protocol, fwd_packets, fwd_bytes, flow_count };

const char* to_token(FlowField f);
FlowField flow_field_from_token(std::string_view token);

struct Matcher {
  enum class Kind : uint8_t { exact, value_set, range, other };
  Kind kind = Kind::other;
  int64_t exact_value = 0;
  std::vector<int64_t> values;      // value_set
  int64_t range_lo = 0, range_hi = 0;  // inclusive
};

enum class FeatureWeight : uint8_t { count_flows, sum_field };

struct FeatureSpec {
  std::string name;
  FlowField field = FlowField::flow_count;
  Matcher matcher;
  FeatureWeight weight = FeatureWeight::count_flows;
};

struct FeatureConfig {
  std::vector<FeatureSpec> specs;
  int64_t window_s = 60;

  // Throws config_error on duplicate names, multiple catch-alls per field,
  // or a non-positive window.
  void validate() const;

  static FeatureConfig from_json(const std::string& json_text);
  std::string to_json() const;
};

// The built-in 34-feature dictionary: named service ports on both sides,
// port-range buckets, per-field catch-alls, protocol counters, flow/byte
// totals and packet-size buckets.
FeatureConfig default_feature_config();

struct WindowLabel {
  std::set<AttackType> attacks;  // empty means the window is normal

  bool anomalous() const { return !attacks.empty(); }
  bool operator==(const WindowLabel&) const = default;
};

class ObservationMatrix {
 public:
  std::vector<int64_t> window_starts;       // aligned, strictly increasing
  std::vector<std::string> feature_names;
  std::vector<double> counts;               // row-major rows() x cols()
  std::vector<WindowLabel> labels;
  int64_t window_s = 60;

  size_t rows() const { return window_starts.size(); }
  size_t cols() const { return feature_names.size(); }
  double at(size_t r, size_t c) const { return counts[r * cols() + c]; }
  double& at(size_t r, size_t c) { return counts[r * cols() + c]; }
  size_t feature_index(const std::string& name) const;  // throws config_error

  bool operator==(const ObservationMatrix&) const = default;
};

// Aggregates time-sorted flows into the windows x features counter matrix.
// With an explicit range, windows cover [align(start), end) and any flow
// outside [start, end) is an error; otherwise windows span the flows.
ObservationMatrix featurize(const std::vector<FlowRecord>& flows, const FeatureConfig& config,
                            std::optional<std::pair<int64_t, int64_t>> range = std::nullopt);

// Rows with window_start in [start, end). Empty selection is an error.
ObservationMatrix select_time_range(const ObservationMatrix& m, int64_t start, int64_t end);

ObservationMatrix drop_features(const ObservationMatrix& m, const std::vector<std::string>& names);

// Columns of a then b with name prefixes; windows and labels must agree.
ObservationMatrix union_features(const ObservationMatrix& a, const ObservationMatrix& b,
                                 const std::string& prefix_a, const std::string& prefix_b);

struct ExcludeObservationsResult {
  ObservationMatrix matrix;
  std::vector<int64_t> not_found;  // listed timestamps with no matching row
};

ExcludeObservationsResult exclude_observations(const ObservationMatrix& m,
                                               const std::vector<int64_t>& timestamps);

void write_matrix_csv(const ObservationMatrix& m, const std::string& path);
ObservationMatrix read_matrix_csv(const std::string& path);

}  // namespace flowlens
