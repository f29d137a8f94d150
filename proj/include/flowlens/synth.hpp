#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "flowlens/flow.hpp"

namespace flowlens {

// Deterministic labelled-flow generator. Background traffic follows a
// sinusoidal diurnal rate over a service mix; attack episodes, calibration
// contamination and unlabelled side activity are layered on top, each from
// its own random stream so adding one component never perturbs the others.

struct AttackEpisode {
  AttackType type = AttackType::dos;
  int64_t start_min = 0;     // offset from the start of the test range
  int64_t duration_min = 0;
  double intensity = 1.0;    // multiplier on base_rate_per_min
  bool labelled = true;      // false injects the flows with background labels
};

struct Contamination {
  uint16_t port = 6667;
  int64_t start_min = 0;     // offset from the start of the calibration range
  int64_t duration_min = 0;
  double intensity = 0.5;
};

struct ScenarioConfig {
  uint64_t seed = 1;
  int calibration_days = 2;
  int test_days = 1;
  double base_rate_per_min = 40.0;
  double diurnal_amplitude = 0.5;           // in [0, 1)
  std::map<int, double> protocol_mix;       // service port -> fraction; 0 = ICMP, -1 = unnamed
  std::vector<AttackEpisode> episodes;
  std::optional<Contamination> contamination;
  bool telnet_echo = false;                 // DOS episodes add unlabelled TELNET sessions

  void validate() const;
  static ScenarioConfig from_json(const std::string& json_text);
  std::string to_json() const;
};

// Fixed capture origin; calibration spans the first calibration_days, the
// test range follows immediately.
int64_t scenario_capture_start();
int64_t scenario_test_start(const ScenarioConfig& cfg);
int64_t scenario_end(const ScenarioConfig& cfg);

struct ManifestEntry {
  std::string kind;          // attack token, "contamination" or "telnet_echo"
  int episode_index = -1;    // index into ScenarioConfig::episodes, -1 otherwise
  bool labelled = false;
  bool hidden = false;       // anomalous activity whose flows carry background labels
  int64_t start = 0;         // epoch seconds
  int64_t end = 0;
  uint64_t flow_count = 0;
  std::vector<std::pair<uint64_t, uint64_t>> flow_id_ranges;   // inclusive, file order
  std::vector<std::pair<int64_t, int64_t>> flow_second_ranges; // inclusive epoch seconds
};

struct Manifest {
  ScenarioConfig scenario;
  int64_t capture_start = 0;
  int64_t calibration_start = 0;
  int64_t calibration_end = 0;
  int64_t test_start = 0;
  int64_t test_end = 0;
  uint64_t total_flows = 0;
  std::vector<ManifestEntry> entries;

  std::string to_json() const;
  static Manifest from_json(const std::string& json_text);
};

struct GeneratedScenario {
  std::vector<FlowRecord> flows;  // sorted by start time
  Manifest manifest;
};

GeneratedScenario generate(const ScenarioConfig& cfg);

struct ManifestWindows {
  std::vector<std::set<int64_t>> per_entry;  // aligned window starts per manifest entry
  std::set<int64_t> hidden;                  // windows containing any hidden-entry flow
};

ManifestWindows manifest_windows(const Manifest& manifest, int64_t window_s);

// Built-in scenario presets: "default" (fully labelled attack mix),
// "botnet" (IRC contamination in calibration), "direction" (DOS with
// unlabelled TELNET echo), "audit" (hidden low-port probe) and
// "paper-repro" (everything combined at full desk scale).
ScenarioConfig scenario_preset(const std::string& name);
std::vector<std::string> scenario_preset_names();

}  // namespace flowlens
