#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace flowlens {

enum class Protocol : uint8_t { tcp, udp, icmp, other };

enum class AttackType : uint8_t { dos, scan11, scan44, nerisbotnet, other };

const char* to_token(Protocol p);
const char* to_token(AttackType a);
Protocol protocol_from_token(std::string_view token);
AttackType attack_from_token(std::string_view token);

// Anomalous iff an attack type is attached.
struct FlowLabel {
  std::optional<AttackType> attack;

  bool is_anomaly() const { return attack.has_value(); }
  bool operator==(const FlowLabel&) const = default;
};

// One flow record, unidirectional (rev counters zero) or merged
// bidirectional. Endpoints are opaque strings.
struct FlowRecord {
  int64_t start_time = 0;  // epoch seconds, UTC
  double duration = 0.0;   // seconds
  std::string src_addr;
  std::string dst_addr;
  uint16_t src_port = 0;
  uint16_t dst_port = 0;
  Protocol protocol = Protocol::tcp;
  uint64_t fwd_packets = 0;
  uint64_t fwd_bytes = 0;
  uint64_t rev_packets = 0;
  uint64_t rev_bytes = 0;
  FlowLabel label;

  bool is_unidirectional() const { return rev_packets == 0 && rev_bytes == 0; }
  bool operator==(const FlowRecord&) const = default;
};

// The canonical flow CSV header. Files must carry it verbatim.
extern const char* const kFlowCsvHeader;

struct ParseResult {
  std::vector<FlowRecord> flows;
  uint64_t skipped_lines = 0;  // lenient mode only
};

// strict: first malformed line throws config_error with its line number.
// lenient: malformed lines are skipped and counted.
ParseResult parse_flow_csv(std::istream& in, bool strict);
ParseResult parse_flow_csv_file(const std::string& path, bool strict);

std::string serialize_flow(const FlowRecord& f);
void write_flow_csv(const std::vector<FlowRecord>& flows, const std::string& path);

struct MergePolicy {
  enum class Pairing { first_seen, low_port_server };
  Pairing pairing = Pairing::low_port_server;
  // Pair window in seconds; unset means "earlier flow's duration + 5 s".
  std::optional<double> time_tolerance;
};

// Pairs exact-reverse 5-tuples within the tolerance into single records
// (greedy, earliest candidate first). Input must be all-unidirectional.
// Output is sorted by start time; unpaired records pass through.
std::vector<FlowRecord> merge_bidirectional(const std::vector<FlowRecord>& flows,
                                            const MergePolicy& policy);

// Conjunctive flow predicate, parsed from JSON. Recognised keys:
//   "label":      "background" | "anomaly"
//   "attack":     attack-type token
//   "port_in":    [ints]      (matches src OR dst port)
//   "src_port_in","dst_port_in": [ints]
//   "addr_in":    [strings]   (matches src OR dst address)
//   "protocol":   protocol token
//   "time_range": [start_ts, end_ts)   14-digit stamps
// Unknown keys are a configuration error.
struct FlowPredicate {
  static FlowPredicate from_json(const std::string& json_text);
  bool matches(const FlowRecord& f) const;

  std::optional<bool> want_anomaly;
  std::optional<AttackType> want_attack;
  std::vector<uint16_t> any_port;
  std::vector<uint16_t> src_ports;
  std::vector<uint16_t> dst_ports;
  std::vector<std::string> any_addr;
  std::optional<Protocol> proto;
  std::optional<std::pair<int64_t, int64_t>> time_range;
};

struct ExcludeResult {
  std::vector<FlowRecord> flows;
  uint64_t removed = 0;
};

ExcludeResult exclude_flows(const std::vector<FlowRecord>& flows, const FlowPredicate& pred);

}  // namespace flowlens
