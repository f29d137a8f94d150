#include "flowlens/flow.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "flowlens/error.hpp"
#include "flowlens/textio.hpp"
#include "flowlens/timeutil.hpp"

namespace flowlens {

const char* const kFlowCsvHeader =
    "start_time,duration,src_addr,dst_addr,src_port,dst_port,protocol,"
    "fwd_packets,fwd_bytes,rev_packets,rev_bytes,label,attack_type";

const char* to_token(Protocol p) {
  switch (p) {
    case Protocol::tcp: return "TCP";
    case Protocol::udp: return "UDP";
    case Protocol::icmp: return "ICMP";
    case Protocol::other: return "OTHER";
  }
  return "OTHER";
}

const char* to_token(AttackType a) {
  switch (a) {
    case AttackType::dos: return "dos";
    case AttackType::scan11: return "scan11";
    case AttackType::scan44: return "scan44";
    case AttackType::nerisbotnet: return "nerisbotnet";
    case AttackType::other: return "other";
  }
  return "other";
}

Protocol protocol_from_token(std::string_view token) {
  if (token == "TCP") return Protocol::tcp;
  if (token == "UDP") return Protocol::udp;
  if (token == "ICMP") return Protocol::icmp;
  if (token == "OTHER") return Protocol::other;
  throw config_error("unknown protocol token: '" + std::string(token) + "'");
}

AttackType attack_from_token(std::string_view token) {
  if (token == "dos") return AttackType::dos;
  if (token == "scan11") return AttackType::scan11;
  if (token == "scan44") return AttackType::scan44;
  if (token == "nerisbotnet") return AttackType::nerisbotnet;
  if (token == "other") return AttackType::other;
  throw config_error("unknown attack type token: '" + std::string(token) + "'");
}

namespace {

uint16_t parse_port(std::string_view token, const std::string& context) {
  const int64_t v = parse_int(token, context);
  if (v < 0 || v > 65535) {
    throw config_error(context + ": port out of range 0-65535: " + std::to_string(v));
  }
  return static_cast<uint16_t>(v);
}

uint64_t parse_counter(std::string_view token, const std::string& context) {
  const int64_t v = parse_int(token, context);
  if (v < 0) throw config_error(context + ": negative counter");
  return static_cast<uint64_t>(v);
}

FlowRecord parse_flow_line(std::string_view line, size_t line_no) {
  const std::string ctx = "line " + std::to_string(line_no);
  const auto fields = split_csv_line(line);
  if (fields.size() != 13) {
    throw config_error(ctx + ": expected 13 fields, got " + std::to_string(fields.size()));
  }
  FlowRecord f;
  f.start_time = parse_timestamp(fields[0]);
  f.duration = parse_double(fields[1], ctx + " duration");
  if (f.duration < 0) throw config_error(ctx + ": negative duration");
  f.src_addr = std::string(fields[2]);
  f.dst_addr = std::string(fields[3]);
  if (f.src_addr.empty() || f.dst_addr.empty()) {
    throw config_error(ctx + ": empty endpoint");
  }
  f.src_port = parse_port(fields[4], ctx + " src_port");
  f.dst_port = parse_port(fields[5], ctx + " dst_port");
  f.protocol = protocol_from_token(fields[6]);
  const bool portless = f.protocol == Protocol::icmp || f.protocol == Protocol::other;
  if (!portless && (f.src_port == 0 || f.dst_port == 0)) {
    throw config_error(ctx + ": port 0 is only valid for ICMP/OTHER");
  }
  f.fwd_packets = parse_counter(fields[7], ctx + " fwd_packets");
  f.fwd_bytes = parse_counter(fields[8], ctx + " fwd_bytes");
  f.rev_packets = parse_counter(fields[9], ctx + " rev_packets");
  f.rev_bytes = parse_counter(fields[10], ctx + " rev_bytes");
  if (fields[11] == "background") {
    if (!fields[12].empty()) {
      throw config_error(ctx + ": background flow must have empty attack_type");
    }
  } else if (fields[11] == "anomaly") {
    if (fields[12].empty()) {
      throw config_error(ctx + ": anomaly flow must carry an attack_type");
    }
    f.label.attack = attack_from_token(fields[12]);
  } else {
    throw config_error(ctx + ": unknown label token: '" + std::string(fields[11]) + "'");
  }
  return f;
}

}  // namespace

ParseResult parse_flow_csv(std::istream& in, bool strict) {
  ParseResult result;
  std::string line;
  if (!std::getline(in, line)) throw config_error("empty input: missing flow CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kFlowCsvHeader) {
    throw config_error("bad flow CSV header; expected '" + std::string(kFlowCsvHeader) + "'");
  }
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      result.flows.push_back(parse_flow_line(line, line_no));
    } catch (const config_error&) {
      if (strict) throw;
      ++result.skipped_lines;
    }
  }
  return result;
}

ParseResult parse_flow_csv_file(const std::string& path, bool strict) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open flow CSV: " + path);
  return parse_flow_csv(in, strict);
}

std::string serialize_flow(const FlowRecord& f) {
  std::string out;
  out.reserve(96);
  out += format_timestamp(f.start_time);
  out += ',';
  out += format_double(f.duration);
  out += ',';
  out += f.src_addr;
  out += ',';
  out += f.dst_addr;
  out += ',';
  out += std::to_string(f.src_port);
  out += ',';
  out += std::to_string(f.dst_port);
  out += ',';
  out += to_token(f.protocol);
  out += ',';
  out += std::to_string(f.fwd_packets);
  out += ',';
  out += std::to_string(f.fwd_bytes);
  out += ',';
  out += std::to_string(f.rev_packets);
  out += ',';
  out += std::to_string(f.rev_bytes);
  out += ',';
  if (f.label.is_anomaly()) {
    out += "anomaly,";
    out += to_token(*f.label.attack);
  } else {
    out += "background,";
  }
  return out;
}

void write_flow_csv(const std::vector<FlowRecord>& flows, const std::string& path) {
  std::string buf;
  buf.reserve(flows.size() * 96 + 128);
  buf += kFlowCsvHeader;
  buf += '\n';
  for (const auto& f : flows) {
    buf += serialize_flow(f);
    buf += '\n';
  }
  write_text_file(path, buf);
}

namespace {

// Total order on records so merge results do not depend on input order.
bool record_less(const FlowRecord& a, const FlowRecord& b) {
  if (a.start_time != b.start_time) return a.start_time < b.start_time;
  if (a.src_addr != b.src_addr) return a.src_addr < b.src_addr;
  if (a.dst_addr != b.dst_addr) return a.dst_addr < b.dst_addr;
  if (a.src_port != b.src_port) return a.src_port < b.src_port;
  if (a.dst_port != b.dst_port) return a.dst_port < b.dst_port;
  if (a.protocol != b.protocol) return a.protocol < b.protocol;
  if (a.duration != b.duration) return a.duration < b.duration;
  return a.fwd_bytes < b.fwd_bytes;
}

std::string tuple_key(const std::string& sa, uint16_t sp, const std::string& da, uint16_t dp,
                      Protocol proto) {
  std::string key;
  key.reserve(sa.size() + da.size() + 16);
  key += sa;
  key += '|';
  key += std::to_string(sp);
  key += '|';
  key += da;
  key += '|';
  key += std::to_string(dp);
  key += '|';
  key += std::to_string(static_cast<int>(proto));
  return key;
}

FlowRecord merge_pair(const FlowRecord& first, const FlowRecord& second,
                      MergePolicy::Pairing pairing) {
  // Decide which record contributes the forward direction.
  const FlowRecord* fwd = &first;
  const FlowRecord* rev = &second;
  if (pairing == MergePolicy::Pairing::low_port_server && first.src_port != second.src_port) {
    // The lower port is taken for the server side, so the record sent by the
    // higher-port endpoint becomes the forward direction.
    if (first.src_port < second.src_port) std::swap(fwd, rev);
  }
  FlowRecord m;
  m.start_time = std::min(first.start_time, second.start_time);
  const double end_first = static_cast<double>(first.start_time) + first.duration;
  const double end_second = static_cast<double>(second.start_time) + second.duration;
  m.duration = std::max(end_first, end_second) - static_cast<double>(m.start_time);
  m.src_addr = fwd->src_addr;
  m.dst_addr = fwd->dst_addr;
  m.src_port = fwd->src_port;
  m.dst_port = fwd->dst_port;
  m.protocol = fwd->protocol;
  m.fwd_packets = fwd->fwd_packets;
  m.fwd_bytes = fwd->fwd_bytes;
  m.rev_packets = rev->fwd_packets;
  m.rev_bytes = rev->fwd_bytes;
  if (fwd->label.is_anomaly()) {
    m.label = fwd->label;
  } else {
    m.label = rev->label;
  }
  return m;
}

}  // namespace

std::vector<FlowRecord> merge_bidirectional(const std::vector<FlowRecord>& flows,
                                            const MergePolicy& policy) {
  if (policy.time_tolerance && *policy.time_tolerance < 0) {
    throw config_error("merge time tolerance must be >= 0");
  }
  std::vector<FlowRecord> sorted = flows;
  for (const auto& f : sorted) {
    if (!f.is_unidirectional()) {
      throw config_error("merge input contains an already-bidirectional record (nonzero reverse counters)");
    }
  }
  std::sort(sorted.begin(), sorted.end(), record_less);

  // Pending unmerged records per 5-tuple, kept as indices in time order.
  std::unordered_map<std::string, std::vector<size_t>> pending;
  std::vector<char> consumed(sorted.size(), 0);
  std::vector<FlowRecord> out;
  out.reserve(sorted.size());

  auto tolerance_of = [&policy](const FlowRecord& earlier) {
    return policy.time_tolerance ? *policy.time_tolerance : earlier.duration + 5.0;
  };

  for (size_t i = 0; i < sorted.size(); ++i) {
    const FlowRecord& f = sorted[i];
    const std::string rkey =
        tuple_key(f.dst_addr, f.dst_port, f.src_addr, f.src_port, f.protocol);
    auto it = pending.find(rkey);
    bool merged = false;
    if (it != pending.end()) {
      auto& queue = it->second;
      size_t pos = 0;
      while (pos < queue.size()) {
        const size_t j = queue[pos];
        if (consumed[j]) {
          queue.erase(queue.begin() + static_cast<ptrdiff_t>(pos));
          continue;
        }
        const FlowRecord& cand = sorted[j];
        const double gap = static_cast<double>(f.start_time - cand.start_time);
        if (gap <= tolerance_of(cand)) {
          out.push_back(merge_pair(cand, f, policy.pairing));
          consumed[j] = 1;
          consumed[i] = 1;
          queue.erase(queue.begin() + static_cast<ptrdiff_t>(pos));
          merged = true;
          break;
        }
        // Candidates are in time order; an expired head can never match a
        // later record either, so drop it from the queue.
        out.push_back(cand);
        consumed[j] = 1;
        queue.erase(queue.begin() + static_cast<ptrdiff_t>(pos));
      }
    }
    if (!merged) {
      const std::string key =
          tuple_key(f.src_addr, f.src_port, f.dst_addr, f.dst_port, f.protocol);
      pending[key].push_back(i);
    }
  }
  for (size_t i = 0; i < sorted.size(); ++i) {
    if (!consumed[i]) out.push_back(sorted[i]);
  }
  std::sort(out.begin(), out.end(), record_less);
  return out;
}

FlowPredicate FlowPredicate::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad predicate JSON: ") + e.what());
  }
  if (!j.is_object()) throw config_error("predicate must be a JSON object");
  FlowPredicate p;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "label") {
        const std::string v = value.get<std::string>();
        if (v == "background") {
          p.want_anomaly = false;
        } else if (v == "anomaly") {
          p.want_anomaly = true;
        } else {
          throw config_error("predicate label must be background|anomaly");
        }
      } else if (key == "attack") {
        p.want_attack = attack_from_token(value.get<std::string>());
      } else if (key == "port_in") {
        for (const auto& v : value) p.any_port.push_back(v.get<uint16_t>());
      } else if (key == "src_port_in") {
        for (const auto& v : value) p.src_ports.push_back(v.get<uint16_t>());
      } else if (key == "dst_port_in") {
        for (const auto& v : value) p.dst_ports.push_back(v.get<uint16_t>());
      } else if (key == "addr_in") {
        for (const auto& v : value) p.any_addr.push_back(v.get<std::string>());
      } else if (key == "protocol") {
        p.proto = protocol_from_token(value.get<std::string>());
      } else if (key == "time_range") {
        if (!value.is_array() || value.size() != 2) {
          throw config_error("time_range must be [start, end]");
        }
        p.time_range = {parse_timestamp(value[0].get<std::string>()),
                        parse_timestamp(value[1].get<std::string>())};
        if (p.time_range->first >= p.time_range->second) {
          throw config_error("time_range start must precede end");
        }
      } else {
        throw config_error("predicate references unknown field: '" + key + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw config_error("predicate field '" + key + "': " + e.what());
    }
  }
  return p;
}

bool FlowPredicate::matches(const FlowRecord& f) const {
  if (want_anomaly && f.label.is_anomaly() != *want_anomaly) return false;
  if (want_attack && (!f.label.attack || *f.label.attack != *want_attack)) return false;
  if (!any_port.empty() &&
      std::find(any_port.begin(), any_port.end(), f.src_port) == any_port.end() &&
      std::find(any_port.begin(), any_port.end(), f.dst_port) == any_port.end()) {
    return false;
  }
  if (!src_ports.empty() &&
      std::find(src_ports.begin(), src_ports.end(), f.src_port) == src_ports.end()) {
    return false;
  }
  if (!dst_ports.empty() &&
      std::find(dst_ports.begin(), dst_ports.end(), f.dst_port) == dst_ports.end()) {
    return false;
  }
  if (!any_addr.empty() &&
      std::find(any_addr.begin(), any_addr.end(), f.src_addr) == any_addr.end() &&
      std::find(any_addr.begin(), any_addr.end(), f.dst_addr) == any_addr.end()) {
    return false;
  }
  if (proto && f.protocol != *proto) return false;
  if (time_range && (f.start_time < time_range->first || f.start_time >= time_range->second)) {
    return false;
  }
  return true;
}

ExcludeResult exclude_flows(const std::vector<FlowRecord>& flows, const FlowPredicate& pred) {
  ExcludeResult r;
  r.flows.reserve(flows.size());
  for (const auto& f : flows) {
    if (pred.matches(f)) {
      ++r.removed;
    } else {
      r.flows.push_back(f);
    }
  }
  return r;
}

}  // namespace flowlens
