#include "flowlens/faac.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "flowlens/error.hpp"
#include "flowlens/textio.hpp"
#include "flowlens/timeutil.hpp"

namespace flowlens {

const char* to_token(FlowField f) {
  switch (f) {
    case FlowField::src_port: return "src_port";
    case FlowField::dst_port: return "dst_port";
    case FlowField::protocol: return "protocol";
    case FlowField::fwd_packets: return "fwd_packets";
    case FlowField::fwd_bytes: return "fwd_bytes";
    case FlowField::flow_count: return "flow_count";
  }
  return "flow_count";
}

FlowField flow_field_from_token(std::string_view token) {
  if (token == "src_port") return FlowField::src_port;
  if (token == "dst_port") return FlowField::dst_port;
  if (token == "protocol") return FlowField::protocol;
  if (token == "fwd_packets") return FlowField::fwd_packets;
  if (token == "fwd_bytes") return FlowField::fwd_bytes;
  if (token == "flow_count") return FlowField::flow_count;
  throw config_error("unknown flow field: '" + std::string(token) + "'");
}

void FeatureConfig::validate() const {
  if (window_s <= 0) throw config_error("window length must be positive");
  if (specs.empty()) throw config_error("feature config has no features");
  std::unordered_set<std::string> names;
  std::unordered_set<int> catch_all_fields;
  for (const auto& s : specs) {
    if (s.name.empty()) throw config_error("feature with empty name");
    if (!names.insert(s.name).second) {
      throw config_error("duplicate feature name: '" + s.name + "'");
    }
    if (s.matcher.kind == Matcher::Kind::other) {
      if (!catch_all_fields.insert(static_cast<int>(s.field)).second) {
        throw config_error("multiple catch-all features for field " +
                           std::string(to_token(s.field)));
      }
    }
    if (s.matcher.kind == Matcher::Kind::range && s.matcher.range_lo > s.matcher.range_hi) {
      throw config_error("empty range in feature '" + s.name + "'");
    }
  }
}

namespace {

int64_t field_value(const FlowRecord& f, FlowField field) {
  switch (field) {
    case FlowField::src_port: return f.src_port;
    case FlowField::dst_port: return f.dst_port;
    case FlowField::protocol: return static_cast<int64_t>(f.protocol);
    case FlowField::fwd_packets: return static_cast<int64_t>(f.fwd_packets);
    case FlowField::fwd_bytes: return static_cast<int64_t>(f.fwd_bytes);
    case FlowField::flow_count: return 1;
  }
  return 0;
}

bool matcher_hits(const Matcher& m, int64_t value) {
  switch (m.kind) {
    case Matcher::Kind::exact:
      return value == m.exact_value;
    case Matcher::Kind::value_set:
      return std::find(m.values.begin(), m.values.end(), value) != m.values.end();
    case Matcher::Kind::range:
      return value >= m.range_lo && value <= m.range_hi;
    case Matcher::Kind::other:
      return false;  // resolved at featurize time, after the other matchers
  }
  return false;
}

nlohmann::json matcher_to_json(const Matcher& m, FlowField field) {
  auto value_repr = [field](int64_t v) -> nlohmann::json {
    if (field == FlowField::protocol) return to_token(static_cast<Protocol>(v));
    return v;
  };
  switch (m.kind) {
    case Matcher::Kind::exact:
      return nlohmann::json{{"equals", value_repr(m.exact_value)}};
    case Matcher::Kind::value_set: {
      nlohmann::json arr = nlohmann::json::array();
      for (int64_t v : m.values) arr.push_back(value_repr(v));
      return nlohmann::json{{"in", arr}};
    }
    case Matcher::Kind::range:
      return nlohmann::json{{"range", {m.range_lo, m.range_hi}}};
    case Matcher::Kind::other:
      return "other";
  }
  return "other";
}

int64_t matcher_value_from_json(const nlohmann::json& v, FlowField field) {
  if (field == FlowField::protocol) {
    return static_cast<int64_t>(protocol_from_token(v.get<std::string>()));
  }
  return v.get<int64_t>();
}

Matcher matcher_from_json(const nlohmann::json& j, FlowField field, const std::string& name) {
  Matcher m;
  if (j.is_string()) {
    if (j.get<std::string>() != "other") {
      throw config_error("feature '" + name + "': matcher string must be \"other\"");
    }
    m.kind = Matcher::Kind::other;
    return m;
  }
  if (!j.is_object() || j.size() != 1) {
    throw config_error("feature '" + name + "': matcher must be \"other\" or a one-key object");
  }
  if (j.contains("equals")) {
    m.kind = Matcher::Kind::exact;
    m.exact_value = matcher_value_from_json(j["equals"], field);
  } else if (j.contains("in")) {
    m.kind = Matcher::Kind::value_set;
    for (const auto& v : j["in"]) m.values.push_back(matcher_value_from_json(v, field));
    if (m.values.empty()) throw config_error("feature '" + name + "': empty value set");
  } else if (j.contains("range")) {
    const auto& r = j["range"];
    if (!r.is_array() || r.size() != 2) {
      throw config_error("feature '" + name + "': range must be [lo, hi]");
    }
    m.kind = Matcher::Kind::range;
    m.range_lo = r[0].get<int64_t>();
    m.range_hi = r[1].get<int64_t>();
  } else {
    throw config_error("feature '" + name + "': matcher key must be equals|in|range");
  }
  return m;
}

}  // namespace

FeatureConfig FeatureConfig::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad feature config JSON: ") + e.what());
  }
  FeatureConfig cfg;
  try {
    if (j.contains("window_s")) cfg.window_s = j["window_s"].get<int64_t>();
    if (!j.contains("features") || !j["features"].is_array()) {
      throw config_error("feature config needs a \"features\" array");
    }
    for (const auto& jf : j["features"]) {
      FeatureSpec s;
      s.name = jf.at("name").get<std::string>();
      s.field = flow_field_from_token(jf.at("field").get<std::string>());
      s.matcher = matcher_from_json(jf.at("match"), s.field, s.name);
      const std::string w = jf.value("weight", std::string("count"));
      if (w == "count") {
        s.weight = FeatureWeight::count_flows;
      } else if (w == "sum") {
        s.weight = FeatureWeight::sum_field;
      } else {
        throw config_error("feature '" + s.name + "': weight must be count|sum");
      }
      cfg.specs.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad feature config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string FeatureConfig::to_json() const {
  nlohmann::ordered_json j;
  j["window_s"] = window_s;
  auto& arr = j["features"] = nlohmann::ordered_json::array();
  for (const auto& s : specs) {
    nlohmann::ordered_json jf;
    jf["name"] = s.name;
    jf["field"] = to_token(s.field);
    jf["match"] = matcher_to_json(s.matcher, s.field);
    jf["weight"] = s.weight == FeatureWeight::count_flows ? "count" : "sum";
    arr.push_back(std::move(jf));
  }
  return j.dump(2) + "\n";
}

FeatureConfig default_feature_config() {
  FeatureConfig cfg;
  cfg.window_s = 60;
  struct Service {
    const char* name;
    int64_t port;
  };
  static constexpr Service services[] = {
      {"http", 80},   {"https", 443}, {"dns", 53},    {"ssh", 22},    {"smtp", 25},
      {"telnet", 23}, {"irc", 6667},  {"gopher", 70}, {"finger", 79}, {"mds", 685},
  };
  auto exact = [](int64_t v) {
    Matcher m;
    m.kind = Matcher::Kind::exact;
    m.exact_value = v;
    return m;
  };
  auto range = [](int64_t lo, int64_t hi) {
    Matcher m;
    m.kind = Matcher::Kind::range;
    m.range_lo = lo;
    m.range_hi = hi;
    return m;
  };
  auto other = [] {
    Matcher m;
    m.kind = Matcher::Kind::other;
    return m;
  };
  for (const auto& s : services) {
    cfg.specs.push_back({std::string("dport_") + s.name, FlowField::dst_port, exact(s.port),
                         FeatureWeight::count_flows});
  }
  for (const auto& s : services) {
    cfg.specs.push_back({std::string("sport_") + s.name, FlowField::src_port, exact(s.port),
                         FeatureWeight::count_flows});
  }
  cfg.specs.push_back({"dport_registered", FlowField::dst_port, range(1024, 49151),
                       FeatureWeight::count_flows});
  cfg.specs.push_back({"dport_ephemeral", FlowField::dst_port, range(49152, 65535),
                       FeatureWeight::count_flows});
  cfg.specs.push_back({"sport_registered", FlowField::src_port, range(1024, 49151),
                       FeatureWeight::count_flows});
  cfg.specs.push_back({"sport_ephemeral", FlowField::src_port, range(49152, 65535),
                       FeatureWeight::count_flows});
  cfg.specs.push_back({"dport_other", FlowField::dst_port, other(), FeatureWeight::count_flows});
  cfg.specs.push_back({"sport_other", FlowField::src_port, other(), FeatureWeight::count_flows});
  cfg.specs.push_back({"proto_tcp", FlowField::protocol,
                       exact(static_cast<int64_t>(Protocol::tcp)), FeatureWeight::count_flows});
  cfg.specs.push_back({"proto_udp", FlowField::protocol,
                       exact(static_cast<int64_t>(Protocol::udp)), FeatureWeight::count_flows});
  cfg.specs.push_back({"proto_icmp", FlowField::protocol,
                       exact(static_cast<int64_t>(Protocol::icmp)), FeatureWeight::count_flows});
  cfg.specs.push_back({"proto_other", FlowField::protocol, other(), FeatureWeight::count_flows});
  cfg.specs.push_back({"tiny_flows", FlowField::fwd_packets, range(0, 2),
                       FeatureWeight::count_flows});
  cfg.specs.push_back({"heavy_flows", FlowField::fwd_packets, range(100, INT64_MAX),
                       FeatureWeight::count_flows});
  cfg.specs.push_back({"flows_total", FlowField::flow_count, other(), FeatureWeight::count_flows});
  cfg.specs.push_back({"bytes_total", FlowField::fwd_bytes, other(), FeatureWeight::sum_field});
  cfg.validate();
  return cfg;
}

size_t ObservationMatrix::feature_index(const std::string& name) const {
  for (size_t i = 0; i < feature_names.size(); ++i) {
    if (feature_names[i] == name) return i;
  }
  throw config_error("unknown feature: '" + name + "'");
}

ObservationMatrix featurize(const std::vector<FlowRecord>& flows, const FeatureConfig& config,
                            std::optional<std::pair<int64_t, int64_t>> range) {
  config.validate();
  const int64_t w = config.window_s;

  for (size_t i = 1; i < flows.size(); ++i) {
    if (flows[i].start_time < flows[i - 1].start_time) {
      throw config_error("flows must be sorted by start time (violated at record " +
                         std::to_string(i) + ")");
    }
  }

  int64_t first_window = 0;
  int64_t end_bound = 0;  // exclusive
  if (range) {
    if (range->first >= range->second) throw config_error("featurize range start must precede end");
    first_window = align_window(range->first, w);
    end_bound = range->second;
    for (const auto& f : flows) {
      if (f.start_time < range->first || f.start_time >= range->second) {
        throw config_error("flow at " + format_timestamp(f.start_time) +
                           " outside the configured range");
      }
    }
  } else {
    if (flows.empty()) {
      ObservationMatrix m;
      m.window_s = w;
      for (const auto& s : config.specs) m.feature_names.push_back(s.name);
      return m;
    }
    first_window = align_window(flows.front().start_time, w);
    end_bound = flows.back().start_time + 1;
  }
  const size_t n_rows = static_cast<size_t>((end_bound - first_window + w - 1) / w);

  ObservationMatrix m;
  m.window_s = w;
  for (const auto& s : config.specs) m.feature_names.push_back(s.name);
  m.window_starts.resize(n_rows);
  for (size_t r = 0; r < n_rows; ++r) m.window_starts[r] = first_window + static_cast<int64_t>(r) * w;
  m.labels.assign(n_rows, {});
  m.counts.assign(n_rows * config.specs.size(), 0.0);

  // Per-field plan: concrete matchers first, then the field's catch-all.
  struct FieldPlan {
    std::vector<size_t> concrete;  // spec indices
    int64_t catch_all = -1;
  };
  std::unordered_map<int, FieldPlan> plans;
  for (size_t i = 0; i < config.specs.size(); ++i) {
    auto& plan = plans[static_cast<int>(config.specs[i].field)];
    if (config.specs[i].matcher.kind == Matcher::Kind::other) {
      plan.catch_all = static_cast<int64_t>(i);
    } else {
      plan.concrete.push_back(i);
    }
  }

  const size_t n_cols = config.specs.size();
  for (const auto& f : flows) {
    const size_t row = static_cast<size_t>((f.start_time - first_window) / w);
    double* row_data = &m.counts[row * n_cols];
    for (const auto& [field_id, plan] : plans) {
      const int64_t value = field_value(f, static_cast<FlowField>(field_id));
      bool any = false;
      for (const size_t idx : plan.concrete) {
        const auto& spec = config.specs[idx];
        if (matcher_hits(spec.matcher, value)) {
          any = true;
          row_data[idx] += spec.weight == FeatureWeight::count_flows
                               ? 1.0
                               : static_cast<double>(value);
        }
      }
      if (!any && plan.catch_all >= 0) {
        const auto& spec = config.specs[static_cast<size_t>(plan.catch_all)];
        row_data[static_cast<size_t>(plan.catch_all)] +=
            spec.weight == FeatureWeight::count_flows ? 1.0 : static_cast<double>(value);
      }
    }
    if (f.label.is_anomaly()) m.labels[row].attacks.insert(*f.label.attack);
  }
  return m;
}

ObservationMatrix select_time_range(const ObservationMatrix& m, int64_t start, int64_t end) {
  if (start >= end) throw config_error("time range start must precede end");
  ObservationMatrix out;
  out.window_s = m.window_s;
  out.feature_names = m.feature_names;
  for (size_t r = 0; r < m.rows(); ++r) {
    if (m.window_starts[r] >= start && m.window_starts[r] < end) {
      out.window_starts.push_back(m.window_starts[r]);
      out.labels.push_back(m.labels[r]);
      out.counts.insert(out.counts.end(), m.counts.begin() + static_cast<ptrdiff_t>(r * m.cols()),
                        m.counts.begin() + static_cast<ptrdiff_t>((r + 1) * m.cols()));
    }
  }
  if (out.window_starts.empty()) {
    throw config_error("time range [" + format_timestamp(start) + ", " + format_timestamp(end) +
                       ") selects no windows");
  }
  return out;
}

ObservationMatrix drop_features(const ObservationMatrix& m, const std::vector<std::string>& names) {
  std::vector<char> drop(m.cols(), 0);
  for (const auto& n : names) drop[m.feature_index(n)] = 1;
  ObservationMatrix out;
  out.window_s = m.window_s;
  out.window_starts = m.window_starts;
  out.labels = m.labels;
  for (size_t c = 0; c < m.cols(); ++c) {
    if (!drop[c]) out.feature_names.push_back(m.feature_names[c]);
  }
  out.counts.reserve(m.rows() * out.cols());
  for (size_t r = 0; r < m.rows(); ++r) {
    for (size_t c = 0; c < m.cols(); ++c) {
      if (!drop[c]) out.counts.push_back(m.at(r, c));
    }
  }
  return out;
}

ObservationMatrix union_features(const ObservationMatrix& a, const ObservationMatrix& b,
                                 const std::string& prefix_a, const std::string& prefix_b) {
  if (a.window_s != b.window_s) throw config_error("union: window lengths differ");
  if (a.rows() != b.rows()) {
    throw config_error("union: row counts differ (" + std::to_string(a.rows()) + " vs " +
                       std::to_string(b.rows()) + ")");
  }
  for (size_t r = 0; r < a.rows(); ++r) {
    if (a.window_starts[r] != b.window_starts[r]) {
      throw config_error("union: window mismatch at " + format_timestamp(a.window_starts[r]) +
                         " vs " + format_timestamp(b.window_starts[r]));
    }
    if (!(a.labels[r] == b.labels[r])) {
      throw config_error("union: window label mismatch at " +
                         format_timestamp(a.window_starts[r]));
    }
  }
  ObservationMatrix out;
  out.window_s = a.window_s;
  out.window_starts = a.window_starts;
  out.labels = a.labels;
  for (const auto& n : a.feature_names) out.feature_names.push_back(prefix_a + n);
  for (const auto& n : b.feature_names) out.feature_names.push_back(prefix_b + n);
  {
    std::unordered_set<std::string> seen;
    for (const auto& n : out.feature_names) {
      if (!seen.insert(n).second) {
        throw config_error("union: duplicate feature name '" + n + "' (adjust prefixes)");
      }
    }
  }
  out.counts.reserve(out.rows() * out.cols());
  for (size_t r = 0; r < a.rows(); ++r) {
    out.counts.insert(out.counts.end(), a.counts.begin() + static_cast<ptrdiff_t>(r * a.cols()),
                      a.counts.begin() + static_cast<ptrdiff_t>((r + 1) * a.cols()));
    out.counts.insert(out.counts.end(), b.counts.begin() + static_cast<ptrdiff_t>(r * b.cols()),
                      b.counts.begin() + static_cast<ptrdiff_t>((r + 1) * b.cols()));
  }
  return out;
}

ExcludeObservationsResult exclude_observations(const ObservationMatrix& m,
                                               const std::vector<int64_t>& timestamps) {
  std::unordered_set<int64_t> wanted(timestamps.begin(), timestamps.end());
  std::unordered_set<int64_t> present(m.window_starts.begin(), m.window_starts.end());
  ExcludeObservationsResult res;
  for (const int64_t t : timestamps) {
    if (!present.count(t)) res.not_found.push_back(t);
  }
  std::sort(res.not_found.begin(), res.not_found.end());
  auto& out = res.matrix;
  out.window_s = m.window_s;
  out.feature_names = m.feature_names;
  for (size_t r = 0; r < m.rows(); ++r) {
    if (wanted.count(m.window_starts[r])) continue;
    out.window_starts.push_back(m.window_starts[r]);
    out.labels.push_back(m.labels[r]);
    out.counts.insert(out.counts.end(), m.counts.begin() + static_cast<ptrdiff_t>(r * m.cols()),
                      m.counts.begin() + static_cast<ptrdiff_t>((r + 1) * m.cols()));
  }
  return res;
}

void write_matrix_csv(const ObservationMatrix& m, const std::string& path) {
  std::string buf;
  buf.reserve(m.rows() * (m.cols() * 8 + 48) + 256);
  buf += "window_start";
  for (const auto& n : m.feature_names) {
    buf += ',';
    buf += n;
  }
  buf += ",label,attack_types\n";
  for (size_t r = 0; r < m.rows(); ++r) {
    buf += format_timestamp(m.window_starts[r]);
    for (size_t c = 0; c < m.cols(); ++c) {
      buf += ',';
      buf += format_double(m.at(r, c));
    }
    buf += m.labels[r].anomalous() ? ",anomalous," : ",normal,";
    bool first = true;
    for (const auto a : m.labels[r].attacks) {
      if (!first) buf += ';';
      buf += to_token(a);
      first = false;
    }
    buf += '\n';
  }
  write_text_file(path, buf);
}

ObservationMatrix read_matrix_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  ObservationMatrix m;
  size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    line = std::string_view(text).substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    return true;
  };
  std::string_view line;
  if (!next_line(line)) throw config_error("matrix CSV is empty: " + path);
  auto header = split_csv_line(line);
  if (header.size() < 3 || header.front() != "window_start" ||
      header[header.size() - 2] != "label" || header.back() != "attack_types") {
    throw config_error("bad matrix CSV header in " + path);
  }
  for (size_t i = 1; i + 2 < header.size(); ++i) m.feature_names.emplace_back(header[i]);
  const size_t n_cols = m.feature_names.size();
  size_t line_no = 1;
  while (next_line(line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string ctx = path + " line " + std::to_string(line_no);
    if (fields.size() != n_cols + 3) {
      throw config_error(ctx + ": expected " + std::to_string(n_cols + 3) + " fields");
    }
    m.window_starts.push_back(parse_timestamp(fields[0]));
    for (size_t c = 0; c < n_cols; ++c) {
      m.counts.push_back(parse_double(fields[1 + c], ctx));
    }
    WindowLabel lbl;
    const auto& kind = fields[n_cols + 1];
    if (kind == "anomalous") {
      for (const auto& tok : split_list(fields[n_cols + 2], ';')) {
        lbl.attacks.insert(attack_from_token(tok));
      }
      if (lbl.attacks.empty()) throw config_error(ctx + ": anomalous window without attack types");
    } else if (kind != "normal") {
      throw config_error(ctx + ": unknown window label '" + std::string(kind) + "'");
    } else if (!fields[n_cols + 2].empty()) {
      throw config_error(ctx + ": normal window with attack types");
    }
    m.labels.push_back(std::move(lbl));
  }
  for (size_t r = 1; r < m.rows(); ++r) {
    if (m.window_starts[r] <= m.window_starts[r - 1]) {
      throw config_error(path + ": window starts must be strictly increasing");
    }
  }
  if (m.rows() >= 2) {
    // Rows may be non-contiguous after observation exclusion; the window
    // length is the gcd of the gaps.
    int64_t g = 0;
    for (size_t r = 1; r < m.rows(); ++r) {
      int64_t gap = m.window_starts[r] - m.window_starts[r - 1];
      while (gap != 0) {
        const int64_t t = g % gap;
        g = gap;
        gap = t;
      }
    }
    if (g > 0) m.window_s = g;
  }
  return m;
}

}  // namespace flowlens
