#include "flowlens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "flowlens/error.hpp"
#include "flowlens/timeutil.hpp"

namespace flowlens {

namespace {

constexpr int64_t kMinutesPerDay = 1440;

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t splitmix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// mt19937_64 has standardized bit output, and all distributions below are
// hand-rolled on top of it, so streams are reproducible across toolchains.
class Stream {
 public:
  Stream(uint64_t seed, std::string_view tag) : eng_(splitmix(seed ^ fnv1a(tag))) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  int64_t uniform_int(int64_t lo, int64_t hi) {  // inclusive bounds
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(eng_() % span);
  }

  double exponential(double mean) {
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    return -mean * std::log(u);
  }

  uint64_t poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda > 400.0) {
      const uint64_t half = poisson(lambda / 2.0);
      return half + poisson(lambda - lambda / 2.0);
    }
    const double limit = std::exp(-lambda);
    uint64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::mt19937_64 eng_;
};

constexpr int kUnnamedService = -1;
constexpr int kIcmpService = 0;

// Unnamed well-known ports used for miscellaneous background traffic.
constexpr uint16_t kMiscPorts[] = {111, 123, 137, 161, 389, 514, 873, 993};

double response_probability(int service) {
  switch (service) {
    case 80: return 0.35;
    case 443: return 0.35;
    case 53: return 0.5;
    case 22: return 0.3;
    case 25: return 0.3;
    case 23: return 0.08;  // telnet replies are rare in the captured mix
    case 6667: return 0.4;
    case 70: return 0.3;
    case 79: return 0.3;
    case 685: return 0.3;
    case kIcmpService: return 0.0;
    default: return 0.2;
  }
}

Protocol service_protocol(uint16_t port) {
  switch (port) {
    case 53:
    case 123:
    case 137:
    case 161:
    case 514: return Protocol::udp;
    default: return Protocol::tcp;
  }
}

std::string client_addr(int64_t idx) {
  return "10.0." + std::to_string(idx / 250) + "." + std::to_string(1 + idx % 250);
}

std::string server_addr(int service, int64_t k) {
  const int bucket = service <= 0 ? 99 : service % 250;
  return "172.16." + std::to_string(bucket) + "." + std::to_string(1 + k);
}

struct Component {
  ManifestEntry entry;
  std::vector<FlowRecord> flows;

  void push(FlowRecord f) { flows.push_back(std::move(f)); }
};

constexpr double kTwoPi = 6.283185307179586;

double diurnal_rate(double base, double amplitude, int64_t minute_of_capture) {
  const double minute_of_day = static_cast<double>(minute_of_capture % kMinutesPerDay);
  // Trough around 02:00, peak around 14:00.
  const double phase = kTwoPi * (minute_of_day - 480.0) / 1440.0;
  return base * (1.0 + amplitude * std::sin(phase));
}

FlowRecord base_flow(int64_t start, double duration, std::string src, std::string dst,
                     uint16_t sport, uint16_t dport, Protocol proto, uint64_t packets,
                     uint64_t bytes) {
  FlowRecord f;
  f.start_time = start;
  f.duration = duration;
  f.src_addr = std::move(src);
  f.dst_addr = std::move(dst);
  f.src_port = sport;
  f.dst_port = dport;
  f.protocol = proto;
  f.fwd_packets = packets;
  f.fwd_bytes = bytes;
  return f;
}

void generate_background(const ScenarioConfig& cfg, int64_t capture_start, int64_t total_minutes,
                         Component& comp) {
  Stream rng(cfg.seed, "background");
  std::vector<int> services;
  std::vector<double> cumulative;
  {
    double acc = 0.0;
    for (const auto& [service, frac] : cfg.protocol_mix) {
      acc += frac;
      services.push_back(service);
      cumulative.push_back(acc);
    }
  }
  auto pick_service = [&]() {
    const double u = rng.uniform() * cumulative.back();
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
    return services[static_cast<size_t>(it - cumulative.begin())];
  };

  for (int64_t m = 0; m < total_minutes; ++m) {
    const int64_t minute_start = capture_start + m * 60;
    const double rate = diurnal_rate(cfg.base_rate_per_min, cfg.diurnal_amplitude, m);
    const uint64_t n = rng.poisson(rate);
    for (uint64_t i = 0; i < n; ++i) {
      const int service = pick_service();
      const int64_t start = minute_start + rng.uniform_int(0, 59);
      const std::string client = client_addr(rng.uniform_int(0, 4999));
      if (service == kIcmpService) {
        const uint64_t packets = 1 + rng.poisson(1.0);
        comp.push(base_flow(start, rng.exponential(0.5), client, server_addr(service, rng.uniform_int(0, 2)),
                            0, 0, Protocol::icmp, packets, packets * 64));
        continue;
      }
      const uint16_t dport = service == kUnnamedService
                                 ? kMiscPorts[static_cast<size_t>(rng.uniform_int(0, 7))]
                                 : static_cast<uint16_t>(service);
      const uint16_t sport = static_cast<uint16_t>(rng.uniform_int(49152, 65535));
      const std::string server = server_addr(dport, rng.uniform_int(0, 2));
      const Protocol proto = service_protocol(dport);
      const uint64_t packets = 1 + rng.poisson(proto == Protocol::udp ? 1.0 : 3.0);
      const uint64_t bytes = packets * static_cast<uint64_t>(rng.uniform_int(60, 800));
      comp.push(base_flow(start, rng.exponential(1.5), client, server, sport, dport, proto,
                          packets, bytes));
      if (rng.uniform() < response_probability(service)) {
        const uint64_t rpackets = 1 + rng.poisson(2.0);
        const uint64_t rbytes = rpackets * static_cast<uint64_t>(rng.uniform_int(60, 1200));
        comp.push(base_flow(start + rng.uniform_int(0, 2), rng.exponential(1.0), server, client,
                            dport, sport, proto, rpackets, rbytes));
      }
    }
  }
}

void set_label(FlowRecord& f, bool labelled, AttackType type) {
  if (labelled) f.label.attack = type;
}

void generate_dos(const AttackEpisode& ep, const ScenarioConfig& cfg, int64_t episode_start,
                  Stream& rng, Component& comp) {
  const std::string victim = "172.16.80.200";
  for (int64_t m = 0; m < ep.duration_min; ++m) {
    const int64_t minute_start = episode_start + m * 60;
    const uint64_t n = rng.poisson(ep.intensity * cfg.base_rate_per_min);
    for (uint64_t i = 0; i < n; ++i) {
      const std::string attacker = "10.9.0." + std::to_string(1 + rng.uniform_int(0, 4));
      const uint64_t packets = 1 + rng.poisson(1.0);
      FlowRecord f = base_flow(minute_start + rng.uniform_int(0, 59), rng.exponential(0.3),
                               attacker, victim,
                               static_cast<uint16_t>(rng.uniform_int(49152, 65535)), 80,
                               Protocol::tcp, packets, packets * 60);
      set_label(f, ep.labelled, AttackType::dos);
      comp.push(std::move(f));
    }
  }
}

void generate_scan(const AttackEpisode& ep, const ScenarioConfig& cfg, int64_t episode_start,
                   Stream& rng, Component& comp) {
  const int n_pairs = ep.type == AttackType::scan44 ? 4 : 1;
  int64_t sweep = 0;
  for (int64_t m = 0; m < ep.duration_min; ++m) {
    const int64_t minute_start = episode_start + m * 60;
    const uint64_t n = rng.poisson(ep.intensity * cfg.base_rate_per_min);
    for (uint64_t i = 0; i < n; ++i) {
      const int pair = static_cast<int>(sweep % n_pairs);
      const uint16_t dport = static_cast<uint16_t>(1 + (sweep / n_pairs) % 1024);
      ++sweep;
      const std::string attacker =
          (ep.type == AttackType::scan44 ? "10.9.2." : "10.9.1.") + std::to_string(1 + pair);
      const std::string victim = "172.16.90." + std::to_string(10 + pair);
      FlowRecord f = base_flow(minute_start + rng.uniform_int(0, 59), 0.0, attacker, victim,
                               static_cast<uint16_t>(rng.uniform_int(49152, 65535)), dport,
                               Protocol::tcp, 1, static_cast<uint64_t>(rng.uniform_int(40, 60)));
      set_label(f, ep.labelled, ep.type);
      comp.push(std::move(f));
    }
  }
}

// IRC-style sessions: client ports are drawn below the service port so
// low-port pairing flips the merged direction, and most sessions answer
// back, so both source- and destination-port counters move.
void generate_irc_sessions(uint16_t port, double rate_per_min, int64_t start_min_abs,
                           int64_t duration_min, bool labelled, AttackType type, Stream& rng,
                           Component& comp) {
  const std::string cc = "172.16.66.6";
  for (int64_t m = 0; m < duration_min; ++m) {
    const int64_t minute_start = start_min_abs + m * 60;
    const uint64_t n = rng.poisson(rate_per_min);
    for (uint64_t i = 0; i < n; ++i) {
      const std::string bot = "10.0.7." + std::to_string(1 + rng.uniform_int(0, 7));
      const uint16_t bot_port = static_cast<uint16_t>(rng.uniform_int(1024, 6000));
      const int64_t start = minute_start + rng.uniform_int(0, 59);
      const uint64_t packets = 3 + rng.poisson(4.0);
      FlowRecord fwd = base_flow(start, rng.exponential(2.0), bot, cc, bot_port, port,
                                 Protocol::tcp, packets, packets * static_cast<uint64_t>(rng.uniform_int(60, 300)));
      set_label(fwd, labelled, type);
      comp.push(std::move(fwd));
      if (rng.uniform() < 0.85) {
        const uint64_t rpackets = 3 + rng.poisson(5.0);
        FlowRecord rev = base_flow(start + rng.uniform_int(0, 1), rng.exponential(2.0), cc, bot,
                                   port, bot_port, Protocol::tcp, rpackets,
                                   rpackets * static_cast<uint64_t>(rng.uniform_int(60, 300)));
        set_label(rev, labelled, type);
        comp.push(std::move(rev));
      }
    }
  }
}

void generate_probe(const AttackEpisode& ep, const ScenarioConfig& cfg, int64_t episode_start,
                    Stream& rng, Component& comp) {
  // Low-and-slow service probe alternating between the gopher and finger
  // ports, the kind of activity that hides inside background labels.
  const std::string attacker = "10.9.3.7";
  const std::string victim = "172.16.95.5";
  int64_t toggle = 0;
  for (int64_t m = 0; m < ep.duration_min; ++m) {
    const int64_t minute_start = episode_start + m * 60;
    const uint64_t n = rng.poisson(ep.intensity * cfg.base_rate_per_min);
    for (uint64_t i = 0; i < n; ++i) {
      const uint16_t dport = (toggle++ % 2 == 0) ? 70 : 79;
      FlowRecord f = base_flow(minute_start + rng.uniform_int(0, 59), 0.0, attacker, victim,
                               static_cast<uint16_t>(rng.uniform_int(49152, 65535)), dport,
                               Protocol::tcp, 1, static_cast<uint64_t>(rng.uniform_int(40, 60)));
      set_label(f, ep.labelled, ep.type);
      comp.push(std::move(f));
    }
  }
}

void generate_telnet_echo(const AttackEpisode& dos_ep, const ScenarioConfig& cfg,
                          int64_t episode_start, Stream& rng, Component& comp) {
  // Unlabelled TELNET request/response sessions riding along each DOS
  // episode: correlated side activity that is absent from the attack labels.
  const std::string client = "10.0.9.9";
  const std::string server = "172.16.23.5";
  const double rate = 0.3 * dos_ep.intensity * cfg.base_rate_per_min;
  for (int64_t m = 0; m < dos_ep.duration_min; ++m) {
    const int64_t minute_start = episode_start + m * 60;
    const uint64_t n = rng.poisson(rate);
    for (uint64_t i = 0; i < n; ++i) {
      const uint16_t sport = static_cast<uint16_t>(rng.uniform_int(49152, 65535));
      const int64_t start = minute_start + rng.uniform_int(0, 59);
      const uint64_t packets = 2 + rng.poisson(2.0);
      comp.push(base_flow(start, rng.exponential(1.0), client, server, sport, 23, Protocol::tcp,
                          packets, packets * static_cast<uint64_t>(rng.uniform_int(60, 200))));
      const uint64_t rpackets = 2 + rng.poisson(3.0);
      comp.push(base_flow(start + rng.uniform_int(0, 1), rng.exponential(1.0), server, client, 23,
                          sport, Protocol::tcp, rpackets,
                          rpackets * static_cast<uint64_t>(rng.uniform_int(60, 400))));
    }
  }
}

template <typename T>
std::vector<std::pair<T, T>> compress_ranges(std::vector<T> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<std::pair<T, T>> ranges;
  for (const T v : values) {
    if (!ranges.empty() && ranges.back().second + 1 == v) {
      ranges.back().second = v;
    } else {
      ranges.push_back({v, v});
    }
  }
  return ranges;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (calibration_days < 1 || test_days < 1) {
    throw config_error("scenario needs at least 1 calibration day and 1 test day");
  }
  if (base_rate_per_min <= 0.0) throw config_error("base rate must be positive");
  if (diurnal_amplitude < 0.0 || diurnal_amplitude >= 1.0) {
    throw config_error("diurnal amplitude must lie in [0, 1)");
  }
  if (protocol_mix.empty()) throw config_error("protocol mix is empty");
  double acc = 0.0;
  for (const auto& [service, frac] : protocol_mix) {
    if (service < -1 || service > 65535) throw config_error("protocol mix port out of range");
    if (frac < 0.0) throw config_error("protocol mix fractions must be non-negative");
    acc += frac;
  }
  if (std::abs(acc - 1.0) > 1e-9) {
    throw config_error("protocol mix fractions must sum to 1");
  }
  const int64_t test_minutes = static_cast<int64_t>(test_days) * kMinutesPerDay;
  for (const auto& ep : episodes) {
    if (ep.duration_min <= 0 || ep.intensity <= 0.0) {
      throw config_error("episode needs positive duration and intensity");
    }
    if (ep.start_min < 0 || ep.start_min + ep.duration_min > test_minutes) {
      throw config_error("episode must lie inside the test range");
    }
  }
  if (contamination) {
    const int64_t cal_minutes = static_cast<int64_t>(calibration_days) * kMinutesPerDay;
    if (contamination->duration_min <= 0 || contamination->intensity <= 0.0) {
      throw config_error("contamination needs positive duration and intensity");
    }
    if (contamination->start_min < 0 ||
        contamination->start_min + contamination->duration_min > cal_minutes) {
      throw config_error("contamination must lie inside the calibration range");
    }
  }
}

int64_t scenario_capture_start() { return civil_to_epoch(2016, 3, 1, 0, 0, 0); }

int64_t scenario_test_start(const ScenarioConfig& cfg) {
  return scenario_capture_start() + static_cast<int64_t>(cfg.calibration_days) * 86400;
}

int64_t scenario_end(const ScenarioConfig& cfg) {
  return scenario_test_start(cfg) + static_cast<int64_t>(cfg.test_days) * 86400;
}

GeneratedScenario generate(const ScenarioConfig& cfg) {
  cfg.validate();
  const int64_t capture_start = scenario_capture_start();
  const int64_t test_start = scenario_test_start(cfg);
  const int64_t total_minutes =
      static_cast<int64_t>(cfg.calibration_days + cfg.test_days) * kMinutesPerDay;

  std::vector<Component> components;

  {
    Component background;
    background.entry.kind = "background";
    generate_background(cfg, capture_start, total_minutes, background);
    components.push_back(std::move(background));
  }

  for (size_t k = 0; k < cfg.episodes.size(); ++k) {
    const auto& ep = cfg.episodes[k];
    Stream rng(cfg.seed, "episode." + std::to_string(k));
    Component comp;
    comp.entry.kind = to_token(ep.type);
    comp.entry.episode_index = static_cast<int>(k);
    comp.entry.labelled = ep.labelled;
    comp.entry.hidden = !ep.labelled;
    const int64_t episode_start = test_start + ep.start_min * 60;
    switch (ep.type) {
      case AttackType::dos:
        generate_dos(ep, cfg, episode_start, rng, comp);
        break;
      case AttackType::scan11:
      case AttackType::scan44:
        generate_scan(ep, cfg, episode_start, rng, comp);
        break;
      case AttackType::nerisbotnet:
        generate_irc_sessions(6667, ep.intensity * cfg.base_rate_per_min, episode_start,
                              ep.duration_min, ep.labelled, ep.type, rng, comp);
        break;
      case AttackType::other:
        generate_probe(ep, cfg, episode_start, rng, comp);
        break;
    }
    components.push_back(std::move(comp));

    if (cfg.telnet_echo && ep.type == AttackType::dos) {
      Stream echo_rng(cfg.seed, "echo." + std::to_string(k));
      Component echo;
      echo.entry.kind = "telnet_echo";
      echo.entry.episode_index = static_cast<int>(k);
      echo.entry.labelled = false;
      echo.entry.hidden = true;
      generate_telnet_echo(ep, cfg, episode_start, echo_rng, echo);
      components.push_back(std::move(echo));
    }
  }

  if (cfg.contamination) {
    Stream rng(cfg.seed, "contamination");
    Component comp;
    comp.entry.kind = "contamination";
    comp.entry.labelled = false;
    comp.entry.hidden = true;
    generate_irc_sessions(cfg.contamination->port,
                          cfg.contamination->intensity * cfg.base_rate_per_min,
                          capture_start + cfg.contamination->start_min * 60,
                          cfg.contamination->duration_min, false, AttackType::other, rng, comp);
    components.push_back(std::move(comp));
  }

  // Interleave all components by start time; ties keep component order so the
  // result is independent of anything but the configuration.
  struct Tagged {
    size_t comp;
    size_t local;
    int64_t start;
  };
  std::vector<Tagged> order;
  size_t total_flows = 0;
  for (size_t c = 0; c < components.size(); ++c) total_flows += components[c].flows.size();
  order.reserve(total_flows);
  for (size_t c = 0; c < components.size(); ++c) {
    for (size_t i = 0; i < components[c].flows.size(); ++i) {
      order.push_back({c, i, components[c].flows[i].start_time});
    }
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const Tagged& a, const Tagged& b) { return a.start < b.start; });

  GeneratedScenario out;
  out.flows.reserve(total_flows);
  std::vector<std::vector<uint64_t>> ids_per_comp(components.size());
  for (uint64_t id = 0; id < order.size(); ++id) {
    const auto& t = order[id];
    ids_per_comp[t.comp].push_back(id);
    out.flows.push_back(std::move(components[t.comp].flows[t.local]));
  }

  Manifest& man = out.manifest;
  man.scenario = cfg;
  man.capture_start = capture_start;
  man.calibration_start = capture_start;
  man.calibration_end = test_start;
  man.test_start = test_start;
  man.test_end = scenario_end(cfg);
  man.total_flows = total_flows;
  for (size_t c = 0; c < components.size(); ++c) {
    if (components[c].entry.kind == "background") continue;
    ManifestEntry e = components[c].entry;
    e.flow_count = ids_per_comp[c].size();
    std::vector<int64_t> seconds;
    seconds.reserve(ids_per_comp[c].size());
    for (const uint64_t id : ids_per_comp[c]) seconds.push_back(out.flows[id].start_time);
    if (!seconds.empty()) {
      e.start = *std::min_element(seconds.begin(), seconds.end());
      e.end = *std::max_element(seconds.begin(), seconds.end()) + 1;
    }
    e.flow_id_ranges = compress_ranges(std::move(ids_per_comp[c]));
    e.flow_second_ranges = compress_ranges(std::move(seconds));
    man.entries.push_back(std::move(e));
  }
  return out;
}

ManifestWindows manifest_windows(const Manifest& manifest, int64_t window_s) {
  if (window_s <= 0) throw config_error("window length must be positive");
  ManifestWindows out;
  out.per_entry.resize(manifest.entries.size());
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    for (const auto& [lo, hi] : manifest.entries[i].flow_second_ranges) {
      for (int64_t w = align_window(lo, window_s); w <= hi; w += window_s) {
        out.per_entry[i].insert(w);
      }
    }
    if (manifest.entries[i].hidden) {
      out.hidden.insert(out.per_entry[i].begin(), out.per_entry[i].end());
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json mix_to_json(const std::map<int, double>& mix) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [service, frac] : mix) {
    j[service == kUnnamedService ? std::string("other") : std::to_string(service)] = frac;
  }
  return j;
}

std::map<int, double> mix_from_json(const nlohmann::json& j) {
  std::map<int, double> mix;
  for (const auto& [key, value] : j.items()) {
    int service = kUnnamedService;
    if (key != "other") {
      size_t pos = 0;
      service = std::stoi(key, &pos);
      if (pos != key.size() || service < 0 || service > 65535) {
        throw config_error("protocol mix key must be a port or \"other\": '" + key + "'");
      }
    }
    mix[service] = value.get<double>();
  }
  return mix;
}

}  // namespace

std::string ScenarioConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["calibration_days"] = calibration_days;
  j["test_days"] = test_days;
  j["base_rate_per_min"] = base_rate_per_min;
  j["diurnal_amplitude"] = diurnal_amplitude;
  j["protocol_mix"] = mix_to_json(protocol_mix);
  auto& eps = j["attack_episodes"] = nlohmann::ordered_json::array();
  for (const auto& ep : episodes) {
    eps.push_back({{"attack_type", to_token(ep.type)},
                   {"start_min", ep.start_min},
                   {"duration_min", ep.duration_min},
                   {"intensity", ep.intensity},
                   {"labelled", ep.labelled}});
  }
  if (contamination) {
    j["contamination"] = {{"port", contamination->port},
                          {"start_min", contamination->start_min},
                          {"duration_min", contamination->duration_min},
                          {"intensity", contamination->intensity}};
  } else {
    j["contamination"] = nullptr;
  }
  j["telnet_echo"] = telnet_echo;
  return j.dump(2) + "\n";
}

ScenarioConfig ScenarioConfig::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad scenario JSON: ") + e.what());
  }
  ScenarioConfig cfg;
  try {
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.calibration_days = j.at("calibration_days").get<int>();
    cfg.test_days = j.at("test_days").get<int>();
    cfg.base_rate_per_min = j.at("base_rate_per_min").get<double>();
    cfg.diurnal_amplitude = j.value("diurnal_amplitude", 0.5);
    cfg.protocol_mix = mix_from_json(j.at("protocol_mix"));
    cfg.telnet_echo = j.value("telnet_echo", false);
    if (j.contains("attack_episodes")) {
      for (const auto& je : j["attack_episodes"]) {
        AttackEpisode ep;
        ep.type = attack_from_token(je.at("attack_type").get<std::string>());
        ep.start_min = je.at("start_min").get<int64_t>();
        ep.duration_min = je.at("duration_min").get<int64_t>();
        ep.intensity = je.at("intensity").get<double>();
        ep.labelled = je.value("labelled", true);
        cfg.episodes.push_back(ep);
      }
    }
    if (j.contains("contamination") && !j["contamination"].is_null()) {
      const auto& jc = j["contamination"];
      Contamination c;
      c.port = jc.value("port", 6667);
      c.start_min = jc.at("start_min").get<int64_t>();
      c.duration_min = jc.at("duration_min").get<int64_t>();
      c.intensity = jc.at("intensity").get<double>();
      cfg.contamination = c;
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad scenario config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["scenario"] = nlohmann::ordered_json::parse(scenario.to_json());
  j["capture_start"] = format_timestamp(capture_start);
  j["calibration_start"] = format_timestamp(calibration_start);
  j["calibration_end"] = format_timestamp(calibration_end);
  j["test_start"] = format_timestamp(test_start);
  j["test_end"] = format_timestamp(test_end);
  j["total_flows"] = total_flows;
  auto& arr = j["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json je;
    je["kind"] = e.kind;
    je["episode_index"] = e.episode_index;
    je["labelled"] = e.labelled;
    je["hidden"] = e.hidden;
    je["start"] = format_timestamp(e.start);
    je["end"] = format_timestamp(e.end);
    je["flow_count"] = e.flow_count;
    auto& ids = je["flow_id_ranges"] = nlohmann::ordered_json::array();
    for (const auto& [lo, hi] : e.flow_id_ranges) ids.push_back({lo, hi});
    auto& secs = je["flow_second_ranges"] = nlohmann::ordered_json::array();
    for (const auto& [lo, hi] : e.flow_second_ranges) secs.push_back({lo, hi});
    arr.push_back(std::move(je));
  }
  return j.dump(2) + "\n";
}

Manifest Manifest::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad manifest JSON: ") + e.what());
  }
  Manifest m;
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw config_error("unsupported manifest format version");
    }
    m.scenario = ScenarioConfig::from_json(j.at("scenario").dump());
    m.capture_start = parse_timestamp(j.at("capture_start").get<std::string>());
    m.calibration_start = parse_timestamp(j.at("calibration_start").get<std::string>());
    m.calibration_end = parse_timestamp(j.at("calibration_end").get<std::string>());
    m.test_start = parse_timestamp(j.at("test_start").get<std::string>());
    m.test_end = parse_timestamp(j.at("test_end").get<std::string>());
    m.total_flows = j.at("total_flows").get<uint64_t>();
    for (const auto& je : j.at("entries")) {
      ManifestEntry e;
      e.kind = je.at("kind").get<std::string>();
      e.episode_index = je.at("episode_index").get<int>();
      e.labelled = je.at("labelled").get<bool>();
      e.hidden = je.at("hidden").get<bool>();
      e.start = parse_timestamp(je.at("start").get<std::string>());
      e.end = parse_timestamp(je.at("end").get<std::string>());
      e.flow_count = je.at("flow_count").get<uint64_t>();
      for (const auto& r : je.at("flow_id_ranges")) {
        e.flow_id_ranges.push_back({r[0].get<uint64_t>(), r[1].get<uint64_t>()});
      }
      for (const auto& r : je.at("flow_second_ranges")) {
        e.flow_second_ranges.push_back({parse_timestamp(r[0].get<std::string>()),
                                        parse_timestamp(r[1].get<std::string>())});
      }
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad manifest: ") + e.what());
  }
  return m;
}

namespace {

std::map<int, double> default_mix() {
  return {{80, 0.32},  {443, 0.20}, {53, 0.20},   {25, 0.04},          {22, 0.03},
          {23, 0.015}, {6667, 0.003}, {70, 0.002}, {79, 0.002},        {685, 0.002},
          {kIcmpService, 0.03},      {kUnnamedService, 0.136}};
}

}  // namespace

ScenarioConfig scenario_preset(const std::string& name) {
  ScenarioConfig cfg;
  cfg.protocol_mix = default_mix();
  if (name == "default") {
    cfg.seed = 20160301;
    cfg.calibration_days = 7;
    cfg.test_days = 3;
    cfg.base_rate_per_min = 60.0;
    cfg.episodes = {
        {AttackType::dos, 10 * 60, 90, 2.0, true},
        {AttackType::scan11, 16 * 60, 60, 2.0, true},
        {AttackType::scan44, kMinutesPerDay + 11 * 60, 60, 2.0, true},
        {AttackType::nerisbotnet, kMinutesPerDay + 20 * 60, 90, 0.5, true},
        {AttackType::dos, 2 * kMinutesPerDay + 9 * 60, 60, 2.0, true},
        {AttackType::nerisbotnet, 2 * kMinutesPerDay + 14 * 60, 60, 0.5, true},
    };
  } else if (name == "botnet") {
    cfg.seed = 20160601;
    cfg.calibration_days = 3;
    cfg.test_days = 1;
    cfg.base_rate_per_min = 40.0;
    cfg.episodes = {
        {AttackType::nerisbotnet, 9 * 60, 75, 0.5, true},
        {AttackType::nerisbotnet, 19 * 60, 75, 0.5, true},
    };
    cfg.contamination = Contamination{6667, 2 * kMinutesPerDay, kMinutesPerDay, 0.75};
  } else if (name == "direction") {
    cfg.seed = 20160715;
    cfg.calibration_days = 2;
    cfg.test_days = 1;
    cfg.base_rate_per_min = 40.0;
    cfg.telnet_echo = true;
    cfg.episodes = {
        {AttackType::dos, 8 * 60, 45, 0.35, true},
        {AttackType::dos, 13 * 60, 45, 0.35, true},
        {AttackType::dos, 20 * 60, 45, 0.35, true},
    };
  } else if (name == "audit") {
    cfg.seed = 20160804;
    cfg.calibration_days = 2;
    cfg.test_days = 1;
    cfg.base_rate_per_min = 40.0;
    cfg.episodes = {
        {AttackType::dos, 14 * 60, 45, 1.5, true},
        {AttackType::scan11, 21 * 60, 30, 1.5, true},
        {AttackType::other, 9 * 60 + 48, 13, 0.6, false},
    };
  } else if (name == "paper-repro") {
    cfg.seed = 20160301;
    cfg.calibration_days = 7;
    cfg.test_days = 3;
    cfg.base_rate_per_min = 60.0;
    cfg.telnet_echo = true;
    cfg.episodes = {
        {AttackType::dos, 10 * 60, 90, 0.35, true},
        {AttackType::scan11, 16 * 60, 60, 2.0, true},
        {AttackType::scan44, kMinutesPerDay + 11 * 60, 60, 2.0, true},
        {AttackType::nerisbotnet, kMinutesPerDay + 20 * 60, 90, 0.5, true},
        {AttackType::dos, 2 * kMinutesPerDay + 9 * 60, 60, 0.35, true},
        {AttackType::nerisbotnet, 2 * kMinutesPerDay + 14 * 60, 60, 0.5, true},
        {AttackType::other, 2 * kMinutesPerDay + 4 * 60 + 48, 13, 0.6, false},
    };
    cfg.contamination = Contamination{6667, 5 * kMinutesPerDay, 2 * kMinutesPerDay, 0.75};
  } else {
    throw config_error("unknown scenario preset: '" + name + "' (available: default, botnet, " +
                       "direction, audit, paper-repro)");
  }
  return cfg;
}

std::vector<std::string> scenario_preset_names() {
  return {"default", "botnet", "direction", "audit", "paper-repro"};
}

}  // namespace flowlens
