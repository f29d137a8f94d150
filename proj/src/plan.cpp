#include "flowlens/plan.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "flowlens/error.hpp"
#include "flowlens/stats.hpp"
#include "flowlens/textio.hpp"
#include "flowlens/timeutil.hpp"

namespace flowlens {

namespace {

std::pair<int64_t, int64_t> range_from_json(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 2) {
    throw config_error(what + " must be [start, end] timestamps");
  }
  const int64_t a = parse_timestamp(j[0].get<std::string>());
  const int64_t b = parse_timestamp(j[1].get<std::string>());
  if (a >= b) throw config_error(what + ": start must precede end");
  return {a, b};
}

MergePolicy merge_from_json(const nlohmann::json& j) {
  MergePolicy p;
  const std::string pairing = j.value("policy", std::string("low_port_server"));
  if (pairing == "low_port_server") {
    p.pairing = MergePolicy::Pairing::low_port_server;
  } else if (pairing == "first_seen") {
    p.pairing = MergePolicy::Pairing::first_seen;
  } else {
    throw config_error("merge policy must be low_port_server|first_seen");
  }
  if (j.contains("tolerance_s") && !j["tolerance_s"].is_null()) {
    p.time_tolerance = j["tolerance_s"].get<double>();
    if (*p.time_tolerance < 0) throw config_error("merge tolerance must be >= 0");
  }
  return p;
}

}  // namespace

ExperimentPlan ExperimentPlan::from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad plan JSON: ") + e.what());
  }
  ExperimentPlan plan;
  try {
    plan.seed = j.value("seed", 0ull);
    if (j.contains("scenario_preset")) plan.scenario_preset = j["scenario_preset"].get<std::string>();
    if (j.contains("scenario_file")) plan.scenario_file = j["scenario_file"].get<std::string>();
    if (j.contains("flows_file")) plan.flows_file = j["flows_file"].get<std::string>();
    if (j.contains("train_range")) plan.train_range = range_from_json(j["train_range"], "train_range");
    if (j.contains("test_range")) plan.test_range = range_from_json(j["test_range"], "test_range");
    for (const auto& jv : j.at("variants")) {
      VariantSpec v;
      v.id = jv.at("id").get<std::string>();
      if (jv.contains("merge") && !jv["merge"].is_null()) v.merge = merge_from_json(jv["merge"]);
      if (jv.contains("train_range")) v.train_range = range_from_json(jv["train_range"], "train_range");
      if (jv.contains("test_range")) v.test_range = range_from_json(jv["test_range"], "test_range");
      if (jv.contains("exclude_flows")) {
        for (const auto& jp : jv["exclude_flows"]) v.flow_exclude_json.push_back(jp.dump());
      }
      if (jv.contains("drop_features")) {
        v.drop = jv["drop_features"].get<std::vector<std::string>>();
      }
      if (jv.contains("exclude_observations")) {
        for (const auto& t : jv["exclude_observations"]) {
          v.exclude_observations.push_back(parse_timestamp(t.get<std::string>()));
        }
      }
      if (jv.contains("union")) {
        const auto& ju = jv["union"];
        UnionSpec u;
        const auto& of = ju.at("of");
        if (!of.is_array() || of.size() != 2) throw config_error("union.of must name 2 variants");
        u.of_a = of[0].get<std::string>();
        u.of_b = of[1].get<std::string>();
        if (ju.contains("prefixes")) {
          u.prefix_a = ju["prefixes"][0].get<std::string>();
          u.prefix_b = ju["prefixes"][1].get<std::string>();
        }
        v.union_of = u;
      }
      if (jv.contains("feature_config")) {
        v.feature_config_file = jv["feature_config"].get<std::string>();
      }
      plan.variants.push_back(std::move(v));
    }
    for (const auto& jd : j.at("detectors")) {
      DetectorSpec d;
      d.name = jd.at("name").get<std::string>();
      d.tau = jd.value("tau", 0.95);
      d.fixed_components = jd.value("components", 0ull);
      d.limit_percentile = jd.value("limit_percentile", 99.0);
      d.ocsvm.nu = jd.value("nu", 0.02);
      d.ocsvm.gamma = jd.value("gamma", 0.0);
      d.ocsvm.tol = jd.value("tol", 1e-4);
      d.ocsvm.max_iter = jd.value("max_iter", 0ull);
      d.ocsvm.subsample_cap = jd.value("subsample_cap", 5000ull);
      plan.detectors.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

void ExperimentPlan::validate() const {
  if (variants.empty()) throw config_error("plan has no variants");
  if (detectors.empty()) throw config_error("plan has no detectors");
  std::map<std::string, size_t> seen;
  for (size_t i = 0; i < variants.size(); ++i) {
    const auto& v = variants[i];
    if (v.id.empty()) throw config_error("variant with empty id");
    if (!seen.emplace(v.id, i).second) throw config_error("duplicate variant id: '" + v.id + "'");
    if (v.union_of) {
      for (const auto& ref : {v.union_of->of_a, v.union_of->of_b}) {
        auto it = seen.find(ref);
        if (it == seen.end() || it->second == i) {
          throw config_error("variant '" + v.id + "' unions unknown or later variant '" + ref + "'");
        }
      }
    }
  }
  int sources = 0;
  sources += scenario_preset ? 1 : 0;
  sources += scenario_file ? 1 : 0;
  sources += flows_file ? 1 : 0;
  if (sources != 1) {
    throw config_error("plan needs exactly one of scenario_preset, scenario_file, flows_file");
  }
  for (const auto& d : detectors) {
    if (d.name != "msnm" && d.name != "ocsvm") {
      throw config_error("unknown detector: '" + d.name + "' (available: msnm, ocsvm)");
    }
  }
}

ExperimentPlan read_plan(const std::string& path) {
  return ExperimentPlan::from_json(read_text_file(path));
}

namespace {

namespace fs = std::filesystem;

std::string resolve(const std::string& base_dir, const std::string& path) {
  const fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_dir) / p).string();
}

struct VariantData {
  ObservationMatrix train;
  ObservationMatrix test;
  bool ok = false;
};

DetectorModel fit_detector(const DetectorSpec& spec, const ObservationMatrix& train) {
  if (spec.name == "msnm") {
    const ComponentRule rule = spec.fixed_components > 0
                                   ? ComponentRule::fixed_components(spec.fixed_components)
                                   : ComponentRule::variance(spec.tau);
    return {fit_msnm(train, rule, spec.limit_percentile)};
  }
  return {fit_ocsvm(train, spec.ocsvm)};
}

}  // namespace

RunReport run_plan(const ExperimentPlan& plan, const std::string& base_dir,
                   const std::string& out_dir, size_t workers) {
  RunReport report;
  if (fs::exists(out_dir)) {
    throw io_error("output directory already exists: " + out_dir);
  }
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_error("cannot create output directory: " + out_dir);

  // Flow source, shared by every variant.
  std::vector<FlowRecord> base_flows;
  std::optional<Manifest> manifest;
  std::pair<int64_t, int64_t> full_range;
  if (plan.flows_file) {
    base_flows = parse_flow_csv_file(resolve(base_dir, *plan.flows_file), false).flows;
    if (base_flows.empty()) throw config_error("flow source contains no records");
    full_range = {align_window(base_flows.front().start_time, 60),
                  base_flows.back().start_time + 1};
  } else {
    ScenarioConfig cfg = plan.scenario_preset
                             ? scenario_preset(*plan.scenario_preset)
                             : ScenarioConfig::from_json(
                                   read_text_file(resolve(base_dir, *plan.scenario_file)));
    if (plan.seed != 0) cfg.seed = plan.seed;
    GeneratedScenario gen = generate(cfg);
    base_flows = std::move(gen.flows);
    manifest = std::move(gen.manifest);
    full_range = {manifest->calibration_start, manifest->test_end};
    write_flow_csv(base_flows, (fs::path(out_dir) / "flows.csv").string());
    write_text_file((fs::path(out_dir) / "manifest.json").string(), manifest->to_json());
  }

  const auto default_train = plan.train_range
                                 ? *plan.train_range
                                 : (manifest ? std::make_pair(manifest->calibration_start,
                                                              manifest->calibration_end)
                                             : full_range);
  const auto default_test =
      plan.test_range
          ? *plan.test_range
          : (manifest ? std::make_pair(manifest->test_start, manifest->test_end) : full_range);

  std::map<std::string, ObservationMatrix> full_matrices;  // variant id -> full-span matrix
  std::map<std::string, VariantData> prepared;

  for (const auto& v : plan.variants) {
    try {
      ObservationMatrix full;
      if (v.union_of) {
        const auto a = full_matrices.find(v.union_of->of_a);
        const auto b = full_matrices.find(v.union_of->of_b);
        if (a == full_matrices.end() || b == full_matrices.end()) {
          throw config_error("union references a variant that failed to build");
        }
        full = union_features(a->second, b->second, v.union_of->prefix_a, v.union_of->prefix_b);
      } else {
        std::vector<FlowRecord> flows = base_flows;
        for (const auto& pj : v.flow_exclude_json) {
          flows = exclude_flows(flows, FlowPredicate::from_json(pj)).flows;
        }
        if (v.merge) flows = merge_bidirectional(flows, *v.merge);
        FeatureConfig fc = v.feature_config_file
                               ? FeatureConfig::from_json(
                                     read_text_file(resolve(base_dir, *v.feature_config_file)))
                               : default_feature_config();
        full = featurize(flows, fc, full_range);
      }
      if (!v.drop.empty()) full = drop_features(full, v.drop);
      full_matrices.emplace(v.id, full);

      VariantData data;
      const auto train_range = v.train_range ? *v.train_range : default_train;
      const auto test_range = v.test_range ? *v.test_range : default_test;
      data.train = select_time_range(full, train_range.first, train_range.second);
      if (!v.exclude_observations.empty()) {
        data.train = exclude_observations(data.train, v.exclude_observations).matrix;
      }
      data.test = select_time_range(full, test_range.first, test_range.second);
      data.ok = true;
      write_matrix_csv(data.train, (fs::path(out_dir) / (v.id + "_train.csv")).string());
      write_matrix_csv(data.test, (fs::path(out_dir) / (v.id + "_test.csv")).string());
      prepared.emplace(v.id, std::move(data));
    } catch (const error& e) {
      report.ok = false;
      report.variant_errors.push_back("variant '" + v.id + "': " + e.what());
    }
  }

  // Independent cells; results land in fixed (variant, detector) order.
  struct Cell {
    const VariantSpec* variant;
    const DetectorSpec* detector;
    const VariantData* data;
  };
  std::vector<Cell> cells;
  for (const auto& v : plan.variants) {
    const auto it = prepared.find(v.id);
    if (it == prepared.end() || !it->second.ok) continue;
    for (const auto& d : plan.detectors) cells.push_back({&v, &d, &it->second});
  }
  report.cells.resize(cells.size());

  auto run_cell = [&](size_t idx) {
    const Cell& cell = cells[idx];
    CellResult& res = report.cells[idx];
    res.variant = cell.variant->id;
    res.detector = cell.detector->name;
    try {
      const std::string stem =
          (fs::path(out_dir) / (cell.variant->id + "_" + cell.detector->name)).string();
      const DetectorModel model = fit_detector(*cell.detector, cell.data->train);
      write_model(model, stem + "_model.json");
      const ScoreSet scores = score_with_model(model, cell.data->test);
      write_scores_csv(scores, stem + "_scores.csv");

      std::vector<bool> positive;
      positive.reserve(cell.data->test.rows());
      for (const auto& l : cell.data->test.labels) positive.push_back(l.anomalous());
      const RocCurve roc = roc_auc(scores.score, positive);
      write_roc_csv(roc, stem + "_roc.csv");
      res.auc_all = roc.auc;
      std::vector<AucRow> rows;
      rows.push_back({cell.variant->id, cell.detector->name, "all", roc.auc});
      for (const auto& [type, auc] : auc_per_attack(scores.score, cell.data->test.labels)) {
        rows.push_back({cell.variant->id, cell.detector->name, to_token(type), auc});
        res.auc_per_attack.push_back({type, auc});
      }
      write_auc_csv(rows, stem + "_auc.csv");
      res.ok = true;
    } catch (const error& e) {
      res.ok = false;
      res.error = e.what();
    }
  };

  if (workers <= 1 || cells.size() <= 1) {
    for (size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    const size_t n_threads = std::min(workers, cells.size());
    for (size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        while (true) {
          const size_t i = next.fetch_add(1);
          if (i >= cells.size()) break;
          run_cell(i);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<AucRow> summary;
  for (const auto& res : report.cells) {
    if (!res.ok) {
      report.ok = false;
      continue;
    }
    summary.push_back({res.variant, res.detector, "all", res.auc_all});
    for (const auto& [type, auc] : res.auc_per_attack) {
      summary.push_back({res.variant, res.detector, to_token(type), auc});
    }
  }
  write_auc_csv(summary, (fs::path(out_dir) / "auc_summary.csv").string());
  return report;
}

}  // namespace flowlens
