#include "flowlens.h"

#include <cstring>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "flowlens/audit.hpp"
#include "flowlens/diagnosis.hpp"
#include "flowlens/error.hpp"
#include "flowlens/faac.hpp"
#include "flowlens/flow.hpp"
#include "flowlens/model.hpp"
#include "flowlens/plan.hpp"
#include "flowlens/stats.hpp"
#include "flowlens/synth.hpp"
#include "flowlens/textio.hpp"
#include "flowlens/timeutil.hpp"

using namespace flowlens;

extern "C" {

struct fl_flows {
  std::vector<FlowRecord> rep;
};

struct fl_matrix {
  ObservationMatrix rep;
};

struct fl_model {
  DetectorModel rep;
};

struct fl_scores {
  ScoreSet rep;
};

}  // extern "C"

namespace {

thread_local std::string g_last_error;

fl_status fail(fl_status code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <typename Fn>
fl_status guarded(Fn&& fn) {
  try {
    fn();
    return FL_OK;
  } catch (const config_error& e) {
    return fail(FL_ERROR_CONFIG, e.what());
  } catch (const io_error& e) {
    return fail(FL_ERROR_IO, e.what());
  } catch (const numeric_error& e) {
    return fail(FL_ERROR_NUMERIC, e.what());
  } catch (const std::exception& e) {
    return fail(FL_ERROR_NUMERIC, e.what());
  }
}

fl_status require(const void* p, const char* what) {
  if (p) return FL_OK;
  return fail(FL_ERROR_CONFIG, std::string("null ") + what);
}

std::optional<std::pair<int64_t, int64_t>> make_range(const char* start, const char* end) {
  if (!start && !end) return std::nullopt;
  if (!start || !end) throw config_error("range needs both start and end");
  const int64_t a = parse_timestamp(start);
  const int64_t b = parse_timestamp(end);
  if (a >= b) throw config_error("range start must precede end");
  return std::make_pair(a, b);
}

ScenarioConfig scenario_from_arg(const char* scenario) {
  const std::string s = scenario;
  if (!s.empty() && s.front() == '{') return ScenarioConfig::from_json(s);
  return scenario_preset(s);
}

std::vector<size_t> select_rows(const ObservationMatrix& m, const char* selection_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(selection_json);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad selection JSON: ") + e.what());
  }
  std::vector<size_t> rows;
  if (j.contains("windows")) {
    if (j["windows"].get<std::string>() != "anomalous") {
      throw config_error("selection \"windows\" must be \"anomalous\"");
    }
    for (size_t r = 0; r < m.rows(); ++r) {
      if (m.labels[r].anomalous()) rows.push_back(r);
    }
  } else if (j.contains("attack")) {
    const AttackType type = attack_from_token(j["attack"].get<std::string>());
    for (size_t r = 0; r < m.rows(); ++r) {
      if (m.labels[r].attacks.count(type)) rows.push_back(r);
    }
  } else if (j.contains("range")) {
    const auto& jr = j["range"];
    if (!jr.is_array() || jr.size() != 2) throw config_error("selection range must be [start,end]");
    const int64_t a = parse_timestamp(jr[0].get<std::string>());
    const int64_t b = parse_timestamp(jr[1].get<std::string>());
    for (size_t r = 0; r < m.rows(); ++r) {
      if (m.window_starts[r] >= a && m.window_starts[r] < b) rows.push_back(r);
    }
  } else if (j.contains("timestamps")) {
    for (const auto& t : j["timestamps"]) {
      const int64_t ts = parse_timestamp(t.get<std::string>());
      bool found = false;
      for (size_t r = 0; r < m.rows(); ++r) {
        if (m.window_starts[r] == ts) {
          rows.push_back(r);
          found = true;
          break;
        }
      }
      if (!found) {
        throw config_error("selection timestamp " + format_timestamp(ts) + " not in matrix");
      }
    }
  } else {
    throw config_error("selection needs one of: windows, attack, range, timestamps");
  }
  if (rows.empty()) throw config_error("selection matches no windows");
  return rows;
}

void diagnose_impl(const fl_matrix* matrix, const char* selection_json,
                   const AutoscaleParams& reference, const std::string& reference_id,
                   const char* bars_csv_path, const char* report_json_path) {
  const auto rows = select_rows(matrix->rep, selection_json);
  const DiagnosisReport rep = u_squared(matrix->rep, rows, reference, reference_id);
  export_bars(rep, bars_csv_path);
  if (report_json_path) {
    write_text_file(report_json_path, report_to_json(rep, true));
  }
}

}  // namespace

extern "C" {

const char* fl_version(void) { return "0.1.0"; }

const char* fl_last_error(void) { return g_last_error.c_str(); }

void fl_flows_free(fl_flows* flows) { delete flows; }
void fl_matrix_free(fl_matrix* matrix) { delete matrix; }
void fl_model_free(fl_model* model) { delete model; }
void fl_scores_free(fl_scores* scores) { delete scores; }

fl_status fl_synth(const char* scenario, uint64_t seed, const char* flows_csv_path,
                   const char* manifest_json_path) {
  if (const auto s = require(scenario, "scenario")) return s;
  if (const auto s = require(flows_csv_path, "flows path")) return s;
  if (const auto s = require(manifest_json_path, "manifest path")) return s;
  return guarded([&] {
    ScenarioConfig cfg = scenario_from_arg(scenario);
    if (seed != 0) cfg.seed = seed;
    const GeneratedScenario gen = generate(cfg);
    write_flow_csv(gen.flows, flows_csv_path);
    write_text_file(manifest_json_path, gen.manifest.to_json());
  });
}

fl_status fl_flows_read(const char* path, int strict, fl_flows** out, uint64_t* skipped_lines) {
  if (const auto s = require(path, "path")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] {
    ParseResult res = parse_flow_csv_file(path, strict != 0);
    if (skipped_lines) *skipped_lines = res.skipped_lines;
    *out = new fl_flows{std::move(res.flows)};
  });
}

fl_status fl_flows_write(const fl_flows* flows, const char* path) {
  if (const auto s = require(flows, "flows")) return s;
  if (const auto s = require(path, "path")) return s;
  return guarded([&] { write_flow_csv(flows->rep, path); });
}

size_t fl_flows_count(const fl_flows* flows) { return flows ? flows->rep.size() : 0; }

fl_status fl_flows_merge(const fl_flows* flows, const char* pairing, double tolerance_s,
                         fl_flows** out) {
  if (const auto s = require(flows, "flows")) return s;
  if (const auto s = require(pairing, "pairing")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] {
    MergePolicy policy;
    const std::string p = pairing;
    if (p == "low_port_server") {
      policy.pairing = MergePolicy::Pairing::low_port_server;
    } else if (p == "first_seen") {
      policy.pairing = MergePolicy::Pairing::first_seen;
    } else {
      throw config_error("pairing must be low_port_server|first_seen");
    }
    if (tolerance_s >= 0) policy.time_tolerance = tolerance_s;
    *out = new fl_flows{merge_bidirectional(flows->rep, policy)};
  });
}

fl_status fl_flows_exclude(const fl_flows* flows, const char* predicate_json, fl_flows** out,
                           uint64_t* removed) {
  if (const auto s = require(flows, "flows")) return s;
  if (const auto s = require(predicate_json, "predicate")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] {
    ExcludeResult res = exclude_flows(flows->rep, FlowPredicate::from_json(predicate_json));
    if (removed) *removed = res.removed;
    *out = new fl_flows{std::move(res.flows)};
  });
}

fl_status fl_featurize(const fl_flows* flows, const char* feature_config_json,
                       const char* range_start, const char* range_end, fl_matrix** out) {
  if (const auto s = require(flows, "flows")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] {
    const FeatureConfig cfg = feature_config_json ? FeatureConfig::from_json(feature_config_json)
                                                  : default_feature_config();
    *out = new fl_matrix{featurize(flows->rep, cfg, make_range(range_start, range_end))};
  });
}

fl_status fl_default_feature_config(char* buffer, size_t buffer_size, size_t* needed) {
  if (const auto s = require(buffer, "buffer")) return s;
  return guarded([&] {
    const std::string text = default_feature_config().to_json();
    if (needed) *needed = text.size() + 1;
    if (text.size() + 1 > buffer_size) throw config_error("buffer too small for feature config");
    std::memcpy(buffer, text.c_str(), text.size() + 1);
  });
}

fl_status fl_matrix_read(const char* path, fl_matrix** out) {
  if (const auto s = require(path, "path")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] { *out = new fl_matrix{read_matrix_csv(path)}; });
}

fl_status fl_matrix_write(const fl_matrix* matrix, const char* path) {
  if (const auto s = require(matrix, "matrix")) return s;
  if (const auto s = require(path, "path")) return s;
  return guarded([&] { write_matrix_csv(matrix->rep, path); });
}

size_t fl_matrix_rows(const fl_matrix* matrix) { return matrix ? matrix->rep.rows() : 0; }
size_t fl_matrix_cols(const fl_matrix* matrix) { return matrix ? matrix->rep.cols() : 0; }

fl_status fl_matrix_select_range(const fl_matrix* matrix, const char* start, const char* end,
                                 fl_matrix** out) {
  if (const auto s = require(matrix, "matrix")) return s;
  if (const auto s = require(start, "start")) return s;
  if (const auto s = require(end, "end")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] {
    *out = new fl_matrix{select_time_range(matrix->rep, parse_timestamp(start), parse_timestamp(end))};
  });
}

fl_status fl_matrix_drop_features(const fl_matrix* matrix, const char* names, fl_matrix** out) {
  if (const auto s = require(matrix, "matrix")) return s;
  if (const auto s = require(names, "names")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] {
    *out = new fl_matrix{drop_features(matrix->rep, split_list(names, ','))};
  });
}

fl_status fl_matrix_union(const fl_matrix* a, const fl_matrix* b, const char* prefix_a,
                          const char* prefix_b, fl_matrix** out) {
  if (const auto s = require(a, "matrix a")) return s;
  if (const auto s = require(b, "matrix b")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] {
    *out = new fl_matrix{union_features(a->rep, b->rep, prefix_a ? prefix_a : "",
                                        prefix_b ? prefix_b : "")};
  });
}

fl_status fl_matrix_exclude_windows(const fl_matrix* matrix, const char* timestamps,
                                    fl_matrix** out, uint64_t* not_found) {
  if (const auto s = require(matrix, "matrix")) return s;
  if (const auto s = require(timestamps, "timestamps")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] {
    std::vector<int64_t> stamps;
    for (const auto& tok : split_list(timestamps, ',')) stamps.push_back(parse_timestamp(tok));
    ExcludeObservationsResult res = exclude_observations(matrix->rep, stamps);
    if (not_found) *not_found = res.not_found.size();
    *out = new fl_matrix{std::move(res.matrix)};
  });
}

fl_status fl_fit(const fl_matrix* calibration, const char* detector, const char* params_json,
                 fl_model** out) {
  if (const auto s = require(calibration, "calibration matrix")) return s;
  if (const auto s = require(detector, "detector")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] {
    nlohmann::json params = nlohmann::json::object();
    if (params_json) {
      try {
        params = nlohmann::json::parse(params_json);
      } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("bad detector params JSON: ") + e.what());
      }
    }
    const std::string name = detector;
    if (name == "msnm") {
      const size_t fixed = params.value("components", 0ull);
      const ComponentRule rule = fixed > 0 ? ComponentRule::fixed_components(fixed)
                                           : ComponentRule::variance(params.value("tau", 0.95));
      *out = new fl_model{{fit_msnm(calibration->rep, rule, params.value("limit_percentile", 99.0))}};
    } else if (name == "ocsvm") {
      OcsvmParams p;
      p.nu = params.value("nu", 0.02);
      p.gamma = params.value("gamma", 0.0);
      p.tol = params.value("tol", 1e-4);
      p.max_iter = params.value("max_iter", 0ull);
      p.subsample_cap = params.value("subsample_cap", 5000ull);
      *out = new fl_model{{fit_ocsvm(calibration->rep, p)}};
    } else {
      throw config_error("unknown detector: '" + name + "' (available: msnm, ocsvm)");
    }
  });
}

fl_status fl_model_read(const char* path, fl_model** out) {
  if (const auto s = require(path, "path")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] { *out = new fl_model{read_model(path)}; });
}

fl_status fl_model_write(const fl_model* model, const char* path) {
  if (const auto s = require(model, "model")) return s;
  if (const auto s = require(path, "path")) return s;
  return guarded([&] { write_model(model->rep, path); });
}

const char* fl_model_detector(const fl_model* model) {
  return model ? model->rep.detector_name() : "";
}

fl_status fl_score(const fl_model* model, const fl_matrix* matrix, fl_scores** out) {
  if (const auto s = require(model, "model")) return s;
  if (const auto s = require(matrix, "matrix")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] { *out = new fl_scores{score_with_model(model->rep, matrix->rep)}; });
}

fl_status fl_scores_read(const char* path, fl_scores** out) {
  if (const auto s = require(path, "path")) return s;
  if (const auto s = require(out, "output handle")) return s;
  return guarded([&] { *out = new fl_scores{read_scores_csv(path)}; });
}

fl_status fl_scores_write(const fl_scores* scores, const char* path) {
  if (const auto s = require(scores, "scores")) return s;
  if (const auto s = require(path, "path")) return s;
  return guarded([&] { write_scores_csv(scores->rep, path); });
}

fl_status fl_evaluate(const fl_scores* scores, const fl_matrix* test, const char* variant,
                      const char* detector, const char* roc_csv_path, const char* auc_csv_path) {
  if (const auto s = require(scores, "scores")) return s;
  if (const auto s = require(test, "test matrix")) return s;
  if (const auto s = require(roc_csv_path, "roc path")) return s;
  if (const auto s = require(auc_csv_path, "auc path")) return s;
  return guarded([&] {
    check_window_alignment(scores->rep, test->rep);
    std::vector<bool> positive;
    positive.reserve(test->rep.rows());
    for (const auto& l : test->rep.labels) positive.push_back(l.anomalous());
    const RocCurve roc = roc_auc(scores->rep.score, positive);
    write_roc_csv(roc, roc_csv_path);
    const std::string var = variant ? variant : "data";
    const std::string det = detector ? detector : "detector";
    std::vector<AucRow> rows;
    rows.push_back({var, det, "all", roc.auc});
    for (const auto& [type, auc] : auc_per_attack(scores->rep.score, test->rep.labels)) {
      rows.push_back({var, det, to_token(type), auc});
    }
    write_auc_csv(rows, auc_csv_path);
  });
}

fl_status fl_export_timeseries(const fl_matrix* matrix, const char* names,
                               const char* range_start, const char* range_end, const char* path) {
  if (const auto s = require(matrix, "matrix")) return s;
  if (const auto s = require(names, "names")) return s;
  if (const auto s = require(path, "path")) return s;
  return guarded([&] {
    export_timeseries(matrix->rep, split_list(names, ','), make_range(range_start, range_end),
                      path);
  });
}

fl_status fl_boxplot(const fl_matrix* matrix, const char* names, const char* path) {
  if (const auto s = require(matrix, "matrix")) return s;
  if (const auto s = require(names, "names")) return s;
  if (const auto s = require(path, "path")) return s;
  return guarded([&] {
    std::string buf =
        "feature,group,n,q1,median,q3,whisker_low,whisker_high,outliers,t_stat,p_value\n";
    for (const auto& name : split_list(names, ',')) {
      const size_t col = matrix->rep.feature_index(name);
      std::vector<double> normal, anomalous;
      for (size_t r = 0; r < matrix->rep.rows(); ++r) {
        (matrix->rep.labels[r].anomalous() ? anomalous : normal).push_back(matrix->rep.at(r, col));
      }
      TTestResult tt;
      bool tested = false;
      if (normal.size() >= 2 && anomalous.size() >= 2) {
        tt = welch_ttest(anomalous, normal, Alternative::greater);
        tested = true;
      }
      for (int group = 0; group < 2; ++group) {
        const auto& vals = group == 0 ? normal : anomalous;
        if (vals.empty()) continue;
        const BoxplotStats bs = boxplot_stats(vals);
        buf += name;
        buf += group == 0 ? ",negative," : ",positive,";
        buf += std::to_string(vals.size());
        for (const double v : {bs.q1, bs.median, bs.q3, bs.whisker_low, bs.whisker_high}) {
          buf += ',';
          buf += format_double(v);
        }
        buf += ',';
        buf += std::to_string(bs.outliers.size());
        if (tested && group == 1) {
          buf += ',';
          buf += format_double(tt.t_stat);
          buf += ',';
          buf += format_double(tt.p_value);
        } else {
          buf += ",,";
        }
        buf += '\n';
      }
    }
    write_text_file(path, buf);
  });
}

fl_status fl_diagnose(const fl_matrix* matrix, const char* selection_json,
                      const fl_matrix* reference, const char* bars_csv_path,
                      const char* report_json_path) {
  if (const auto s = require(matrix, "matrix")) return s;
  if (const auto s = require(selection_json, "selection")) return s;
  if (const auto s = require(reference, "reference matrix")) return s;
  if (const auto s = require(bars_csv_path, "bars path")) return s;
  return guarded([&] {
    const AutoscaleParams ref = fit_autoscale(reference->rep);
    diagnose_impl(matrix, selection_json, ref, "reference-matrix", bars_csv_path,
                  report_json_path);
  });
}

fl_status fl_diagnose_with_model(const fl_matrix* matrix, const char* selection_json,
                                 const fl_model* reference, const char* bars_csv_path,
                                 const char* report_json_path) {
  if (const auto s = require(matrix, "matrix")) return s;
  if (const auto s = require(selection_json, "selection")) return s;
  if (const auto s = require(reference, "reference model")) return s;
  if (const auto s = require(bars_csv_path, "bars path")) return s;
  return guarded([&] {
    diagnose_impl(matrix, selection_json, reference->rep.scaling(),
                  std::string("model:") + reference->rep.detector_name(), bars_csv_path,
                  report_json_path);
  });
}

fl_status fl_audit(const fl_scores* scores, const fl_matrix* test, const fl_matrix* reference,
                   const char* options_json, const char* report_json_path) {
  if (const auto s = require(scores, "scores")) return s;
  if (const auto s = require(test, "test matrix")) return s;
  if (const auto s = require(reference, "reference matrix")) return s;
  if (const auto s = require(report_json_path, "report path")) return s;
  return guarded([&] {
    check_window_alignment(scores->rep, test->rep);
    ThresholdRule rule = ThresholdRule::percentile(99.9);
    size_t max_gap = 1;
    size_t top_k = 5;
    if (options_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(options_json);
      } catch (const nlohmann::json::exception& e) {
        throw config_error(std::string("bad audit options JSON: ") + e.what());
      }
      if (j.contains("percentile") && j.contains("absolute")) {
        throw config_error("audit options: use either percentile or absolute, not both");
      }
      if (j.contains("percentile")) rule = ThresholdRule::percentile(j["percentile"].get<double>());
      if (j.contains("absolute")) rule = ThresholdRule::absolute(j["absolute"].get<double>());
      max_gap = j.value("max_gap", 1ull);
      top_k = j.value("top_k", 5ull);
    }
    const AutoscaleParams ref = fit_autoscale(reference->rep);
    ref.check_alignment(test->rep.feature_names);
    const AuditReport rep = run_audit(scores->rep.score, test->rep, ref, rule, max_gap, top_k);
    write_audit_report(rep, report_json_path);
  });
}

fl_status fl_run_plan(const char* plan_path, const char* out_dir, int workers) {
  if (const auto s = require(plan_path, "plan path")) return s;
  if (const auto s = require(out_dir, "output dir")) return s;
  return guarded([&] {
    const ExperimentPlan plan = read_plan(plan_path);
    const std::string base_dir =
        std::filesystem::path(plan_path).has_parent_path()
            ? std::filesystem::path(plan_path).parent_path().string()
            : std::string(".");
    const RunReport rep = run_plan(plan, base_dir, out_dir, workers < 1 ? 1 : static_cast<size_t>(workers));
    nlohmann::ordered_json j;
    j["ok"] = rep.ok;
    j["variant_errors"] = rep.variant_errors;
    auto& cells = j["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : rep.cells) {
      nlohmann::ordered_json jc;
      jc["variant"] = c.variant;
      jc["detector"] = c.detector;
      jc["ok"] = c.ok;
      if (!c.ok) jc["error"] = c.error;
      cells.push_back(std::move(jc));
    }
    write_text_file((std::filesystem::path(out_dir) / "run_report.json").string(), j.dump(2) + "\n");
    if (!rep.ok) {
      std::string detail = "plan finished with failures";
      for (const auto& e : rep.variant_errors) detail += "; " + e;
      for (const auto& c : rep.cells) {
        if (!c.ok) detail += "; " + c.variant + "/" + c.detector + ": " + c.error;
      }
      throw numeric_error(detail);
    }
  });
}

}  // extern "C"
