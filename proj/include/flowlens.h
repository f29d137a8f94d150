/*
 * flowlens C API: flow-record anomaly detection and data-quality auditing.
 *
 * All functions return fl_status; FL_OK is 0 and the error categories match
 * the CLI exit codes (2 configuration, 3 I/O, 4 numerical). On failure
 * fl_last_error() returns a thread-local message describing what went wrong.
 * Objects are opaque handles created by fl_* constructors and released with
 * the matching fl_*_free; every *out parameter is written only on FL_OK.
 */
#ifndef FLOWLENS_H
#define FLOWLENS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define FLOWLENS_API __declspec(dllexport)
#else
#define FLOWLENS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fl_status {
  FL_OK = 0,
  FL_ERROR_CONFIG = 2,
  FL_ERROR_IO = 3,
  FL_ERROR_NUMERIC = 4
} fl_status;

FLOWLENS_API const char* fl_version(void);
FLOWLENS_API const char* fl_last_error(void);

typedef struct fl_flows fl_flows;    /* a sequence of flow records */
typedef struct fl_matrix fl_matrix;  /* windows x features counter matrix */
typedef struct fl_model fl_model;    /* fitted detector (msnm or ocsvm) */
typedef struct fl_scores fl_scores;  /* per-window anomaly scores */

FLOWLENS_API void fl_flows_free(fl_flows* flows);
FLOWLENS_API void fl_matrix_free(fl_matrix* matrix);
FLOWLENS_API void fl_model_free(fl_model* model);
FLOWLENS_API void fl_scores_free(fl_scores* scores);

/* ---- synthetic scenarios ---- */

/* scenario is either a preset name (default, botnet, direction, audit,
 * paper-repro) or inline scenario JSON. Writes the flow CSV and the
 * ground-truth manifest. seed overrides the configured seed when nonzero. */
FLOWLENS_API fl_status fl_synth(const char* scenario, uint64_t seed, const char* flows_csv_path,
                                const char* manifest_json_path);

/* ---- flows ---- */

FLOWLENS_API fl_status fl_flows_read(const char* path, int strict, fl_flows** out,
                                     uint64_t* skipped_lines /* nullable */);
FLOWLENS_API fl_status fl_flows_write(const fl_flows* flows, const char* path);
FLOWLENS_API size_t fl_flows_count(const fl_flows* flows);

/* pairing: "low_port_server" or "first_seen"; tolerance_s < 0 selects the
 * default rule (earlier flow's duration + 5 s). */
FLOWLENS_API fl_status fl_flows_merge(const fl_flows* flows, const char* pairing,
                                      double tolerance_s, fl_flows** out);

/* predicate_json: conjunctive flow predicate, see the format docs. */
FLOWLENS_API fl_status fl_flows_exclude(const fl_flows* flows, const char* predicate_json,
                                        fl_flows** out, uint64_t* removed /* nullable */);

/* ---- featurization ---- */

/* feature_config_json NULL selects the built-in 34-feature dictionary.
 * range_start/range_end are 14-digit stamps or NULL for the flow span. */
FLOWLENS_API fl_status fl_featurize(const fl_flows* flows, const char* feature_config_json,
                                    const char* range_start, const char* range_end,
                                    fl_matrix** out);
FLOWLENS_API fl_status fl_default_feature_config(char* buffer, size_t buffer_size,
                                                 size_t* needed /* nullable */);

FLOWLENS_API fl_status fl_matrix_read(const char* path, fl_matrix** out);
FLOWLENS_API fl_status fl_matrix_write(const fl_matrix* matrix, const char* path);
FLOWLENS_API size_t fl_matrix_rows(const fl_matrix* matrix);
FLOWLENS_API size_t fl_matrix_cols(const fl_matrix* matrix);

FLOWLENS_API fl_status fl_matrix_select_range(const fl_matrix* matrix, const char* start,
                                              const char* end, fl_matrix** out);
/* names: comma-separated feature names. */
FLOWLENS_API fl_status fl_matrix_drop_features(const fl_matrix* matrix, const char* names,
                                               fl_matrix** out);
FLOWLENS_API fl_status fl_matrix_union(const fl_matrix* a, const fl_matrix* b,
                                       const char* prefix_a, const char* prefix_b,
                                       fl_matrix** out);
/* timestamps: comma-separated 14-digit stamps. Stamps naming no window are
 * reported through not_found but are not an error. */
FLOWLENS_API fl_status fl_matrix_exclude_windows(const fl_matrix* matrix, const char* timestamps,
                                                 fl_matrix** out, uint64_t* not_found);

/* ---- detectors ---- */

/* detector: "msnm" or "ocsvm". params_json NULL keeps the defaults.
 * msnm params: {"tau":0.95,"components":0,"limit_percentile":99}
 * ocsvm params: {"nu":0.02,"gamma":0,"tol":1e-4,"max_iter":0,"subsample_cap":5000} */
FLOWLENS_API fl_status fl_fit(const fl_matrix* calibration, const char* detector,
                              const char* params_json, fl_model** out);
FLOWLENS_API fl_status fl_model_read(const char* path, fl_model** out);
FLOWLENS_API fl_status fl_model_write(const fl_model* model, const char* path);
FLOWLENS_API const char* fl_model_detector(const fl_model* model);

FLOWLENS_API fl_status fl_score(const fl_model* model, const fl_matrix* matrix, fl_scores** out);
FLOWLENS_API fl_status fl_scores_read(const char* path, fl_scores** out);
FLOWLENS_API fl_status fl_scores_write(const fl_scores* scores, const char* path);

/* ---- evaluation ---- */

/* Writes ROC points (threshold,fpr,tpr) and an AUC table
 * (variant,detector,attack,auc) with the pooled "all" row plus one row per
 * attack type present in the labels. */
FLOWLENS_API fl_status fl_evaluate(const fl_scores* scores, const fl_matrix* test,
                                   const char* variant, const char* detector,
                                   const char* roc_csv_path, const char* auc_csv_path);

/* names: comma-separated features; range stamps nullable. */
FLOWLENS_API fl_status fl_export_timeseries(const fl_matrix* matrix, const char* names,
                                            const char* range_start, const char* range_end,
                                            const char* path);

/* Per feature: boxplot five-number summaries for normal vs anomalous windows
 * plus a one-sided t-test (anomalous greater). */
FLOWLENS_API fl_status fl_boxplot(const fl_matrix* matrix, const char* names, const char* path);

/* ---- diagnosis ---- */

/* selection_json picks the diagnosed rows of `matrix`:
 *   {"windows":"anomalous"} | {"attack":"nerisbotnet"}
 *   | {"range":["start","end"]} | {"timestamps":["...", ...]}
 * reference supplies the mean/deviation reference (calibration matrix).
 * Writes the per-feature bar CSV; report_json_path is optional. */
FLOWLENS_API fl_status fl_diagnose(const fl_matrix* matrix, const char* selection_json,
                                   const fl_matrix* reference, const char* bars_csv_path,
                                   const char* report_json_path /* nullable */);
/* Same, but the reference statistics come from a fitted model's scaling. */
FLOWLENS_API fl_status fl_diagnose_with_model(const fl_matrix* matrix, const char* selection_json,
                                              const fl_model* reference, const char* bars_csv_path,
                                              const char* report_json_path /* nullable */);

/* ---- label audit ---- */

/* options_json (all optional): {"percentile":99.9} or {"absolute":<score>},
 * {"max_gap":1,"top_k":5}. Flags high-scoring background windows, groups
 * them into consecutive periods and diagnoses each against the reference. */
FLOWLENS_API fl_status fl_audit(const fl_scores* scores, const fl_matrix* test,
                                const fl_matrix* reference, const char* options_json,
                                const char* report_json_path);

/* ---- experiment plans ---- */

/* Runs every variant x detector cell of the plan into out_dir (which must
 * not exist). Returns FL_ERROR_NUMERIC if any cell failed after the others
 * completed; per-cell errors are recorded in run_report.json. */
FLOWLENS_API fl_status fl_run_plan(const char* plan_path, const char* out_dir, int workers);

#ifdef __cplusplus
}
#endif

#endif /* FLOWLENS_H */
