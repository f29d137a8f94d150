#pragma once

#include <string>
#include <variant>
#include <vector>

#include "flowlens/msnm.hpp"
#include "flowlens/ocsvm.hpp"

namespace flowlens {

// Either detector behind one persistence/scoring surface. Model files are
// JSON with a "detector" discriminator.
struct DetectorModel {
  std::variant<MsnmModel, OcsvmModel> impl;

  const char* detector_name() const {
    return std::holds_alternative<MsnmModel>(impl) ? "msnm" : "ocsvm";
  }
  const AutoscaleParams& scaling() const {
    return std::holds_alternative<MsnmModel>(impl) ? std::get<MsnmModel>(impl).scaling
                                                   : std::get<OcsvmModel>(impl).scaling;
  }
};

std::string model_to_json(const DetectorModel& model);
DetectorModel model_from_json(const std::string& json_text);
void write_model(const DetectorModel& model, const std::string& path);
DetectorModel read_model(const std::string& path);

// Per-window anomaly scores; d/q columns are present for the linear detector.
struct ScoreSet {
  std::vector<int64_t> window_starts;
  std::vector<double> score;
  std::vector<double> d_stat;  // empty unless msnm
  std::vector<double> q_stat;

  bool has_dq() const { return !d_stat.empty(); }
};

ScoreSet score_with_model(const DetectorModel& model, const ObservationMatrix& m);

void write_scores_csv(const ScoreSet& s, const std::string& path);
ScoreSet read_scores_csv(const std::string& path);

// Scores and a matrix must describe the same windows before evaluation.
void check_window_alignment(const ScoreSet& s, const ObservationMatrix& m);

}  // namespace flowlens
