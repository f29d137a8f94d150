#include "flowlens/model.hpp"

#include <nlohmann/json.hpp>

#include "flowlens/error.hpp"
#include "flowlens/textio.hpp"
#include "flowlens/timeutil.hpp"

namespace flowlens {

std::string model_to_json(const DetectorModel& model) {
  if (std::holds_alternative<MsnmModel>(model.impl)) {
    return msnm_to_json(std::get<MsnmModel>(model.impl));
  }
  return ocsvm_to_json(std::get<OcsvmModel>(model.impl));
}

DetectorModel model_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad model JSON: ") + e.what());
  }
  const std::string detector = j.value("detector", std::string());
  if (detector == "msnm") return {msnm_from_json(json_text)};
  if (detector == "ocsvm") return {ocsvm_from_json(json_text)};
  throw config_error("model file has unknown detector: '" + detector + "'");
}

void write_model(const DetectorModel& model, const std::string& path) {
  write_text_file(path, model_to_json(model));
}

DetectorModel read_model(const std::string& path) { return model_from_json(read_text_file(path)); }

ScoreSet score_with_model(const DetectorModel& model, const ObservationMatrix& m) {
  ScoreSet out;
  out.window_starts = m.window_starts;
  if (std::holds_alternative<MsnmModel>(model.impl)) {
    const auto scores = score_msnm(std::get<MsnmModel>(model.impl), m);
    out.score.reserve(scores.size());
    out.d_stat.reserve(scores.size());
    out.q_stat.reserve(scores.size());
    for (const auto& s : scores) {
      out.score.push_back(s.score);
      out.d_stat.push_back(s.d_stat);
      out.q_stat.push_back(s.q_stat);
    }
  } else {
    out.score = score_ocsvm(std::get<OcsvmModel>(model.impl), m);
  }
  return out;
}

void write_scores_csv(const ScoreSet& s, const std::string& path) {
  std::string buf;
  const bool dq = s.has_dq();
  buf += dq ? "window_start,d_stat,q_stat,score\n" : "window_start,score\n";
  for (size_t i = 0; i < s.window_starts.size(); ++i) {
    buf += format_timestamp(s.window_starts[i]);
    if (dq) {
      buf += ',';
      buf += format_double(s.d_stat[i]);
      buf += ',';
      buf += format_double(s.q_stat[i]);
    }
    buf += ',';
    buf += format_double(s.score[i]);
    buf += '\n';
  }
  write_text_file(path, buf);
}

ScoreSet read_scores_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  ScoreSet s;
  size_t pos = 0;
  bool dq = false;
  size_t line_no = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line = std::string_view(text).substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line == "window_start,d_stat,q_stat,score") {
        dq = true;
      } else if (line != "window_start,score") {
        throw config_error("bad scores CSV header in " + path);
      }
      continue;
    }
    const auto fields = split_csv_line(line);
    const std::string ctx = path + " line " + std::to_string(line_no);
    if (fields.size() != (dq ? 4u : 2u)) throw config_error(ctx + ": wrong field count");
    s.window_starts.push_back(parse_timestamp(fields[0]));
    if (dq) {
      s.d_stat.push_back(parse_double(fields[1], ctx));
      s.q_stat.push_back(parse_double(fields[2], ctx));
    }
    s.score.push_back(parse_double(fields.back(), ctx));
  }
  return s;
}

void check_window_alignment(const ScoreSet& s, const ObservationMatrix& m) {
  if (s.window_starts.size() != m.rows()) {
    throw config_error("scores cover " + std::to_string(s.window_starts.size()) +
                       " windows but the matrix has " + std::to_string(m.rows()));
  }
  for (size_t i = 0; i < m.rows(); ++i) {
    if (s.window_starts[i] != m.window_starts[i]) {
      throw config_error("scores and matrix disagree at window " +
                         format_timestamp(m.window_starts[i]));
    }
  }
}

}  // namespace flowlens
