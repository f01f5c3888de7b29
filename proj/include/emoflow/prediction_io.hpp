#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "emoflow/error.hpp"
#include "emoflow/record.hpp"
#include "emoflow/util/strings.hpp"

namespace emoflow {

/// One model's predictions over a dataset, in dataset order when produced by
/// this engine. The model id is not part of the TSV; for files read from disk
/// it defaults to the file stem so external predictions can join ensembles.
struct PredictionFile {
  ModelId model_id;
  std::vector<Prediction> predictions;

  std::size_t size() const { return predictions.size(); }

  const Prediction* find(std::string_view instance_id) const {
    for (const auto& p : predictions) {
      if (p.instance_id == instance_id) return &p;
    }
    return nullptr;
  }
};

/// Serializes to TSV with the full column set (ID, Label, Explanation,
/// Fallback). Always writing all four keeps rewrites byte-identical.
inline void write_predictions(const PredictionFile& pf,
                              const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot write predictions: " + path);
  out << "ID\tLabel\tExplanation\tFallback\n";
  for (const auto& p : pf.predictions) {
    out << p.instance_id << '\t' << canonical_text(p.label) << '\t'
        << util::tsv_escape(p.explanation.value_or("")) << '\t'
        << (p.fallback_applied ? '1' : '0') << '\n';
  }
  if (!out) raise(ErrorCode::IoFailure, "short write: " + path);
}

/// Reads a prediction TSV. Accepts external files that carry only ID and
/// Label columns; Explanation and Fallback are optional. Exact inverse of
/// write_predictions on files this engine wrote.
inline PredictionFile read_predictions(const std::string& path,
                                       std::optional<ModelId> model_id = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoFailure, "cannot open predictions: " + path);

  std::string line;
  if (!std::getline(in, line)) {
    raise(ErrorCode::BadRow, path + ": empty file, expected a header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = util::split(line, '\t');
  int id_col = -1, label_col = -1, expl_col = -1, fb_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "ID") id_col = static_cast<int>(i);
    else if (header[i] == "Label") label_col = static_cast<int>(i);
    else if (header[i] == "Explanation") expl_col = static_cast<int>(i);
    else if (header[i] == "Fallback") fb_col = static_cast<int>(i);
  }
  if (id_col < 0 || label_col < 0) {
    raise(ErrorCode::MissingColumn,
          path + ": prediction files need ID and Label columns");
  }

  PredictionFile pf;
  pf.model_id = model_id.value_or(
      std::filesystem::path(path).stem().string());

  std::unordered_set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const std::vector<std::string> cells = util::split(line, '\t');
    const auto cell = [&](int col) -> std::string {
      return col >= 0 && col < static_cast<int>(cells.size())
                 ? cells[static_cast<std::size_t>(col)]
                 : std::string();
    };

    Prediction p;
    p.instance_id = cell(id_col);
    p.model_id = pf.model_id;
    if (p.instance_id.empty()) {
      raise(ErrorCode::BadRow,
            path + ":" + std::to_string(line_no) + ": empty id");
    }
    if (!seen.insert(p.instance_id).second) {
      raise(ErrorCode::DuplicateId,
            path + ":" + std::to_string(line_no) + ": duplicate id \"" +
                p.instance_id + "\"");
    }
    Result<EmotionLabel> label = parse_label(cell(label_col));
    if (!label.ok()) {
      raise(ErrorCode::BadRow, path + ":" + std::to_string(line_no) + ": " +
                                   label.error().message);
    }
    p.label = label.value();
    if (expl_col >= 0) {
      std::string expl = util::tsv_unescape(cell(expl_col));
      if (!expl.empty()) p.explanation = std::move(expl);
    }
    if (fb_col >= 0) p.fallback_applied = cell(fb_col) == "1";
    if (p.fallback_applied && p.label != EmotionLabel::Neutral) {
      raise(ErrorCode::BadRow,
            path + ":" + std::to_string(line_no) +
                ": fallback flag on a non-Neutral label");
    }
    pf.predictions.push_back(std::move(p));
  }
  return pf;
}

}  // namespace emoflow
