#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "emoflow/dataset.hpp"
#include "emoflow/error.hpp"
#include "emoflow/metrics_core.hpp"
#include "emoflow/prediction_io.hpp"

namespace emoflow {

/// Builds the confusion matrix of predictions against gold. The id sets must
/// match exactly: a prediction without gold is a caller bug, and a gold
/// instance without a prediction would silently skew scores if tolerated.
inline ConfusionMatrix confusion(const Dataset& gold, const PredictionFile& pred) {
  std::unordered_map<std::string_view, EmotionLabel> gold_by_id;
  gold_by_id.reserve(gold.size());
  for (const Instance& inst : gold.instances) {
    if (!inst.gold) {
      raise(ErrorCode::BadRow, "instance " + inst.id + " has no gold label");
    }
    gold_by_id.emplace(inst.id, *inst.gold);
  }
  if (pred.size() != gold.size()) {
    raise(ErrorCode::IdMismatch,
          "prediction count " + std::to_string(pred.size()) +
              " != gold count " + std::to_string(gold.size()));
  }
  ConfusionMatrix cm;
  for (const Prediction& p : pred.predictions) {
    const auto it = gold_by_id.find(p.instance_id);
    if (it == gold_by_id.end()) {
      raise(ErrorCode::IdMismatch,
            "prediction for unknown instance \"" + p.instance_id + "\"");
    }
    cm.record(it->second, p.label);
  }
  return cm;
}

inline MetricsReport evaluate(const Dataset& gold, const PredictionFile& pred) {
  return metrics_from_confusion(confusion(gold, pred));
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  nlohmann::json per_label;
  for (EmotionLabel label : kAllLabels) {
    const LabelMetrics& m = r.for_label(label);
    per_label[std::string(canonical_text(label))] = {
        {"precision", m.precision},
        {"recall", m.recall},
        {"f1", m.f1},
        {"support", m.support},
    };
  }
  return nlohmann::json{
      {"per_label", per_label},
      {"macro", {{"precision", r.macro_precision},
                 {"recall", r.macro_recall},
                 {"f1", r.macro_f1}}},
      {"accuracy", r.accuracy},
      {"evaluated", r.evaluated},
  };
}

namespace detail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace detail

/// Aligned per-label table plus the macro row, the shape scores get reported
/// in everywhere downstream.
inline std::string metrics_to_text(const MetricsReport& r) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "Label" << std::right << std::setw(10)
      << "F1" << std::setw(12) << "Precision" << std::setw(10) << "Recall"
      << std::setw(10) << "Support" << '\n';
  for (EmotionLabel label : kAllLabels) {
    const LabelMetrics& m = r.for_label(label);
    out << std::left << std::setw(10) << canonical_text(label) << std::right
        << std::setw(10) << detail::fixed4(m.f1) << std::setw(12)
        << detail::fixed4(m.precision) << std::setw(10)
        << detail::fixed4(m.recall) << std::setw(10) << m.support << '\n';
  }
  out << std::left << std::setw(10) << "macro" << std::right << std::setw(10)
      << detail::fixed4(r.macro_f1) << std::setw(12)
      << detail::fixed4(r.macro_precision) << std::setw(10)
      << detail::fixed4(r.macro_recall) << std::setw(10) << r.evaluated << '\n';
  out << "accuracy " << detail::fixed4(r.accuracy) << '\n';
  return out.str();
}

/// Side-by-side run comparison, best macro-F1 first; the best value in each
/// metric column is starred.
inline std::string comparison_table(
    std::vector<std::pair<std::string, MetricsReport>> runs) {
  if (runs.empty()) raise(ErrorCode::OutOfRange, "no reports to compare");
  std::stable_sort(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
    return a.second.macro_f1 > b.second.macro_f1;
  });

  double best_f1 = 0, best_p = 0, best_r = 0, best_acc = 0;
  for (const auto& [name, r] : runs) {
    best_f1 = std::max(best_f1, r.macro_f1);
    best_p = std::max(best_p, r.macro_precision);
    best_r = std::max(best_r, r.macro_recall);
    best_acc = std::max(best_acc, r.accuracy);
  }

  std::size_t name_width = 5;
  for (const auto& [name, r] : runs) name_width = std::max(name_width, name.size());

  const auto cell = [](double v, double best) {
    return detail::fixed4(v) + (v == best ? "*" : " ");
  };

  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width) + 2) << "Model"
      << std::right << std::setw(10) << "F1" << std::setw(12) << "Precision"
      << std::setw(10) << "Recall" << std::setw(10) << "Accuracy" << '\n';
  for (const auto& [name, r] : runs) {
    out << std::left << std::setw(static_cast<int>(name_width) + 2) << name
        << std::right << std::setw(10) << cell(r.macro_f1, best_f1)
        << std::setw(12) << cell(r.macro_precision, best_p) << std::setw(10)
        << cell(r.macro_recall, best_r) << std::setw(10)
        << cell(r.accuracy, best_acc) << '\n';
  }
  return out.str();
}

inline void write_confusion_tsv(const ConfusionMatrix& cm,
                                const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoFailure, "cannot write confusion matrix: " + path);
  out << "gold\\pred";
  for (EmotionLabel p : kAllLabels) out << '\t' << canonical_text(p);
  out << '\n';
  for (EmotionLabel g : kAllLabels) {
    out << canonical_text(g);
    for (EmotionLabel p : kAllLabels) out << '\t' << cm.at(g, p);
    out << '\n';
  }
}

}  // namespace emoflow
